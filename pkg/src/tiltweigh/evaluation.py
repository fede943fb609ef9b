"""Diagnostics over fitted weights: precision/recall at the top-x% weights
(pooled and per class), and consistency-versus-sample-size curves against a
generator's analytic tilt.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace as _dc_replace

import numpy as np

from .classifier import fit_logistic
from .errors import NoGroups, SchemaError
from .numerics import substream_seed
from .synthetic import gen_lda
from .tilt import fit_extra

DEFAULT_FRACTIONS = tuple(np.linspace(0.0125, 0.5, 40))


@dataclass(frozen=True)
class PrCurve:
    """Precision and recall of the top-x% weights against the target groups.

    baseline is the non-informative recall line ceil(x*n)/n; when the source
    contains no sample from the target groups, recall is undefined and
    empty_target_group is set (recall filled with NaN).
    """

    fractions: np.ndarray
    precision: np.ndarray
    recall: np.ndarray
    baseline: np.ndarray
    empty_target_group: bool = False

    def save(self, path):
        with open(str(path), "w", encoding="utf-8", newline="") as fh:
            fh.write("x,precision,recall,baseline\n")
            for x, p, r, b in zip(self.fractions, self.precision, self.recall, self.baseline):
                fh.write(f"{float(x)!r},{float(p)!r},{float(r)!r},{float(b)!r}\n")


def _top_order(weights):
    # descending weight; ties broken by ascending sample index (stable sort)
    return np.argsort(-np.asarray(weights, dtype=np.float64), kind="stable")


def precision_recall(w, groups, target_groups, fractions=DEFAULT_FRACTIONS):
    """Per fraction x: take the ceil(x*n) largest weights as the selected set
    A; precision = |A & target| / |A|, recall = |A & target| / |target|."""
    weights = w.weights if hasattr(w, "weights") else np.asarray(w, dtype=np.float64)
    if groups is None:
        raise NoGroups("precision/recall needs group annotations")
    groups = np.asarray(groups)
    if groups.shape != weights.shape:
        raise SchemaError("groups must align with the weight vector")
    fractions = np.asarray(fractions, dtype=np.float64)
    if np.any(fractions <= 0) or np.any(fractions > 1):
        raise SchemaError("fractions must lie in (0, 1]")
    n = weights.shape[0]
    in_target = np.isin(groups, list(target_groups))
    total_target = int(in_target.sum())
    order = _top_order(weights)
    hits = np.cumsum(in_target[order])
    precision = np.empty_like(fractions)
    recall = np.empty_like(fractions)
    baseline = np.empty_like(fractions)
    for j, x in enumerate(fractions):
        a = math.ceil(x * n)
        precision[j] = hits[a - 1] / a
        recall[j] = hits[a - 1] / total_target if total_target else math.nan
        baseline[j] = a / n
    return PrCurve(fractions, precision, recall, baseline, total_target == 0)


def per_class_pr(w, labels, groups, target_groups, fractions=DEFAULT_FRACTIONS):
    """precision_recall restricted to each label value; dict class -> curve."""
    weights = w.weights if hasattr(w, "weights") else np.asarray(w, dtype=np.float64)
    labels = np.asarray(labels)
    if groups is None:
        raise NoGroups("precision/recall needs group annotations")
    groups = np.asarray(groups)
    out = {}
    for cls in np.unique(labels):
        mask = labels == cls
        out[int(cls)] = precision_recall(
            weights[mask], groups[mask], target_groups, fractions
        )
    return out


@dataclass(frozen=True)
class ConsistencyTable:
    """Estimation error against the generator's analytic tilt, per sample
    size: mean and std over repeats of ||xi_hat - xi*||_2 and of the source-
    averaged absolute weight error, plus the log-log slope of the mean
    parameter error in n."""

    sizes: tuple
    param_err_mean: tuple
    param_err_std: tuple
    weight_err_mean: tuple
    weight_err_std: tuple
    slope: float

    def save(self, path):
        with open(str(path), "w", encoding="utf-8", newline="") as fh:
            fh.write("n,param_err_mean,param_err_std,weight_err_mean,weight_err_std\n")
            for row in zip(
                self.sizes,
                self.param_err_mean,
                self.param_err_std,
                self.weight_err_mean,
                self.weight_err_std,
            ):
                fh.write(",".join(repr(float(v)) for v in row) + "\n")


def consistency_curve(
    spec,
    sizes,
    repeats,
    cfg,
    seed=0,
    clf_strength=1e-3,
    clf_tol=1e-8,
    clf_max_iter=500,
):
    """Fit the tilt at increasing sample sizes and compare to the truth.

    For each n in sizes and each repeat, draws n source and n target points
    from the generator spec, fits the source classifier and the tilt, and
    records ||xi_hat - xi*||_2 over the stacked per-class (alpha, theta) and
    the source-mean absolute weight error. Fit failures propagate.
    """
    sizes = [int(n) for n in sizes]
    if sorted(sizes) != sizes:
        raise SchemaError("sizes must be increasing")
    truth = spec.true_tilt()
    xi_star = truth.params_flat()
    pmeans, pstds, wmeans, wstds = [], [], [], []
    for ni, n in enumerate(sizes):
        perr, werr = [], []
        for rep in range(repeats):
            gseed = substream_seed(seed, ni, rep)
            src, tgt, _, _ = gen_lda(spec, n, n, gseed)
            clf = fit_logistic(
                src, "l2", clf_strength, clf_tol, clf_max_iter, gseed
            )
            model, wv = fit_extra(
                clf, src, tgt, _dc_replace(cfg, seed=substream_seed(gseed, 1))
            )
            perr.append(float(np.linalg.norm(model.params_flat() - xi_star)))
            true_w = truth.weights(src.features, src.labels)
            werr.append(float(np.mean(np.abs(wv.weights - true_w))))
        pmeans.append(float(np.mean(perr)))
        pstds.append(float(np.std(perr)) if repeats > 1 else 0.0)
        wmeans.append(float(np.mean(werr)))
        wstds.append(float(np.std(werr)) if repeats > 1 else 0.0)
    slope = (
        float(np.polyfit(np.log(sizes), np.log(pmeans), 1)[0])
        if len(sizes) > 1
        else math.nan
    )
    return ConsistencyTable(
        tuple(sizes), tuple(pmeans), tuple(pstds), tuple(wmeans), tuple(wstds), slope
    )
