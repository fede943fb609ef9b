"""Downstream uses of a fitted weight vector: target performance evaluation,
weighted-ERM fine-tuning, and model selection scoring.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .classifier import fit_logistic
from .errors import ConstantInput, EmptyInput, LengthMismatch, SchemaError
from .numerics import spearman


def weighted_expectation(g_values, w):
    """(1/n) sum g_i * w_i; the weights already carry the normalizer."""
    g = np.asarray(g_values, dtype=np.float64)
    weights = w.weights if hasattr(w, "weights") else np.asarray(w, dtype=np.float64)
    if g.shape != weights.shape:
        raise LengthMismatch(f"{g.shape} values against {weights.shape} weights")
    return float(np.mean(g * weights))


def evaluate_target(model, src, w, loss="zero_one"):
    """Weighted empirical risk of a predictor on the source sample.

    With zero-one loss this estimates the target error (1 - accuracy);
    "nll" uses the predictor's log-loss instead.
    """
    loss = loss.replace("-", "_").lower()
    if loss == "zero_one":
        g = (model.predict(src.features) != src.labels).astype(np.float64)
    elif loss == "nll":
        proba = model.predict_proba(src.features)
        g = -np.log(proba[np.arange(src.n), src.labels] + 1e-300)
    else:
        raise SchemaError(f"unknown loss {loss!r}")
    return weighted_expectation(g, w)


def finetune(src, w, penalty="l2", strength=0.1, tol=1e-6, max_iter=500, seed=0):
    """Weighted ERM: the logistic fit with per-sample loss multipliers.

    With unit weights this is exactly fit_logistic.
    """
    weights = w.weights if hasattr(w, "weights") else np.asarray(w, dtype=np.float64)
    if weights.shape != (src.n,):
        raise LengthMismatch(f"{weights.shape} weights for {src.n} samples")
    return fit_logistic(
        src, penalty, strength, tol, max_iter, seed, sample_weight=weights
    )


@dataclass(frozen=True)
class ModelScoreRow:
    """One zoo model's scores; true target accuracy only when a labeled
    target evaluation set was available."""

    model_id: int
    srcval: float
    weighted: float
    external: float | None = None
    target: float | None = None

    def __post_init__(self):
        for name in ("srcval", "target"):
            v = getattr(self, name)
            if v is not None and not (0.0 <= v <= 1.0):
                raise SchemaError(f"{name} accuracy {v} outside [0, 1]")


def score_models(zoo, src_val, w, tgt_test=None, external=None):
    """Score every model: source validation accuracy and weighted accuracy.

    When tgt_test is given, also the true target accuracy, the model each
    score selects (ties broken toward the lowest model id), and the Spearman
    rank correlation of each score against the truth (None when undefined).
    Returns (rows, summary).
    """
    if not zoo:
        raise SchemaError("empty model zoo")
    if w.weights.shape != (src_val.n,):
        raise LengthMismatch(
            f"{w.weights.shape} weights for {src_val.n} validation samples"
        )
    rows = []
    for i, model in enumerate(zoo):
        correct = (model.predict(src_val.features) == src_val.labels).astype(np.float64)
        srcval = float(correct.mean())
        weighted = weighted_expectation(correct, w)
        target = None
        if tgt_test is not None:
            target = float(np.mean(model.predict(tgt_test.features) == tgt_test.labels))
        ext = None if external is None else float(external[i])
        rows.append(ModelScoreRow(i, srcval, weighted, ext, target))

    def select(values):
        values = np.asarray(values, dtype=np.float64)
        return int(np.argmax(values))  # first occurrence = lowest id

    summary = {
        "selected": {
            "srcval": select([r.srcval for r in rows]),
            "weighted": select([r.weighted for r in rows]),
        }
    }
    if external is not None:
        summary["selected"]["external"] = select([r.external for r in rows])
    if tgt_test is not None:
        truth = [r.target for r in rows]
        score_lists = {
            "srcval": [r.srcval for r in rows],
            "weighted": [r.weighted for r in rows],
        }
        if external is not None:
            score_lists["external"] = [r.external for r in rows]
        corr = {}
        for name, values in score_lists.items():
            try:
                corr[name] = spearman(values, truth)
            except (ConstantInput, EmptyInput):
                corr[name] = None
        summary["spearman"] = corr
    return rows, summary


def save_score_report(rows, summary, csv_path, json_path):
    """CSV `model_id,srcval,extra,external,target` plus the JSON summary."""
    with open(str(csv_path), "w", encoding="utf-8", newline="") as fh:
        fh.write("model_id,srcval,extra,external,target\n")
        for r in rows:
            ext = "" if r.external is None else repr(float(r.external))
            tgt = "" if r.target is None else repr(float(r.target))
            fh.write(f"{r.model_id},{r.srcval!r},{r.weighted!r},{ext},{tgt}\n")
    with open(str(json_path), "w", encoding="utf-8") as fh:
        json.dump(summary, fh, indent=1, sort_keys=True)


DEFAULT_ZOO_STRENGTHS = tuple(np.logspace(-4, -1, 20))


def build_model_zoo(src_train, seed=0, strengths=DEFAULT_ZOO_STRENGTHS, tol=1e-6, max_iter=300):
    """Logistic model zoo: weighting schemes x {l1, l2} x strength grid.

    Schemes are uniform, class-balanced (n/(K*n_k)) and, when group
    annotations exist, group-balanced. Without groups the group tier is
    skipped (flagged in the second return value) leaving 2x2x|strengths|
    models. Returns (models, skipped_group_tier).
    """
    n = src_train.n
    schemes = {"uniform": np.ones(n)}
    counts = np.bincount(src_train.labels, minlength=src_train.class_count)
    present = counts[src_train.labels].astype(np.float64)
    schemes["class_balanced"] = n / (src_train.class_count * present)
    skipped = src_train.groups is None
    if not skipped:
        gcounts = np.bincount(src_train.groups)
        gpresent = gcounts[src_train.groups].astype(np.float64)
        schemes["group_balanced"] = n / (len(np.unique(src_train.groups)) * gpresent)
    zoo = []
    for scheme_weights in schemes.values():
        for penalty in ("l1", "l2"):
            for strength in strengths:
                zoo.append(
                    fit_logistic(
                        src_train,
                        penalty,
                        float(strength),
                        tol,
                        max_iter,
                        seed,
                        sample_weight=scheme_weights,
                    )
                )
    return zoo, skipped
