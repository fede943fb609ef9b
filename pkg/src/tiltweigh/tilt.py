"""Exponential tilt fitting by stochastic KL distribution matching.

The model ties the target joint to the source joint through per-class
log-linear factors: omega(x, y) = exp(theta_y . T(x) + alpha_y). Training
maximizes the mean log tilted-mixture likelihood of the unlabeled target
batch while penalizing the log of the empirical source normalizer (plus an
optional lambda * (N + 1/N) regularizer that pins the normalizer near 1);
the leftover additive gauge in the intercepts is resolved after training by
alpha = beta - log N evaluated on the full source set, which forces the
fitted weights to average to one over the source sample.

Minibatch gradients run through the tiltweigh._kernels backend (compiled
when available).
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .data import LabeledDataset, SufficientStatistic, UnlabeledDataset
from .errors import (
    AllCellsFailed,
    ConfigError,
    DimensionMismatch,
    NonFiniteObjective,
)
from .numerics import EXP_CLIP, AdamState, substream


@dataclass(frozen=True)
class TiltModel:
    """Fitted tilt: per-class slopes theta (K, d) and intercepts alpha (K,).

    beta_raw holds the pre-normalization intercepts; normalizer_at_fit is the
    full-source-sample normalizer the correction alpha = beta - log N used.
    """

    stat: SufficientStatistic
    theta: np.ndarray
    alpha: np.ndarray
    beta_raw: np.ndarray
    normalizer_at_fit: float
    objective: float = math.nan

    def __post_init__(self):
        theta = np.ascontiguousarray(self.theta, dtype=np.float64)
        alpha = np.ascontiguousarray(self.alpha, dtype=np.float64)
        beta = np.ascontiguousarray(self.beta_raw, dtype=np.float64)
        if theta.ndim != 2 or alpha.shape != (theta.shape[0],) or beta.shape != alpha.shape:
            raise ConfigError("theta must be (K, d) with alpha and beta_raw of length K")
        object.__setattr__(self, "theta", theta)
        object.__setattr__(self, "alpha", alpha)
        object.__setattr__(self, "beta_raw", beta)

    @property
    def n_classes(self):
        return self.theta.shape[0]

    def weights(self, features, labels):
        """Importance weights for labeled points; exponents clamped to +-80."""
        t = self.stat.apply(np.asarray(features, dtype=np.float64))
        w, _ = _kernels.tilt_weights(
            np.ascontiguousarray(t),
            np.ascontiguousarray(labels, dtype=np.int64),
            self.theta,
            self.alpha,
            EXP_CLIP,
        )
        return w

    def params_flat(self):
        """Stacked (alpha_k, theta_k) per class, classes in order."""
        return np.concatenate([np.concatenate(([self.alpha[k]], self.theta[k])) for k in range(self.n_classes)])

    def to_json(self):
        return {
            "T": self.stat.to_json(),
            "theta": self.theta.tolist(),
            "alpha": self.alpha.tolist(),
            "beta_raw": self.beta_raw.tolist(),
            "normalizer_at_fit": float(self.normalizer_at_fit),
            "objective": float(self.objective),
        }

    @staticmethod
    def from_json(obj):
        return TiltModel(
            SufficientStatistic.from_json(obj["T"]),
            np.asarray(obj["theta"], dtype=np.float64),
            np.asarray(obj["alpha"], dtype=np.float64),
            np.asarray(obj["beta_raw"], dtype=np.float64),
            float(obj["normalizer_at_fit"]),
            float(obj.get("objective", math.nan)),
        )

    def save(self, path):
        with open(str(path), "w", encoding="utf-8") as fh:
            json.dump(self.to_json(), fh, indent=1, sort_keys=True)

    @staticmethod
    def load(path):
        with open(str(path), "r", encoding="utf-8") as fh:
            return TiltModel.from_json(json.load(fh))


@dataclass(frozen=True)
class ExtraConfig:
    """Hyperparameters of one tilt fit."""

    learning_rate: float = 5e-4
    batch_size: int = 500
    epochs: int = 200
    lam: float = 0.0
    seed: int = 0
    init_scale: float = 0.01
    freeze_theta: bool = False

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ConfigError("learning_rate must be positive")
        if self.batch_size < 1 or self.epochs < 1:
            raise ConfigError("batch_size and epochs must be >= 1")
        if self.lam < 0 or self.init_scale < 0:
            raise ConfigError("lam and init_scale must be >= 0")

    def to_json(self):
        return {
            "learning_rate": self.learning_rate,
            "batch_size": self.batch_size,
            "epochs": self.epochs,
            "lam": self.lam,
            "seed": self.seed,
            "init_scale": self.init_scale,
            "freeze_theta": self.freeze_theta,
        }

    @staticmethod
    def from_json(obj):
        return ExtraConfig(**obj)


@dataclass(frozen=True)
class WeightVector:
    """Per-source-sample importance weights with fit provenance."""

    weights: np.ndarray
    mean_weight: float
    config: ExtraConfig
    objective: float
    clip_count: int = 0

    def __post_init__(self):
        w = np.ascontiguousarray(self.weights, dtype=np.float64)
        if w.ndim != 1 or w.size == 0:
            raise ConfigError("weights must be a non-empty vector")
        if not np.all(w > 0):
            raise ConfigError("importance weights must be strictly positive")
        object.__setattr__(self, "weights", w)

    @property
    def n(self):
        return self.weights.shape[0]

    def save(self, csv_path, sidecar_path=None):
        """CSV `index,weight` plus a JSON sidecar with config and objective."""
        with open(str(csv_path), "w", encoding="utf-8", newline="") as fh:
            fh.write("index,weight\n")
            for i, w in enumerate(self.weights):
                fh.write(f"{i},{float(w)!r}\n")
        if sidecar_path is not None:
            with open(str(sidecar_path), "w", encoding="utf-8") as fh:
                json.dump(
                    {
                        "config": self.config.to_json(),
                        "objective": float(self.objective),
                        "mean_weight": float(self.mean_weight),
                    },
                    fh,
                    indent=1,
                    sort_keys=True,
                )

    @staticmethod
    def load(csv_path, sidecar_path=None):
        weights = []
        with open(str(csv_path), "r", encoding="utf-8") as fh:
            header = fh.readline().strip()
            if header != "index,weight":
                raise ConfigError(f"bad weight file header {header!r}")
            for line in fh:
                if line.strip():
                    weights.append(float(line.split(",")[1]))
        weights = np.asarray(weights)
        cfg = ExtraConfig()
        objective = math.nan
        if sidecar_path is not None:
            with open(str(sidecar_path), "r", encoding="utf-8") as fh:
                side = json.load(fh)
            cfg = ExtraConfig.from_json(side["config"])
            objective = float(side["objective"])
        return WeightVector(weights, float(weights.mean()), cfg, objective)


def _as_batch(batch):
    """Accept a LabeledDataset, UnlabeledDataset, array, or (X, y) tuple."""
    if isinstance(batch, LabeledDataset):
        return batch.features, batch.labels
    if isinstance(batch, UnlabeledDataset):
        return batch.features, None
    if isinstance(batch, tuple):
        x, y = batch
        return np.asarray(x, dtype=np.float64), np.asarray(y, dtype=np.int64)
    return np.asarray(batch, dtype=np.float64), None


def objective_terms(clf, theta, beta, src_batch, tgt_batch, stat=None):
    """The two empirical terms of the matching objective.

    Returns (lhat, nhat): the mean log tilted-mixture likelihood over the
    target batch and the mean source weight exp(theta_y . T(x) + beta_y).
    """
    theta = np.ascontiguousarray(theta, dtype=np.float64)
    beta = np.ascontiguousarray(beta, dtype=np.float64)
    stat = stat or SufficientStatistic()
    xp, yp = _as_batch(src_batch)
    xq, _ = _as_batch(tgt_batch)
    if xp.shape[0] == 0 or xq.shape[0] == 0:
        raise DimensionMismatch("batches must be non-empty")
    if yp is None:
        raise DimensionMismatch("the source batch must carry labels")
    fq = np.ascontiguousarray(clf.centered_logits(xq))
    tq = np.ascontiguousarray(stat.apply(xq))
    tp = np.ascontiguousarray(stat.apply(xp))
    lhat, _, _ = _kernels.tilt_target_terms(fq, tq, theta, beta)
    nhat, _, _, _ = _kernels.tilt_source_terms(
        tp, np.ascontiguousarray(yp), theta, beta, EXP_CLIP
    )
    return lhat, nhat


def objective_value_grad(fq, tq, tp, yp, theta, beta, lam):
    """Full objective -lhat + log(nhat) + lam*nhat + lam/nhat and gradients.

    Arrays are precomputed statistics/logits; returns
    (value, grad_theta, grad_beta, clip_count).
    """
    lhat, glt, glb = _kernels.tilt_target_terms(fq, tq, theta, beta)
    nhat, gnt, gnb, clips = _kernels.tilt_source_terms(tp, yp, theta, beta, EXP_CLIP)
    value = -lhat + math.log(nhat) + lam * nhat + lam / nhat
    coef = 1.0 / nhat + lam - lam / (nhat * nhat)
    return value, -glt + coef * gnt, -glb + coef * gnb, clips


class _ShuffleStream:
    """Seeded index stream: shuffled passes, reshuffled upon exhaustion.

    Fixed-size batches; a batch spans a pass boundary when the batch size
    does not divide n, so draws are without replacement within each pass.
    """

    def __init__(self, n, rng):
        self.n = n
        self.rng = rng
        self.perm = rng.permutation(n)
        self.cursor = 0

    def next(self, size):
        out = np.empty(size, dtype=np.int64)
        filled = 0
        while filled < size:
            take = min(size - filled, self.n - self.cursor)
            out[filled : filled + take] = self.perm[self.cursor : self.cursor + take]
            self.cursor += take
            filled += take
            if self.cursor == self.n:
                self.perm = self.rng.permutation(self.n)
                self.cursor = 0
        return out


def fit_extra(clf, src, tgt, cfg, stat=None):
    """Fit the tilt by minibatch Adam and emit per-sample importance weights.

    Runs cfg.epochs epochs of ceil(max(n_P, n_Q)/B) steps, drawing source and
    target minibatches from independent seeded shuffle streams. After
    training the normalizer is recomputed on the full source set and folded
    into the intercepts, so the returned weights average to 1 when lam = 0.
    The recorded objective is the lambda-free -lhat + log(nhat) on the full
    data at the final parameters.
    """
    if src.dim != tgt.dim:
        raise ConfigError("source and target dimensionality differ")
    if clf.dim != src.dim:
        raise ConfigError("classifier dimensionality does not match the data")
    stat = stat or SufficientStatistic()
    k = clf.n_classes
    d = stat.out_dim(src.dim)

    tp = np.ascontiguousarray(stat.apply(src.features))
    tq = np.ascontiguousarray(stat.apply(tgt.features))
    fq = np.ascontiguousarray(clf.centered_logits(tgt.features))
    yp = np.ascontiguousarray(src.labels)

    rng_init = substream(cfg.seed, 0)
    theta = np.zeros((k, d)) if cfg.freeze_theta else cfg.init_scale * rng_init.standard_normal((k, d))
    beta = cfg.init_scale * rng_init.standard_normal(k)

    n_params = k * d + k
    adam = AdamState(n_params, cfg.learning_rate)
    src_stream = _ShuffleStream(src.n, substream(cfg.seed, 1))
    tgt_stream = _ShuffleStream(tgt.n, substream(cfg.seed, 2))
    steps_per_epoch = math.ceil(max(src.n, tgt.n) / cfg.batch_size)

    clip_total = 0
    for _epoch in range(cfg.epochs):
        for _step in range(steps_per_epoch):
            ip = src_stream.next(cfg.batch_size)
            iq = tgt_stream.next(cfg.batch_size)
            value, gt, gb, clips = objective_value_grad(
                fq[iq], tq[iq], tp[ip], yp[ip], theta, beta, cfg.lam
            )
            clip_total += clips
            if not math.isfinite(value):
                raise NonFiniteObjective(
                    f"objective became non-finite at epoch {_epoch}"
                )
            if cfg.freeze_theta:
                gt = np.zeros_like(gt)
            flat = adam.step(
                np.concatenate([theta.ravel(), beta]),
                np.concatenate([gt.ravel(), gb]),
            )
            theta = np.ascontiguousarray(flat[: k * d].reshape(k, d))
            beta = np.ascontiguousarray(flat[k * d :])

    # gauge correction on the full source sample
    nhat_full, _, _, clips = _kernels.tilt_source_terms(tp, yp, theta, beta, EXP_CLIP)
    clip_total += clips
    alpha = beta - math.log(nhat_full)

    lhat_full, _, _ = _kernels.tilt_target_terms(fq, tq, theta, beta)
    objective = -lhat_full + math.log(nhat_full)
    if not math.isfinite(objective):
        raise NonFiniteObjective("full-data objective is non-finite")

    model = TiltModel(stat, theta, alpha, beta, float(nhat_full), float(objective))
    weights, clips = _kernels.tilt_weights(tp, yp, theta, alpha, EXP_CLIP)
    clip_total += clips
    wv = WeightVector(weights, float(weights.mean()), cfg, float(objective), clip_total)
    return model, wv


@dataclass(frozen=True)
class SweepCell:
    """One (classifier variant, config) fit attempt inside a sweep."""

    variant: int
    config: ExtraConfig
    objective: float = math.nan
    ok: bool = False
    error: str = ""


WATERBIRDS_GRID = tuple(
    ExtraConfig(learning_rate=lr, batch_size=500, epochs=ep, lam=0.0)
    for lr in (5e-4, 4e-5)
    for ep in (100, 200, 400)
)
WATERBIRDS_CALIBRATIONS = ("none", "ts", "bcts", "vs")

BREEDS_GRID = (ExtraConfig(learning_rate=1e-4, batch_size=1500, epochs=500, lam=1e-6),)
BREEDS_CALIBRATIONS = ("bcts",)


def sweep(clf_variants, src, tgt, grid, stat=None, threads=1):
    """Fit every (classifier variant x config) cell; keep the lowest objective.

    Per-cell failures are recorded in the report without aborting the sweep;
    AllCellsFailed is raised when nothing succeeded. Returns
    (best_model, best_weights, report) where report is a list of SweepCell.
    """
    if not grid or not clf_variants:
        raise ConfigError("sweep needs at least one classifier variant and one config")
    cells = [
        (vi, cfg) for vi in range(len(clf_variants)) for cfg in grid
    ]

    def run(cell):
        vi, cfg = cell
        try:
            model, wv = fit_extra(clf_variants[vi], src, tgt, cfg, stat=stat)
            return SweepCell(vi, cfg, model.objective, True), (model, wv)
        except Exception as exc:  # noqa: BLE001 - cell isolation is the contract
            return SweepCell(vi, cfg, error=f"{type(exc).__name__}: {exc}"), None

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(run, cells))
    else:
        results = [run(c) for c in cells]

    report = [r[0] for r in results]
    fits = [r[1] for r in results]
    ok = [i for i, c in enumerate(report) if c.ok]
    if not ok:
        raise AllCellsFailed("every sweep cell failed: " + "; ".join(c.error for c in report))
    best = min(ok, key=lambda i: report[i].objective)
    model, wv = fits[best]
    return model, wv, report
