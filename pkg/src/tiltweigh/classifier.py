"""Multinomial logistic source classifier with post-hoc calibration.

The fit is full-batch proximal gradient descent with a backtracking line
search: deterministic, monotone in the penalized objective, stopped when the
(sub)gradient optimality residual falls below tol. L1 is handled by
soft-threshold steps; the intercept is never penalized.

Calibration rescales the raw logits (temperature, bias-corrected temperature,
or vector scaling), fitted by held-out NLL; centering is applied after
calibration, so softmax(centered_logits(x)) equals the calibrated predicted
probabilities.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import DimensionMismatch, SchemaError
from .numerics import softmax


@dataclass(frozen=True)
class CalibrationTransform:
    """Post-hoc logit transform. kind: none | ts | bcts | vs."""

    kind: str = "none"
    temperature: float = 1.0
    scale: np.ndarray | None = None  # (K,), vs only
    bias: np.ndarray | None = None  # (K,), bcts and vs

    def __post_init__(self):
        if self.kind not in ("none", "ts", "bcts", "vs"):
            raise SchemaError(f"unknown calibration kind {self.kind!r}")
        if self.kind in ("ts", "bcts") and not self.temperature > 0:
            raise SchemaError("temperature must be positive")

    def apply(self, logits):
        z = np.asarray(logits, dtype=np.float64)
        if self.kind == "none":
            return z
        if self.kind == "ts":
            return z / self.temperature
        if self.kind == "bcts":
            return z / self.temperature + self.bias
        return z * self.scale + self.bias

    def to_json(self):
        out = {"kind": self.kind}
        if self.kind in ("ts", "bcts"):
            out["temperature"] = float(self.temperature)
        if self.kind in ("bcts", "vs"):
            out["bias"] = self.bias.tolist()
        if self.kind == "vs":
            out["scale"] = self.scale.tolist()
        return out

    @staticmethod
    def from_json(obj):
        kind = obj["kind"]
        return CalibrationTransform(
            kind,
            float(obj.get("temperature", 1.0)),
            None if obj.get("scale") is None else np.asarray(obj["scale"], dtype=np.float64),
            None if obj.get("bias") is None else np.asarray(obj["bias"], dtype=np.float64),
        )


@dataclass(frozen=True)
class ProbClassifier:
    """Linear softmax classifier: logits(x) = W x + b, optionally calibrated."""

    W: np.ndarray  # (K, p)
    b: np.ndarray  # (K,)
    penalty: str = "l2"
    strength: float = 0.0  # inverse-C convention: strength = 1/C
    calibration: CalibrationTransform = field(default_factory=CalibrationTransform)
    fit_info: dict | None = None

    def __post_init__(self):
        W = np.ascontiguousarray(self.W, dtype=np.float64)
        b = np.ascontiguousarray(self.b, dtype=np.float64)
        if W.ndim != 2 or b.shape != (W.shape[0],):
            raise SchemaError("W must be (K, p) with b of length K")
        if self.penalty not in ("l1", "l2"):
            raise SchemaError(f"unknown penalty {self.penalty!r}")
        object.__setattr__(self, "W", W)
        object.__setattr__(self, "b", b)

    @property
    def n_classes(self):
        return self.W.shape[0]

    @property
    def dim(self):
        return self.W.shape[1]

    def _check_x(self, x):
        x = np.asarray(x, dtype=np.float64)
        single = x.ndim == 1
        if single:
            x = x[None, :]
        if x.shape[1] != self.dim:
            raise DimensionMismatch(
                f"classifier expects {self.dim}-dimensional features, got {x.shape[1]}"
            )
        return x, single

    def raw_logits(self, x):
        x, single = self._check_x(x)
        z = x @ self.W.T + self.b
        return z[0] if single else z

    def centered_logits(self, x):
        """Calibrated logits shifted to sum to zero across classes."""
        x, single = self._check_x(x)
        z = self.calibration.apply(x @ self.W.T + self.b)
        z = z - z.mean(axis=1, keepdims=True)
        return z[0] if single else z

    def predict_proba(self, x):
        return softmax(self.centered_logits(x))

    def predict(self, x):
        z = self.centered_logits(x)
        return np.argmax(z, axis=-1)

    def nll(self, ds):
        """Mean negative log-likelihood of a labeled dataset."""
        p = self.predict_proba(ds.features)
        return float(-np.mean(np.log(p[np.arange(ds.n), ds.labels] + 1e-300)))

    def accuracy(self, ds):
        return float(np.mean(self.predict(ds.features) == ds.labels))

    def to_json(self):
        return {
            "W": self.W.tolist(),
            "b": self.b.tolist(),
            "penalty": self.penalty,
            "strength": float(self.strength),
            "calibration": self.calibration.to_json(),
        }

    @staticmethod
    def from_json(obj):
        return ProbClassifier(
            np.asarray(obj["W"], dtype=np.float64),
            np.asarray(obj["b"], dtype=np.float64),
            obj.get("penalty", "l2"),
            float(obj.get("strength", 0.0)),
            CalibrationTransform.from_json(obj.get("calibration", {"kind": "none"})),
        )

    def save(self, path):
        with open(str(path), "w", encoding="utf-8") as fh:
            json.dump(self.to_json(), fh, indent=1, sort_keys=True)

    @staticmethod
    def load(path):
        with open(str(path), "r", encoding="utf-8") as fh:
            return ProbClassifier.from_json(json.load(fh))


def _ce_value_grad(X, Y_onehot, sample_weight, W, b):
    """Weighted-mean cross entropy and its gradient in (W, b)."""
    n = X.shape[0]
    z = X @ W.T + b
    z -= z.max(axis=1, keepdims=True)
    ez = np.exp(z)
    p = ez / ez.sum(axis=1, keepdims=True)
    logp = z - np.log(ez.sum(axis=1, keepdims=True))
    ce = float(-np.sum(sample_weight * np.sum(Y_onehot * logp, axis=1)) / n)
    r = (p - Y_onehot) * sample_weight[:, None] / n
    return ce, r.T @ X, r.sum(axis=0)


def _soft_threshold(W, t):
    return np.sign(W) * np.maximum(np.abs(W) - t, 0.0)


def fit_logistic(
    ds,
    penalty="l2",
    strength=0.1,
    tol=1e-6,
    max_iter=500,
    seed=0,
    sample_weight=None,
):
    """Fit the multinomial logistic model by penalized maximum likelihood.

    Objective: weighted-mean cross entropy + strength * pen(W), with
    pen = 0.5*||W||_F^2 (l2) or ||W||_1 (l1); the intercept is unpenalized.
    Non-convergence within max_iter is flagged, not raised. With strength=0
    on separable data the argmin is unbounded; that case is detected
    heuristically and flagged as separable_degenerate.
    """
    del seed  # the solver is deterministic; kept for interface stability
    if strength < 0:
        raise SchemaError("penalty strength must be >= 0")
    X = ds.features
    n, p = X.shape
    k = ds.class_count
    if n < k:
        raise SchemaError(f"need at least K={k} samples, got {n}")
    w = np.ones(n) if sample_weight is None else np.asarray(sample_weight, dtype=np.float64)
    if w.shape != (n,):
        raise SchemaError("sample_weight must match the dataset length")
    Y = np.zeros((n, k))
    Y[np.arange(n), ds.labels] = 1.0

    l2 = strength if penalty == "l2" else 0.0
    l1 = strength if penalty == "l1" else 0.0

    # the penalty is handled by an exact proximal step, so the smooth part is
    # just the cross entropy and the line search stays well conditioned even
    # for huge strengths
    def penalty_value(W):
        if l1 > 0:
            return l1 * float(np.abs(W).sum())
        return 0.5 * l2 * float(np.sum(W * W))

    def prox(W, t):
        if l1 > 0:
            return _soft_threshold(W, t * l1)
        return W / (1.0 + t * l2)

    W = np.zeros((k, p))
    b = np.zeros(k)
    f, gW, gb = _ce_value_grad(X, Y, w, W, b)
    objective0 = f + penalty_value(W)
    step = 1.0
    converged = False
    iterations = 0
    for iterations in range(1, max_iter + 1):
        # optimality residual (subgradient condition at the current point)
        if l1 > 0:
            res_W = np.where(
                W != 0,
                np.abs(gW + l1 * np.sign(W)),
                np.maximum(np.abs(gW) - l1, 0.0),
            )
        else:
            res_W = np.abs(gW + l2 * W)
        if max(res_W.max(initial=0.0), np.abs(gb).max()) <= tol:
            converged = True
            break
        while True:
            W_new = prox(W - step * gW, step)
            b_new = b - step * gb
            f_new, gW_new, gb_new = _ce_value_grad(X, Y, w, W_new, b_new)
            dW = W_new - W
            db = b_new - b
            quad = f + float(np.sum(gW * dW)) + float(gb @ db) + (
                float(np.sum(dW * dW)) + float(db @ db)
            ) / (2 * step)
            if f_new <= quad + 1e-12:
                break
            step *= 0.5
            if step < 1e-18:
                break
        W, b, f, gW, gb = W_new, b_new, f_new, gW_new, gb_new
        step = min(step * 1.25, 1e6)

    separable = False
    if strength == 0.0 and not converged:
        z = X @ W.T + b
        separable = bool(np.all(np.argmax(z, axis=1) == ds.labels))

    info = {
        "converged": converged,
        "iterations": iterations,
        "objective_initial": objective0,
        "objective": f + penalty_value(W),
        "separable_degenerate": separable,
    }
    return ProbClassifier(W, b, penalty, strength, CalibrationTransform(), info)


def _golden_section(fn, lo, hi, iters=80):
    """Minimize a unimodal scalar function on [lo, hi]."""
    inv_phi = (np.sqrt(5.0) - 1.0) / 2.0
    a, d = lo, hi
    b = d - inv_phi * (d - a)
    c = a + inv_phi * (d - a)
    fb, fc = fn(b), fn(c)
    for _ in range(iters):
        if fb < fc:
            d, c, fc = c, b, fb
            b = d - inv_phi * (d - a)
            fb = fn(b)
        else:
            a, b, fb = b, c, fc
            c = a + inv_phi * (d - a)
            fc = fn(c)
    return (a + d) / 2.0


def _nll_of_logits(u, labels):
    u = u - u.max(axis=1, keepdims=True)
    logz = np.log(np.exp(u).sum(axis=1))
    return float(np.mean(logz - u[np.arange(u.shape[0]), labels]))


def calibrate(clf, holdout, kind, epochs=800, lr=0.02):
    """Fit a calibration transform on held-out data by minimizing NLL.

    TS uses a golden-section search over log temperature; BCTS and VS run
    Adam from the identity transform, keeping the best iterate seen, so the
    post-calibration holdout NLL never exceeds the pre-calibration one.
    Any existing calibration on clf is replaced.
    """
    kind = "none" if kind is None else str(kind).lower()
    if kind == "none":
        return replace(clf, calibration=CalibrationTransform())
    if holdout.dim != clf.dim:
        raise DimensionMismatch("holdout dimension does not match the classifier")
    z = holdout.features @ clf.W.T + clf.b
    y = holdout.labels
    kk = clf.n_classes
    degenerate = len(np.unique(y)) < 2

    if kind == "ts":
        t_star = np.exp(
            _golden_section(lambda lt: _nll_of_logits(z * np.exp(-lt), y), np.log(1 / 50), np.log(50))
        )
        if _nll_of_logits(z / t_star, y) > _nll_of_logits(z, y):
            t_star = 1.0
        transform = CalibrationTransform("ts", float(t_star))
    elif kind in ("bcts", "vs"):
        from .numerics import AdamState

        if kind == "bcts":
            params = np.zeros(1 + kk)  # (log T, bias)

            def unpack(q):
                return np.exp(-q[0]), q[1:]

            def apply_grad(q):
                inv_t, c = unpack(q)
                u = z * inv_t + c
                r = softmax(u)
                r[np.arange(len(y)), y] -= 1.0
                r /= len(y)
                g = np.empty_like(q)
                g[0] = -float(np.sum(r * z)) * inv_t
                g[1:] = r.sum(axis=0)
                return _nll_of_logits(u, y), g
        else:
            params = np.concatenate([np.ones(kk), np.zeros(kk)])  # (scale, bias)

            def apply_grad(q):
                s, c = q[:kk], q[kk:]
                u = z * s + c
                r = softmax(u)
                r[np.arange(len(y)), y] -= 1.0
                r /= len(y)
                g = np.concatenate([(r * z).sum(axis=0), r.sum(axis=0)])
                return _nll_of_logits(u, y), g

        adam = AdamState(params.size, lr)
        best = (apply_grad(params)[0], params.copy())
        for _ in range(epochs):
            val, g = apply_grad(params)
            if val < best[0]:
                best = (val, params.copy())
            params = adam.step(params, g)
        val = apply_grad(params)[0]
        if val < best[0]:
            best = (val, params.copy())
        q = best[1]
        if kind == "bcts":
            transform = CalibrationTransform("bcts", float(np.exp(q[0])), None, q[1:].copy())
        else:
            transform = CalibrationTransform("vs", 1.0, q[:kk].copy(), q[kk:].copy())
    else:
        raise SchemaError(f"unknown calibration kind {kind!r}")

    info = dict(clf.fit_info or {})
    info["calibration_degenerate_holdout"] = degenerate
    return replace(clf, calibration=transform, fit_info=info)
