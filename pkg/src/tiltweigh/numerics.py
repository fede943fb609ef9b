"""Deterministic numeric substrate: seeded substreams, stable log-sum-exp and
softmax, an Adam optimizer, and Spearman rank correlation with tie handling.

Everything here is a pure function except AdamState, which is single-owner
mutable (one optimizer instance per fit, never shared).
"""

from __future__ import annotations

import numpy as np

from .errors import ConstantInput, DimensionMismatch, EmptyInput, LengthMismatch

EXP_CLIP = 80.0


def substream(seed, *keys):
    """Independent generator for (seed, *keys); identical inputs give an
    identical stream. Keys must be non-negative integers."""
    return np.random.default_rng(np.random.SeedSequence([int(seed), *map(int, keys)]))


def substream_seed(seed, *keys):
    """A derived 63-bit integer seed, for handing to nested configs."""
    ss = np.random.SeedSequence([int(seed), *map(int, keys)])
    return int(ss.generate_state(1, dtype=np.uint64)[0] >> 1)


def log_sum_exp(v):
    """log(sum(exp(v))) computed against overflow: max + log sum exp(v - max).

    Entries may be -inf (they drop out); an all -inf vector returns -inf.
    """
    v = np.asarray(v, dtype=np.float64)
    if v.size == 0:
        raise EmptyInput("log_sum_exp of an empty vector")
    m = np.max(v)
    if not np.isfinite(m):
        if m == -np.inf:
            return -np.inf
        raise ValueError("log_sum_exp requires entries finite or -inf")
    return float(m + np.log(np.sum(np.exp(v - m))))


def softmax(v):
    """Probability vector proportional to exp(v); invariant to constant shifts."""
    v = np.asarray(v, dtype=np.float64)
    if v.size == 0:
        raise EmptyInput("softmax of an empty vector")
    if not np.all(np.isfinite(v)):
        raise ValueError("softmax requires finite entries")
    e = np.exp(v - np.max(v, axis=-1, keepdims=True))
    return e / e.sum(axis=-1, keepdims=True)


class AdamState:
    """Adam with bias correction.

    With beta1 = beta2 = 0 the update degenerates to a sign-preserving scaled
    gradient step of magnitude ~lr, which some tests rely on.
    """

    def __init__(self, dim, lr, beta1=0.9, beta2=0.999, eps=1e-8):
        if lr <= 0 or not (0 <= beta1 < 1) or not (0 <= beta2 < 1) or eps <= 0:
            raise ValueError("invalid Adam hyperparameters")
        self.dim = int(dim)
        self.lr = float(lr)
        self.beta1 = float(beta1)
        self.beta2 = float(beta2)
        self.eps = float(eps)
        self.t = 0
        self.m = np.zeros(self.dim)
        self.v = np.zeros(self.dim)

    def step(self, params, grad):
        """One update; returns the new parameter vector."""
        params = np.asarray(params, dtype=np.float64)
        grad = np.asarray(grad, dtype=np.float64)
        if params.shape != (self.dim,) or grad.shape != (self.dim,):
            raise DimensionMismatch(
                f"adam_step expects vectors of dim {self.dim}, "
                f"got {params.shape} and {grad.shape}"
            )
        self.t += 1
        self.m = self.beta1 * self.m + (1 - self.beta1) * grad
        self.v = self.beta2 * self.v + (1 - self.beta2) * grad * grad
        mhat = self.m / (1 - self.beta1**self.t)
        vhat = self.v / (1 - self.beta2**self.t)
        return params - self.lr * mhat / (np.sqrt(vhat) + self.eps)


def adam_step(state, params, grad):
    """Functional wrapper over AdamState.step."""
    return state.step(params, grad)


def _average_ranks(a):
    """Ranks starting at 1; ties receive the mean of their rank range."""
    a = np.asarray(a, dtype=np.float64)
    order = np.argsort(a, kind="stable")
    ranks = np.empty(a.size, dtype=np.float64)
    sorted_a = a[order]
    i = 0
    while i < a.size:
        j = i
        while j + 1 < a.size and sorted_a[j + 1] == sorted_a[i]:
            j += 1
        ranks[order[i : j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    return ranks


def spearman(a, b):
    """Spearman rank correlation: Pearson correlation of average ranks.

    Raises ConstantInput when either argument has zero rank variance, where
    the correlation is undefined.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1:
        raise LengthMismatch(f"length mismatch: {a.shape} vs {b.shape}")
    if a.size < 2:
        raise EmptyInput("spearman needs at least 2 observations")
    ra = _average_ranks(a)
    rb = _average_ranks(b)
    ra -= ra.mean()
    rb -= rb.mean()
    denom = np.sqrt((ra @ ra) * (rb @ rb))
    if denom == 0.0:
        raise ConstantInput("spearman undefined: an input is constant in rank")
    return float(np.clip((ra @ rb) / denom, -1.0, 1.0))
