"""Pure numpy implementation of the hot-loop kernels.

Reference semantics for the compiled core in _core.pyx: both backends must
agree to float64 round-off. All arrays are C-contiguous float64 unless noted.

Shapes: fq (B,K) centered classifier logits at target points; tq/tp (B,d)
sufficient statistics; yp (B,) int64 class labels; theta (K,d); beta (K,).
"""

from __future__ import annotations

import numpy as np


def tilt_target_terms(fq, tq, theta, beta):
    """Mean log-likelihood of the tilted mixture over a target batch.

    Returns (lhat, grad_theta, grad_beta) where lhat is
    mean_i log sum_k eta_k(x_i) exp(theta_k . t_i + beta_k), computed as
    logsumexp(f + s) - logsumexp(f) per row, and the gradients are of lhat
    with respect to theta and beta.
    """
    scores = fq + tq @ theta.T + beta
    m = scores.max(axis=1, keepdims=True)
    es = np.exp(scores - m)
    lse_s = m[:, 0] + np.log(es.sum(axis=1))
    mf = fq.max(axis=1, keepdims=True)
    lse_f = mf[:, 0] + np.log(np.exp(fq - mf).sum(axis=1))
    lhat = float(np.mean(lse_s - lse_f))

    v = es / es.sum(axis=1, keepdims=True)
    b = fq.shape[0]
    grad_theta = v.T @ tq / b
    grad_beta = v.mean(axis=0)
    return lhat, grad_theta, grad_beta


def tilt_source_terms(tp, yp, theta, beta, clip):
    """Empirical normalizer over a source batch.

    Returns (nhat, grad_theta, grad_beta, clip_count) where nhat is
    mean_i exp(theta_{y_i} . t_i + beta_{y_i}) with the exponent clamped to
    [-clip, clip]. Clamped entries contribute zero gradient so the analytic
    gradient matches finite differences of the clipped forward exactly.
    """
    e = np.einsum("ij,ij->i", tp, theta[yp]) + beta[yp]
    clipped = np.clip(e, -clip, clip)
    clip_count = int(np.count_nonzero(e != clipped))
    w = np.exp(clipped)
    b = tp.shape[0]
    nhat = float(w.sum() / b)

    active = (np.abs(e) <= clip).astype(np.float64)
    gw = w * active / b
    k = theta.shape[0]
    grad_theta = np.zeros_like(theta)
    grad_beta = np.zeros_like(beta)
    np.add.at(grad_beta, yp, gw)
    for c in range(k):
        mask = yp == c
        if mask.any():
            grad_theta[c] = gw[mask] @ tp[mask]
    return nhat, grad_theta, grad_beta, clip_count


def tilt_weights(tp, yp, theta, alpha, clip):
    """Per-sample importance weights exp(theta_y . t + alpha_y), clamped.

    Returns (weights, clip_count).
    """
    e = np.einsum("ij,ij->i", tp, theta[yp]) + alpha[yp]
    clipped = np.clip(e, -clip, clip)
    clip_count = int(np.count_nonzero(e != clipped))
    return np.exp(clipped), clip_count
