# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled hot-loop kernels; semantics mirror _fallback.py.

Fused per-row loops avoid the temporary arrays the numpy path allocates,
which pays off at minibatch sizes (hundreds of rows, few classes).
"""

from libc.math cimport exp, log, fabs

import numpy as np


def tilt_target_terms(const double[:, ::1] fq, const double[:, ::1] tq,
                      const double[:, ::1] theta, const double[::1] beta):
    cdef Py_ssize_t b = fq.shape[0]
    cdef Py_ssize_t k = fq.shape[1]
    cdef Py_ssize_t d = tq.shape[1]
    cdef double[:, ::1] gt = np.zeros((k, d))
    cdef double[::1] gb = np.zeros(k)
    cdef double[::1] srow = np.empty(k)
    cdef double lhat = 0.0
    cdef double s, ms, mf, sum_s, sum_f, vik, inv
    cdef Py_ssize_t i, j, c

    for i in range(b):
        ms = -1e308
        mf = -1e308
        for c in range(k):
            s = beta[c]
            for j in range(d):
                s += theta[c, j] * tq[i, j]
            s += fq[i, c]
            srow[c] = s
            if s > ms:
                ms = s
            if fq[i, c] > mf:
                mf = fq[i, c]
        sum_s = 0.0
        sum_f = 0.0
        for c in range(k):
            srow[c] = exp(srow[c] - ms)
            sum_s += srow[c]
            sum_f += exp(fq[i, c] - mf)
        lhat += (ms + log(sum_s)) - (mf + log(sum_f))
        inv = 1.0 / sum_s
        for c in range(k):
            vik = srow[c] * inv
            gb[c] += vik
            for j in range(d):
                gt[c, j] += vik * tq[i, j]

    cdef double scale = 1.0 / b
    for c in range(k):
        gb[c] *= scale
        for j in range(d):
            gt[c, j] *= scale
    return lhat * scale, np.asarray(gt), np.asarray(gb)


def tilt_source_terms(const double[:, ::1] tp, const long[::1] yp,
                      const double[:, ::1] theta, const double[::1] beta, double clip):
    cdef Py_ssize_t b = tp.shape[0]
    cdef Py_ssize_t k = theta.shape[0]
    cdef Py_ssize_t d = tp.shape[1]
    cdef double[:, ::1] gt = np.zeros((k, d))
    cdef double[::1] gb = np.zeros(k)
    cdef double nhat = 0.0
    cdef double e, w
    cdef Py_ssize_t i, j, c
    cdef long y
    cdef int clip_count = 0

    for i in range(b):
        y = yp[i]
        e = beta[y]
        for j in range(d):
            e += theta[y, j] * tp[i, j]
        if e > clip:
            w = exp(clip)
            clip_count += 1
        elif e < -clip:
            w = exp(-clip)
            clip_count += 1
        else:
            w = exp(e)
            gb[y] += w
            for j in range(d):
                gt[y, j] += w * tp[i, j]
        nhat += w

    cdef double scale = 1.0 / b
    for c in range(k):
        gb[c] *= scale
        for j in range(d):
            gt[c, j] *= scale
    return nhat * scale, np.asarray(gt), np.asarray(gb), clip_count


def tilt_weights(const double[:, ::1] tp, const long[::1] yp,
                 const double[:, ::1] theta, const double[::1] alpha, double clip):
    cdef Py_ssize_t b = tp.shape[0]
    cdef Py_ssize_t d = tp.shape[1]
    cdef double[::1] out = np.empty(b)
    cdef double e
    cdef Py_ssize_t i, j
    cdef long y
    cdef int clip_count = 0

    for i in range(b):
        y = yp[i]
        e = alpha[y]
        for j in range(d):
            e += theta[y, j] * tp[i, j]
        if e > clip:
            e = clip
            clip_count += 1
        elif e < -clip:
            e = -clip
            clip_count += 1
        out[i] = exp(e)
    return np.asarray(out), clip_count
