# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled backend for the kernel sums.

Same contract as _refkern, but the response-kernel values are computed once
per (grid point, observation) and fused straight into the accumulators, so
no (k, n) or (n, m, d) temporaries are ever materialized.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport erf, exp, sqrt

cnp.import_array()

cdef double _INV_SQRT2 = 1.0 / sqrt(2.0)
cdef double _INV_SQRT2PI = 1.0 / sqrt(2.0 * 3.14159265358979323846)


def cdf_components(y, x, xq, bx, ygrid, by, idx):
    """See _refkern.cdf_components; identical semantics."""
    cdef cnp.ndarray[cnp.float64_t, ndim=1] y_ = np.ascontiguousarray(y, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=2] x_ = np.ascontiguousarray(np.atleast_2d(x), dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=2] xq_ = np.ascontiguousarray(np.atleast_2d(xq), dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] bx_ = np.ascontiguousarray(bx, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] yg_ = np.ascontiguousarray(ygrid, dtype=np.float64)
    cdef double by_ = float(by)
    cdef Py_ssize_t i_ = int(idx)

    cdef Py_ssize_t n = y_.shape[0], d = x_.shape[1]
    cdef Py_ssize_t m = xq_.shape[0], k = yg_.shape[0]

    cdef cnp.ndarray[cnp.float64_t, ndim=2] w = np.empty((n, m))
    cdef cnp.ndarray[cnp.float64_t, ndim=2] wc = np.empty((n, m))
    cdef cnp.ndarray[cnp.float64_t, ndim=1] d0 = np.zeros(m)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] dx = np.zeros(m)
    cdef cnp.ndarray[cnp.float64_t, ndim=2] n0 = np.zeros((k, m))
    cdef cnp.ndarray[cnp.float64_t, ndim=2] ny = np.zeros((k, m))
    cdef cnp.ndarray[cnp.float64_t, ndim=2] nx = np.zeros((k, m))

    cdef Py_ssize_t j, q, r, kk
    cdef double s, u, ui, wv, t, big, small, inv_by = 1.0 / by_

    # covariate weights and their x_idx derivatives
    for j in range(n):
        for q in range(m):
            s = 0.0
            ui = 0.0
            for r in range(d):
                u = (xq_[q, r] - x_[j, r]) / bx_[r]
                s += u * u
                if r == i_:
                    ui = u
            wv = exp(-0.5 * s)
            w[j, q] = wv
            wc[j, q] = wv * (-ui / bx_[i_])
            d0[q] += wv
            dx[q] += wc[j, q]

    # response kernel fused into the accumulators
    for kk in range(k):
        for j in range(n):
            t = (yg_[kk] - y_[j]) * inv_by
            big = 0.5 * (1.0 + erf(t * _INV_SQRT2))
            small = exp(-0.5 * t * t) * _INV_SQRT2PI * inv_by
            for q in range(m):
                n0[kk, q] += w[j, q] * big
                ny[kk, q] += w[j, q] * small
                nx[kk, q] += wc[j, q] * big

    return d0, dx, n0, ny, nx


def nw_sums(resp, x, xq, bx):
    """See _refkern.nw_sums; identical semantics."""
    cdef cnp.ndarray[cnp.float64_t, ndim=1] r_ = np.ascontiguousarray(resp, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=2] x_ = np.ascontiguousarray(np.atleast_2d(x), dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=2] xq_ = np.ascontiguousarray(np.atleast_2d(xq), dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] bx_ = np.ascontiguousarray(bx, dtype=np.float64)

    cdef Py_ssize_t n = r_.shape[0], d = x_.shape[1], m = xq_.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=1] s0 = np.zeros(m)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] s1 = np.zeros(m)

    cdef Py_ssize_t j, q, r
    cdef double s, u, wv

    for j in range(n):
        for q in range(m):
            s = 0.0
            for r in range(d):
                u = (xq_[q, r] - x_[j, r]) / bx_[r]
                s += u * u
            wv = exp(-0.5 * s)
            s0[q] += wv
            s1[q] += wv * r_[j]
    return s0, s1
