# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled matched-filter grid search.

Templates along a uniform grid are advanced by complex rotation, with an exact
cos/sin resync every RESYNC steps to bound drift.
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport cos, sin, fabs
from libc.stdlib cimport malloc, free

cnp.import_array()

cdef enum:
    RESYNC = 32


cdef void _search_row(const double* pre, const double* pim, const double* t, Py_ssize_t K,
                      double v0, double step, Py_ssize_t G, double scale, int sine,
                      double* acc_a, double* acc_b, Py_ssize_t* best_idx,
                      double* best_score) noexcept nogil:
    cdef Py_ssize_t r, g
    cdef double a0, d, c, s, cr, sr, tmp, pr, pi, score, best
    cdef Py_ssize_t bi
    for g in range(G):
        acc_a[g] = 0.0
        acc_b[g] = 0.0
    for r in range(K):
        a0 = scale * t[r] * v0
        d = scale * t[r] * step
        cr = cos(d)
        sr = sin(d)
        pr = pre[r]
        pi = pim[r] if not sine else 0.0
        c = 1.0
        s = 0.0
        for g in range(G):
            if g % RESYNC == 0:
                c = cos(a0 + g * d)
                s = sin(a0 + g * d)
            if sine:
                acc_a[g] += pr * s
                acc_b[g] += s * s
            else:
                acc_a[g] += pr * c + pi * s
                acc_b[g] += pi * c - pr * s
            tmp = c * cr - s * sr
            s = s * cr + c * sr
            c = tmp
    bi = 0
    best = -1.0e300
    for g in range(G):
        if sine:
            score = 2.0 * fabs(acc_a[g]) - acc_b[g]
        else:
            score = acc_a[g] * acc_a[g] + acc_b[g] * acc_b[g]
        if score > best:
            best = score
            bi = g
    best_idx[0] = bi
    best_score[0] = best


def mf_search(const double[:, ::1] phi_re, const double[:, ::1] phi_im, const double[:, ::1] times,
              double lo, double step, Py_ssize_t G, const long[::1] start, double scale, bint sine):
    """Best grid index and score per row; see ``modrecon.kernels`` for the contract."""
    cdef Py_ssize_t L = times.shape[0], K = times.shape[1], l
    out_idx = np.empty(L, dtype=np.int64)
    out_score = np.empty(L, dtype=np.float64)
    cdef long long[::1] oi = out_idx
    cdef double[::1] osc = out_score
    cdef Py_ssize_t bi
    cdef double bs
    cdef double* acc_a
    cdef double* acc_b
    if L == 0:
        return out_idx, out_score
    acc_a = <double*> malloc(G * sizeof(double))
    acc_b = <double*> malloc(G * sizeof(double))
    if acc_a == NULL or acc_b == NULL:
        free(acc_a)
        free(acc_b)
        raise MemoryError()
    try:
        with nogil:
            for l in range(L):
                _search_row(&phi_re[l, 0], &phi_im[l, 0], &times[l, 0], K,
                            lo + step * start[l], step, G, scale, sine,
                            acc_a, acc_b, &bi, &bs)
                oi[l] = start[l] + bi
                osc[l] = bs
    finally:
        free(acc_a)
        free(acc_b)
    return out_idx, out_score
