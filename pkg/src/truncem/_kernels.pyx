# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled stepping kernel for power-law models.

Arithmetic order matches ``_pykernels.step_powerlaw`` exactly; keep the two in sync.
"""
import numpy as np

from libc.math cimport sqrt, pow, fabs, floor, isfinite, NAN


cdef inline double _abspow(double a, double e) noexcept nogil:
    cdef double twice = 2.0 * e
    cdef double r
    cdef long n, j
    if twice == floor(twice):
        n = <long>floor(e)
        r = 1.0
        for j in range(n):
            r = r * a
        if twice != 2.0 * n:
            r = r * sqrt(a)
        return r
    return pow(a, e)


cdef inline double _terms(double x, const double* coef, const double* expo,
                          const int* odd, int lo, int hi) noexcept nogil:
    cdef double a = fabs(x)
    cdef double sg = (x > 0) - (x < 0)
    cdef double s = 0.0, p, v
    cdef int j
    for j in range(lo, hi):
        p = _abspow(a, expo[j])
        if odd[j]:
            p = sg * p
        v = coef[j] * p
        if j == lo:
            s = v
        else:
            s = s + v
    return s


def tem_powerlaw(double[:, ::1] paths, const double[:, ::1] dB,
                 const long long[::1] offsets, const double[::1] w3,
                 const double[::1] coef, const double[::1] expo,
                 const int[::1] odd, const int[::1] ends,
                 double bound, double delta, int M, bint truncated, double blowup):
    """Advance every row of ``paths`` in place; returns the first faulty node per path (-1 if none)."""
    cdef Py_ssize_t n = paths.shape[0]
    cdef Py_ssize_t MT = dB.shape[1]
    cdef Py_ssize_t width = paths.shape[1]
    cdef int r = offsets.shape[0]
    cdef int e1 = ends[0], e2 = ends[1], e3 = ends[2]
    fault_arr = np.full(n, -1, dtype=np.int64)
    cdef long long[::1] fault = fault_arr
    cdef const double* cp = &coef[0] if coef.shape[0] else NULL
    cdef const double* ep = &expo[0] if expo.shape[0] else NULL
    cdef const int* op = &odd[0] if odd.shape[0] else NULL
    cdef Py_ssize_t i, k, q
    cdef int v
    cdef double x, xt, s1, s2, s3, drift, bb, xn
    cdef double* row
    with nogil:
        for i in range(n):
            row = &paths[i, 0]
            for k in range(MT):
                x = row[M + k]
                if truncated:
                    if fabs(x) <= bound:
                        xt = x
                    elif x > 0:
                        xt = bound
                    else:
                        xt = -bound
                else:
                    xt = x
                s1 = _terms(xt, cp, ep, op, 0, e1)
                s2 = _terms(xt, cp, ep, op, e1, e2)
                s3 = w3[0] * row[M + k - offsets[0]]
                for v in range(1, r):
                    s3 = s3 + w3[v] * row[M + k - offsets[v]]
                drift = s1 + s2 + s3
                bb = _terms(xt, cp, ep, op, e2, e3)
                xn = x + drift * delta + bb * dB[i, k]
                row[M + k + 1] = xn
                if not isfinite(xn) or (not truncated and fabs(xn) > blowup):
                    fault[i] = k + 1
                    for q in range(M + k + 2, width):
                        row[q] = NAN
                    break
    return fault_arr
