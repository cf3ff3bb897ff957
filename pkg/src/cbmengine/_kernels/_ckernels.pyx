# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels for the per-frame hot path.

Mirrors `_pykernels`; see that module for the contracts.
"""

from libc.math cimport exp, fabs, sqrt

import numpy as np

cdef double MAD_CONSISTENCY = 1.4826


cdef double _median_sorted(double[::1] buf, Py_ssize_t n) nogil:
    # buf[:n] must already be sorted
    if n % 2 == 1:
        return buf[n // 2]
    return 0.5 * (buf[n // 2 - 1] + buf[n // 2])


cdef void _insertion_sort(double[::1] buf, Py_ssize_t n) nogil:
    cdef Py_ssize_t i, j
    cdef double key
    for i in range(1, n):
        key = buf[i]
        j = i - 1
        while j >= 0 and buf[j] > key:
            buf[j + 1] = buf[j]
            j -= 1
        buf[j + 1] = key


def window_median(values):
    """Median of a (small) window of readings."""
    buf = np.array(values, dtype=np.float64)
    cdef double[::1] v = buf
    cdef Py_ssize_t n = v.shape[0]
    if n == 0:
        raise ValueError("window_median of empty window")
    _insertion_sort(v, n)
    return _median_sorted(v, n)


def robust_score(values, double value):
    """Robust z-score of `value` against a window of recent readings."""
    buf = np.array(values, dtype=np.float64)
    cdef double[::1] v = buf
    cdef Py_ssize_t n = v.shape[0]
    cdef Py_ssize_t i
    cdef double med, mad, scale, floor
    if n == 0:
        raise ValueError("robust_score with empty window")
    _insertion_sort(v, n)
    med = _median_sorted(v, n)
    for i in range(n):
        v[i] = fabs(v[i] - med)
    _insertion_sort(v, n)
    mad = _median_sorted(v, n)
    floor = 1e-6 + 0.01 * fabs(med)
    scale = MAD_CONSISTENCY * mad
    if scale < floor:
        scale = floor
    return fabs(value - med) / scale


def linear_fit(x, y):
    """Least-squares line fit. Returns (slope, intercept, residual_rms)."""
    xa = np.ascontiguousarray(x, dtype=np.float64)
    ya = np.ascontiguousarray(y, dtype=np.float64)
    cdef double[::1] xv = xa
    cdef double[::1] yv = ya
    cdef Py_ssize_t n = xv.shape[0]
    cdef Py_ssize_t i
    cdef double xm = 0.0, ym = 0.0, sxx = 0.0, sxy = 0.0
    cdef double slope, intercept, r, rss = 0.0
    if n == 0 or yv.shape[0] != n:
        raise ValueError("x and y must be non-empty and of equal length")
    for i in range(n):
        xm += xv[i]
        ym += yv[i]
    xm /= n
    ym /= n
    for i in range(n):
        sxx += (xv[i] - xm) * (xv[i] - xm)
        sxy += (xv[i] - xm) * (yv[i] - ym)
    if sxx == 0.0:
        raise ValueError("degenerate time axis: all x identical")
    slope = sxy / sxx
    intercept = ym - slope * xm
    for i in range(n):
        r = yv[i] - (intercept + slope * xv[i])
        rss += r * r
    return slope, intercept, sqrt(rss / n)


def weibull_sums(logt, double beta):
    """Exponentially weighted sums used by the Weibull profile likelihood."""
    la = np.ascontiguousarray(logt, dtype=np.float64)
    cdef double[::1] lt = la
    cdef Py_ssize_t n = lt.shape[0]
    cdef Py_ssize_t i
    cdef double m, w, s0 = 0.0, s1 = 0.0, s2 = 0.0
    if n == 0:
        raise ValueError("weibull_sums with empty input")
    m = lt[0]
    for i in range(1, n):
        if lt[i] > m:
            m = lt[i]
    for i in range(n):
        w = exp(beta * (lt[i] - m))
        s0 += w
        s1 += w * lt[i]
        s2 += w * lt[i] * lt[i]
    return s0, s1, s2
