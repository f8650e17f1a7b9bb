# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled O(n^2) pair sum for the regularised derivative estimator.

For each row ``i`` the sum over ``j < i`` is accumulated in a fixed order
(squared distances are first gathered into a row buffer so the exponential
pass vectorises), and the row totals are combined serially with Neumaier
compensation.  The result depends only on the input, never on scheduling.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport exp, fabs

cnp.import_array()


cdef double _neumaier(const double[::1] v) noexcept nogil:
    cdef double s = 0.0, comp = 0.0, t, x
    cdef Py_ssize_t i
    for i in range(v.shape[0]):
        x = v[i]
        t = s + x
        if fabs(s) >= fabs(x):
            comp += (s - t) + x
        else:
            comp += (x - t) + s
        s = t
    return s + comp


cdef void _rows_d3(const double[::1] x0, const double[::1] x1, const double[::1] x2,
                   double inv2eps, double[::1] rows) noexcept nogil:
    cdef Py_ssize_t n1 = x0.shape[0], i, j
    cdef double acc, a, b, c, xi0, xi1, xi2
    for i in range(1, n1):
        xi0 = x0[i]
        xi1 = x1[i]
        xi2 = x2[i]
        acc = 0.0
        for j in range(i):
            a = xi0 - x0[j]
            b = xi1 - x1[j]
            c = xi2 - x2[j]
            acc = acc + a * exp(-(a * a + b * b + c * c) * inv2eps)
        rows[i] = acc


cdef void _rows_d2(const double[::1] x0, const double[::1] x1,
                   double inv2eps, double[::1] rows) noexcept nogil:
    cdef Py_ssize_t n1 = x0.shape[0], i, j
    cdef double acc, a, b, xi0, xi1
    for i in range(1, n1):
        xi0 = x0[i]
        xi1 = x1[i]
        acc = 0.0
        for j in range(i):
            a = xi0 - x0[j]
            b = xi1 - x1[j]
            acc = acc + a * exp(-(a * a + b * b) * inv2eps)
        rows[i] = acc


cdef void _rows_general(const double[:, ::1] xt, double inv2eps,
                        double[::1] r2, double[::1] rows) noexcept nogil:
    cdef Py_ssize_t d = xt.shape[0], n1 = xt.shape[1], i, j, k
    cdef double acc, diff, xik
    for i in range(1, n1):
        for j in range(i):
            r2[j] = 0.0
        for k in range(d):
            xik = xt[k, i]
            for j in range(i):
                diff = xik - xt[k, j]
                r2[j] = r2[j] + diff * diff
        xik = xt[0, i]
        acc = 0.0
        for j in range(i):
            acc = acc + (xik - xt[0, j]) * exp(-r2[j] * inv2eps)
        rows[i] = acc


def pair_row_sums(const double[:, ::1] xt, double eps):
    """Row sums ``sum_{j<i} (x_i - x_j)_1 exp(-|x_i - x_j|^2 / (2 eps))``.

    ``xt`` holds the path component-major, shape ``(d, n+1)``.
    """
    cdef Py_ssize_t d = xt.shape[0], n1 = xt.shape[1]
    cdef double inv2eps = 0.5 / eps
    rows_arr = np.zeros(n1)
    cdef double[::1] rows = rows_arr
    cdef double[::1] r2
    with nogil:
        if d == 3:
            _rows_d3(xt[0], xt[1], xt[2], inv2eps, rows)
        elif d == 2:
            _rows_d2(xt[0], xt[1], inv2eps, rows)
    if d != 2 and d != 3:
        r2 = np.zeros(n1)
        with nogil:
            _rows_general(xt, inv2eps, r2, rows)
    return rows_arr


def pair_sum(const double[:, ::1] xt, double eps):
    """Compensated total of :func:`pair_row_sums`."""
    cdef double[::1] rows = pair_row_sums(xt, eps)
    cdef double out
    with nogil:
        out = _neumaier(rows)
    return out
