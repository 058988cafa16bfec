# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled RK4 march for  du/dtau = A u + n(u)  with an optional rank-one filter."""

from libc.math cimport expm1, log1p, fabs, pow
from scipy.linalg.cython_blas cimport dgemv, ddot, daxpy

import numpy as np
cimport numpy as cnp

cnp.import_array()


cdef inline double _remainder(double x, int kind, double p, double c) nogil:
    cdef double y, s
    if kind == 1:
        return x * x * (x + 3.0 * c)
    y = x / c
    if 1.0 + y > 0.0:
        return pow(c, p) * (expm1(p * log1p(y)) - p * y)
    s = c + x
    return pow(fabs(s), p - 1.0) * s - pow(c, p) - p * pow(c, p - 1.0) * x


cdef void _rhs(const double[:, ::1] A, double[::1] y, double[::1] out, int n_first,
               int kind, double p, double c) nogil:
    cdef char trans = b'T'
    cdef int m = A.shape[0]
    cdef int one = 1
    cdef double alpha = 1.0, beta = 0.0
    cdef int k
    # row-major A is column-major A^T, so 'T' gives A y
    dgemv(&trans, &m, &m, &alpha, <double*> &A[0, 0], &m, &y[0], &one, &beta, &out[0], &one)
    if kind:
        for k in range(n_first):
            out[n_first + k] += _remainder(y[k], kind, p, c)


def rk4_march(const double[:, ::1] A, double[::1] u, double dt, long nsteps, int n_first,
              double p=0.0, double c=1.0, int kind=0, left=None, right=None):
    """Advance u in place by nsteps RK4 steps.

    kind: 0 linear, 1 cubic remainder (p = 3), 2 general power remainder
    acting on the first n_first entries and feeding the next n_first rows.
    If left/right are given, u -= right * (left . u) after every step.
    """
    cdef int m = u.shape[0]
    cdef int one = 1
    cdef int i
    cdef long s
    cdef double h = 0.5 * dt, w6 = dt / 6.0, coef
    cdef double[::1] k1 = np.empty(m), k2 = np.empty(m), k3 = np.empty(m), k4 = np.empty(m)
    cdef double[::1] tmp = np.empty(m)
    cdef const double[::1] lv, rv
    cdef bint filt = left is not None
    if A.shape[0] != m or A.shape[1] != m:
        raise ValueError("matrix and state sizes differ")
    if filt:
        lv = np.ascontiguousarray(left, dtype=np.float64)
        rv = np.ascontiguousarray(right, dtype=np.float64)
        if lv.shape[0] != m or rv.shape[0] != m:
            raise ValueError("filter vectors have the wrong size")
    with nogil:
        for s in range(nsteps):
            _rhs(A, u, k1, n_first, kind, p, c)
            for i in range(m):
                tmp[i] = u[i] + h * k1[i]
            _rhs(A, tmp, k2, n_first, kind, p, c)
            for i in range(m):
                tmp[i] = u[i] + h * k2[i]
            _rhs(A, tmp, k3, n_first, kind, p, c)
            for i in range(m):
                tmp[i] = u[i] + dt * k3[i]
            _rhs(A, tmp, k4, n_first, kind, p, c)
            for i in range(m):
                u[i] += w6 * (k1[i] + 2.0 * (k2[i] + k3[i]) + k4[i])
            if filt:
                coef = -ddot(&m, <double*> &lv[0], &one, &u[0], &one)
                daxpy(&m, &coef, <double*> &rv[0], &one, &u[0], &one)
