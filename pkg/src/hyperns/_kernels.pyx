# cython: language_level=3
"""Compiled stencil kernels; same contracts as ``_kernels_py``."""

import numpy as np
cimport numpy as cnp

cnp.import_array()


def divergence(double[:, ::1] u1, double[:, ::1] u2, double h):
    cdef Py_ssize_t n = u1.shape[1], i, j
    cdef double ih = 1.0 / h
    out = np.empty((n, n))
    cdef double[:, ::1] d = out
    for i in range(n):
        for j in range(n):
            d[i, j] = (u1[i + 1, j] - u1[i, j] + u2[i, j + 1] - u2[i, j]) * ih
    return out


def gradient(double[:, ::1] p, double h):
    cdef Py_ssize_t n = p.shape[0], i, j
    cdef double ih = 1.0 / h
    g1 = np.zeros((n + 1, n))
    g2 = np.zeros((n, n + 1))
    cdef double[:, ::1] a = g1
    cdef double[:, ::1] b = g2
    for i in range(1, n):
        for j in range(n):
            a[i, j] = (p[i, j] - p[i - 1, j]) * ih
    for i in range(n):
        for j in range(1, n):
            b[i, j] = (p[i, j] - p[i, j - 1]) * ih
    return g1, g2


def laplacian(double[:, ::1] u1, double[:, ::1] u2, double h):
    cdef Py_ssize_t n = u1.shape[1], i, j
    cdef double ih2 = 1.0 / (h * h)
    cdef double dn, up, c
    l1 = np.zeros((n + 1, n))
    l2 = np.zeros((n, n + 1))
    cdef double[:, ::1] a = l1
    cdef double[:, ::1] b = l2
    for i in range(1, n):
        for j in range(n):
            c = u1[i, j]
            dn = u1[i, j - 1] if j > 0 else -c
            up = u1[i, j + 1] if j < n - 1 else -c
            a[i, j] = (u1[i + 1, j] + u1[i - 1, j] + up + dn - 4.0 * c) * ih2
    for i in range(n):
        for j in range(1, n):
            c = u2[i, j]
            dn = u2[i - 1, j] if i > 0 else -c
            up = u2[i + 1, j] if i < n - 1 else -c
            b[i, j] = (u2[i, j + 1] + u2[i, j - 1] + up + dn - 4.0 * c) * ih2
    return l1, l2


cdef inline double _corner_flux(double[:, ::1] u1, double[:, ::1] u2,
                                Py_ssize_t i, Py_ssize_t j, Py_ssize_t n) nogil:
    # u1 averaged in y and u2 averaged in x at corner (i, j); walls give 0
    if i == 0 or i == n or j == 0 or j == n:
        return 0.0
    return 0.25 * (u1[i, j - 1] + u1[i, j]) * (u2[i - 1, j] + u2[i, j])


def advection(double[:, ::1] u1, double[:, ::1] u2, double h):
    cdef Py_ssize_t n = u1.shape[1], i, j
    cdef double ih = 1.0 / h
    cdef double cl, cr
    a1 = np.zeros((n + 1, n))
    a2 = np.zeros((n, n + 1))
    cdef double[:, ::1] a = a1
    cdef double[:, ::1] b = a2
    for i in range(1, n):
        for j in range(n):
            cr = 0.5 * (u1[i, j] + u1[i + 1, j])
            cl = 0.5 * (u1[i - 1, j] + u1[i, j])
            a[i, j] = (cr * cr - cl * cl
                       + _corner_flux(u1, u2, i, j + 1, n)
                       - _corner_flux(u1, u2, i, j, n)) * ih
    for i in range(n):
        for j in range(1, n):
            cr = 0.5 * (u2[i, j] + u2[i, j + 1])
            cl = 0.5 * (u2[i, j - 1] + u2[i, j])
            b[i, j] = (_corner_flux(u1, u2, i + 1, j, n)
                       - _corner_flux(u1, u2, i, j, n)
                       + cr * cr - cl * cl) * ih
    return a1, a2


def strain_rate(double[:, ::1] u1, double[:, ::1] u2, double h):
    cdef Py_ssize_t n = u1.shape[1], i, j
    cdef double ih = 1.0 / h
    cdef double dy, dx, lo, hi
    s11 = np.empty((n, n))
    s22 = np.empty((n, n))
    s12 = np.zeros((n + 1, n + 1))
    cdef double[:, ::1] a = s11
    cdef double[:, ::1] b = s22
    cdef double[:, ::1] c = s12
    for i in range(n):
        for j in range(n):
            a[i, j] = (u1[i + 1, j] - u1[i, j]) * ih
            b[i, j] = (u2[i, j + 1] - u2[i, j]) * ih
    for i in range(n + 1):
        for j in range(n + 1):
            if 0 < i < n:
                lo = u1[i, j - 1] if j > 0 else -u1[i, 0]
                hi = u1[i, j] if j < n else -u1[i, n - 1]
                dy = hi - lo
            else:
                dy = 0.0
            if 0 < j < n:
                lo = u2[i - 1, j] if i > 0 else -u2[0, j]
                hi = u2[i, j] if i < n else -u2[n - 1, j]
                dx = hi - lo
            else:
                dx = 0.0
            c[i, j] = 0.5 * (dy + dx) * ih
    return s11, s22, s12


def stress_divergence(double[:, ::1] s11, double[:, ::1] s22,
                      double[:, ::1] s12, double h):
    cdef Py_ssize_t n = s11.shape[0], i, j
    cdef double ih = 1.0 / h
    f1 = np.zeros((n + 1, n))
    f2 = np.zeros((n, n + 1))
    cdef double[:, ::1] a = f1
    cdef double[:, ::1] b = f2
    for i in range(1, n):
        for j in range(n):
            a[i, j] = (s11[i, j] - s11[i - 1, j] + s12[i, j + 1] - s12[i, j]) * ih
    for i in range(n):
        for j in range(1, n):
            b[i, j] = (s12[i + 1, j] - s12[i, j] + s22[i, j] - s22[i, j - 1]) * ih
    return f1, f2


def burgers_flux(double[::1] u, double h):
    cdef Py_ssize_t m = u.shape[0], i
    cdef double s = 0.5 / h
    out = np.zeros(m)
    cdef double[::1] o = out
    for i in range(1, m - 1):
        o[i] = (u[i + 1] * u[i + 1] - u[i - 1] * u[i - 1]) * s
    return out


def second_difference(double[::1] u, double h):
    cdef Py_ssize_t m = u.shape[0], i
    cdef double ih2 = 1.0 / (h * h)
    out = np.zeros(m)
    cdef double[::1] o = out
    for i in range(1, m - 1):
        o[i] = (u[i + 1] - 2.0 * u[i] + u[i - 1]) * ih2
    return out


def toeplitz_tridiag_solve(double diag, double off, double[::1] rhs):
    cdef Py_ssize_t m = rhs.shape[0], i
    cdef double den
    cp_arr = np.empty(m)
    dp_arr = np.empty(m)
    x_arr = np.empty(m)
    cdef double[::1] cp = cp_arr
    cdef double[::1] dp = dp_arr
    cdef double[::1] x = x_arr
    cp[0] = off / diag
    dp[0] = rhs[0] / diag
    for i in range(1, m):
        den = diag - off * cp[i - 1]
        cp[i] = off / den
        dp[i] = (rhs[i] - off * dp[i - 1]) / den
    x[m - 1] = dp[m - 1]
    for i in range(m - 2, -1, -1):
        x[i] = dp[i] - cp[i] * x[i + 1]
    return x_arr
