# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels; signatures mirror ``anisolab._kernels_py``.

Powers are evaluated as ``exp(q * log(a))``; the Luxemburg bisection
takes the logarithms of ``|u|`` once and needs one ``exp`` per node and
iteration.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport exp, fabs, log, sqrt, INFINITY

cnp.import_array()

BACKEND = "cython"

cdef enum:
    BLOCK = 128


cdef inline double _pow_pos(double a, double q) noexcept nogil:
    # a >= 0, q > 0
    if a == 0.0:
        return 0.0
    return exp(q * log(a))


cdef double _modular_block(const double* u, const double* p, double inv,
                           Py_ssize_t n) noexcept nogil:
    # fixed-order pairwise reduction: deterministic and well conditioned
    cdef Py_ssize_t k, half
    cdef double acc = 0.0
    if n <= BLOCK:
        for k in range(n):
            acc += _pow_pos(fabs(u[k] * inv), p[k])
        return acc
    half = n // 2
    return (_modular_block(u, p, inv, half)
            + _modular_block(u + half, p + half, inv, n - half))


cdef double _gauge_block(const double* lu, const double* p, double loglam,
                         Py_ssize_t n) noexcept nogil:
    cdef Py_ssize_t k, half
    cdef double acc = 0.0
    if n <= BLOCK:
        for k in range(n):
            acc += exp(p[k] * (lu[k] - loglam))
        return acc
    half = n // 2
    return (_gauge_block(lu, p, loglam, half)
            + _gauge_block(lu + half, p + half, loglam, n - half))


def modular_sum(const double[::1] u, const double[::1] p, double scale=1.0):
    cdef double acc
    if u.shape[0] == 0:
        return 0.0
    with nogil:
        acc = _modular_block(&u[0], &p[0], 1.0 / scale, u.shape[0])
    return acc


cdef inline double _rho(const double[::1] lu, const double[::1] p, double lam,
                        double vol) noexcept nogil:
    return vol * _gauge_block(&lu[0], &p[0], log(lam), lu.shape[0])


def luxemburg_gauge(const double[::1] u, const double[::1] p, double vol,
                    double tol=1e-12, int max_iter=200):
    cdef Py_ssize_t k, n = u.shape[0]
    cdef double umax = 0.0, pmin, hi, lo, mid, a, lmax
    cdef int it = 0
    for k in range(n):
        if fabs(u[k]) > umax:
            umax = fabs(u[k])
    if umax == 0.0:
        return 0.0, 0, True
    lu_arr = np.empty(n, dtype=np.float64)
    cdef double[::1] lu = lu_arr
    # the gauge is homogeneous: search on u / max|u|
    lmax = log(umax)
    pmin = p[0]
    for k in range(n):
        a = fabs(u[k])
        lu[k] = log(a) - lmax if a > 0.0 else -INFINITY
        if p[k] < pmin:
            pmin = p[k]
    hi = exp(log(vol * n) / pmin) + 1.0
    with nogil:
        while _rho(lu, p, hi, vol) > 1.0:
            hi *= 2.0
            it += 1
            if it >= max_iter:
                break
    if it >= max_iter:
        return hi * umax, it, False
    lo = 0.5 * hi
    with nogil:
        while _rho(lu, p, lo, vol) <= 1.0:
            hi = lo
            lo *= 0.5
            it += 1
            if it >= max_iter:
                break
    if it >= max_iter:
        return hi * umax, it, False
    with nogil:
        while hi - lo > tol * hi:
            if hi > 4.0 * lo:
                mid = sqrt(lo * hi)
            else:
                mid = 0.5 * (lo + hi)
            if mid <= lo or mid >= hi:
                break
            if _rho(lu, p, mid, vol) <= 1.0:
                hi = mid
            else:
                lo = mid
            it += 1
            if it >= max_iter:
                break
    return hi * umax, it, it < max_iter


def aniso_flux(const double[::1] xi, const double[::1] p, double eps):
    cdef Py_ssize_t k, n = xi.shape[0]
    out = np.empty(n, dtype=np.float64)
    cdef double[::1] o = out
    cdef double e2 = eps * eps, x
    with nogil:
        if eps == 0.0:
            for k in range(n):
                x = xi[k]
                if x == 0.0 or p[k] == 2.0:
                    o[k] = x
                elif x > 0.0:
                    o[k] = exp((p[k] - 1.0) * log(x))
                else:
                    o[k] = -exp((p[k] - 1.0) * log(-x))
        else:
            for k in range(n):
                x = xi[k]
                if p[k] == 2.0:
                    o[k] = x
                else:
                    o[k] = exp(0.5 * (p[k] - 2.0) * log(x * x + e2)) * x
    return out


def aniso_weights(const double[::1] xi, const double[::1] p, double eps):
    cdef Py_ssize_t k, n = xi.shape[0]
    out = np.empty(n, dtype=np.float64)
    cdef double[::1] o = out
    cdef double e2 = eps * eps, r2
    with nogil:
        for k in range(n):
            r2 = xi[k] * xi[k] + e2
            if r2 < 1e-300:
                r2 = 1e-300
            o[k] = 1.0 if p[k] == 2.0 else exp(0.5 * (p[k] - 2.0) * log(r2))
    return out


def lagged_apply(const double[::1] x, const double[:, ::1] w,
                 const double[::1] c0, tuple shape, double inv_h,
                 const unsigned char[::1] active):
    cdef Py_ssize_t m = x.shape[0], k, s, n_i, axis, o, j, t, outer, base
    cdef Py_ssize_t ndim = len(shape)
    cdef double g, ih2 = inv_h * inv_h
    out = np.zeros(m, dtype=np.float64)
    cdef double[::1] y = out
    xm_arr = np.zeros(m, dtype=np.float64)
    cdef double[::1] xm = xm_arr
    with nogil:
        for k in range(m):
            if active[k]:
                xm[k] = x[k]
                y[k] = c0[k] * x[k]
    s = 1
    for axis in range(ndim - 1, -1, -1):
        n_i = shape[axis]
        outer = m // (n_i * s)
        with nogil:
            for o in range(outer):
                for j in range(n_i - 1):
                    base = (o * n_i + j) * s
                    for t in range(s):
                        k = base + t
                        g = w[axis, k] * (xm[k + s] - xm[k]) * ih2
                        y[k] -= g
                        y[k + s] += g
                # last node along the axis sees a zero ghost
                base = (o * n_i + n_i - 1) * s
                for t in range(s):
                    k = base + t
                    y[k] += w[axis, k] * xm[k] * ih2
        s *= n_i
    with nogil:
        for k in range(m):
            if not active[k]:
                y[k] = 0.0
    return out
