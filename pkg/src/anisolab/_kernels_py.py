"""Numpy implementations of the hot kernels.

This module is the reference backend and the fallback used when the
compiled extension ``anisolab._kernels`` is unavailable.  Every function
takes flat, C-contiguous float64 arrays (the compiled backend has the
same signatures) so the two can be swapped at import time.
"""

import math

import numpy as np

BACKEND = "python"


def modular_sum(u, p, scale=1.0):
    """Return ``sum(|u / scale| ** p)`` over all entries (no volume factor)."""
    return float(np.sum(np.abs(u / scale) ** p))


def luxemburg_gauge(u, p, vol, tol=1e-12, max_iter=200):
    """Smallest ``lam`` with ``vol * sum(|u / lam| ** p) <= 1``.

    Returns ``(lam, iterations, converged)``.  The gauge is homogeneous,
    so the search runs on ``u / max|u|``: the bracket starts at
    ``meas ** (1 / p_min) + 1`` and is moved geometrically until it
    encloses the root; bisection then runs in log scale while the bracket
    is wide and arithmetically once it is within a factor of four.
    """
    umax = float(np.max(np.abs(u))) if u.size else 0.0
    if umax == 0.0:
        return 0.0, 0, True
    v = np.abs(u) / umax

    def rho(lam):
        return vol * float(np.sum((v / lam) ** p))

    pmin = float(np.min(p))
    meas = vol * u.size
    hi = meas ** (1.0 / pmin) + 1.0
    it = 0
    while rho(hi) > 1.0:
        hi *= 2.0
        it += 1
        if it >= max_iter:
            return hi * umax, it, False
    lo = 0.5 * hi
    while rho(lo) <= 1.0:
        hi = lo
        lo *= 0.5
        it += 1
        if it >= max_iter:
            return hi * umax, it, False
    while hi - lo > tol * hi:
        if hi > 4.0 * lo:
            mid = math.sqrt(lo * hi)
        else:
            mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if rho(mid) <= 1.0:
            hi = mid
        else:
            lo = mid
        it += 1
        if it >= max_iter:
            return hi * umax, it, False
    return hi * umax, it, True


def aniso_flux(xi, p, eps):
    """Regularised directional flux ``(xi**2 + eps**2) ** ((p - 2) / 2) * xi``."""
    if eps == 0.0:
        return np.sign(xi) * np.abs(xi) ** (p - 1.0)
    return (xi * xi + eps * eps) ** (0.5 * (p - 2.0)) * xi


def aniso_weights(xi, p, eps):
    """Lagged diffusion coefficients ``(xi**2 + eps**2) ** ((p - 2) / 2)``.

    A zero argument (``xi == 0`` and ``eps == 0``) is floored at 1e-300 so
    that the result is finite for every exponent.
    """
    r2 = np.maximum(xi * xi + eps * eps, 1e-300)
    return r2 ** (0.5 * (p - 2.0))


def lagged_apply(x, w, c0, shape, inv_h, active):
    """Apply ``sum_i D_i^T diag(w_i) D_i + diag(c0)`` restricted to active nodes.

    ``D_i`` is the forward difference along axis ``i`` with zero ghost
    values past the last node; ``x`` is masked by ``active`` before use
    and the output is zero on inactive nodes.
    """
    mask = active.reshape(shape).astype(bool)
    X = np.where(mask, x.reshape(shape), 0.0)
    y = c0.reshape(shape) * X
    for i in range(len(shape)):
        g = w[i].reshape(shape) * (np.diff(X, axis=i, append=0.0) * inv_h)
        y -= np.diff(g, axis=i, prepend=0.0) * inv_h
    return np.where(mask, y, 0.0).ravel()
