"""Modulars, Luxemburg norms and the anisotropic norm on grid functions.

Integrals are node sums times the cell volume, matching the
finite-difference discretisation.
"""

from typing import NamedTuple, Sequence

import numpy as np

from anisolab import kernels
from anisolab.exponents import ExponentField, ExponentVector, critical_exponents
from anisolab.grid import Grid, GridFunction, discrete_gradient

__all__ = [
    "LuxemburgError",
    "modular",
    "luxemburg_norm",
    "anisotropic_norm",
    "norm_modular_bound_check",
    "embedding_probe",
    "NormModularBound",
    "EmbeddingProbe",
]


class LuxemburgError(RuntimeError):
    """Bisection for the Luxemburg gauge did not converge."""


def _values(u):
    return u.values if isinstance(u, GridFunction) else np.asarray(u, dtype=float)


def _exponent(p, shape):
    vals = p.values if isinstance(p, ExponentField) else p
    vals = np.asarray(vals, dtype=float)
    if vals.ndim and vals.shape != shape:
        raise ValueError(f"exponent shape {vals.shape} does not match field shape {shape}")
    return np.ascontiguousarray(np.broadcast_to(vals, shape), dtype=float).ravel()


def modular(u, p, cell_volume=None):
    """``sum |u|^p * cell_volume``.

    ``u`` is a :class:`GridFunction` or a node array (then ``cell_volume``
    is required); ``p`` is an :class:`ExponentField`, an array or a scalar.
    """
    vals = _values(u)
    vol = u.cell_volume if cell_volume is None else cell_volume
    pf = _exponent(p, vals.shape)
    return vol * kernels.modular_sum(np.ascontiguousarray(vals, dtype=float).ravel(), pf, 1.0)


def luxemburg_norm(u, p, tol=1e-12, cell_volume=None, max_iter=200):
    """Smallest ``lam > 0`` with ``modular(u / lam, p) <= 1``; zero for ``u == 0``."""
    if not tol > 0:
        raise ValueError("tol must be positive")
    vals = _values(u)
    vol = u.cell_volume if cell_volume is None else cell_volume
    pf = _exponent(p, vals.shape)
    flat = np.ascontiguousarray(vals, dtype=float).ravel()
    lam, iters, ok = kernels.luxemburg_gauge(flat, pf, float(vol), float(tol), int(max_iter))
    if not ok:
        raise LuxemburgError(f"Luxemburg bisection stopped after {iters} iterations")
    return float(lam)


def anisotropic_norm(u, grads: Sequence, pv: ExponentVector, tol=1e-12):
    """``|u|_{p0} + sum_i |D_i u|_{p_i}`` with Luxemburg norms."""
    if len(grads) != pv.dim:
        raise ValueError("need one gradient component per directional exponent")
    total = luxemburg_norm(u, pv.p0, tol)
    for g, p in zip(grads, pv.p):
        total += luxemburg_norm(g, p, tol)
    return total


class NormModularBound(NamedTuple):
    lhs: float
    rhs: float
    holds: bool


def norm_modular_bound_check(v, p: ExponentField, tol=1e-12):
    """Check ``|v|_p <= (modular(v, p) + 1) ** (1 / p_minus)``."""
    lhs = luxemburg_norm(v, p, tol)
    rhs = (modular(v, p) + 1.0) ** (1.0 / p.p_minus)
    return NormModularBound(lhs, rhs, lhs <= rhs * (1.0 + 10 * tol))


class EmbeddingProbe(NamedTuple):
    max_ratio: float
    ratios: np.ndarray
    bounded: bool


def embedding_probe(grid: Grid, pv: ExponentVector, q, samples=100, seed=0, cap=1e3):
    """Ratio ``|u|_q / (|u|_{p0} + sum |D_i u|_{p_i})`` over random Dirichlet fields.

    Requires ``q(x) < p_inf(x)`` at every node.  Half of the samples are
    white noise, half are smooth random trigonometric fields; ``bounded``
    reports whether the largest ratio stays below ``cap``.
    """
    qv = _exponent(q, grid.shape).reshape(grid.shape)
    if np.any(qv >= critical_exponents(pv).p_inf):
        raise ValueError("q must lie strictly below the critical exponent p_inf")
    rng = np.random.default_rng(seed)
    ratios = np.empty(samples)
    X = grid.coords / grid.active_radius
    for s in range(samples):
        if s % 2 == 0:
            raw = rng.standard_normal(grid.shape)
        else:
            freq = rng.uniform(0.5, 4.0, size=grid.dim)
            phase = rng.uniform(0, 2 * np.pi, size=grid.dim)
            raw = np.prod([np.cos(np.pi * f * x + ph) for f, x, ph in zip(freq, X, phase)], axis=0)
        u = grid.function(raw * rng.uniform(0.1, 10.0))
        if not np.any(u.values):
            ratios[s] = 0.0
            continue
        denom = anisotropic_norm(u, discrete_gradient(u), pv)
        ratios[s] = luxemburg_norm(u, qv) / denom
    mx = float(np.max(ratios))
    return EmbeddingProbe(mx, ratios, mx <= cap)
