"""Variable exponents and the exponents derived from them.

Exponents are sampled at grid nodes.  When an exponent was built from a
function of the coordinates, the function is kept so the field can be
evaluated at arbitrary points or re-sampled on another grid; otherwise
off-grid points take the value of the nearest node.
"""

from typing import Callable, NamedTuple, Optional, Sequence

import numpy as np

from anisolab.grid import Grid

__all__ = [
    "ExponentField",
    "ExponentVector",
    "CriticalExponents",
    "conjugate",
    "harmonic_mean_exponent",
    "critical_exponents",
]


class ExponentField:
    """Node-sampled exponent with ``1 < p_minus <= p(x) <= p_plus < inf``.

    ``p_minus`` and ``p_plus`` are always recomputed from the samples.
    """

    def __init__(self, values, grid: Optional[Grid] = None, func: Optional[Callable] = None):
        values = np.asarray(values, dtype=float)
        if grid is not None:
            values = np.broadcast_to(values, grid.shape).copy()
        if values.size == 0:
            raise ValueError("empty exponent field")
        self.values = values
        self.grid = grid
        self.func = func
        self.p_minus = float(np.min(values))
        self.p_plus = float(np.max(values))
        if not (self.p_minus > 1.0 and np.isfinite(self.p_plus)):
            raise ValueError(
                f"exponent range [{self.p_minus}, {self.p_plus}] violates 1 < p- <= p+ < inf"
            )

    @classmethod
    def constant(cls, value, grid):
        value = float(value)
        return cls(np.full(grid.shape, value), grid, func=lambda x: np.full(np.shape(x)[1:], value))

    @classmethod
    def from_function(cls, func, grid):
        """Sample ``func`` (coords of shape (dim, ...) -> values) at the grid nodes."""
        vals = np.broadcast_to(np.asarray(func(grid.coords), dtype=float), grid.shape)
        return cls(vals, grid, func=func)

    def at(self, points):
        """Exponent at points of shape (dim, M)."""
        if self.func is not None:
            pts = np.asarray(points, dtype=float)
            return np.broadcast_to(np.asarray(self.func(pts), dtype=float), pts.shape[1:])
        if self.grid is None:
            raise ValueError("exponent field has neither a grid nor a generating function")
        return self.values.ravel()[self.grid.nearest_index(points)]

    def on(self, grid):
        """Re-sample on another grid (requires the generating function)."""
        if self.func is None:
            raise ValueError("cannot re-sample a field without its generating function")
        return ExponentField.from_function(self.func, grid)

    def is_constant(self):
        return self.p_minus == self.p_plus

    def __repr__(self):
        return f"ExponentField(p_minus={self.p_minus:g}, p_plus={self.p_plus:g})"


class ExponentVector:
    """The exponents ``p0`` (zero-order term) and ``p1..pN`` (one per direction).

    ``p0(x) >= min_i p_i(x)`` is enforced at every node unless
    ``enforce_dominance=False``; :meth:`dominance_gap` reports it either way.
    """

    def __init__(self, p0: ExponentField, p: Sequence[ExponentField], enforce_dominance=True):
        self.p0 = p0
        self.p = list(p)
        if not self.p:
            raise ValueError("need at least one directional exponent")
        shape = p0.values.shape
        if any(q.values.shape != shape for q in self.p):
            raise ValueError("exponent fields live on different grids")
        self.enforce_dominance = enforce_dominance
        gap = self.dominance_gap()
        if enforce_dominance and gap > 0:
            bad = int(np.count_nonzero(p0.values < self._pmin()))
            raise ValueError(
                f"p0 must dominate min_i p_i at every node; violated at "
                f"{bad} nodes (worst gap {gap:.3g})"
            )
        self.underline_p = min([p0.p_minus] + [q.p_minus for q in self.p])
        self.overline_p_max = max([p0.p_plus] + [q.p_plus for q in self.p])

    def _pmin(self):
        return np.min(np.stack([q.values for q in self.p]), axis=0)

    def dominance_gap(self):
        """``max_x (min_i p_i(x) - p0(x))``; positive when ``p0`` fails to dominate."""
        return float(np.max(self._pmin() - self.p0.values))

    @property
    def dim(self):
        return len(self.p)

    @property
    def grid(self):
        return self.p0.grid

    def stacked(self):
        """Directional exponents as one array of shape (N, *grid_shape)."""
        return np.stack([q.values for q in self.p])

    def at(self, points):
        """Directional exponents at points (dim, M), shape (N, M)."""
        return np.stack([q.at(points) for q in self.p])

    def on(self, grid):
        return ExponentVector(self.p0.on(grid), [q.on(grid) for q in self.p],
                              enforce_dominance=self.enforce_dominance)


class CriticalExponents(NamedTuple):
    p_star: np.ndarray
    p_inf: np.ndarray


def conjugate(p: ExponentField) -> ExponentField:
    """Nodewise conjugate exponent ``p / (p - 1)``."""
    func = None
    if p.func is not None:
        f = p.func

        def func(x):
            q = np.asarray(f(x), dtype=float)
            return q / (q - 1.0)

    return ExponentField(p.values / (p.values - 1.0), p.grid, func=func)


def harmonic_mean_exponent(pv: ExponentVector) -> ExponentField:
    """``N / sum_i (1 / p_i(x))`` at every node."""
    P = pv.stacked()
    vals = pv.dim / np.sum(1.0 / P, axis=0)
    func = None
    if all(q.func is not None for q in pv.p):
        funcs = [q.func for q in pv.p]

        def func(x):
            return len(funcs) / sum(1.0 / np.asarray(f(x), dtype=float) for f in funcs)

    return ExponentField(vals, pv.grid, func=func)


def critical_exponents(pv: ExponentVector) -> CriticalExponents:
    """Sobolev exponent ``N pbar / (N - pbar)`` (infinite where ``pbar >= N``) and
    its maximum with ``max_i p_i``.
    """
    n = pv.dim
    pbar = harmonic_mean_exponent(pv).values
    below = pbar < n
    p_star = np.full(pbar.shape, np.inf)
    p_star[below] = n * pbar[below] / (n - pbar[below])
    p_inf = np.maximum(p_star, np.max(pv.stacked(), axis=0))
    return CriticalExponents(p_star, p_inf)
