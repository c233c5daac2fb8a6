"""Truncated domains, rectangular grids, finite differences and cutoffs.

A :class:`Grid` is the box ``[-L, L]^N`` sampled with ``m`` nodes per
axis.  The ball ``{|x| < n}`` of radius ``active_radius`` is the truncated
domain; nodes outside it carry zero (homogeneous Dirichlet data).

Differences are forward differences with zero ghost values, and the
discrete divergence is minus their adjoint, so that

    sum(D_i(u) * v) == -sum(u * div_component(v, i))

holds exactly for every pair of grid arrays.
"""

from dataclasses import dataclass
from functools import cached_property
import math

import numpy as np

__all__ = [
    "Grid",
    "GridFunction",
    "truncate",
    "eta_R",
    "h_j",
    "psi_l",
    "forward_difference",
    "backward_difference",
    "discrete_gradient",
    "discrete_divergence",
    "restrict_to_ball",
]


@dataclass(frozen=True)
class Grid:
    """Uniform node grid on ``[-extent, extent]^dim`` with an active ball.

    Parameters
    ----------
    dim : int
        Space dimension N (at least 2).
    extent : float
        Half-width L of the box.
    nodes_per_axis : int
        Number of nodes m per axis; the step is ``2L / (m - 1)``.
    active_radius : float
        Radius n of the truncated domain; must not exceed ``extent``.
    """

    dim: int
    extent: float
    nodes_per_axis: int
    active_radius: float

    def __post_init__(self):
        if self.dim < 2:
            raise ValueError(f"dimension must be >= 2, got {self.dim}")
        if self.nodes_per_axis < 3:
            raise ValueError("need at least 3 nodes per axis")
        if not self.extent > 0:
            raise ValueError("extent must be positive")
        if not 0 < self.active_radius <= self.extent:
            raise ValueError(
                f"active radius {self.active_radius} must lie in (0, extent={self.extent}]"
            )

    @classmethod
    def with_mesh(cls, dim, active_radius, mesh, extent=None):
        """Grid with a prescribed step; the extent defaults to ``n + 1``.

        Raises ``ValueError`` when ``2 * extent / mesh`` is not an integer.
        """
        if extent is None:
            extent = active_radius + 1.0
        cells = 2.0 * extent / mesh
        ncell = int(round(cells))
        if abs(cells - ncell) > 1e-9 * max(1.0, cells):
            raise ValueError(
                f"mesh {mesh} does not divide the box [-{extent}, {extent}] evenly"
            )
        return cls(dim, float(extent), ncell + 1, float(active_radius))

    @property
    def mesh(self):
        return 2.0 * self.extent / (self.nodes_per_axis - 1)

    @property
    def steps(self):
        return (self.mesh,) * self.dim

    @property
    def shape(self):
        return (self.nodes_per_axis,) * self.dim

    @property
    def size(self):
        return self.nodes_per_axis**self.dim

    @property
    def cell_volume(self):
        return self.mesh**self.dim

    def axis(self):
        """Node coordinates along one axis, ``x_j = -L + j h``."""
        return -self.extent + self.mesh * np.arange(self.nodes_per_axis)

    @cached_property
    def coords(self):
        """Coordinate array of shape ``(dim, *shape)``."""
        ax = self.axis()
        return np.stack(np.meshgrid(*([ax] * self.dim), indexing="ij"))

    @cached_property
    def radius(self):
        return np.sqrt(np.sum(self.coords**2, axis=0))

    @cached_property
    def active(self):
        """Boolean mask of nodes inside the open ball of radius n."""
        return self.radius < self.active_radius

    @property
    def active_measure(self):
        return float(np.count_nonzero(self.active)) * self.cell_volume

    @property
    def box_measure(self):
        return (2.0 * self.extent) ** self.dim

    def zeros(self):
        return GridFunction(self, np.zeros(self.shape))

    def function(self, values):
        """Wrap ``values`` as a grid function, zeroing the exterior of the ball."""
        v = np.broadcast_to(np.asarray(values, dtype=float), self.shape)
        return GridFunction(self, np.where(self.active, v, 0.0))

    def nearest_index(self, points):
        """Flat index of the node nearest to each point of ``points`` (dim, M)."""
        pts = np.asarray(points, dtype=float)
        j = np.rint((pts + self.extent) / self.mesh).astype(np.int64)
        j = np.clip(j, 0, self.nodes_per_axis - 1)
        return np.ravel_multi_index(tuple(j), self.shape)

    def sample_points(self, rng, count):
        """``count`` points drawn uniformly from the box, shape (dim, count)."""
        return rng.uniform(-self.extent, self.extent, size=(self.dim, count))


@dataclass
class GridFunction:
    """Scalar field sampled at the nodes of a grid."""

    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != self.grid.shape:
            raise ValueError(
                f"values of shape {self.values.shape} do not match grid {self.grid.shape}"
            )
        if not np.all(np.isfinite(self.values)):
            raise ValueError("grid function has non-finite values")

    @property
    def cell_volume(self):
        return self.grid.cell_volume

    def with_values(self, values):
        return GridFunction(self.grid, values)

    def is_dirichlet(self):
        """True when every node outside the active ball is zero."""
        return not np.any(self.values[~self.grid.active])


def truncate(r, k):
    """Truncation at level k: ``max(-k, min(k, r))``."""
    if not k > 0:
        raise ValueError("truncation level must be positive")
    return np.clip(r, -k, k) if np.ndim(r) else float(min(k, max(-k, r)))


def _ramp(r, R):
    # 1 on [0, R), R + 1 - r on [R, R + 1), 0 beyond
    return np.clip(R + 1.0 - np.asarray(r, dtype=float), 0.0, 1.0)


def eta_R(r, R):
    """Piecewise-linear radial cutoff: 1 below R, 0 beyond R + 1."""
    if not R > 0:
        raise ValueError("R must be positive")
    out = _ramp(r, R)
    return out if np.ndim(out) else float(out)


def h_j(s, j):
    """Even cutoff in s: 1 on ``|s| <= j``, ``1 - (|s| - j)`` on the band, 0 past ``j + 1``."""
    if not j > 0:
        raise ValueError("j must be positive")
    out = _ramp(np.abs(s), j)
    return out if np.ndim(out) else float(out)


def psi_l(x, l):
    """Lipschitz cutoff equal to 1 on the ball of radius l and 0 outside radius l + 1.

    ``x`` is a point or an array of points with the coordinate axis first.
    """
    if not l > 0:
        raise ValueError("l must be positive")
    r = np.sqrt(np.sum(np.asarray(x, dtype=float) ** 2, axis=0))
    return eta_R(r, l)


def forward_difference(values, axis, h):
    """``(v[j+1] - v[j]) / h`` along ``axis`` with a zero ghost past the end."""
    return np.diff(values, axis=axis, append=0.0) / h


def backward_difference(values, axis, h):
    """``(v[j] - v[j-1]) / h`` along ``axis`` with a zero ghost before the start."""
    return np.diff(values, axis=axis, prepend=0.0) / h


def discrete_gradient(u):
    """Forward-difference gradient of a grid function.

    The function is masked to the active ball first, so neighbours outside
    the truncated domain contribute zero.  Returns N grid functions defined
    at every node; components are nonzero only on active nodes and their
    lower neighbours.
    """
    g = u.grid
    masked = np.where(g.active, u.values, 0.0)
    return [
        GridFunction(g, forward_difference(masked, i, g.mesh)) for i in range(g.dim)
    ]


def discrete_divergence(fields, grid):
    """Minus the adjoint of :func:`discrete_gradient` applied to N node arrays."""
    out = np.zeros(grid.shape)
    for i, f in enumerate(fields):
        v = f.values if isinstance(f, GridFunction) else f
        out += backward_difference(v, i, grid.mesh)
    return out


def ball_slices(grid, R):
    """Index slices of the smallest node-aligned sub-box covering the ball of radius R."""
    h = grid.mesh
    half = math.ceil(R / h - 1e-9)
    lo = (grid.extent / h) - half
    ilo = int(round(lo))
    if abs(lo - ilo) > 1e-9 or ilo < 0:
        raise ValueError(f"ball of radius {R} is not node-aligned inside the grid")
    return tuple(slice(ilo, ilo + 2 * half + 1) for _ in range(grid.dim))


def restrict_to_ball(values, grid, R):
    """Values at the nodes with ``|x| < R``, in a grid-independent order.

    Grids with the same step whose extents are multiples of the step share
    this node set, which makes fields from different truncation radii
    directly comparable.
    """
    sl = ball_slices(grid, R)
    sub = np.asarray(values)[sl]
    half = (sl[0].stop - sl[0].start) // 2
    # radii from integer offsets so that every grid computes the same mask
    off = np.arange(-half, half + 1) * grid.mesh
    r2 = sum(np.meshgrid(*([off**2] * grid.dim), indexing="ij"))
    return sub[np.sqrt(r2) < R]
