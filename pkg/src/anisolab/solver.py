"""Regularised problems on truncated domains and their discrete solution.

The discrete problem on the ball of radius n reads, at every active node,

    F(u) = -div_h a(x, T_n(u), D u) + H^n(x, u, D u) + |u|^(p0-2) u - f^n = 0,

with ``D`` the forward-difference gradient and ``div_h`` minus its
adjoint.  :func:`solve` runs a damped lagged-coefficient (Picard)
iteration; :func:`energy_oracle` minimises the discrete energy directly
and serves as an independent check in the variational case.
"""

from dataclasses import dataclass, field
import logging
from typing import List, Optional

import numpy as np

from anisolab import kernels
from anisolab.exponents import ExponentVector, conjugate
from anisolab.flux import FluxModel, ProblemSpec, regularize_lower_order, truncated_flux
from anisolab.grid import Grid, GridFunction, discrete_divergence, forward_difference
from anisolab.spaces import luxemburg_norm

__all__ = [
    "RegularizedProblem",
    "SolveReport",
    "LinearSolveError",
    "ConvergenceError",
    "regularize_source",
    "build_regularized",
    "assemble_residual",
    "residual_norm",
    "energy",
    "energy_gradient",
    "solve",
    "energy_oracle",
    "pcg",
]

log = logging.getLogger(__name__)


class LinearSolveError(RuntimeError):
    """The conjugate-gradient inner solve broke down."""


class ConvergenceError(RuntimeError):
    pass


@dataclass
class RegularizedProblem:
    """Problem on the ball of radius ``n`` with regularised data."""

    spec: ProblemSpec
    n: float
    grid: Grid
    f_n: GridFunction
    model_n: FluxModel
    exponents: ExponentVector

    def __post_init__(self):
        g = self.grid
        self.p = self.exponents.stacked()
        self.p0 = self.exponents.p0.values
        self.p0_conj = conjugate(self.exponents.p0).values
        self.coords = g.coords

    @property
    def active(self):
        return self.grid.active


@dataclass
class SolveReport:
    iterations: int = 0
    residual_history: List[float] = field(default_factory=list)
    damping_history: List[float] = field(default_factory=list)
    cg_iterations: List[int] = field(default_factory=list)
    shift_history: List[float] = field(default_factory=list)
    converged: bool = False
    message: str = ""

    @property
    def final_residual(self):
        return self.residual_history[-1] if self.residual_history else float("nan")

    @property
    def damping_used(self):
        return min(self.damping_history) if self.damping_history else 1.0


def regularize_source(f: GridFunction, n) -> GridFunction:
    """``f / (1 + |f| / n)`` inside the ball of radius n, zero outside."""
    if not n > 0:
        raise ValueError("n must be positive")
    g = f.grid
    inside = g.radius < n
    vals = f.values / (1.0 + np.abs(f.values) / n)
    return GridFunction(g, np.where(inside, vals, 0.0))


def build_regularized(spec: ProblemSpec, n, grid: Optional[Grid] = None) -> RegularizedProblem:
    """Regularised problem for radius ``n``; the grid defaults to ``spec.grid_for(n)``."""
    grid = spec.grid_for(n) if grid is None else grid
    if abs(grid.active_radius - n) > 1e-12:
        raise ValueError("grid active radius must equal n")
    pv = spec.exponents_on(grid)
    f_n = regularize_source(spec.source_on(grid), n)
    model_n = regularize_lower_order(truncated_flux(spec.flux, n), n)
    return RegularizedProblem(spec, float(n), grid, f_n, model_n, pv)


def _masked(u, rp):
    vals = u.values if isinstance(u, GridFunction) else np.asarray(u, dtype=float)
    return np.where(rp.active, vals, 0.0)


def _gradient(U, grid):
    return np.stack([forward_difference(U, i, grid.mesh) for i in range(grid.dim)])


def _zero_order(U, p0):
    return np.sign(U) * np.abs(U) ** (p0 - 1.0)


def assemble_residual(u, rp: RegularizedProblem) -> GridFunction:
    """Nodewise residual of the discrete regularised equation (zero off the ball)."""
    U = _masked(u, rp)
    xi = _gradient(U, rp.grid)
    A = rp.model_n.flux(rp.coords, U, xi, rp.p)
    Hn = rp.model_n.lower(rp.coords, U, xi, rp.p)
    F = -discrete_divergence(A, rp.grid) + Hn + _zero_order(U, rp.p0) - rp.f_n.values
    return GridFunction(rp.grid, np.where(rp.active, F, 0.0))


def residual_norm(F, rp: RegularizedProblem, tol=1e-12):
    """Dual norm of a residual: its Luxemburg norm with exponent ``p0'``."""
    vals = F.values if isinstance(F, GridFunction) else F
    return luxemburg_norm(vals, rp.p0_conj, tol, cell_volume=rp.grid.cell_volume)


def _check_variational(rp):
    m = rp.model_n
    if not m.variational or m.H is not None:
        raise ValueError("energy is only defined for the built-in gradient flux with H = 0")


def _shift_next(U, axis):
    # U[j+1] along axis with a zero ghost past the end
    out = np.zeros_like(U)
    to = [slice(None)] * U.ndim
    src = [slice(None)] * U.ndim
    to[axis] = slice(0, -1)
    src[axis] = slice(1, None)
    out[tuple(to)] = U[tuple(src)]
    return out


def _energy_density(U, rp):
    # nodewise energy; the -eps^p shift makes the density vanish at zero
    eps = rp.model_n.eps
    h = rp.grid.mesh
    dens = np.zeros(rp.grid.shape)
    for i in range(rp.grid.dim):
        d = (_shift_next(U, i) - U) / h
        p = np.broadcast_to(rp.p[i], U.shape)
        dens += _power_change(np.full(U.shape, eps * eps), d * d, p / 2.0) / p
    p0 = rp.p0
    dens += np.where(rp.active, np.abs(U) ** p0 / p0 - rp.f_n.values * U, 0.0)
    return dens


def _power_change(base, delta, q):
    """``(base + delta)^q - base^q`` for ``base >= 0``, without cancellation."""
    out = np.abs(delta) ** q
    pos = base > 0
    b = base[pos]
    rel = delta[pos] / b
    ok = rel > -1.0
    val = np.empty_like(b)
    val[ok] = b[ok] ** q[pos][ok] * np.expm1(q[pos][ok] * np.log1p(rel[ok]))
    val[~ok] = np.abs(b[~ok] + delta[pos][~ok]) ** q[pos][~ok] - b[~ok] ** q[pos][~ok]
    out[pos] = val
    return out


def _energy_change(U, dU, rp):
    """Nodewise ``density(U + dU) - density(U)``, accurate when ``dU`` is small."""
    eps = rp.model_n.eps
    h = rp.grid.mesh
    change = np.zeros(rp.grid.shape)
    for i in range(rp.grid.dim):
        d = (_shift_next(U, i) - U) / h
        dd = (_shift_next(dU, i) - dU) / h
        a = d * d + eps * eps
        p = rp.p[i]
        # (a + da)^(p/2) - a^(p/2) with da = dd (2 d + dd)
        change += _power_change(a, dd * (2.0 * d + dd), p / 2.0) / p
    p0 = np.broadcast_to(rp.p0, U.shape)
    sign = np.where(U < 0, -1.0, 1.0)
    zero = _power_change(np.abs(U), sign * dU, p0) / p0
    change += np.where(rp.active, zero - rp.f_n.values * dU, 0.0)
    return change


def energy(u, rp: RegularizedProblem):
    """Discrete energy ``sum_i int ((|D_i u|^2 + eps^2)^(p_i/2) - eps^p_i) / p_i
    + int |u|^p0 / p0 - int f^n u`` (built-in flux, ``H = 0``)."""
    _check_variational(rp)
    return float(np.sum(_energy_density(_masked(u, rp), rp)) * rp.grid.cell_volume)


def energy_gradient(u, rp: RegularizedProblem) -> GridFunction:
    """Gradient of :func:`energy` per unit cell volume, assembled term by term.

    This is written independently of :func:`assemble_residual`; the two
    agree to rounding in the variational case.
    """
    _check_variational(rp)
    U = _masked(u, rp)
    eps = rp.model_n.eps
    h = rp.grid.mesh
    out = np.zeros_like(U)
    for i in range(rp.grid.dim):
        lo = [slice(None)] * U.ndim
        hi = [slice(None)] * U.ndim
        lo[i] = slice(0, -1)
        hi[i] = slice(1, None)
        lo, hi = tuple(lo), tuple(hi)
        nxt = np.zeros_like(U)
        nxt[lo] = U[hi]
        d = (nxt - U) / h
        flux = (d * d + eps * eps) ** ((rp.p[i] - 2.0) / 2.0) * d
        # node k receives -flux[k]/h from its own difference and +flux[k-1]/h
        out -= flux / h
        out[hi] += flux[lo] / h
    out += np.sign(U) * np.abs(U) ** (rp.p0 - 1.0) - rp.f_n.values
    return GridFunction(rp.grid, np.where(rp.active, out, 0.0))


def pcg(apply, b, diag, x0, tol, max_iter, weight=1.0):
    """Jacobi-preconditioned conjugate gradients on flat arrays.

    Stops when ``sqrt(weight * r.r) <= tol``.  Returns ``(x, iterations)``.
    """
    x = x0.copy()
    r = b - apply(x)
    z = r / diag
    d = z.copy()
    rz = float(r @ z)
    it = 0
    while np.sqrt(weight * float(r @ r)) > tol and it < max_iter:
        Ad = apply(d)
        dAd = float(d @ Ad)
        if not dAd > 0:
            raise LinearSolveError(f"non-positive curvature {dAd:.3e} at iteration {it}")
        step = rz / dAd
        x += step * d
        r -= step * Ad
        z = r / diag
        rz_new = float(r @ z)
        d = z + (rz_new / rz) * d
        rz = rz_new
        it += 1
    return x, it


def _lagged_system(U, rp, shift=0.0):
    """Matrix-free lagged operator ``L(U) + shift * I`` restricted to active nodes."""
    g = rp.grid
    xi = _gradient(U, g)
    w = rp.model_n.linearization_weights(rp.coords, U, xi, rp.p)
    w = np.ascontiguousarray(np.broadcast_to(w, (g.dim,) + g.shape)).reshape(g.dim, -1) + shift
    floor = max(rp.model_n.eps, 1e-12)
    aU = np.abs(U)
    c0 = np.maximum(1.0, rp.p0 - 1.0) * np.where(aU > floor, aU, floor) ** (rp.p0 - 2.0) + shift
    c0 = np.where(rp.active, c0, 0.0).ravel()
    inv_h = 1.0 / g.mesh
    diag = c0.copy()
    for i in range(g.dim):
        wi = w[i].reshape(g.shape)
        back = np.zeros(g.shape)
        lo = [slice(None)] * g.dim
        hi = [slice(None)] * g.dim
        lo[i] = slice(0, -1)
        hi[i] = slice(1, None)
        back[tuple(hi)] = wi[tuple(lo)]
        diag += ((wi + back) * inv_h * inv_h).ravel()
    act = rp.active.ravel()
    diag = np.where(act, diag, 1.0)
    active_u8 = np.ascontiguousarray(act, dtype=np.uint8)

    def apply(x):
        return kernels.lagged_apply(x, w, c0, g.shape, inv_h, active_u8)

    return apply, diag


# shifts tried, in order, when no damping factor decreases the residual
SHIFTS = (0.0,) + tuple(10.0**e for e in range(-8, 9))


def solve(rp: RegularizedProblem, u0=None, tol=1e-10, max_iter=200, damping_floor=1e-4,
          cg_tol=None, cg_max_iter=None):
    """Damped Picard iteration for the discrete regularised problem.

    Each step freezes the flux coefficients and the zero-order factor at the
    current iterate (secant values, or tangent values where those are
    larger, i.e. for exponents above 2), solves the lagged SPD system
    ``L(u) d = -F(u)`` by PCG
    and moves to ``u + theta d`` with the largest ``theta`` in
    ``1, 1/2, 1/4, ...`` (down to ``damping_floor``) that decreases the
    residual norm.  Where the lagged operator degenerates (exponents above
    2 at a flat iterate) and no ``theta`` works, the step is retried with
    ``L(u) + mu I`` for increasing ``mu``; the fixed points are the zeros of
    ``F`` either way.  Stops when the dual residual norm drops to ``tol``.

    Returns ``(u, SolveReport)``; non-convergence is reported, not raised.
    """
    if not tol > 0:
        raise ValueError("tol must be positive")
    g = rp.grid
    vol = g.cell_volume
    nact = int(np.count_nonzero(rp.active))
    cg_tol = 1e-2 * tol if cg_tol is None else cg_tol
    cg_max_iter = 10 * max(nact, 1) if cg_max_iter is None else cg_max_iter

    U = np.zeros(g.shape) if u0 is None else _masked(u0, rp)
    F = assemble_residual(U, rp).values
    r = residual_norm(F, rp)
    rep = SolveReport(residual_history=[r])
    start = 0
    while True:
        if r <= tol:
            rep.converged = True
            rep.message = "converged"
            break
        if rep.iterations >= max_iter:
            rep.message = f"no convergence after {max_iter} iterations"
            break
        rhs = -F.ravel()
        bnorm = np.sqrt(vol * float(rhs @ rhs))
        accepted = False
        cg_total = 0
        for j in range(start, len(SHIFTS)):
            apply, diag = _lagged_system(U, rp, SHIFTS[j])
            d, cg_it = pcg(apply, rhs, diag, np.zeros(rhs.size), max(cg_tol, 1e-15 * bnorm),
                           cg_max_iter, weight=vol)
            cg_total += cg_it
            step = d.reshape(g.shape)
            theta = 1.0
            while theta >= damping_floor:
                trial = U + theta * step
                Ft = assemble_residual(trial, rp).values
                rt = residual_norm(Ft, rp)
                if rt <= (1.0 - 1e-4 * theta) * r:
                    accepted = True
                    break
                theta *= 0.5
            if accepted:
                # try one smaller shift next time
                start = max(j - 1, 0)
                break
        rep.cg_iterations.append(cg_total)
        if not accepted:
            rep.message = f"damping fell below {damping_floor} at iteration {rep.iterations + 1}"
            break
        U, F, r = trial, Ft, rt
        rep.iterations += 1
        rep.residual_history.append(r)
        rep.damping_history.append(theta)
        rep.shift_history.append(SHIFTS[j])
        log.debug("picard %d: residual %.3e theta %.3g shift %.1e cg %d", rep.iterations, r,
                  theta, SHIFTS[j], cg_total)
    return GridFunction(g, U), rep


def energy_oracle(rp: RegularizedProblem, tol=1e-9, max_iter=200_000, u0=None):
    """Minimise the discrete energy by gradient descent with backtracking.

    Stops when the max-norm of :func:`energy_gradient` is at most ``tol``;
    raises :class:`ConvergenceError` otherwise.  Energy decreases are
    evaluated node by node so that the Armijo test stays meaningful near
    the minimum.
    """
    _check_variational(rp)
    vol = rp.grid.cell_volume
    U = np.zeros(rp.grid.shape) if u0 is None else _masked(u0, rp)
    grad = energy_gradient(U, rp).values
    step = rp.grid.mesh**2
    for it in range(max_iter):
        gmax = float(np.max(np.abs(grad)))
        if gmax <= tol:
            return GridFunction(rp.grid, U)
        g2 = float(np.sum(grad * grad)) * vol
        while True:
            change = float(np.sum(_energy_change(U, -step * grad, rp))) * vol
            if change <= -1e-4 * step * g2:
                break
            step *= 0.5
            if step < 1e-30:
                raise ConvergenceError("line search failed in the energy oracle")
        U = U - step * grad
        grad = energy_gradient(U, rp).values
        step *= 2.0
    raise ConvergenceError(f"energy oracle did not reach {tol} in {max_iter} steps")
