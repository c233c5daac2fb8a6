"""Quantitative checks on solutions of the regularised problems.

Each check returns plain tables (lists of tuples with named columns) so
they can be compared, asserted on and written to CSV unchanged.
"""

from dataclasses import dataclass, field
import logging
from typing import Dict, List, Optional, Sequence

import numpy as np

from anisolab.exponents import ExponentVector, conjugate, harmonic_mean_exponent
from anisolab.flux import FluxModel, ProblemSpec
from anisolab.grid import Grid, GridFunction, discrete_gradient, restrict_to_ball, truncate
from anisolab.solver import (
    RegularizedProblem,
    SolveReport,
    assemble_residual,
    build_regularized,
    solve,
)
from anisolab.spaces import anisotropic_norm, luxemburg_norm, modular

__all__ = [
    "Table",
    "LadderReport",
    "RungResult",
    "weight_A",
    "energy_estimate_check",
    "measure_decay_check",
    "entropy_residual",
    "tol_entropy",
    "random_bump",
    "entropy_sweep",
    "monotonicity_gap",
    "random_gap_pairs",
    "equi_integrability_tail",
    "ladder_diff",
    "embed",
    "ladder_study",
    "boundedness_check",
    "lower_order_bounds",
    "coercivity_ray",
]

log = logging.getLogger(__name__)

# coefficient of the zero-order term in the tail bound
DELTA = 1.0


@dataclass
class Table:
    """Rows with fixed column names."""

    columns: tuple
    rows: list

    def column(self, name):
        j = self.columns.index(name)
        return np.array([r[j] for r in self.rows], dtype=float)

    def __len__(self):
        return len(self.rows)

    def __iter__(self):
        return iter(self.rows)


def _vals(u):
    return u.values if isinstance(u, GridFunction) else np.asarray(u, dtype=float)


# ---------------------------------------------------------------- Step 1 estimate


def weight_A(s, model: FluxModel, quadrature=False, nodes=4097):
    """``A(s) = int_0^s h_hat(r) / alpha dr`` for ``s >= 0``.

    Closed form for a constant ``h_hat`` unless ``quadrature`` is set;
    otherwise composite trapezoid on a uniform grid over ``[0, max s]``
    followed by linear interpolation.
    """
    s = np.abs(np.asarray(s, dtype=float))
    if model.h_hat_constant is not None and not quadrature:
        return model.h_hat_constant * s / model.alpha
    top = float(np.max(s)) if s.size else 0.0
    if top == 0.0:
        return np.zeros_like(s)
    r = np.linspace(0.0, top, nodes)
    g = np.asarray(model.h_hat(r), dtype=float) / model.alpha
    cum = np.concatenate([[0.0], np.cumsum(0.5 * (g[1:] + g[:-1]) * np.diff(r))])
    return np.interp(s, r, cum)


def energy_estimate_check(u, rp: RegularizedProblem, k_values):
    """Tabulate ``L(k)`` and ``L(k) / k`` for the truncation levels ``k``.

    ``L(k) = sum_i modular(D_i T_k u, p_i) + int_{|u|<=k} |u|^p0 e^A(|u|)
    + k int_{|u|>k} |u|^(p0-1) e^A(|u|)``.
    """
    U = np.where(rp.active, _vals(u), 0.0)
    g = rp.grid
    vol = g.cell_volume
    au = np.abs(U)
    eA = np.exp(weight_A(au, rp.model_n))
    rows = []
    for k in k_values:
        if not k > 0:
            raise ValueError("k must be positive")
        Tk = GridFunction(g, truncate(U, k))
        grads = discrete_gradient(Tk)
        L = sum(modular(d, p) for d, p in zip(grads, rp.p))
        low = au <= k
        L += vol * float(np.sum(np.where(low, au**rp.p0 * eA, 0.0)))
        L += k * vol * float(np.sum(np.where(low, 0.0, au ** (rp.p0 - 1.0) * eA)))
        rows.append((float(k), float(L), float(L) / k))
    return Table(("k", "L", "L_over_k"), rows)


# ---------------------------------------------------------------- measure decay


def measure_decay_check(u: GridFunction, pv: ExponentVector, k_values):
    """``(k, meas{|u| > k}, meas * k^(pbar_min - 1))`` with ``pbar_min`` the minimum
    of the harmonic-mean exponent."""
    pbar_min = harmonic_mean_exponent(pv).p_minus
    au = np.abs(u.values)
    rows = []
    for k in k_values:
        if not k > 1:
            raise ValueError("k must exceed 1")
        meas = float(np.count_nonzero(au > k)) * u.cell_volume
        rows.append((float(k), meas, meas * k ** (pbar_min - 1.0)))
    return Table(("k", "meas", "scaled"), rows)


# ---------------------------------------------------------------- entropy inequality


def entropy_residual(u, xi, k, rp: RegularizedProblem):
    """LHS minus RHS of the truncated entropy inequality tested with ``T_k(u - xi)``.

    Uses the rung data (truncated flux, ``H^n`` and ``f^n``), discrete
    gradients and node-sum quadrature.  Non-positive values satisfy the
    inequality.
    """
    if not k > 0:
        raise ValueError("k must be positive")
    g = rp.grid
    U = np.where(rp.active, _vals(u), 0.0)
    X = _vals(xi)
    T = np.where(rp.active, truncate(U - X, k), 0.0)
    DU = np.stack([d.values for d in discrete_gradient(GridFunction(g, U))])
    DT = np.stack([d.values for d in discrete_gradient(GridFunction(g, T))])
    a = rp.model_n.flux(rp.coords, U, DU, rp.p)
    Hn = rp.model_n.lower(rp.coords, U, DU, rp.p)
    zero = np.sign(U) * np.abs(U) ** (rp.p0 - 1.0)
    dens = np.sum(a * DT, axis=0) + (Hn + zero - rp.f_n.values) * T
    return float(np.sum(dens)) * g.cell_volume


def tol_entropy(solver_tol, grid: Grid):
    """Tolerance ``10 * tol * meas(ball)`` for the entropy residual."""
    return 10.0 * solver_tol * grid.active_measure


def random_bump(grid: Grid, rng, core_R, k):
    """Tensor-product bump with centre in the ball of radius ``core_R - 1`` and
    amplitude in ``[-k, k]``; supported inside the ball of radius ``core_R``."""
    n = grid.dim
    while True:
        c = rng.uniform(-(core_R - 1.0), core_R - 1.0, size=n)
        if np.sqrt(np.sum(c**2)) < core_R - 1.0 or core_R <= 1.0:
            break
    width = min(1.0, core_R) / np.sqrt(n)
    amp = rng.uniform(-k, k)
    prof = np.ones(grid.shape)
    for i in range(n):
        t = (grid.coords[i] - c[i]) / width
        prof *= np.clip(1.0 - t**2, 0.0, None) ** 2
    return GridFunction(grid, amp * prof)


def entropy_sweep(u, rp: RegularizedProblem, k_values, tests=50, core_R=2.0, seed=0):
    """Entropy residuals for ``xi = 0``, ``xi = u`` and random bumps at each k."""
    rng = np.random.default_rng(seed)
    rows = []
    for k in k_values:
        rows.append(("zero", float(k), entropy_residual(u, np.zeros(rp.grid.shape), k, rp)))
        rows.append(("self", float(k), entropy_residual(u, u, k, rp)))
        for t in range(tests):
            xi = random_bump(rp.grid, rng, core_R, k)
            rows.append((f"bump{t}", float(k), entropy_residual(u, xi, k, rp)))
    return Table(("test", "k", "residual"), rows)


# ---------------------------------------------------------------- monotonicity gap


def _truncated_gradient_on_ball(u: GridFunction, k, R):
    g = u.grid
    Tk = GridFunction(g, truncate(np.where(g.active, u.values, 0.0), k))
    grads = discrete_gradient(Tk)
    D = np.stack([restrict_to_ball(d.values, g, R) for d in grads])
    s = restrict_to_ball(Tk.values, g, R)
    x = np.stack([restrict_to_ball(g.coords[i], g, R) for i in range(g.dim)])
    return x, s, D


def monotonicity_gap(u_seq: Sequence[GridFunction], u_limit: GridFunction, k, model: FluxModel, R,
                     exponents: Optional[ExponentVector] = None):
    """``int_{|x|<R} (a(x, T_k u_m, D T_k u_m) - a(x, T_k u_m, D T_k u)) . (D T_k u_m - D T_k u)``
    for each ``u_m`` of ``u_seq`` against ``u = u_limit``.

    Gradients are taken on each field's own grid and then restricted to the
    common nodes of the ball of radius R, so the fields may come from
    different truncation radii with the same step.
    """
    pv = model.exponents if exponents is None else exponents
    x, _, Dl = _truncated_gradient_on_ball(u_limit, k, R)
    p = pv.at(x) if pv is not None else None
    vol = u_limit.cell_volume
    out = []
    for um in u_seq:
        if abs(um.grid.mesh - u_limit.grid.mesh) > 1e-12:
            raise ValueError("fields must share the grid step")
        _, s, Dm = _truncated_gradient_on_ball(um, k, R)
        am = model.flux(x, s, Dm, p)
        al = model.flux(x, s, Dl, p)
        out.append(float(np.sum((am - al) * (Dm - Dl))) * vol)
    return out


def random_gap_pairs(grid: Grid, model: FluxModel, pairs=1000, k=1.0, R=None, seed=0, scale=2.0):
    """Monotonicity gaps of random field pairs on one grid (white noise fields)."""
    rng = np.random.default_rng(seed)
    R = grid.active_radius if R is None else R
    gaps = np.empty(pairs)
    for t in range(pairs):
        a = grid.function(scale * rng.standard_normal(grid.shape))
        b = grid.function(scale * rng.standard_normal(grid.shape))
        gaps[t] = monotonicity_gap([a], b, k, model, R)[0]
    return gaps


# ---------------------------------------------------------------- equi-integrability


def equi_integrability_tail(u, rp: RegularizedProblem, h_values):
    """Tail table ``(h, tail_lhs, data_tail)`` and the fitted constant C.

    ``tail_lhs(h) = sum_i int_{|u|>h+1} h_hat(|u|) |D_i u|^p_i + int_{|u|>h+1} |u|^(p0-1)``
    and ``data_tail(h) = int_{|u|>h} (|f| + sum_i |c_i|)``.  C is the
    smallest constant with ``tail_lhs <= C data_tail`` over the rows
    (0 if every tail vanishes, ``inf`` if a tail faces zero data).
    """
    g = rp.grid
    U = np.where(rp.active, _vals(u), 0.0)
    au = np.abs(U)
    vol = g.cell_volume
    D = np.stack([d.values for d in discrete_gradient(GridFunction(g, U))])
    hh = np.asarray(rp.model_n.h_hat(au), dtype=float)
    grad_dens = hh * np.sum(np.abs(D) ** rp.p, axis=0)
    zero_dens = DELTA * au ** (rp.p0 - 1.0)
    f = np.abs(rp.spec.source_on(g).values)
    c = sum(np.abs(np.broadcast_to(ci(g.coords), g.shape)) for ci in rp.model_n.c)
    data = np.where(rp.active, f + c, 0.0)
    rows = []
    C = 0.0
    for h in h_values:
        far = au > h + 1.0
        lhs = vol * float(np.sum(np.where(far, grad_dens + zero_dens, 0.0)))
        rhs = vol * float(np.sum(np.where(au > h, data, 0.0)))
        rows.append((float(h), lhs, rhs))
        if lhs > 0:
            C = max(C, lhs / rhs if rhs > 0 else np.inf)
    return Table(("h", "tail_lhs", "data_tail"), rows), C


# ---------------------------------------------------------------- ladder


def embed(u: GridFunction, grid: Grid) -> GridFunction:
    """Place a field into a larger centred grid with the same step (zero padding)."""
    m_small = u.grid.nodes_per_axis
    m_big = grid.nodes_per_axis
    if abs(u.grid.mesh - grid.mesh) > 1e-12 or (m_big - m_small) % 2 or m_big < m_small:
        raise ValueError("grids are not nested with a common step")
    off = (m_big - m_small) // 2
    out = np.zeros(grid.shape)
    out[tuple(slice(off, off + m_small) for _ in range(grid.dim))] = u.values
    return grid.function(out)


def ladder_diff(ua: GridFunction, ub: GridFunction, R, q):
    """``L^q`` node-sum norm of ``ub - ua`` over the ball of radius R (constant q)."""
    va = restrict_to_ball(ua.values, ua.grid, R)
    vb = restrict_to_ball(ub.values, ub.grid, R)
    return luxemburg_norm(vb - va, q, cell_volume=ua.cell_volume)


@dataclass
class RungResult:
    n: float
    solution: GridFunction
    report: SolveReport
    problem: RegularizedProblem
    energy_table: Table
    decay_table: Table
    tail_table: Table
    tail_constant: float

    @property
    def estimate_constant(self):
        return float(np.max(self.energy_table.column("L_over_k")))


@dataclass
class LadderReport:
    radii: List[float]
    core_radius: float
    diffs: List[float]
    estimate_constants: List[float]
    decay_table: Dict[float, Dict[float, float]]
    gaps: List[float] = field(default_factory=list)
    norm_exponent: float = 2.0
    rungs: List[RungResult] = field(default_factory=list)

    @property
    def converged(self):
        return [r.report.converged for r in self.rungs]

    def summary_rows(self):
        rows = []
        for j, r in enumerate(self.rungs):
            diff = self.diffs[j - 1] if j > 0 else float("nan")
            gap = self.gaps[j] if j < len(self.gaps) else float("nan")
            rows.append((r.n, int(r.report.converged), r.report.iterations, r.report.final_residual,
                         r.estimate_constant, r.tail_constant, diff, gap))
        return rows

    SUMMARY_COLUMNS = ("n", "converged", "iterations", "final_residual", "estimate_constant",
                       "tail_constant", "diff_from_previous", "gap_to_finest")


def ladder_study(spec: ProblemSpec, core_R, mesh=None, k_values=(1.0, 2.0, 4.0, 8.0),
                 decay_k_values=(2.0, 4.0, 8.0, 16.0), h_values=(0.25, 0.5, 1.0, 2.0),
                 gap_k=None, tol=1e-10, max_iter=200, damping_floor=1e-4, warm_start=True):
    """Solve the regularised problem for every radius and compare on a fixed core ball.

    Rungs use grids with a common step; each rung is warm-started from the
    previous one.  A rung that fails to converge is recorded and the study
    continues.  ``diffs[j]`` is the ``L^q`` distance between rungs j and j+1
    on the core ball with ``q`` the minimum of the harmonic-mean exponent.
    The monotonicity gaps compare every rung with the finest one at level
    ``gap_k`` (default: the largest of ``k_values``).
    """
    radii = [float(r) for r in spec.radius_schedule]
    if not core_R < radii[0]:
        raise ValueError("core radius must be below the smallest truncation radius")
    mesh = spec.mesh if mesh is None else mesh
    rungs: List[RungResult] = []
    prev = None
    for n in radii:
        grid = spec.grid_for(n, mesh)
        rp = build_regularized(spec, n, grid)
        u0 = embed(prev, grid) if (warm_start and prev is not None) else None
        u, rep = solve(rp, u0=u0, tol=tol, max_iter=max_iter, damping_floor=damping_floor)
        if not rep.converged:
            log.warning("rung n=%g did not converge: %s", n, rep.message)
        tails, C = equi_integrability_tail(u, rp, h_values)
        rungs.append(RungResult(
            n, u, rep, rp,
            energy_estimate_check(u, rp, k_values),
            measure_decay_check(u, rp.exponents, decay_k_values),
            tails, C,
        ))
        prev = u
    q = harmonic_mean_exponent(rungs[0].problem.exponents).p_minus
    diffs = [ladder_diff(a.solution, b.solution, core_R, q) for a, b in zip(rungs, rungs[1:])]
    gk = max(k_values) if gap_k is None else gap_k
    finest = rungs[-1]
    gaps = monotonicity_gap([r.solution for r in rungs], finest.solution, gk,
                            finest.problem.model_n, core_R, finest.problem.exponents)
    decay = {r.n: dict(zip(r.decay_table.column("k"), r.decay_table.column("meas")))
             for r in rungs}
    return LadderReport(radii, float(core_R), diffs, [r.estimate_constant for r in rungs], decay,
                        gaps, q, rungs)


# ---------------------------------------------------------------- operator bounds


def _pc_range(p):
    pc = p / (p - 1.0)
    return float(np.min(pc)), float(np.max(pc))


def boundedness_check(u, rp: RegularizedProblem):
    """Flux norms against the bound implied by the growth condition.

    For each i returns ``(|a_i(x, T_n u, D u)|_{p_i'}, bound_i)`` with
    ``bound_i = (2^(q+ - 1) A_i^(q+) (sum_j modular(D_j u, p_j) + modular(c_i, p_i')) + 1)^(1/q-)``,
    ``q = p_i'`` and ``A_i = max(1, max_x a_hat_i(|T_n u|))``.
    """
    g = rp.grid
    U = np.where(rp.active, _vals(u), 0.0)
    D = np.stack([d.values for d in discrete_gradient(GridFunction(g, U))])
    a = rp.model_n.flux(rp.coords, U, D, rp.p)
    tu = np.abs(truncate(U, rp.n))
    vol = g.cell_volume
    rho = sum(modular(D[j], rp.p[j], vol) for j in range(g.dim))
    rows = []
    for i in range(g.dim):
        pc = rp.p[i] / (rp.p[i] - 1.0)
        qm, qp = _pc_range(rp.p[i])
        A = max(1.0, float(np.max(rp.model_n.a_hat[i](tu))))
        ci = np.broadcast_to(rp.model_n.c[i](rp.coords), g.shape)
        bound = (2.0 ** (qp - 1.0) * A**qp * (rho + modular(ci, pc, vol)) + 1.0) ** (1.0 / qm)
        rows.append((i + 1, luxemburg_norm(a[i], pc, cell_volume=vol), bound))
    return Table(("component", "norm", "bound"), rows)


def lower_order_bounds(u, rp: RegularizedProblem):
    """Norm bounds on ``H^n`` and on the zero-order term, and the pairing bound.

    Rows ``(quantity, value, bound)`` for ``|H^n|_{p0'}``,
    ``||u|^(p0-2) u|_{p0'}`` and ``|int H^n u|``; the bounds use
    ``|H^n| <= n`` on the ball and the norm-modular inequality.
    """
    g = rp.grid
    vol = g.cell_volume
    U = np.where(rp.active, _vals(u), 0.0)
    D = np.stack([d.values for d in discrete_gradient(GridFunction(g, U))])
    Hn = rp.model_n.lower(rp.coords, U, D, rp.p)
    p0c = conjugate(rp.exponents.p0).values
    qm, qp = float(np.min(p0c)), float(np.max(p0c))
    meas = g.active_measure
    nq = max(rp.n**qp, rp.n**qm)
    cH = (nq * meas + 1.0) ** (1.0 / qm)
    zero = np.sign(U) * np.abs(U) ** (rp.p0 - 1.0)
    c3 = (modular(U, rp.p0, vol) + 1.0) ** (1.0 / qm)
    pairing = abs(float(np.sum(Hn * U)) * vol)
    un = luxemburg_norm(U, rp.p0, cell_volume=vol)
    return Table(("quantity", "value", "bound"), [
        ("H_norm", luxemburg_norm(Hn, p0c, cell_volume=vol), cH),
        ("zero_order_norm", luxemburg_norm(zero, p0c, cell_volume=vol), c3),
        ("H_pairing", pairing, 2.0 * cH * un),
    ])


def coercivity_ray(rp: RegularizedProblem, w, ts=(1.0, 2.0, 4.0, 8.0, 16.0)):
    """``<F(t w) + f^n, t w> / |t w|_{1,p}`` along a ray; returns ``(t, quotient)`` rows."""
    g = rp.grid
    vol = g.cell_volume
    W = np.where(rp.active, _vals(w), 0.0)
    rows = []
    for t in ts:
        u = GridFunction(g, t * W)
        F = assemble_residual(u, rp).values + np.where(rp.active, rp.f_n.values, 0.0)
        pair = float(np.sum(F * u.values)) * vol
        nrm = anisotropic_norm(u, discrete_gradient(u), rp.exponents)
        rows.append((float(t), pair / nrm))
    return Table(("t", "quotient"), rows)
