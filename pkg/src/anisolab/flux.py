"""Carathéodory data of the problem and sampled verification of its hypotheses.

A :class:`FluxModel` bundles the vector flux ``a(x, s, xi)``, the
lower-order term ``H(x, s, xi)`` and the functions bounding them.  All
callables share the signature ``f(x, s, xi, p)`` where ``x`` has the
coordinate axis first, ``xi`` has the gradient axis first and ``p`` holds
the directional exponents at ``x`` (``None`` lets the model look them up).
"""

from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Sequence

import numpy as np

from anisolab import kernels
from anisolab.exponents import ExponentVector
from anisolab.grid import Grid, GridFunction, truncate

__all__ = [
    "FluxModel",
    "LowerOrder",
    "ProblemSpec",
    "HypothesisResult",
    "HypothesisReport",
    "model_anisotropic_laplacian",
    "model_nonsign_lower_order",
    "with_lower_order",
    "truncated_flux",
    "regularize_lower_order",
    "verify_hypotheses",
]

# relative slack when comparing a sampled quantity with its bound
REL_TOL = 1e-12
# default positive constant for the lower-order growth function when H = 0
DEFAULT_H_HAT = 1e-3


def _const(value):
    value = float(value)
    return lambda arg: np.full(np.shape(arg)[1:] if np.ndim(arg) > 1 else np.shape(arg), value)


def _radial_const(value):
    value = float(value)
    return lambda r: np.full(np.shape(r), value)


def _kernel_map(fn, xi, p, eps):
    xi = np.asarray(xi, dtype=float)
    p = np.broadcast_to(np.asarray(p, dtype=float), xi.shape)
    out = fn(np.ascontiguousarray(xi).ravel(), np.ascontiguousarray(p).ravel(), float(eps))
    return np.asarray(out).reshape(xi.shape)


@dataclass
class FluxModel:
    """Flux ``a``, lower-order term ``H`` and the functions in their bounds.

    Attributes
    ----------
    a : callable
        ``a(x, s, xi, p) -> (N, ...)``.
    H : callable or None
        ``H(x, s, xi, p) -> (...)``; ``None`` means ``H == 0``.
    a_hat, h_hat : callables of ``r = |s|``
        Positive functions in the growth bounds of ``a_i`` and ``H``.
    h0 : callable of ``x``
        Integrable weight in the growth bound of ``H``.
    c : sequence of callables of ``x``
        Offsets in the growth bounds of ``a_i``.
    alpha : float
        Coercivity constant.
    """

    name: str
    a: Callable
    a_hat: Sequence[Callable]
    c: Sequence[Callable]
    alpha: float = 1.0
    H: Optional[Callable] = None
    h_hat: Callable = field(default_factory=lambda: _radial_const(DEFAULT_H_HAT))
    h0: Callable = field(default_factory=lambda: _const(0.0))
    exponents: Optional[ExponentVector] = None
    eps: float = 0.0
    growth_exponent: str = "conjugate"
    h_hat_constant: Optional[float] = DEFAULT_H_HAT
    weights: Optional[Callable] = None
    tangent: Optional[Callable] = None
    variational: bool = False

    def __post_init__(self):
        if not self.alpha > 0:
            raise ValueError("alpha must be positive")
        if self.growth_exponent not in ("conjugate", "primal"):
            raise ValueError("growth_exponent must be 'conjugate' or 'primal'")

    @property
    def dim(self):
        return len(self.a_hat)

    def _p(self, x, p):
        if p is None and self.exponents is not None:
            return self.exponents.at(x)
        return p

    def flux(self, x, s, xi, p=None):
        return np.asarray(self.a(x, s, xi, self._p(x, p)), dtype=float)

    def lower(self, x, s, xi, p=None):
        if self.H is None:
            return np.zeros(np.shape(s))
        return np.broadcast_to(np.asarray(self.H(x, s, xi, self._p(x, p)), dtype=float), np.shape(s))

    def lagged_weights(self, x, s, xi, p=None):
        """Coefficients ``w_i >= 0`` with ``a_i(x, s, xi) ~ w_i * xi_i`` at the given state.

        Models without a closed form use the secant ``a_i / xi_i``, or a
        centred difference in ``xi_i`` where ``xi_i`` is nearly zero.
        """
        p = self._p(x, p)
        if self.weights is not None:
            return np.asarray(self.weights(x, s, xi, p), dtype=float)
        xi = np.asarray(xi, dtype=float)
        a = self.flux(x, s, xi, p)
        w = np.empty_like(xi)
        delta = 1e-7
        for i in range(xi.shape[0]):
            small = np.abs(xi[i]) < 1e-10
            with np.errstate(divide="ignore", invalid="ignore"):
                w[i] = np.where(small, 0.0, a[i] / xi[i])
            if np.any(small):
                xp = xi.copy()
                xm = xi.copy()
                xp[i] = xi[i] + delta
                xm[i] = xi[i] - delta
                d = (self.flux(x, s, xp, p)[i] - self.flux(x, s, xm, p)[i]) / (2 * delta)
                w[i] = np.where(small, d, w[i])
        return np.maximum(w, 1e-12)

    def tangent_weights(self, x, s, xi, p=None):
        """Diagonal derivatives ``d a_i / d xi_i`` (centred differences without a closed form)."""
        p = self._p(x, p)
        if self.tangent is not None:
            return np.asarray(self.tangent(x, s, xi, p), dtype=float)
        xi = np.asarray(xi, dtype=float)
        t = np.empty_like(xi)
        for i in range(xi.shape[0]):
            delta = 1e-6 * np.maximum(1.0, np.abs(xi[i]))
            xp = xi.copy()
            xm = xi.copy()
            xp[i] = xi[i] + delta
            xm[i] = xi[i] - delta
            t[i] = (self.flux(x, s, xp, p)[i] - self.flux(x, s, xm, p)[i]) / (2 * delta)
        return t

    def linearization_weights(self, x, s, xi, p=None):
        """``max(secant, tangent)``: the secant where the flux is concave in
        ``|xi_i|`` (exponents below 2), the tangent where it is convex."""
        return np.maximum(self.lagged_weights(x, s, xi, p), self.tangent_weights(x, s, xi, p))


@dataclass
class LowerOrder:
    """A lower-order term with the data of its growth bound."""

    H: Callable
    h_hat: Callable
    h0: Callable
    h_hat_constant: Optional[float] = None


def model_anisotropic_laplacian(pv: ExponentVector, eps=1e-8):
    """Built-in flux ``a_i = (xi_i^2 + eps^2)^((p_i - 2)/2) xi_i`` with ``H = 0``.

    The model is the gradient of ``sum_i ((xi_i^2 + eps^2)^(p_i/2) - eps^p_i) / p_i``,
    coercive with ``alpha = 1`` and of growth ``a_hat = 1``, ``c = 0`` at ``eps = 0``.
    """
    if eps < 0:
        raise ValueError("eps must be non-negative")
    n = pv.dim

    def a(x, s, xi, p):
        return _kernel_map(kernels.aniso_flux, xi, p, eps)

    def weights(x, s, xi, p):
        return _kernel_map(kernels.aniso_weights, xi, p, eps)

    def tangent(x, s, xi, p):
        xi = np.asarray(xi, dtype=float)
        p = np.broadcast_to(np.asarray(p, dtype=float), xi.shape)
        x2 = xi * xi
        r2 = np.maximum(x2 + eps * eps, 1e-300)
        return r2 ** (0.5 * p - 2.0) * ((p - 1.0) * x2 + eps * eps)

    return FluxModel(
        name="anisotropic_laplacian",
        a=a,
        a_hat=[_radial_const(1.0)] * n,
        c=[_const(0.0)] * n,
        alpha=1.0,
        exponents=pv,
        eps=float(eps),
        weights=weights,
        tangent=tangent,
        variational=True,
    )


def model_nonsign_lower_order(gamma, q, h0=None, delta=DEFAULT_H_HAT, dim=None, pv=None):
    """Lower-order term ``gamma sin(s) sum_i |xi_i|^q(x) + h0(x)``.

    ``s * H`` changes sign with ``s``, so the classical sign condition
    fails.  The growth bound uses ``h_hat = |gamma| + delta`` and the weight
    ``|h0| + |gamma| N``, which covers ``0 <= q <= p'_i`` via
    ``|t|^q <= 1 + |t|^(p'_i)``.

    ``q`` is a float, a callable of ``x`` or an object with ``.at(x)``.
    When ``pv`` is given, ``q <= min_i p'_i`` is checked on its grid.
    """
    gamma = float(gamma)
    if callable(q):
        qf = q
    elif hasattr(q, "at"):
        qf = q.at
    else:
        qv = float(q)
        qf = _const(qv)
    h0f = _const(0.0) if h0 is None else (h0 if callable(h0) else _const(h0))
    if dim is None:
        if pv is None:
            raise ValueError("need the dimension or the exponent vector")
        dim = pv.dim
    if pv is not None and pv.grid is not None:
        qs = np.broadcast_to(qf(pv.grid.coords), pv.grid.shape)
        P = pv.stacked()
        if np.any(qs < 0) or np.any(qs > np.min(P / (P - 1.0), axis=0) + 1e-12):
            raise ValueError("q must satisfy 0 <= q <= min_i p'_i")

    def H(x, s, xi, p):
        qq = qf(x)
        total = sum(np.abs(xi[i]) ** qq for i in range(xi.shape[0]))
        return gamma * np.sin(s) * total + h0f(x)

    def growth_h0(x):
        return np.abs(h0f(x)) + abs(gamma) * dim

    hh = abs(gamma) + delta
    return LowerOrder(H=H, h_hat=_radial_const(hh), h0=growth_h0, h_hat_constant=hh)


def with_lower_order(model: FluxModel, lower: LowerOrder) -> FluxModel:
    return replace(
        model,
        H=lower.H,
        h_hat=lower.h_hat,
        h0=lower.h0,
        h_hat_constant=lower.h_hat_constant,
        variational=False,
        name=f"{model.name}+lower",
    )


def truncated_flux(model: FluxModel, n) -> FluxModel:
    """Replace ``s`` by ``T_n(s)`` in the flux (and its lagged weights)."""
    if not n > 0:
        raise ValueError("n must be positive")

    def clamp(fn):
        if fn is None:
            return None
        return lambda x, s, xi, p: fn(x, truncate(np.asarray(s, dtype=float), n), xi, p)

    return replace(model, a=clamp(model.a), weights=clamp(model.weights),
                   tangent=clamp(model.tangent))


def regularize_lower_order(model: FluxModel, n) -> FluxModel:
    """``H^n = T_n(H) * chi_{|x| < n}``; bounded by n and zero outside the ball."""
    if not n > 0:
        raise ValueError("n must be positive")
    if model.H is None:
        return model
    H0 = model.H

    def H(x, s, xi, p):
        inside = np.sqrt(np.sum(np.asarray(x, dtype=float) ** 2, axis=0)) < n
        return np.where(inside, truncate(np.asarray(H0(x, s, xi, p), dtype=float), n), 0.0)

    return replace(model, H=H)


@dataclass
class ProblemSpec:
    """Full description of the problem on the unbounded domain.

    Exponents and source are functions of the coordinates so every
    truncation radius can be sampled on its own grid.
    """

    dim: int
    exponents: ExponentVector
    flux: FluxModel
    source: Callable
    radius_schedule: Sequence[float]
    eps_flux: float = 1e-8
    mesh: float = 0.25

    def __post_init__(self):
        r = list(self.radius_schedule)
        if not r or any(b <= a for a, b in zip(r, r[1:])) or r[0] <= 0:
            raise ValueError("radius schedule must be positive and strictly increasing")
        if self.exponents.dim != self.dim:
            raise ValueError("exponent vector does not match the dimension")

    def grid_for(self, n, mesh=None):
        return Grid.with_mesh(self.dim, n, self.mesh if mesh is None else mesh)

    def exponents_on(self, grid: Grid) -> ExponentVector:
        return self.exponents.on(grid)

    def source_on(self, grid: Grid) -> GridFunction:
        vals = np.broadcast_to(np.asarray(self.source(grid.coords), dtype=float), grid.shape)
        if not np.all(np.isfinite(vals)):
            raise ValueError("source is not finite on the grid")
        return GridFunction(grid, vals.copy())


@dataclass
class HypothesisResult:
    checked: int
    violations: int
    worst_margin: float

    @property
    def rate(self):
        return self.violations / self.checked if self.checked else 0.0


@dataclass
class HypothesisReport:
    samples: int
    seed: int
    results: dict

    def __getitem__(self, key):
        return self.results[key]

    def rows(self):
        return [
            (name, r.checked, r.violations, r.worst_margin) for name, r in self.results.items()
        ]


def _rel(margin, scale):
    return margin / np.maximum(scale, 1e-300)


def verify_hypotheses(model: FluxModel, pv: ExponentVector, samples=10_000, seed=0):
    """Sample the growth, monotonicity, coercivity and lower-order growth bounds.

    Draws x uniformly in the box of ``pv``'s grid, s in [-10, 10] and the
    components of xi and xi* in [-5, 5].  Margins are relative to the bound
    (or to the product ``|a - a*| |xi - xi*|`` for monotonicity); a sample
    violates a bound when its relative margin is below ``-1e-12``
    (monotonicity needs a strictly positive pairing).
    """
    if samples < 1:
        raise ValueError("samples must be >= 1")
    grid = pv.grid
    rng = np.random.default_rng(seed)
    n = pv.dim
    x = grid.sample_points(rng, samples)
    s = rng.uniform(-10.0, 10.0, size=samples)
    xi = rng.uniform(-5.0, 5.0, size=(n, samples))
    xs = rng.uniform(-5.0, 5.0, size=(n, samples))
    p = pv.at(x)
    pc = p / (p - 1.0)

    a = model.flux(x, s, xi, p)
    a_star = model.flux(x, s, xs, p)
    r = np.abs(s)
    rho = np.sum(np.abs(xi) ** p, axis=0)

    results = {}

    # growth of each component
    worst = np.full(samples, np.inf)
    for i in range(n):
        bound = model.a_hat[i](r) * (rho ** (1.0 / pc[i]) + model.c[i](x))
        worst = np.minimum(worst, _rel(bound - np.abs(a[i]), bound))
    results["growth"] = HypothesisResult(samples, int(np.count_nonzero(worst < -REL_TOL)), float(np.min(worst)))

    # strict monotonicity of the pairing
    distinct = np.any(xi != xs, axis=0)
    pair = np.sum((a - a_star) * (xi - xs), axis=0)
    scale = np.sqrt(np.sum((a - a_star) ** 2, axis=0) * np.sum((xi - xs) ** 2, axis=0))
    rel = _rel(pair, scale)[distinct]
    results["monotonicity"] = HypothesisResult(
        int(np.count_nonzero(distinct)),
        int(np.count_nonzero(~(pair[distinct] > 0))),
        float(np.min(rel)) if rel.size else np.inf,
    )

    # coercivity, summed over components
    nonzero = np.any(xi != 0, axis=0)
    lhs = np.sum(a * xi, axis=0)
    rhs = model.alpha * rho
    rel = _rel(lhs - rhs, rhs)[nonzero]
    results["coercivity"] = HypothesisResult(
        int(np.count_nonzero(nonzero)),
        int(np.count_nonzero(rel < -REL_TOL)),
        float(np.min(rel)) if rel.size else np.inf,
    )

    # growth of the lower-order term
    e = pc if model.growth_exponent == "conjugate" else p
    Hv = model.lower(x, s, xi, p)
    bound = model.h_hat(r) * np.sum(np.abs(xi) ** e, axis=0) + model.h0(x)
    rel = _rel(bound - np.abs(Hv), bound)
    results["lower_order_growth"] = HypothesisResult(
        samples, int(np.count_nonzero(rel < -REL_TOL)), float(np.min(rel))
    )
    return HypothesisReport(samples, seed, results)
