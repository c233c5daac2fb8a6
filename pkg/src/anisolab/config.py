"""Run configuration: TOML text to validated, immutable settings.

Example::

    dim = 2
    seed = 0

    [grid]
    mesh = 0.25              # step shared by all rungs of a ladder
    # nodes_per_axis = 33    # optional fixed grid for single-radius modes
    # extent = 5.0

    [exponents]
    p0 = "2"
    p = ["2.5", "3"]

    [flux]
    model = "anisotropic_laplacian"     # or "custom" with a = [...]
    lower_order = "none"                # "nonsign" or "custom"

    [source]
    f = "exp(-(x1^2 + x2^2))"

    [schedule]
    radii = [4, 8, 16]

Expressions are quoted strings over ``x1..xN``, ``s`` and ``xi1..xiN``
(the directional exponents ``p1..pN`` and ``p0`` may also be used in
flux expressions).  In ``a_hat`` and ``h_hat`` the variable ``s`` stands
for ``|s|``.
"""

from dataclasses import asdict, dataclass, field, fields, replace
import re
import sys
from typing import List, Optional, Tuple

import numpy as np
import tomli_w

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from anisolab.exponents import ExponentField, ExponentVector
from anisolab.expr import Expression, ExpressionError, parse_expression
from anisolab.flux import (
    DEFAULT_H_HAT,
    FluxModel,
    LowerOrder,
    ProblemSpec,
    model_anisotropic_laplacian,
    model_nonsign_lower_order,
    with_lower_order,
)
from anisolab.grid import Grid

__all__ = [
    "ConfigError",
    "Issue",
    "Config",
    "GridConfig",
    "ExponentConfig",
    "FluxConfig",
    "SolverConfig",
    "DiagnosticsConfig",
    "parse_config",
    "emit_config",
    "load_config",
    "field_function",
    "build_problem",
    "solve_grid",
    "ladder_mesh",
]


@dataclass(frozen=True)
class Issue:
    line: int
    column: int
    message: str

    def __str__(self):
        return f"line {self.line}, column {self.column}: {self.message}"


class ConfigError(ValueError):
    """Invalid configuration; ``issues`` lists every problem found."""

    def __init__(self, issues):
        self.issues = list(issues)
        super().__init__("; ".join(str(i) for i in self.issues))


@dataclass(frozen=True)
class GridConfig:
    mesh: float = 0.25
    nodes_per_axis: Optional[int] = None
    extent: Optional[float] = None


@dataclass(frozen=True)
class ExponentConfig:
    p0: str
    p: Tuple[str, ...]


@dataclass(frozen=True)
class FluxConfig:
    model: str = "anisotropic_laplacian"
    a: Tuple[str, ...] = ()
    a_hat: Tuple[str, ...] = ()
    c: Tuple[str, ...] = ()
    alpha: float = 1.0
    lower_order: str = "none"
    gamma: float = 0.0
    q: str = "1"
    h0: str = "0"
    delta: float = DEFAULT_H_HAT
    H: str = "0"
    h_hat: str = ""
    growth_exponent: str = "conjugate"


@dataclass(frozen=True)
class SolverConfig:
    tol: float = 1e-10
    max_iter: int = 200
    eps_flux: float = 1e-8
    damping_floor: float = 1e-4
    radius: Optional[float] = None


@dataclass(frozen=True)
class DiagnosticsConfig:
    k_values: Tuple[float, ...] = (1.0, 2.0, 4.0, 8.0)
    decay_k_values: Tuple[float, ...] = (2.0, 4.0, 8.0, 16.0)
    entropy_k_values: Tuple[float, ...] = (1.0, 4.0)
    h_values: Tuple[float, ...] = (0.25, 0.5, 1.0, 2.0)
    core_R: float = 2.0
    samples: int = 10_000
    entropy_tests: int = 50
    gap_pairs: int = 1000
    seed: int = 0


@dataclass(frozen=True)
class Config:
    dim: int
    exponents: ExponentConfig
    source: str
    radius_schedule: Tuple[float, ...]
    grid: GridConfig = field(default_factory=GridConfig)
    flux: FluxConfig = field(default_factory=FluxConfig)
    solver: SolverConfig = field(default_factory=SolverConfig)
    diagnostics: DiagnosticsConfig = field(default_factory=DiagnosticsConfig)
    seed: int = 0
    output: str = "out"

    @property
    def solve_radius(self):
        r = self.solver.radius
        return float(self.radius_schedule[0] if r is None else r)


# ---------------------------------------------------------------- positions


class _Locator:
    """Approximate source positions of keys (the TOML reader drops them)."""

    def __init__(self, text):
        self.lines = text.splitlines()

    def find(self, section, key=None):
        current = ""
        header = (1, 1)
        for n, raw in enumerate(self.lines, 1):
            line = raw.split("#", 1)[0]
            m = re.match(r"\s*\[\s*([\w.]+)\s*\]", line)
            if m:
                current = m.group(1)
                if current == section:
                    header = (n, m.start(1) + 1)
                continue
            if key is not None and current == section:
                k = re.match(r"\s*(\"?)(" + re.escape(key) + r")\1\s*=", line)
                if k:
                    return (n, k.start(2) + 1, raw)
        return header + (None,)

    def issue(self, section, key, message, expr_pos=None, index=None):
        line, col, raw = self.find(section, key)
        if expr_pos is not None and raw is not None:
            # opening quote of the expression (the index-th string of a one-line array)
            q = raw.find("=")
            for _ in range(1 + 2 * (index or 0)):
                q = raw.find('"', q + 1)
                if q < 0:
                    break
            if q >= 0:
                col = q + 1 + expr_pos
        return Issue(line, col, message)


# ---------------------------------------------------------------- parsing

_TOP = {"dim", "seed", "output", "grid", "exponents", "flux", "source", "schedule", "solver",
        "diagnostics"}


def _decode_error(err):
    m = re.search(r"line (\d+), column (\d+)", str(err))
    line, col = (int(m.group(1)), int(m.group(2))) if m else (1, 1)
    msg = re.sub(r"\s*\(at .*\)$", "", str(err))
    return ConfigError([Issue(line, col, f"TOML syntax: {msg}")])


class _Reader:
    def __init__(self, doc, loc):
        self.doc = doc
        self.loc = loc
        self.issues: List[Issue] = []

    def err(self, section, key, message, expr_pos=None):
        self.issues.append(self.loc.issue(section, key, message, expr_pos))

    def table(self, name):
        t = self.doc.get(name, {})
        if not isinstance(t, dict):
            self.err("", name, f"[{name}] must be a table")
            return {}
        return t

    def unknown(self, section, table, allowed):
        for k in table:
            if k not in allowed:
                self.err(section, k, f"unknown key {k!r}")

    def number(self, section, table, key, default, kind=float, lo=None, lo_open=False):
        if key not in table:
            return default
        v = table[key]
        ok = isinstance(v, (int, float)) and not isinstance(v, bool)
        if kind is int:
            ok = isinstance(v, int) and not isinstance(v, bool)
        if not ok:
            self.err(section, key, f"{key} must be {'an integer' if kind is int else 'a number'}")
            return default
        v = kind(v)
        if kind is float and not np.isfinite(v):
            self.err(section, key, f"{key} must be finite")
            return default
        if lo is not None and (v <= lo if lo_open else v < lo):
            self.err(section, key, f"{key} must be {'>' if lo_open else '>='} {lo}")
        return v

    def numbers(self, section, table, key, default, positive=True):
        if key not in table:
            return default
        v = table[key]
        if not isinstance(v, list) or not v or not all(
            isinstance(e, (int, float)) and not isinstance(e, bool) for e in v
        ):
            self.err(section, key, f"{key} must be a non-empty list of numbers")
            return default
        out = tuple(float(e) for e in v)
        if positive and any(not e > 0 for e in out):
            self.err(section, key, f"{key} entries must be positive")
        return out

    def string(self, section, table, key, default, choices=None):
        if key not in table:
            return default
        v = table[key]
        if not isinstance(v, str):
            self.err(section, key, f"{key} must be a string")
            return default
        if choices is not None and v not in choices:
            self.err(section, key, f"{key} must be one of {', '.join(choices)}")
        return v

    def strings(self, section, table, key, default):
        if key not in table:
            return default
        v = table[key]
        if isinstance(v, str):
            v = [v]
        if not isinstance(v, list) or not all(isinstance(e, str) for e in v):
            self.err(section, key, f"{key} must be a list of expression strings")
            return default
        return tuple(v)


def _read(doc, loc) -> Tuple[Optional[Config], List[Issue]]:
    r = _Reader(doc, loc)
    r.unknown("", doc, _TOP)
    if "dim" not in doc:
        r.issues.append(Issue(1, 1, "missing required key 'dim'"))
        dim = 2
    else:
        dim = r.number("", doc, "dim", 2, kind=int)
        if dim < 2:
            r.err("", "dim", "dim must be at least 2")
    seed = r.number("", doc, "seed", 0, kind=int, lo=0)
    output = r.string("", doc, "output", "out")

    g = r.table("grid")
    r.unknown("grid", g, {"mesh", "nodes_per_axis", "extent"})
    grid = GridConfig(
        mesh=r.number("grid", g, "mesh", 0.25, lo=0, lo_open=True),
        nodes_per_axis=r.number("grid", g, "nodes_per_axis", None, kind=int, lo=3),
        extent=r.number("grid", g, "extent", None, lo=0, lo_open=True),
    )

    e = r.table("exponents")
    r.unknown("exponents", e, {"p0", "p"})
    if "p0" not in e or "p" not in e:
        r.err("exponents", None, "[exponents] needs p0 and p")
    p0 = r.string("exponents", e, "p0", "2")
    p = r.strings("exponents", e, "p", ("2",) * dim)
    if len(p) != dim:
        r.err("exponents", "p", f"need {dim} directional exponents, got {len(p)}")
    exps = ExponentConfig(p0, p)

    fx = r.table("flux")
    allowed = {f.name for f in fields(FluxConfig)}
    r.unknown("flux", fx, allowed)
    d = FluxConfig()
    flux = FluxConfig(
        model=r.string("flux", fx, "model", d.model, ("anisotropic_laplacian", "custom")),
        a=r.strings("flux", fx, "a", d.a),
        a_hat=r.strings("flux", fx, "a_hat", d.a_hat),
        c=r.strings("flux", fx, "c", d.c),
        alpha=r.number("flux", fx, "alpha", d.alpha, lo=0, lo_open=True),
        lower_order=r.string("flux", fx, "lower_order", d.lower_order, ("none", "nonsign", "custom")),
        gamma=r.number("flux", fx, "gamma", d.gamma),
        q=r.string("flux", fx, "q", d.q),
        h0=r.string("flux", fx, "h0", d.h0),
        delta=r.number("flux", fx, "delta", d.delta, lo=0, lo_open=True),
        H=r.string("flux", fx, "H", d.H),
        h_hat=r.string("flux", fx, "h_hat", d.h_hat),
        growth_exponent=r.string("flux", fx, "growth_exponent", d.growth_exponent,
                                 ("conjugate", "primal")),
    )
    if flux.model == "custom":
        for key, vals in (("a", flux.a), ("a_hat", flux.a_hat), ("c", flux.c)):
            if len(vals) != dim:
                r.err("flux", key, f"custom flux needs {dim} entries in {key}")

    src = r.table("source")
    r.unknown("source", src, {"f"})
    if "f" not in src:
        r.err("source", None, "[source] needs f")
    f = r.string("source", src, "f", "0")

    sch = r.table("schedule")
    r.unknown("schedule", sch, {"radii"})
    if "radii" not in sch:
        r.err("schedule", None, "[schedule] needs radii")
    radii = r.numbers("schedule", sch, "radii", (1.0,))
    if any(b <= a for a, b in zip(radii, radii[1:])):
        r.err("schedule", "radii", "radius schedule must be strictly increasing")

    sv = r.table("solver")
    r.unknown("solver", sv, {f.name for f in fields(SolverConfig)})
    ds = SolverConfig()
    solver = SolverConfig(
        tol=r.number("solver", sv, "tol", ds.tol, lo=0, lo_open=True),
        max_iter=r.number("solver", sv, "max_iter", ds.max_iter, kind=int, lo=1),
        eps_flux=r.number("solver", sv, "eps_flux", ds.eps_flux, lo=0),
        damping_floor=r.number("solver", sv, "damping_floor", ds.damping_floor, lo=0, lo_open=True),
        radius=r.number("solver", sv, "radius", ds.radius, lo=0, lo_open=True),
    )
    if solver.damping_floor > 1:
        r.err("solver", "damping_floor", "damping_floor must not exceed 1")

    dg = r.table("diagnostics")
    r.unknown("diagnostics", dg, {f.name for f in fields(DiagnosticsConfig)})
    dd = DiagnosticsConfig()
    diag = DiagnosticsConfig(
        k_values=r.numbers("diagnostics", dg, "k_values", dd.k_values),
        decay_k_values=r.numbers("diagnostics", dg, "decay_k_values", dd.decay_k_values),
        entropy_k_values=r.numbers("diagnostics", dg, "entropy_k_values", dd.entropy_k_values),
        h_values=r.numbers("diagnostics", dg, "h_values", dd.h_values),
        core_R=r.number("diagnostics", dg, "core_R", dd.core_R, lo=0, lo_open=True),
        samples=r.number("diagnostics", dg, "samples", dd.samples, kind=int, lo=1),
        entropy_tests=r.number("diagnostics", dg, "entropy_tests", dd.entropy_tests, kind=int, lo=0),
        gap_pairs=r.number("diagnostics", dg, "gap_pairs", dd.gap_pairs, kind=int, lo=0),
        seed=r.number("diagnostics", dg, "seed", dd.seed, kind=int, lo=0),
    )
    if any(b <= a for a, b in zip(diag.h_values, diag.h_values[1:])):
        r.err("diagnostics", "h_values", "h_values must be increasing")
    if any(k <= 1 for k in diag.decay_k_values):
        r.err("diagnostics", "decay_k_values", "decay_k_values must exceed 1")
    if r.issues:
        return None, r.issues
    cfg = Config(dim, exps, f, radii, grid, flux, solver, diag, seed, output)
    return cfg, []


# ---------------------------------------------------------------- expressions

def _vars(dim, *kinds):
    out = set()
    if "x" in kinds:
        out |= {f"x{i + 1}" for i in range(dim)}
    if "s" in kinds:
        out.add("s")
    if "xi" in kinds:
        out |= {f"xi{i + 1}" for i in range(dim)}
    if "p" in kinds:
        out |= {f"p{i}" for i in range(dim + 1)}
    return out


def _expressions(cfg: Config):
    """(section, key, index, text, allowed variables) for every expression."""
    n = cfg.dim
    xs = _vars(n, "x")
    full = _vars(n, "x", "s", "xi", "p")
    out = [("exponents", "p0", None, cfg.exponents.p0, xs)]
    out += [("exponents", "p", i, t, xs) for i, t in enumerate(cfg.exponents.p)]
    out.append(("source", "f", None, cfg.source, xs))
    fl = cfg.flux
    if fl.model == "custom":
        out += [("flux", "a", i, t, full) for i, t in enumerate(fl.a)]
        out += [("flux", "a_hat", i, t, {"s"}) for i, t in enumerate(fl.a_hat)]
        out += [("flux", "c", i, t, xs) for i, t in enumerate(fl.c)]
    if fl.lower_order == "nonsign":
        out += [("flux", "q", None, fl.q, xs), ("flux", "h0", None, fl.h0, xs)]
    if fl.lower_order == "custom":
        out += [("flux", "H", None, fl.H, full), ("flux", "h0", None, fl.h0, xs)]
        if fl.h_hat:
            out.append(("flux", "h_hat", None, fl.h_hat, {"s"}))
    return out


def _compile_all(cfg, loc):
    issues = []
    compiled = {}
    for section, key, idx, text, allowed in _expressions(cfg):
        label = key if idx is None else f"{key}[{idx}]"
        try:
            e = parse_expression(text)
        except ExpressionError as err:
            issues.append(loc.issue(section, key, f"{label}: {err.message}", err.pos, idx))
            continue
        extra = sorted(set(e.variables) - allowed)
        if extra:
            issues.append(loc.issue(section, key, f"{label}: unknown variable(s) {', '.join(extra)}"))
            continue
        compiled[(key, idx)] = e
    return compiled, issues


def field_function(e: Expression, dim):
    """``coords (dim, ...) -> values`` for an expression in ``x1..xN``."""

    def func(x):
        x = np.asarray(x, dtype=float)
        env = {f"x{i + 1}": x[i] for i in range(dim)}
        return np.broadcast_to(e(**env), x.shape[1:])

    return func


def _state_function(e: Expression, dim, component=None):
    def func(x, s, xi, p):
        x = np.asarray(x, dtype=float)
        xi = np.asarray(xi, dtype=float)
        env = {f"x{i + 1}": x[i] for i in range(dim)}
        env.update({f"xi{i + 1}": xi[i] for i in range(dim)})
        env["s"] = np.asarray(s, dtype=float)
        if p is not None:
            p = np.asarray(p, dtype=float)
            env.update({f"p{i + 1}": p[i] for i in range(dim)})
        return np.broadcast_to(e(**env), xi.shape[1:])

    return func


def _radial_function(e: Expression):
    def func(r):
        return np.broadcast_to(e(s=np.abs(np.asarray(r, dtype=float))), np.shape(r))

    return func


def _constant_value(e: Expression):
    return float(e()) if not e.variables else None


# ---------------------------------------------------------------- grids


def ladder_mesh(cfg: Config):
    return cfg.grid.mesh


def solve_grid(cfg: Config, radius=None) -> Grid:
    """Grid for single-radius modes: fixed node count if given, else the ladder mesh."""
    n = cfg.solve_radius if radius is None else float(radius)
    g = cfg.grid
    if g.nodes_per_axis is not None:
        extent = n + 1.0 if g.extent is None else g.extent
        return Grid(cfg.dim, float(extent), int(g.nodes_per_axis), n)
    return Grid.with_mesh(cfg.dim, n, g.mesh, g.extent)


def _grids(cfg):
    # every grid a run may sample fields on
    grids = [solve_grid(cfg)]
    grids += [Grid.with_mesh(cfg.dim, r, cfg.grid.mesh) for r in cfg.radius_schedule]
    return grids


# ---------------------------------------------------------------- assembly


def _exponent_functions(cfg, compiled):
    n = cfg.dim
    p0 = field_function(compiled[("p0", None)], n)
    p = [field_function(compiled[("p", i)], n) for i in range(n)]
    return p0, p


def _exponent_vector(cfg, compiled, grid, enforce=True):
    p0f, pf = _exponent_functions(cfg, compiled)
    return ExponentVector(
        ExponentField.from_function(p0f, grid),
        [ExponentField.from_function(f, grid) for f in pf],
        enforce_dominance=enforce,
    )


def _validate_fields(cfg, compiled, loc):
    issues = []
    try:
        grids = _grids(cfg)
    except ValueError as err:
        key = "nodes_per_axis" if cfg.grid.nodes_per_axis else "mesh"
        return [loc.issue("grid", key, str(err))]
    p0f, pf = _exponent_functions(cfg, compiled)
    src = field_function(compiled[("f", None)], cfg.dim)
    for grid in grids:
        env = {}
        try:
            for key, idx, func in [("p0", None, p0f)] + [("p", i, f) for i, f in enumerate(pf)]:
                try:
                    env[(key, idx)] = ExponentField.from_function(func, grid)
                except ValueError as err:
                    label = key if idx is None else f"{key}[{idx}]"
                    issues.append(loc.issue("exponents", key, f"{label}: {err}"))
            if len(env) == cfg.dim + 1:
                pv = ExponentVector(env[("p0", None)], [env[("p", i)] for i in range(cfg.dim)],
                                    enforce_dominance=False)
                gap = pv.dominance_gap()
                if gap > 0:
                    issues.append(loc.issue(
                        "exponents", "p0",
                        f"p0 must satisfy p0(x) >= min_i p_i(x) at every node "
                        f"(fails by {gap:.3g} on the grid of radius {grid.active_radius:g})"))
            vals = np.asarray(src(grid.coords), dtype=float)
            if not np.all(np.isfinite(vals)):
                issues.append(loc.issue("source", "f", "source is not finite on the grid"))
        except ExpressionError as err:
            issues.append(loc.issue("exponents", None, str(err)))
        if issues:
            break
    if cfg.diagnostics.core_R >= cfg.radius_schedule[0]:
        issues.append(loc.issue("diagnostics", "core_R",
                                "core_R must be below the smallest radius of the schedule"))
    return issues


def parse_config(text) -> Config:
    """Parse and validate configuration text (``bytes`` or ``str``).

    Raises :class:`ConfigError` listing every issue with its line and column.
    """
    if isinstance(text, bytes):
        try:
            text = text.decode("utf-8")
        except UnicodeDecodeError as err:
            raise ConfigError([Issue(1, 1, f"not UTF-8: {err}")]) from None
    try:
        doc = tomllib.loads(text)
    except tomllib.TOMLDecodeError as err:
        raise _decode_error(err) from None
    loc = _Locator(text)
    cfg, issues = _read(doc, loc)
    if issues:
        raise ConfigError(issues)
    compiled, issues = _compile_all(cfg, loc)
    if issues:
        raise ConfigError(issues)
    issues = _validate_fields(cfg, compiled, loc)
    if issues:
        raise ConfigError(issues)
    return cfg


def load_config(path) -> Config:
    with open(path, "rb") as fh:
        return parse_config(fh.read())


def _drop_none(d):
    if isinstance(d, dict):
        return {k: _drop_none(v) for k, v in d.items() if v is not None}
    if isinstance(d, tuple):
        return list(d)
    return d


def emit_config(cfg: Config) -> str:
    """TOML text that :func:`parse_config` maps back to an equal ``Config``."""
    d = asdict(cfg)
    out = {
        "dim": cfg.dim,
        "seed": cfg.seed,
        "output": cfg.output,
        "grid": d["grid"],
        "exponents": d["exponents"],
        "flux": d["flux"],
        "source": {"f": cfg.source},
        "schedule": {"radii": d["radius_schedule"]},
        "solver": d["solver"],
        "diagnostics": d["diagnostics"],
    }
    return tomli_w.dumps(_drop_none(out))


def with_overrides(cfg: Config, seed=None, nodes=None) -> Config:
    """Apply command-line overrides (seed and node count)."""
    if seed is not None:
        cfg = replace(cfg, seed=int(seed), diagnostics=replace(cfg.diagnostics, seed=int(seed)))
    if nodes is not None:
        cfg = replace(cfg, grid=replace(cfg.grid, nodes_per_axis=int(nodes)))
    return cfg


def _compiled(cfg):
    compiled, issues = _compile_all(cfg, _Locator(""))
    if issues:
        raise ConfigError(issues)
    return compiled


def _flux_model(cfg, compiled, pv, eps):
    fl = cfg.flux
    n = cfg.dim
    if fl.model == "anisotropic_laplacian":
        model = model_anisotropic_laplacian(pv, eps=eps)
        if fl.alpha != 1.0:
            model = replace(model, alpha=fl.alpha)
    else:
        a_funcs = [_state_function(compiled[("a", i)], n) for i in range(n)]

        def a(x, s, xi, p):
            return np.stack([f(x, s, xi, p) for f in a_funcs])

        model = FluxModel(
            name="custom",
            a=a,
            a_hat=[_radial_function(compiled[("a_hat", i)]) for i in range(n)],
            c=[field_function(compiled[("c", i)], n) for i in range(n)],
            alpha=fl.alpha,
            exponents=pv,
            eps=eps,
        )
    model = replace(model, growth_exponent=fl.growth_exponent)
    if fl.lower_order == "nonsign":
        lower = model_nonsign_lower_order(
            fl.gamma, field_function(compiled[("q", None)], n),
            h0=field_function(compiled[("h0", None)], n), delta=fl.delta, dim=n,
        )
        model = with_lower_order(model, lower)
    elif fl.lower_order == "custom":
        hh = compiled.get(("h_hat", None))
        const = DEFAULT_H_HAT if hh is None else _constant_value(hh)
        h_hat = (lambda r: np.full(np.shape(r), DEFAULT_H_HAT)) if hh is None else _radial_function(hh)
        h0 = field_function(compiled[("h0", None)], n)
        lower = LowerOrder(_state_function(compiled[("H", None)], n), h_hat,
                           lambda x: np.abs(h0(x)), const)
        model = with_lower_order(model, lower)
    return model


def build_problem(cfg: Config, grid: Optional[Grid] = None) -> ProblemSpec:
    """Materialise the configured problem; exponents are first sampled on ``grid``."""
    compiled = _compiled(cfg)
    grid = solve_grid(cfg) if grid is None else grid
    pv = _exponent_vector(cfg, compiled, grid)
    model = _flux_model(cfg, compiled, pv, cfg.solver.eps_flux)
    return ProblemSpec(
        dim=cfg.dim,
        exponents=pv,
        flux=model,
        source=field_function(compiled[("f", None)], cfg.dim),
        radius_schedule=list(cfg.radius_schedule),
        eps_flux=cfg.solver.eps_flux,
        mesh=cfg.grid.mesh,
    )
