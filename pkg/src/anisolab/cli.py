"""Command-line front end: ``anisolab MODE --config FILE [--out DIR] [--seed N] [--grid N]``.

Exit status: 0 success, 1 configuration error, 2 solver non-convergence,
3 internal invariant breach (or a sampled hypothesis violation in verify).
"""

import argparse
import csv
import hashlib
import json
import logging
import os
import sys

import numpy as np

import anisolab
from anisolab import kernels
from anisolab.config import (
    ConfigError,
    Issue,
    build_problem,
    emit_config,
    load_config,
    solve_grid,
    with_overrides,
)
from anisolab.diagnostics import entropy_sweep, ladder_study, random_gap_pairs, tol_entropy
from anisolab.exponents import critical_exponents, harmonic_mean_exponent
from anisolab.flux import REL_TOL, model_anisotropic_laplacian, verify_hypotheses
from anisolab.solver import ConvergenceError, LinearSolveError, build_regularized, solve
from anisolab.spaces import luxemburg_norm, modular

__all__ = ["main", "run", "InvariantError", "write_csv"]

log = logging.getLogger("anisolab")

EXIT_OK, EXIT_CONFIG, EXIT_NONCONVERGED, EXIT_INVARIANT = 0, 1, 2, 3

LUXEMBURG_TOL = 1e-12

CSV_SCHEMAS = """\
CSV files (header row first, floats written with 17 significant digits):
  solve:  solution.csv          i1..iN, x1..xN, value
          solve_report.csv      iteration, residual, damping, cg_iterations
  ladder: ladder_summary.csv    n, converged, iterations, final_residual, estimate_constant,
                                tail_constant, diff_from_previous, gap_to_finest
          energy_estimate.csv   n, k, L, L_over_k
          measure_decay.csv     n, k, meas, scaled
          equi_integrability.csv n, h, tail_lhs, data_tail
          entropy.csv           test, k, residual, tol_entropy
          monotonicity_gap.csv  n, gap
          random_gaps.csv       pair, gap
          solution_n<n>.csv     i1..iN, x1..xN, value
  verify: hypotheses.csv        hypothesis, checked, violations, worst_margin
  norms:  norms.csv             field, exponent, modular, luxemburg
          exponents.csv         name, min, max
          critical_exponents.csv i1..iN, x1..xN, pbar, p_star, p_inf
Every run also writes manifest.json (config hash, seed, tolerances, versions).
"""


class InvariantError(RuntimeError):
    """A quantity that must hold by construction did not."""


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".17g")
    return str(v)


def write_csv(path, columns, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for r in rows:
            w.writerow([_fmt(v) for v in r])
    return path


def _node_rows(grid, *fields):
    idx = np.indices(grid.shape).reshape(grid.dim, -1).T
    X = grid.coords.reshape(grid.dim, -1).T
    cols = [np.asarray(f).ravel() for f in fields]
    for j in range(idx.shape[0]):
        yield tuple(int(i) for i in idx[j]) + tuple(X[j]) + tuple(c[j] for c in cols)


def _node_columns(dim, *names):
    return tuple(f"i{i + 1}" for i in range(dim)) + tuple(f"x{i + 1}" for i in range(dim)) + names


def _sha256(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        h.update(fh.read())
    return h.hexdigest()


def _manifest(out, mode, cfg, files, extra=None):
    text = emit_config(cfg)
    man = {
        "mode": mode,
        "config_sha256": hashlib.sha256(text.encode("utf-8")).hexdigest(),
        "seed": cfg.seed,
        "diagnostics_seed": cfg.diagnostics.seed,
        "tolerances": {
            "solver_tol": cfg.solver.tol,
            "max_iter": cfg.solver.max_iter,
            "eps_flux": cfg.solver.eps_flux,
            "damping_floor": cfg.solver.damping_floor,
            "luxemburg_tol": LUXEMBURG_TOL,
            "hypothesis_rel_tol": REL_TOL,
        },
        "versions": {
            "anisolab": anisolab.__version__,
            "numpy": np.__version__,
            "python": ".".join(map(str, sys.version_info[:3])),
            "kernel_backend": kernels.BACKEND,
        },
        "files": {os.path.basename(f): _sha256(f) for f in sorted(files)},
    }
    if extra:
        man.update(extra)
    path = os.path.join(out, "manifest.json")
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(man, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


def _check_regularisation(rp):
    f = np.abs(rp.spec.source_on(rp.grid).values)
    fn = np.abs(rp.f_n.values)
    if np.any(fn > np.minimum(f, rp.n) * (1 + 1e-15)) or np.any(fn[~rp.active]):
        raise InvariantError("regularised source exceeds min(|f|, n) or leaks outside the ball")


def _run_solve(cfg, out):
    spec = build_problem(cfg)
    grid = solve_grid(cfg)
    rp = build_regularized(spec, cfg.solve_radius, grid)
    _check_regularisation(rp)
    u, rep = solve(rp, tol=cfg.solver.tol, max_iter=cfg.solver.max_iter,
                   damping_floor=cfg.solver.damping_floor)
    if not u.is_dirichlet():
        raise InvariantError("solution is nonzero outside the truncated domain")
    files = [
        write_csv(os.path.join(out, "solution.csv"), _node_columns(grid.dim, "value"),
                  _node_rows(grid, u.values)),
        write_csv(os.path.join(out, "solve_report.csv"),
                  ("iteration", "residual", "damping", "cg_iterations"),
                  [(j, r, rep.damping_history[j - 1] if j else 1.0,
                    rep.cg_iterations[j - 1] if j else 0)
                   for j, r in enumerate(rep.residual_history)]),
    ]
    _manifest(out, "solve", cfg, files, {"converged": rep.converged, "iterations": rep.iterations})
    log.info("solve: %s after %d iterations, residual %.3e", rep.message, rep.iterations,
             rep.final_residual)
    return EXIT_OK if rep.converged else EXIT_NONCONVERGED


def _run_ladder(cfg, out):
    spec = build_problem(cfg)
    d = cfg.diagnostics
    mesh = cfg.grid.mesh
    if cfg.grid.nodes_per_axis is not None:
        # a node-count override sets the step of the first rung
        mesh = 2.0 * (cfg.radius_schedule[0] + 1.0) / (cfg.grid.nodes_per_axis - 1)
    rep = ladder_study(spec, d.core_R, mesh=mesh, k_values=d.k_values,
                       decay_k_values=d.decay_k_values, h_values=d.h_values,
                       tol=cfg.solver.tol, max_iter=cfg.solver.max_iter,
                       damping_floor=cfg.solver.damping_floor)
    files = [write_csv(os.path.join(out, "ladder_summary.csv"), rep.SUMMARY_COLUMNS,
                       rep.summary_rows())]
    files.append(write_csv(os.path.join(out, "energy_estimate.csv"), ("n", "k", "L", "L_over_k"),
                           [(r.n,) + row for r in rep.rungs for row in r.energy_table]))
    files.append(write_csv(os.path.join(out, "measure_decay.csv"), ("n", "k", "meas", "scaled"),
                           [(r.n,) + row for r in rep.rungs for row in r.decay_table]))
    files.append(write_csv(os.path.join(out, "equi_integrability.csv"),
                           ("n", "h", "tail_lhs", "data_tail"),
                           [(r.n,) + row for r in rep.rungs for row in r.tail_table]))
    files.append(write_csv(os.path.join(out, "monotonicity_gap.csv"), ("n", "gap"),
                           zip(rep.radii, rep.gaps)))
    finest = rep.rungs[-1]
    tol_e = tol_entropy(cfg.solver.tol, finest.problem.grid)
    ent = entropy_sweep(finest.solution, finest.problem, d.entropy_k_values, d.entropy_tests,
                        d.core_R, d.seed)
    files.append(write_csv(os.path.join(out, "entropy.csv"), ("test", "k", "residual", "tol_entropy"),
                           [row + (tol_e,) for row in ent]))
    gaps = random_gap_pairs(finest.problem.grid, _eps0(spec.flux, finest.problem), d.gap_pairs,
                            k=max(d.k_values), R=d.core_R, seed=d.seed)
    files.append(write_csv(os.path.join(out, "random_gaps.csv"), ("pair", "gap"), enumerate(gaps)))
    for r in rep.rungs:
        g = r.solution.grid
        files.append(write_csv(os.path.join(out, f"solution_n{r.n:g}.csv"),
                               _node_columns(g.dim, "value"), _node_rows(g, r.solution.values)))
    _manifest(out, "ladder", cfg, files, {"converged": rep.converged})

    if not all(np.isfinite(rep.diffs)) or not all(np.isfinite(rep.estimate_constants)):
        raise InvariantError("non-finite ladder quantities")
    if any(row[2] != 0.0 for row in ent if row[0] == "self"):
        raise InvariantError("entropy residual with xi = u is not zero")
    if np.any(gaps < -1e-12 * np.maximum(1.0, np.abs(gaps).max())):
        raise InvariantError("negative monotonicity gap")
    if not all(rep.converged):
        return EXIT_NONCONVERGED
    return EXIT_OK


def _eps0(model, rp):
    # the built-in flux at eps = 0, for the exact monotonicity check
    if model.name != "anisotropic_laplacian":
        return model
    return model_anisotropic_laplacian(rp.exponents, eps=0.0)


def _run_verify(cfg, out):
    spec = build_problem(cfg)
    pv = spec.exponents
    rep = verify_hypotheses(spec.flux, pv, samples=cfg.diagnostics.samples, seed=cfg.diagnostics.seed)
    files = [write_csv(os.path.join(out, "hypotheses.csv"),
                       ("hypothesis", "checked", "violations", "worst_margin"), rep.rows())]
    _manifest(out, "verify", cfg, files)
    bad = sum(r.violations for r in rep.results.values())
    for name, checked, viol, margin in rep.rows():
        log.info("%s: %d/%d violations, worst margin %.3e", name, viol, checked, margin)
    return EXIT_OK if bad == 0 else EXIT_INVARIANT


def _run_norms(cfg, out):
    spec = build_problem(cfg)
    grid = solve_grid(cfg)
    pv = spec.exponents
    f = grid.function(spec.source_on(grid).values)
    named = [("p0", pv.p0)] + [(f"p{i + 1}", q) for i, q in enumerate(pv.p)]
    rows = [("f", name, modular(f, q), luxemburg_norm(f, q, LUXEMBURG_TOL)) for name, q in named]
    pbar = harmonic_mean_exponent(pv)
    crit = critical_exponents(pv)
    ex_rows = [(name, q.p_minus, q.p_plus) for name, q in named]
    ex_rows += [("pbar", pbar.p_minus, pbar.p_plus),
                ("p_star", float(np.min(crit.p_star)), float(np.max(crit.p_star))),
                ("p_inf", float(np.min(crit.p_inf)), float(np.max(crit.p_inf)))]
    files = [
        write_csv(os.path.join(out, "norms.csv"), ("field", "exponent", "modular", "luxemburg"), rows),
        write_csv(os.path.join(out, "exponents.csv"), ("name", "min", "max"), ex_rows),
        write_csv(os.path.join(out, "critical_exponents.csv"),
                  _node_columns(grid.dim, "pbar", "p_star", "p_inf"),
                  _node_rows(grid, pbar.values, crit.p_star, crit.p_inf)),
    ]
    _manifest(out, "norms", cfg, files)
    return EXIT_OK


MODES = {"solve": _run_solve, "ladder": _run_ladder, "verify": _run_verify, "norms": _run_norms}


def run(mode, cfg, out=None):
    """Run ``mode`` for a validated config; returns the exit status."""
    out = cfg.output if out is None else out
    os.makedirs(out, exist_ok=True)
    return MODES[mode](cfg, out)


def _parser():
    p = argparse.ArgumentParser(
        prog="anisolab",
        description="Solve and diagnose regularised anisotropic variable-exponent problems.",
        epilog=CSV_SCHEMAS + "\nExit status: 0 ok, 1 config error, 2 non-convergence, "
        "3 invariant breach or hypothesis violation.",
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    p.add_argument("mode", choices=sorted(MODES))
    p.add_argument("--config", required=True, help="TOML configuration file")
    p.add_argument("--out", help="output directory (default: the config's output key)")
    p.add_argument("--seed", type=int, help="override the configured seed")
    p.add_argument("--grid", type=int, metavar="N", help="override nodes per axis")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv=None):
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config)
        if args.grid is not None and args.grid < 3:
            raise ConfigError([Issue(1, 1, "--grid needs at least 3 nodes per axis")])
        cfg = with_overrides(cfg, seed=args.seed, nodes=args.grid)
        return run(args.mode, cfg, args.out)
    except OSError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except ConfigError as err:
        for issue in err.issues:
            print(f"{args.config}:{issue.line}:{issue.column}: {issue.message}", file=sys.stderr)
        return EXIT_CONFIG
    except (ConvergenceError, LinearSolveError) as err:
        print(f"solver failure: {err}", file=sys.stderr)
        return EXIT_NONCONVERGED
    except InvariantError as err:
        print(f"invariant breach: {err}", file=sys.stderr)
        return EXIT_INVARIANT


if __name__ == "__main__":
    sys.exit(main())
