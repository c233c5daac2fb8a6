import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from anisolab.cli import CSV_SCHEMAS, main

CONFIG = """\
dim = 2
seed = 1

[grid]
mesh = 0.5

[exponents]
p0 = "{p0}"
p = ["{p}", "{p}"]

[flux]
{flux}

[source]
f = "exp(-(x1^2 + x2^2))"

[schedule]
radii = [3, 5]

[solver]
tol = 1e-11
{solver}

[diagnostics]
samples = 500
entropy_tests = 5
gap_pairs = 50
core_R = 2
"""


def write_config(tmp_path, p0="2", p="2", flux="", solver="", name="run.toml"):
    path = tmp_path / name
    path.write_text(CONFIG.format(p0=p0, p=p, flux=flux, solver=solver))
    return str(path)


def read_csv(path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    return rows[0], rows[1:]


def test_solve_matches_oracle(tmp_path):
    from anisolab.config import build_problem, load_config, solve_grid
    from anisolab.solver import build_regularized
    from test_solver import stencil_solve

    cfg_path = write_config(tmp_path)
    out = tmp_path / "out"
    assert main(["solve", "--config", cfg_path, "--out", str(out)]) == 0
    head, rows = read_csv(out / "solution.csv")
    assert head == ["i1", "i2", "x1", "x2", "value"]
    cfg = load_config(cfg_path)
    rp = build_regularized(build_problem(cfg), 3.0, solve_grid(cfg))
    ref = stencil_solve(rp)
    vals = np.array([float(r[-1]) for r in rows]).reshape(rp.grid.shape)
    assert np.max(np.abs(vals - ref)) <= 1e-9 * np.max(np.abs(ref))
    head, rows = read_csv(out / "solve_report.csv")
    assert head == ["iteration", "residual", "damping", "cg_iterations"]
    man = json.loads((out / "manifest.json").read_text())
    assert man["seed"] == 1 and set(man["files"]) == {"solution.csv", "solve_report.csv"}
    assert man["tolerances"]["solver_tol"] == 1e-11


def test_norms_constant_exponents(tmp_path):
    cfg_path = write_config(tmp_path, p0="3", p="3")
    out = tmp_path / "n"
    assert main(["norms", "--config", cfg_path, "--out", str(out)]) == 0
    head, rows = read_csv(out / "norms.csv")
    assert head == ["field", "exponent", "modular", "luxemburg"]
    for _, _, mod, lux in rows:
        assert float(lux) == pytest.approx(float(mod) ** (1 / 3), rel=1e-10)
    head, rows = read_csv(out / "exponents.csv")
    pstar = {r[0]: float(r[1]) for r in rows}["p_star"]
    assert np.isinf(pstar)


def test_verify_builtin_and_broken(tmp_path):
    cfg_path = write_config(tmp_path, p0="2.5", p="2 + 0.5*sin(x1)")
    out = tmp_path / "v"
    assert main(["verify", "--config", cfg_path, "--out", str(out)]) == 0
    _, rows = read_csv(out / "hypotheses.csv")
    assert [int(r[2]) for r in rows] == [0, 0, 0, 0]
    broken = 'model = "custom"\na = ["-xi1", "-xi2"]\na_hat = ["1", "1"]\nc = ["0", "0"]'
    cfg_path = write_config(tmp_path, flux=broken, name="broken.toml")
    assert main(["verify", "--config", cfg_path, "--out", str(tmp_path / "b")]) == 3


def test_config_error_exit(tmp_path, capsys):
    cfg_path = write_config(tmp_path, p="1")
    assert main(["solve", "--config", cfg_path, "--out", str(tmp_path / "x")]) == 1
    err = capsys.readouterr().err
    assert "run.toml:9:" in err
    assert main(["solve", "--config", str(tmp_path / "missing.toml")]) == 1
    assert main(["solve", "--config", cfg_path, "--grid", "2"]) == 1


def test_nonconvergence_exit(tmp_path):
    cfg_path = write_config(tmp_path, p0="3", p="3", solver="max_iter = 1")
    assert main(["solve", "--config", cfg_path, "--out", str(tmp_path / "y")]) == 2


def test_ladder_outputs(tmp_path):
    cfg_path = write_config(tmp_path)
    out = tmp_path / "l"
    assert main(["ladder", "--config", cfg_path, "--out", str(out)]) == 0
    expected = {
        "ladder_summary.csv": ["n", "converged", "iterations", "final_residual", "estimate_constant",
                               "tail_constant", "diff_from_previous", "gap_to_finest"],
        "energy_estimate.csv": ["n", "k", "L", "L_over_k"],
        "measure_decay.csv": ["n", "k", "meas", "scaled"],
        "equi_integrability.csv": ["n", "h", "tail_lhs", "data_tail"],
        "entropy.csv": ["test", "k", "residual", "tol_entropy"],
        "monotonicity_gap.csv": ["n", "gap"],
        "random_gaps.csv": ["pair", "gap"],
        "solution_n3.csv": ["i1", "i2", "x1", "x2", "value"],
        "solution_n5.csv": ["i1", "i2", "x1", "x2", "value"],
    }
    for name, head in expected.items():
        assert read_csv(out / name)[0] == head, name
        assert name in CSV_SCHEMAS or name.startswith("solution_n")
    _, rows = read_csv(out / "entropy.csv")
    assert all(float(r[2]) <= float(r[3]) for r in rows)


def test_seed_override_changes_random_outputs(tmp_path):
    cfg_path = write_config(tmp_path)
    a, b = tmp_path / "a", tmp_path / "b"
    main(["ladder", "--config", cfg_path, "--out", str(a)])
    main(["ladder", "--config", cfg_path, "--out", str(b), "--seed", "2"])
    assert (a / "solution_n5.csv").read_bytes() == (b / "solution_n5.csv").read_bytes()
    assert (a / "random_gaps.csv").read_bytes() != (b / "random_gaps.csv").read_bytes()


def test_help_lists_schemas():
    res = subprocess.run([sys.executable, "-m", "anisolab.cli", "--help"], capture_output=True,
                         text=True, check=True)
    assert "ladder_summary.csv" in res.stdout and "Exit status" in res.stdout
