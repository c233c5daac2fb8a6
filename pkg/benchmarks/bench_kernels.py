"""Compare the compiled and numpy kernel backends.

    python3 benchmarks/bench_kernels.py [--sizes 65 129 257] [--repeat 5] [--solve]

Prints the best-of-``repeat`` time per call for every kernel and backend,
and the speed-up of the compiled backend.  ``--solve`` also times a full
nonlinear solve in a subprocess per backend (the backend is fixed at import).
"""

import argparse
import os
import subprocess
import sys
import timeit

import numpy as np

from anisolab.kernels import available_backends

SOLVE_SNIPPET = """
import time, numpy as np
from anisolab.exponents import ExponentField, ExponentVector
from anisolab.flux import ProblemSpec, model_anisotropic_laplacian
from anisolab.grid import Grid
from anisolab.solver import build_regularized, solve
g = Grid.with_mesh(2, 4.0, {mesh})
pv = ExponentVector(ExponentField.constant(3.0, g), [ExponentField.constant(2.5, g), ExponentField.constant(3.0, g)])
spec = ProblemSpec(2, pv, model_anisotropic_laplacian(pv), lambda x: np.exp(-np.sum(x**2, axis=0)), [4.0], mesh={mesh})
rp = build_regularized(spec, 4.0)
t = time.perf_counter()
u, rep = solve(rp)
print(time.perf_counter() - t, rep.iterations, rep.converged)
"""


def _cases(m, rng):
    shape = (m, m)
    size = m * m
    u = rng.standard_normal(size)
    p = rng.uniform(1.5, 3.0, size)
    w = np.ascontiguousarray(rng.uniform(0.5, 2.0, (2, size)))
    c0 = rng.uniform(0.5, 2.0, size)
    active = np.ascontiguousarray(rng.random(size) < 0.8, dtype=np.uint8)
    return {
        "modular_sum": lambda k: k.modular_sum(u, p, 1.0),
        "luxemburg_gauge": lambda k: k.luxemburg_gauge(u, p, 1.0 / size, 1e-12, 200),
        "aniso_flux": lambda k: k.aniso_flux(u, p, 1e-8),
        "aniso_weights": lambda k: k.aniso_weights(u, p, 1e-8),
        "lagged_apply": lambda k: k.lagged_apply(u, w, c0, shape, 4.0, active),
    }


def bench(sizes, repeat):
    backends = available_backends()
    rng = np.random.default_rng(0)
    rows = []
    for m in sizes:
        for name, call in _cases(m, rng).items():
            times = {}
            for bname, mod in backends.items():
                call(mod)
                number = max(1, int(0.05 / max(timeit.timeit(lambda: call(mod), number=1), 1e-7)))
                times[bname] = min(timeit.repeat(lambda: call(mod), number=number, repeat=repeat)) / number
            rows.append((m, name, times))
    return list(backends), rows


def solve_times(mesh):
    out = {}
    for bname in available_backends():
        env = dict(os.environ, ANISOLAB_BACKEND=bname)
        res = subprocess.run([sys.executable, "-c", SOLVE_SNIPPET.format(mesh=mesh)], env=env,
                             capture_output=True, text=True, check=True)
        t, it, ok = res.stdout.split()
        out[bname] = (float(t), int(it), ok == "True")
    return out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--sizes", type=int, nargs="+", default=[65, 129, 257])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--solve", action="store_true")
    ap.add_argument("--mesh", type=float, default=0.125)
    args = ap.parse_args(argv)

    names, rows = bench(args.sizes, args.repeat)
    head = f"{'nodes':>8} {'kernel':<16}" + "".join(f"{n + ' [us]':>16}" for n in names)
    if "cython" in names:
        head += f"{'speed-up':>10}"
    print(head)
    for m, kernel, times in rows:
        line = f"{m * m:>8} {kernel:<16}" + "".join(f"{1e6 * times[n]:>16.1f}" for n in names)
        if "cython" in names:
            line += f"{times['python'] / times['cython']:>10.1f}"
        print(line)
    if len(names) == 1:
        print("compiled backend not built; only the numpy backend was timed")
    if args.solve:
        for bname, (t, it, ok) in solve_times(args.mesh).items():
            print(f"solve [{bname}]: {t:.3f} s, {it} iterations, converged={ok}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
