"""Compare the numba and numpy backends on the unit-atom example.

Run with ``python3 benchmarks/bench_kernels.py [--sizes 400 1600 6400]``.
Reports wall time per step (after a warm-up run that pays the JIT cost) and
the largest difference between the two final states.
"""

import argparse
import time

import numpy as np

from mvcl.evolution import SolverConfig, run
from mvcl.flux import inverse_power
from mvcl.state import Grid, from_config


def timed_run(n: int, backend: str, steps: int):
    grid = Grid(-1.0, 3.0, n)
    flux = inverse_power(1.0)
    dt_est = 0.45 * grid.dx / flux.lipschitz_bound
    cfg = SolverConfig(end_time=steps * dt_est, backend=backend)
    initial = from_config(grid, 0.0, [(0.0, 1.0)])
    t0 = time.perf_counter()
    traj = run(initial, flux, cfg)
    return time.perf_counter() - t0, traj


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", type=int, nargs="+", default=[400, 1600, 6400, 25600])
    ap.add_argument("--steps", type=int, default=200)
    args = ap.parse_args()

    t_jit, _ = timed_run(64, "numba", 5)
    print(f"numba warm-up (compile): {t_jit:.2f} s")
    print(f"{'N':>7} {'numpy ms/step':>14} {'numba ms/step':>14} {'speedup':>8} {'max |diff|':>11}")
    for n in args.sizes:
        t_np, a = timed_run(n, "numpy", args.steps)
        t_nb, b = timed_run(n, "numba", args.steps)
        k = len(a.dt_history)
        diff = float(np.max(np.abs(a.final.regular - b.final.regular)))
        diff = max(diff, float(np.max(np.abs(a.final.atom_masses() - b.final.atom_masses()))))
        print(f"{n:>7} {1e3 * t_np / k:>14.3f} {1e3 * t_nb / k:>14.3f} {t_np / t_nb:>8.2f} {diff:>11.2e}")


if __name__ == "__main__":
    main()
