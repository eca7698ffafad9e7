"""Time the compiled kernels against the NumPy fallback.

Runs the brute-force Bellman oracle and the Monte Carlo simulator on both
backends at the canonical parameters, checks that outputs agree, and prints
wall-clock times and the speed-up.
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from dynmed import _kernels, bellman
from dynmed.model import derive, validate
from dynmed.simulate import simulate

CANON = {"p": 0.75, "q": 0.25, "g": 1, "b": -1, "w": 1, "r": 1, "delta": 0.9, "beta": 0.5}


def best_of(fn, repeat):
    times, result = [], None
    for _ in range(repeat):
        t0 = time.perf_counter()
        result = fn()
        times.append(time.perf_counter() - t0)
    return min(times), result


def main(argv=None) -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--nodes", type=int, default=201, help="oracle query nodes")
    ap.add_argument("--paths", type=int, default=4000)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)

    if _kernels.compiled_backend is None:
        raise SystemExit("compiled kernels are not built; run `pip install -e . --no-build-isolation`")
    dq = derive(validate(CANON))
    F = bellman.policy_evaluate(dq, bellman.make_grid(dq, 2001), tol=1e-8)
    queries = np.linspace(0.0, dq.U_bar, args.nodes)

    tasks = {
        "oracle": lambda b: bellman.oracle_values(dq, F, queries, 1e-2, 1e-2, backend=b)[0],
        "simulate": lambda b: simulate(dq, dq.U_R, n_paths=args.paths, seed=1, backend=b)[0].worker_mean,
    }
    print(f"{'task':<10}{'compiled s':>12}{'python s':>12}{'speed-up':>10}  agree")
    for name, task in tasks.items():
        tc, rc = best_of(lambda: task("compiled"), args.repeat)
        tp, rp = best_of(lambda: task("python"), args.repeat)
        agree = bool(np.allclose(rc, rp, rtol=0, atol=1e-12))
        print(f"{name:<10}{tc:>12.4f}{tp:>12.4f}{tp / tc:>9.1f}x  {agree}")


if __name__ == "__main__":
    main()
