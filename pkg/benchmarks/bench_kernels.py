#!/usr/bin/env python3
"""Compare the numba kernels with the pure-numpy fallback.

The backend is fixed at import time, so each backend is timed in its own
subprocess (``BBSTAB_DISABLE_NUMBA`` set or unset) and the parent prints a
side-by-side table.  Timings exclude JIT compilation (one warm-up call).

    python3 benchmarks/bench_kernels.py [--repeat 20]
"""

import argparse
import json
import os
import subprocess
import sys
import time

import numpy as np


def _best_of(fn, repeat):
    fn()  # warm-up, includes compilation on the numba path
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def measure(repeat):
    from bbstab import _kernels as K
    from bbstab import problems
    from bbstab.core import SolverConfig
    from bbstab.quadratic_io import SparseMatrix, build_quadratic
    from bbstab.solver import run, run_from_pair

    rng = np.random.default_rng(0)
    a = rng.standard_normal(100_000)
    b = rng.standard_normal(100_000)

    n = 2000
    dense = np.zeros((n, n))
    idx = np.arange(n)
    dense[idx, idx] = 4.0
    dense[idx[:-1], idx[:-1] + 1] = dense[idx[:-1] + 1, idx[:-1]] = -1.0
    dense[idx[:-7], idx[:-7] + 7] = dense[idx[:-7] + 7, idx[:-7]] = -0.5
    mat = SparseMatrix.from_dense(dense)
    x = rng.standard_normal(n)

    raydan = problems.raydan(1000)
    x0 = np.full(1000, -10.0)
    stab = SolverConfig(delta_policy="2")

    quad = build_quadratic(mat, name="band2000").problem
    q0 = np.zeros(n)
    q1 = q0 - quad.gradient_at(q0) / np.max(np.abs(quad.gradient_at(q0)))

    ce = problems.counterexample(1)
    c0, c1 = problems.cycle_start(1)

    cases = {
        "dot n=1e5": lambda: K.dot(a, b),
        "csr_matvec n=2000": lambda: K.csr_matvec(mat.row_offsets, mat.column_indices, mat.values, x),
        "solve raydan n=1000 BB1stab": lambda: run(raydan, x0, stab),
        "solve band quadratic n=2000": lambda: run_from_pair(quad, q0, q1, SolverConfig(delta_policy="auto:0.25")),
        "counterexample cycle 200 its": lambda: run_from_pair(ce, c0, c1, SolverConfig(max_iterations=200)),
    }
    return K.BACKEND, {name: _best_of(fn, repeat) for name, fn in cases.items()}


def _child(backend_off, repeat):
    env = dict(os.environ)
    env.pop("BBSTAB_DISABLE_NUMBA", None)
    if backend_off:
        env["BBSTAB_DISABLE_NUMBA"] = "1"
    out = subprocess.run(
        [sys.executable, __file__, "--child", "--repeat", str(repeat)],
        env=env,
        check=True,
        capture_output=True,
        text=True,
    )
    return json.loads(out.stdout.strip().splitlines()[-1])


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--repeat", type=int, default=20)
    parser.add_argument("--child", action="store_true", help=argparse.SUPPRESS)
    args = parser.parse_args()
    if args.child:
        backend, times = measure(args.repeat)
        print(json.dumps({"backend": backend, "times": times}))
        return
    fast = _child(False, args.repeat)
    slow = _child(True, args.repeat)
    print(f"{'case':32s} {fast['backend']:>12s} {slow['backend']:>12s} {'speedup':>8s}")
    for name, t_fast in fast["times"].items():
        t_slow = slow["times"][name]
        print(f"{name:32s} {t_fast * 1e3:10.3f}ms {t_slow * 1e3:10.3f}ms {t_slow / t_fast:7.1f}x")


if __name__ == "__main__":
    main()
