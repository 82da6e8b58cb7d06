"""Command line entry point: ``bbstab {solve,bench,profile,check}``."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import _kernels
from . import harness as H
from .core import DeltaPolicy, SolverConfig


def _add_solver_flags(p):
    p.add_argument("--rule", choices=("bb1", "bb2"), default="bb1")
    p.add_argument("--delta", default="inf", help="inf, a positive radius, or auto:<c>")
    p.add_argument("--maxit", type=int, default=100_000)
    p.add_argument("--tol", type=float, default=1e-6, help="relative gradient tolerance")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="bbstab", description="Stabilized Barzilai-Borwein experiments")
    sub = parser.add_subparsers(dest="command", required=True)

    solve = sub.add_parser("solve", help="run one problem with one solver config")
    src = solve.add_mutually_exclusive_group(required=True)
    src.add_argument("--problem", help="builtin selector, e.g. raydan:n=1000")
    src.add_argument("--matrix", help="Matrix Market file defining a quadratic")
    _add_solver_flags(solve)
    solve.add_argument("--x0", default="zero", help="zero, const:<v>, file:<path> or cycle")
    solve.add_argument("--out", help="directory for the trace and summary CSV files")
    solve.add_argument("--seed", type=int, default=0)

    bench = sub.add_parser("bench", help="run an experiment spec file")
    bench.add_argument("spec", help="key = value experiment file")
    bench.add_argument("--out", help="override the output directory")
    bench.add_argument("--seed", type=int)

    prof = sub.add_parser("profile", help="performance profiles from summary CSV files")
    prof.add_argument("summaries", nargs="+")
    prof.add_argument("--tau-max", type=float, default=10.0)
    prof.add_argument("--out", help="profile CSV path (default: stdout)")

    chk = sub.add_parser("check", help="run the oracle suite and print a JSON report")
    chk.add_argument("suite", nargs="?", default="all", choices=H.SUITES + ("all",))
    chk.add_argument("--seed", type=int, default=0)
    return parser


def _print_summary(results, stream=None):
    stream = stream or sys.stdout
    print(",".join(H.SUMMARY_HEADER), file=stream)
    for res in results:
        print(",".join(str(v) for v in H.summary_row(res)), file=stream)


def cmd_solve(args) -> int:
    cfg = SolverConfig(
        rule=args.rule,
        delta_policy=DeltaPolicy.parse(args.delta),
        max_iterations=args.maxit,
        rel_tol=args.tol,
    )
    spec = H.ExperimentSpec(
        problem=args.problem, matrix=args.matrix, configs=[cfg], x0=args.x0, out_dir=args.out, seed=args.seed
    )
    results = H.run_experiment(spec)
    _print_summary(results)
    return 0


def cmd_bench(args) -> int:
    path = Path(args.spec)
    spec = H.parse_spec_file(path.read_text(), base_dir=path.parent)
    if args.out:
        spec.out_dir = args.out
    if args.seed is not None:
        spec.seed = args.seed
    results = H.run_experiment(spec)
    _print_summary(results)
    return 0


def cmd_profile(args) -> int:
    rows = [row for path in args.summaries for row in H.read_summary_csv(path)]
    curves = H.performance_profile(H.profile_from_summaries(rows), H.default_taus(args.tau_max))
    if args.out:
        H.write_profile_csv(curves, args.out)
    else:
        print(",".join(H.PROFILE_HEADER))
        for c in curves:
            for tau, frac in c.points:
                print(f"{c.solver},{tau:.17g},{frac:.17g}")
    return 0


def cmd_check(args) -> int:
    report = H.check(args.suite, seed=args.seed)
    report["backend"] = _kernels.BACKEND
    print(H.report_json(report))
    return 0 if report["passed"] else 1


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    handler = {"solve": cmd_solve, "bench": cmd_bench, "profile": cmd_profile, "check": cmd_check}
    try:
        return handler[args.command](args)
    except (OSError, ValueError) as exc:
        print(f"bbstab: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
