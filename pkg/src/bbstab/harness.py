"""Experiment plumbing: problem/start selection, CSV traces and summaries,
performance profiles and the oracle check suite used by the CLI."""

from __future__ import annotations

import csv
import itertools
import json
import math
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from . import oracles, problems
from . import stepsize as st
from .core import DeltaPolicy, Problem, Region, SolverConfig, SpectralBounds, Status
from .quadratic_io import build_quadratic, estimate_spectral_bounds, read_matrix_market
from .solver import SolveResult, TraceRecord, gradient_step_x1, run, run_from_pair
from .stepsize import Branch

TRACE_HEADER = ("k", "g_norm", "s_norm", "alpha", "branch", "region", "q_k")
SUMMARY_HEADER = (
    "problem",
    "n",
    "solver",
    "status",
    "iterations",
    "final_gnorm",
    "delta",
    "stab_steps",
    "last_stab_iter",
)
PROFILE_HEADER = ("solver", "tau", "fraction")
QUADRATIC_KINDS = ("diag", "randdiag")


def _fmt(v: float) -> str:
    return format(float(v), ".17g")


# ---------------------------------------------------------------------------
# problems and starting points


@dataclass(frozen=True, eq=False)
class Instance:
    """A problem together with how its second starting point is produced."""

    problem: Problem
    quadratic: bool

    @property
    def name(self) -> str:
        return self.problem.name


def load_instance(selector: Optional[str] = None, matrix: Optional[str] = None, seed: int = 0) -> Instance:
    """Builtin ``name:k=v`` selector or a Matrix Market file (quadratic, ``b = Ae``)."""
    if (selector is None) == (matrix is None):
        raise ValueError("give exactly one of a problem selector or a matrix file")
    if matrix is not None:
        a = read_matrix_market(matrix)
        bounds = estimate_spectral_bounds(a, seed=seed)
        quad = build_quadratic(a, name=Path(matrix).stem, spectral_bounds=bounds)
        return Instance(quad.problem, True)
    kind = selector.partition(":")[0].strip().lower()
    return Instance(problems.from_selector(selector), kind in QUADRATIC_KINDS)


def parse_x0(text, n: int):
    """Starting point(s) from ``zero``, ``const:v``, ``file:path``, ``cycle`` or a vector.

    Returns ``(x0, x1)`` where ``x1`` is None unless the spec fixes the pair.
    """
    if not isinstance(text, str):
        x0 = np.asarray(text, dtype=float).ravel()
        if x0.shape[0] != n:
            raise ValueError(f"x0 has length {x0.shape[0]}, expected {n}")
        return x0, None
    kind, _, arg = text.strip().partition(":")
    kind = kind.lower()
    if kind == "zero":
        return np.zeros(n), None
    if kind == "const":
        return np.full(n, float(arg)), None
    if kind == "cycle":
        return problems.cycle_start(n)
    if kind == "file":
        x0 = np.loadtxt(arg, dtype=float, ndmin=1).ravel()
        if x0.shape[0] != n:
            raise ValueError(f"{arg}: x0 has length {x0.shape[0]}, expected {n}")
        return x0, None
    raise ValueError(f"unknown x0 spec {text!r}")


def solve_instance(
    inst: Instance, x0, x1, config: SolverConfig, bounds=None, keep_iterates=False
) -> SolveResult:
    if x1 is None and inst.quadratic:
        x1 = gradient_step_x1(inst.problem, x0).x1
    if x1 is None:
        return run(inst.problem, x0, config, bounds=bounds, keep_iterates=keep_iterates)
    return run_from_pair(inst.problem, x0, x1, config, bounds=bounds, keep_iterates=keep_iterates)


# ---------------------------------------------------------------------------
# experiments


@dataclass
class ExperimentSpec:
    problem: Optional[str] = None
    matrix: Optional[str] = None
    configs: List[SolverConfig] = field(default_factory=list)
    x0: object = "zero"
    out_dir: Optional[str] = None
    seed: int = 0

    def __post_init__(self):
        if not self.configs:
            raise ValueError("an experiment needs at least one solver config")
        if (self.problem is None) == (self.matrix is None):
            raise ValueError("give exactly one of problem or matrix")


_SPEC_KEYS = {"problem", "matrix", "rule", "rules", "delta", "deltas", "x0", "maxit", "tol", "out", "seed"}


def parse_spec_file(text: str, base_dir=None) -> ExperimentSpec:
    """Flat ``key = value`` format; ``#`` starts a comment.

    ``rules`` and ``deltas`` are comma-separated and every combination is run::

        problem = raydan:n=1000
        x0 = const:-10
        rules = bb1, bb2
        deltas = inf, 2
    """
    values: Dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, eq, value = line.partition("=")
        key = key.strip().lower()
        if not eq or key not in _SPEC_KEYS:
            raise ValueError(f"line {lineno}: expected key = value with a known key, got {raw!r}")
        values[key] = value.strip()
    rules = _split(values.get("rules", values.get("rule", "bb1")))
    deltas = _split(values.get("deltas", values.get("delta", "inf")))
    maxit = int(values.get("maxit", 100_000))
    tol = float(values.get("tol", 1e-6))
    configs = [
        SolverConfig(rule=r, delta_policy=DeltaPolicy.parse(d), max_iterations=maxit, rel_tol=tol)
        for r, d in itertools.product(rules, deltas)
    ]
    matrix = values.get("matrix")
    if matrix and base_dir is not None and not Path(matrix).is_absolute():
        matrix = str(Path(base_dir) / matrix)
    return ExperimentSpec(
        problem=values.get("problem"),
        matrix=matrix,
        configs=configs,
        x0=values.get("x0", "zero"),
        out_dir=values.get("out"),
        seed=int(values.get("seed", 0)),
    )


def _split(text: str) -> List[str]:
    return [p.strip() for p in text.split(",") if p.strip()]


def run_experiment(spec: ExperimentSpec, instance: Optional[Instance] = None) -> List[SolveResult]:
    """One result per config from a shared problem and start.

    Solver failures end up in the summary; unreadable files raise.
    """
    inst = instance or load_instance(spec.problem, spec.matrix, seed=spec.seed)
    x0, x1 = parse_x0(spec.x0, inst.problem.dimension)
    results = [solve_instance(inst, x0, x1, cfg) for cfg in spec.configs]
    if spec.out_dir is not None:
        out = Path(spec.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        for res in results:
            write_trace_csv(res, out / trace_filename(res))
        write_summary_csv(results, out / "summary.csv")
    return results


def trace_filename(result: SolveResult) -> str:
    stem = f"{result.problem_name}__{result.config.label}"
    return "trace_" + re.sub(r"[^A-Za-z0-9.]+", "_", stem).strip("_") + ".csv"


# ---------------------------------------------------------------------------
# CSV I/O


def write_trace_csv(result: SolveResult, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TRACE_HEADER)
        for rec in result.trace:
            w.writerow(
                [
                    rec.k,
                    _fmt(rec.g_norm),
                    _fmt(rec.s_norm),
                    _fmt(rec.alpha),
                    rec.branch.label,
                    "" if rec.region is None else rec.region.label,
                    "" if rec.q_k is None else _fmt(rec.q_k),
                ]
            )


def read_trace_csv(path) -> List[TraceRecord]:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if tuple(header or ()) != TRACE_HEADER:
            raise ValueError(f"{path}: unexpected trace header {header}")
        return [
            TraceRecord(
                k=int(row[0]),
                g_norm=float(row[1]),
                s_norm=float(row[2]),
                alpha=float(row[3]),
                branch=Branch.from_label(row[4]),
                region=Region.from_label(row[5]) if row[5] else None,
                q_k=float(row[6]) if row[6] else None,
            )
            for row in reader
        ]


def summary_row(result: SolveResult) -> Tuple:
    last = result.last_stab_iteration
    return (
        result.problem_name,
        result.final_x.shape[0],
        result.config.label,
        result.status.status.value,
        result.iterations,
        _fmt(result.final_g_norm),
        _fmt(result.delta_used),
        result.stab_step_count,
        "" if last is None else last,
    )


def write_summary_csv(results: Sequence[SolveResult], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SUMMARY_HEADER)
        for res in results:
            w.writerow(summary_row(res))


def read_summary_csv(path) -> List[dict]:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != SUMMARY_HEADER:
            raise ValueError(f"{path}: unexpected summary header {reader.fieldnames}")
        return list(reader)


# ---------------------------------------------------------------------------
# performance profiles


@dataclass(frozen=True)
class ProfileCurve:
    solver: str
    points: List[Tuple[float, float]]

    def fraction_at(self, tau: float) -> float:
        best = 0.0
        for t, f in self.points:
            if t <= tau:
                best = f
        return best


def default_taus(upper: float = 10.0, count: int = 200) -> np.ndarray:
    return np.unique(np.concatenate([[1.0], np.geomspace(1.0, upper, count)]))


def performance_profile(results: Mapping[str, Mapping[str, Tuple[bool, int]]], taus=None) -> List[ProfileCurve]:
    """Dolan-More profiles over iteration counts.

    ``results[solver][problem] = (solved, iterations)``.  A problem solved by
    nobody gives an infinite ratio for everyone.
    """
    solvers = list(results)
    if not solvers:
        raise ValueError("no solvers given")
    names = sorted({p for per in results.values() for p in per})
    if not names:
        raise ValueError("performance profile needs at least one problem")
    for s in solvers:
        missing = set(names) - set(results[s])
        if missing:
            raise ValueError(f"solver {s!r} has no result for {sorted(missing)}")
    taus = default_taus() if taus is None else np.asarray(taus, dtype=float)
    if np.any(taus < 1):
        raise ValueError("tau values must be at least 1")
    iters = np.full((len(solvers), len(names)), np.inf)
    for i, s in enumerate(solvers):
        for j, p in enumerate(names):
            solved, count = results[s][p]
            if solved:
                iters[i, j] = max(float(count), 1.0)
    best = iters.min(axis=0)
    with np.errstate(invalid="ignore"):
        ratios = np.where(np.isfinite(best), iters / best, np.inf)
    curves = []
    for i, s in enumerate(solvers):
        fractions = (ratios[i][None, :] <= taus[:, None]).mean(axis=1)
        curves.append(ProfileCurve(s, [(float(t), float(f)) for t, f in zip(taus, fractions)]))
    return curves


def profile_from_summaries(rows: Sequence[Mapping[str, str]]) -> Dict[str, Dict[str, Tuple[bool, int]]]:
    results: Dict[str, Dict[str, Tuple[bool, int]]] = {}
    for row in rows:
        solved = row["status"] == Status.CONVERGED.value
        results.setdefault(row["solver"], {})[row["problem"]] = (solved, int(row["iterations"]))
    return results


def write_profile_csv(curves: Sequence[ProfileCurve], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(PROFILE_HEADER)
        for curve in curves:
            for tau, frac in curve.points:
                w.writerow((curve.solver, _fmt(tau), _fmt(frac)))


# ---------------------------------------------------------------------------
# diagnostics shared by the check suite and the acceptance tests


def bb_stepsize_violations(result: SolveResult, bounds: SpectralBounds, slack: float = 1e-12) -> int:
    """Accepted raw BB stepsizes outside ``[1/L2, 1/L1]`` (up to ``slack``)."""
    t = result.trace
    raw = t.branch == Branch.BB_RAW
    raw[0] = False
    a = t.alpha[raw]
    return int(np.count_nonzero((a < 1 / bounds.lambda_hi - slack) | (a > 1 / bounds.lambda_lo + slack)))


def region_violations(result: SolveResult, bounds: SpectralBounds, rtol: float = 1e-10) -> dict:
    """Count breaches of the per-region gradient growth bounds and of absorption.

    In Omega3 the next gradient norm must shrink by ``q_k``; in Omega1/Omega2
    it may grow by at most ``kappa``.  Once an iterate lies inside
    Omega1/Omega2/Omega3', no later iterate may sit in the outer band.
    """
    t = result.trace
    g, region, q = t.g_norm, t.region, t.q_k
    contraction = growth = 0
    for k in range(1, len(t) - 1):
        if region[k] >= Region.OMEGA3_PRIME:
            contraction += g[k + 1] > q[k] * g[k] * (1 + rtol)
        elif region[k] in (Region.OMEGA1, Region.OMEGA2):
            growth += g[k + 1] > bounds.kappa * g[k] * (1 + rtol)
    inner = np.flatnonzero((region >= Region.OMEGA1) & (region <= Region.OMEGA3_PRIME))
    first = int(inner[0]) if inner.size else None
    outer_after = 0 if first is None else int(np.count_nonzero(region[first:] == Region.OMEGA3_OUTER))
    return {
        "contraction": int(contraction),
        "growth": int(growth),
        "first_inner": first,
        "outer_after_inner": outer_after,
        "classified": int(np.count_nonzero(region)),
    }


def envelope_errors(result: SolveResult, minimizer) -> np.ndarray:
    """``||x_k - x*||`` for ``k >= 1`` (the bootstrap point is excluded)."""
    return np.linalg.norm(result.iterates[1:] - np.asarray(minimizer)[None, :], axis=1)


# ---------------------------------------------------------------------------
# check suite

SUITES = ("gradients", "stepsize", "cycle", "bounds", "envelope")


def _entry(name, passed, measured, tolerance, **extra) -> dict:
    out = {"name": name, "passed": bool(passed), "measured": measured, "tolerance": tolerance}
    out.update(extra)
    return out


def check_gradients(seed: int = 0) -> List[dict]:
    rng = np.random.default_rng(seed)
    cases = [
        problems.counterexample(5),
        problems.raydan(20),
        problems.extended_rosenbrock(10),
        problems.diagonal_quadratic(np.arange(1.0, 11.0)),
        problems.random_diagonal_quadratic(20, 1.0, 100.0, seed),
    ]
    out = []
    for prob in cases:
        worst = max(
            oracles.fd_gradient_check(prob, rng.uniform(-2.0, 2.0, prob.dimension)) for _ in range(5)
        )
        out.append(_entry(f"fd:{prob.name}", worst <= 1e-6, worst, 1e-6))
    return out


def check_stepsize(seed: int = 0, pairs: int = 1000) -> List[dict]:
    """Closed-form BB stepsizes against the direct least-squares search."""
    rng = np.random.default_rng(seed)
    worst1 = worst2 = 0.0
    for _ in range(pairs):
        s, y = random_curvature_pair(rng)
        a1, a2 = oracles.stepsize_oracle((s, y))
        worst1 = max(worst1, abs(st.bb1((s, y)) - a1) / a1)
        worst2 = max(worst2, abs(st.bb2((s, y)) - a2) / a2)
    return [
        _entry("bb1_vs_least_squares", worst1 <= 1e-6, worst1, 1e-6, pairs=pairs),
        _entry("bb2_vs_least_squares", worst2 <= 1e-6, worst2, 1e-6, pairs=pairs),
    ]


def random_curvature_pair(rng, max_dim: int = 8, max_kappa: float = 100.0):
    """``(s, H s)`` for a random SPD ``H`` with condition number at most ``max_kappa``."""
    n = int(rng.integers(1, max_dim + 1))
    q, _ = np.linalg.qr(rng.standard_normal((n, n)))
    scale = 10.0 ** rng.uniform(-3, 3)
    eig = scale * np.exp(rng.uniform(0.0, math.log(max_kappa), n))
    s = rng.standard_normal(n) * 10.0 ** rng.uniform(-3, 3)
    return s, q @ (eig * (q.T @ s))


def check_cycle() -> List[dict]:
    prob = problems.counterexample(1)
    x0, x1 = problems.cycle_start(1)
    res = run_from_pair(prob, x0, x1, SolverConfig(max_iterations=200), keep_iterates=True)
    report = oracles.detect_cycle(res.iterates, max_period=8, tol=1e-8)
    return [
        _entry(
            "counterexample_period",
            report.period == 4 and not res.converged,
            report.period,
            4,
            max_deviation=report.max_deviation,
            status=str(res.status),
        )
    ]


def check_bounds() -> List[dict]:
    prob = problems.diagonal_quadratic(np.arange(1.0, 11.0))
    inst = Instance(prob, True)
    bounds = prob.spectral_bounds
    out = []
    for cfg in (SolverConfig(), SolverConfig(delta_policy=DeltaPolicy.adaptive(0.25))):
        res = solve_instance(inst, np.zeros(10), None, cfg)
        bad = bb_stepsize_violations(res, bounds)
        out.append(_entry(f"alpha_bounds:{cfg.label}", bad == 0 and res.converged, bad, 0))
    x0 = np.full(10, -1000.0)
    delta = 1e-2 * float(np.linalg.norm(x0 - 1.0))
    res = solve_instance(inst, x0, None, SolverConfig(delta_policy=DeltaPolicy.fixed(delta)))
    viol = region_violations(res, bounds)
    out.append(_entry("omega3_contraction", viol["contraction"] == 0, viol["contraction"], 0))
    out.append(_entry("omega12_growth", viol["growth"] == 0, viol["growth"], 0))
    out.append(
        _entry(
            "absorption",
            viol["first_inner"] is not None and viol["outer_after_inner"] == 0,
            viol["outer_after_inner"],
            0,
            first_inner=viol["first_inner"],
        )
    )
    return out


def check_envelope() -> List[dict]:
    prob = problems.diagonal_quadratic(np.arange(1.0, 11.0))
    res = solve_instance(
        Instance(prob, True), np.zeros(10), None, SolverConfig(delta_policy=DeltaPolicy.adaptive(0.25)), keep_iterates=True
    )
    fit = oracles.fit_rlinear_envelope(envelope_errors(res, prob.minimizer))
    return [_entry("rlinear_rate", fit.r_linear, fit.c, 1.0, residual=fit.residual, measure="x_error")]


_CHECKS = {
    "gradients": check_gradients,
    "stepsize": check_stepsize,
    "cycle": check_cycle,
    "bounds": check_bounds,
    "envelope": check_envelope,
}


def check(suite: str = "all", seed: int = 0) -> dict:
    """Run one oracle suite (or ``all``); the report is JSON-serialisable."""
    names = SUITES if suite == "all" else (suite,)
    report = {"suites": {}, "passed": True}
    for name in names:
        if name not in _CHECKS:
            raise ValueError(f"unknown suite {name!r}; choose from {', '.join(SUITES + ('all',))}")
        fn = _CHECKS[name]
        entries = fn(seed) if name in ("gradients", "stepsize") else fn()
        report["suites"][name] = entries
        report["passed"] = report["passed"] and all(e["passed"] for e in entries)
    return report


def report_json(report: dict) -> str:
    return json.dumps(report, indent=2, default=_json_default)


def _json_default(obj):
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    raise TypeError(type(obj))
