"""The stabilized Barzilai-Borwein iteration.

``x_{k+1} = x_k - alpha_k g_k`` with ``alpha_k = min(alpha_BB, delta/||g_k||)``.
With an infinite radius this is exactly the plain BB method.  After the
starting pair is formed, only gradients are evaluated.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Iterator, Optional

import numpy as np

from . import _kernels as K
from .core import (
    DeltaPolicy,
    Problem,
    Region,
    SolverConfig,
    SpectralBounds,
    Status,
    Termination,
    status_from_code,
)
from .stepsize import Branch


class BootstrapFailed(RuntimeError):
    """No descent after the allowed number of step divisions."""


class ZeroGradientError(ValueError):
    """The starting point is already stationary."""


@dataclass(frozen=True)
class Bootstrap:
    x1: np.ndarray
    alpha0: float
    backtracks: int

    @property
    def branch(self) -> Branch:
        return Branch.BOOTSTRAP


def bootstrap_x1(problem: Problem, x0, backtracking_max: int = 30) -> Bootstrap:
    """Second starting point from ``x0``.

    Try ``s0 = -g0/||g0||_inf`` and divide it by 4 until
    ``f(x0 + s0) < f(x0)``.  This is the only place function values are used.
    """
    x0 = _vec(x0)
    g0 = _vec(problem.gradient_at(x0))
    g_inf = float(np.max(np.abs(g0))) if g0.size else 0.0
    if g_inf == 0:
        raise ZeroGradientError("gradient vanishes at x0")
    f0 = problem.value_at(x0)
    s0 = -g0 / g_inf
    alpha0 = 1.0 / g_inf
    for backtracks in range(backtracking_max + 1):
        x1 = x0 + s0
        if problem.value_at(x1) < f0:
            return Bootstrap(x1, alpha0, backtracks)
        if backtracks < backtracking_max:
            s0 = s0 / 4.0
            alpha0 = alpha0 / 4.0
    raise BootstrapFailed(f"no decrease after {backtracking_max} divisions of s0")


def gradient_step_x1(problem: Problem, x0) -> Bootstrap:
    """``x1 = x0 - g0/||g0||_inf`` without a descent test (used for quadratics)."""
    x0 = _vec(x0)
    g0 = _vec(problem.gradient_at(x0))
    g_inf = float(np.max(np.abs(g0))) if g0.size else 0.0
    if g_inf == 0:
        raise ZeroGradientError("gradient vanishes at x0")
    return Bootstrap(x0 - g0 / g_inf, 1.0 / g_inf, 0)


# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TraceRecord:
    k: int
    g_norm: float
    s_norm: float
    alpha: float
    branch: Branch
    region: Optional[Region] = None
    q_k: Optional[float] = None


class Trace:
    """Per-iteration diagnostics stored column-wise.

    Record ``k`` describes the step taken from ``x_k``: ``g_norm = ||g_k||``,
    ``s_norm = ||x_{k+1} - x_k||``, ``alpha = alpha_k``.  Record 0 is the
    bootstrap step.  ``region`` is 0 and ``q_k`` is NaN where undefined.
    """

    __slots__ = ("g_norm", "s_norm", "alpha", "branch", "delta", "region", "q_k")

    def __init__(self, g_norm, s_norm, alpha, branch, delta=None, region=None, q_k=None):
        n = len(g_norm)
        self.g_norm = np.asarray(g_norm, dtype=float)
        self.s_norm = np.asarray(s_norm, dtype=float)
        self.alpha = np.asarray(alpha, dtype=float)
        self.branch = np.asarray(branch, dtype=np.int8)
        self.delta = np.full(n, np.nan) if delta is None else np.asarray(delta, dtype=float)
        self.region = np.zeros(n, np.int8) if region is None else np.asarray(region, np.int8)
        self.q_k = np.full(n, np.nan) if q_k is None else np.asarray(q_k, dtype=float)

    @classmethod
    def from_records(cls, records) -> "Trace":
        records = list(records)
        return cls(
            [r.g_norm for r in records],
            [r.s_norm for r in records],
            [r.alpha for r in records],
            [int(r.branch) for r in records],
            region=[0 if r.region is None else int(r.region) for r in records],
            q_k=[np.nan if r.q_k is None else r.q_k for r in records],
        )

    def __len__(self):
        return self.g_norm.shape[0]

    @property
    def k(self) -> np.ndarray:
        return np.arange(len(self))

    def __getitem__(self, k) -> TraceRecord:
        if k < 0:
            k += len(self)
        if not 0 <= k < len(self):
            raise IndexError(k)
        region = int(self.region[k])
        q = float(self.q_k[k])
        return TraceRecord(
            k=int(k),
            g_norm=float(self.g_norm[k]),
            s_norm=float(self.s_norm[k]),
            alpha=float(self.alpha[k]),
            branch=Branch(int(self.branch[k])),
            region=Region(region) if region else None,
            q_k=None if np.isnan(q) else q,
        )

    def __iter__(self) -> Iterator[TraceRecord]:
        return (self[k] for k in range(len(self)))

    def records(self) -> list:
        return list(self)

    def identical(self, other: "Trace") -> bool:
        """Bitwise equality of the numeric columns and branch tags."""
        return all(
            np.array_equal(
                getattr(self, name).view(np.uint8), getattr(other, name).view(np.uint8)
            )
            for name in ("g_norm", "s_norm", "alpha", "branch")
        )

    def with_regions(self, bounds: SpectralBounds) -> "Trace":
        region, q = classify_trace(self.g_norm, self.delta, bounds)
        return Trace(self.g_norm, self.s_norm, self.alpha, self.branch, self.delta, region, q)


def classify_trace(g_norms, deltas, bounds: SpectralBounds):
    """Vectorised region and contraction factor for every record with a finite radius."""
    g = np.asarray(g_norms, dtype=float)
    d = np.asarray(deltas, dtype=float)
    region = np.zeros(g.shape, np.int8)
    q = np.full(g.shape, np.nan)
    ok = np.isfinite(d) & (d > 0) & np.isfinite(g)
    lo, hi, kappa = bounds.lambda_lo, bounds.lambda_hi, bounds.kappa
    gg, dd = g[ok], d[ok]
    r = np.full(gg.shape, int(Region.OMEGA3_OUTER), np.int8)
    r[gg <= kappa * hi * dd] = Region.OMEGA3_PRIME
    r[gg <= hi * dd] = Region.OMEGA2
    r[gg <= lo * dd] = Region.OMEGA1
    region[ok] = r
    omega3 = region >= Region.OMEGA3_PRIME
    q[omega3] = 1.0 - lo * d[omega3] / g[omega3]
    return region, q


@dataclass(frozen=True, eq=False)
class SolveResult:
    status: Termination
    iterations: int
    final_x: np.ndarray
    final_g_norm: float
    trace: Trace
    stab_step_count: int
    last_stab_iteration: Optional[int]
    first_bb_iteration: Optional[int]
    delta_used: float
    g0_norm: float = float("nan")
    config: Optional[SolverConfig] = None
    problem_name: str = ""
    iterates: Optional[np.ndarray] = None

    @property
    def converged(self) -> bool:
        return self.status.status.solved


# ---------------------------------------------------------------------------


def run(
    problem: Problem,
    x0,
    config: SolverConfig = SolverConfig(),
    bounds: Optional[SpectralBounds] = None,
    keep_iterates: bool = False,
) -> SolveResult:
    """Solve from a single point; ``x1`` comes from :func:`bootstrap_x1`."""
    x0 = _vec(x0)
    g0 = _vec(problem.gradient_at(x0))
    early = _check_start(problem, x0, g0, config)
    if early is not None:
        return early
    boot = bootstrap_x1(problem, x0, config.backtracking_max)
    return _iterate(problem, x0, g0, boot.x1, boot.alpha0, config, bounds, keep_iterates)


def run_from_pair(
    problem: Problem,
    x0,
    x1,
    config: SolverConfig = SolverConfig(),
    bounds: Optional[SpectralBounds] = None,
    keep_iterates: bool = False,
) -> SolveResult:
    """Solve from an explicit starting pair ``x0 != x1``."""
    x0, x1 = _vec(x0), _vec(x1)
    if x0.shape != x1.shape:
        raise ValueError("x0 and x1 differ in length")
    if np.array_equal(x0, x1):
        raise ValueError("starting points must differ")
    g0 = _vec(problem.gradient_at(x0))
    early = _check_start(problem, x0, g0, config)
    if early is not None:
        return early
    alpha0 = K.norm(x1 - x0) / K.norm(g0)
    return _iterate(problem, x0, g0, x1, alpha0, config, bounds, keep_iterates)


def reference_bb_run(problem: Problem, x0, config: SolverConfig = SolverConfig(), x1=None, **kw):
    """:func:`run` (or :func:`run_from_pair`) with the radius forced to infinity."""
    config = replace(config, delta_policy=DeltaPolicy.infinite())
    if x1 is None:
        return run(problem, x0, config, **kw)
    return run_from_pair(problem, x0, x1, config, **kw)


def _check_start(problem, x0, g0, config) -> Optional[SolveResult]:
    if x0.shape[0] != problem.dimension or g0.shape != x0.shape:
        raise ValueError(f"x0 must have length {problem.dimension}")
    if not np.all(np.isfinite(x0)):
        raise ValueError("x0 must be finite")
    g0_norm = K.norm(g0)
    if np.isfinite(g0_norm) and g0_norm > 0:
        return None
    status = Status.ZERO_GRADIENT if g0_norm == 0 else Status.NON_FINITE
    empty = Trace(np.empty(0), np.empty(0), np.empty(0), np.empty(0, np.int8))
    return SolveResult(
        status=Termination(status, 0),
        iterations=0,
        final_x=x0.copy(),
        final_g_norm=g0_norm,
        trace=empty,
        stab_step_count=0,
        last_stab_iteration=None,
        first_bb_iteration=None,
        delta_used=config.delta_policy.value if config.delta_policy.kind == "fixed" else np.inf,
        g0_norm=g0_norm,
        config=config,
        problem_name=problem.name,
        iterates=x0[None, :].copy(),
    )


def _iterate(problem, x0, g0, x1, alpha0, config, bounds, keep_iterates) -> SolveResult:
    with np.errstate(over="ignore", invalid="ignore"):
        g1 = _vec(problem.gradient_at(x1))
    g0_norm = K.norm(g0)
    policy = config.delta_policy
    loop_args = (
        x0,
        g0,
        x1,
        g1,
        float(alpha0),
        config.rule.value,
        policy.code,
        float(policy.value),
        int(config.max_iterations),
        config.rel_tol * g0_norm,
        bool(config.safeguard_nonconvex),
        bool(keep_iterates),
    )
    # overflow is a reportable outcome here, not an error
    with np.errstate(over="ignore", invalid="ignore"):
        if problem.kernel is not None:
            grad, args = problem.kernel
            loop = K.bb_loop if K.USE_NUMBA else K.py_bb_loop
            out = loop(grad, args, *loop_args)
        else:
            out = K.py_bb_loop(_python_grad(problem), None, *loop_args)
    code, k, x, gn, g_norms, s_norms, alphas, deltas, branches, delta, history = out

    bounds = bounds if bounds is not None else problem.spectral_bounds
    trace = Trace(g_norms, s_norms, alphas, branches, deltas)
    if bounds is not None:
        trace = trace.with_regions(bounds)
    stab = np.flatnonzero(branches == K.BRANCH_STAB_CAP)
    bb = np.flatnonzero((branches == K.BRANCH_BB_RAW) | (branches == K.BRANCH_BB_SAFEGUARDED))
    return SolveResult(
        status=Termination(status_from_code(code), int(k)),
        iterations=int(k),
        final_x=x,
        final_g_norm=float(gn),
        trace=trace,
        stab_step_count=int(stab.size),
        last_stab_iteration=int(stab[-1]) if stab.size else None,
        first_bb_iteration=int(bb[0]) if bb.size else None,
        delta_used=float(delta),
        g0_norm=float(g0_norm),
        config=config,
        problem_name=problem.name,
        iterates=np.array(history) if keep_iterates else None,
    )


def _python_grad(problem):
    def grad(x, args):
        return np.ascontiguousarray(problem.gradient_at(x), dtype=float).ravel()

    return grad


def _vec(x) -> np.ndarray:
    return np.array(x, dtype=float, copy=True).ravel()
