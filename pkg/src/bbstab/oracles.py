"""Independent checks used by the test-suite and the ``check`` command.

Nothing here reuses the solver's stepsize code: the least-squares stepsizes
are found by direct search, gradients by central differences, and the plain
BB reference loop is written out longhand.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from . import _kernels as K
from .core import Problem

_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


def fd_gradient_check(problem: Problem, x, h=None) -> float:
    """Largest coordinate-wise deviation between ``gradient_at`` and central differences.

    The step is ``h * max(1, |x_i|)`` (``h`` defaults to 1e-6).  Deviations
    are relative to ``max(1, |g_i|)``, so near-zero gradients are compared
    absolutely.
    """
    x = np.array(x, dtype=float).ravel()
    h = 1e-6 if h is None else float(h)
    g = np.asarray(problem.gradient_at(x), dtype=float).ravel()
    worst = 0.0
    for i in range(x.shape[0]):
        step = h * max(1.0, abs(x[i]))
        xp = x.copy()
        xm = x.copy()
        xp[i] += step
        xm[i] -= step
        fp, fm = problem.value_at(xp), problem.value_at(xm)
        if not (math.isfinite(fp) and math.isfinite(fm)):
            raise FloatingPointError(f"non-finite function value on the stencil of coordinate {i}")
        fd = (fp - fm) / (xp[i] - xm[i])
        worst = max(worst, abs(fd - g[i]) / max(1.0, abs(g[i])))
    return worst


def _golden_min(func, lo, hi, iters=200):
    a, b = lo, hi
    c = b - _GOLDEN * (b - a)
    d = a + _GOLDEN * (b - a)
    fc, fd = func(c), func(d)
    for _ in range(iters):
        if b - a <= 1e-15 * max(1.0, abs(a), abs(b)):
            break
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - _GOLDEN * (b - a)
            fc = func(c)
        else:
            a, c, fc = c, d, fd
            d = a + _GOLDEN * (b - a)
            fd = func(d)
    return 0.5 * (a + b)


def stepsize_oracle(pair, span: float = 30.0) -> Tuple[float, float]:
    """Least-squares secant stepsizes by golden-section search.

    Returns the minimisers over ``alpha > 0`` of ``||s/alpha - y||`` and
    ``||s - alpha y||``.  The search runs over ``log(alpha)`` in a window of
    ``+-span`` around ``log(||s||/||y||)``.
    """
    if hasattr(pair, "s"):
        s, y = pair.s, pair.y
    else:
        s, y = pair
    s = np.asarray(s, dtype=float).ravel()
    y = np.asarray(y, dtype=float).ravel()
    s_norm, y_norm = np.linalg.norm(s), np.linalg.norm(y)
    if s_norm == 0 or y_norm == 0:
        raise ValueError("stepsize oracle needs nonzero s and y")
    centre = math.log(s_norm / y_norm)

    def inverse_fit(u):
        return float(np.sum((s * math.exp(-u) - y) ** 2))

    def direct_fit(u):
        return float(np.sum((s - math.exp(u) * y) ** 2))

    u1 = _golden_min(inverse_fit, centre - span, centre + span)
    u2 = _golden_min(direct_fit, centre - span, centre + span)
    return math.exp(u1), math.exp(u2)


# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CycleReport:
    period: Optional[int]
    max_deviation: float
    window: Tuple[int, int]


def detect_cycle(iterates, max_period: int = 8, tol: float = 1e-8) -> CycleReport:
    """Smallest period ``p <= max_period`` repeated over the trailing two thirds.

    A period is reported only if ``||x_{k+p} - x_k|| <= tol`` throughout the
    window while the points inside one period stay more than ``10*tol``
    apart, which rules out sequences that have simply converged.
    """
    xs = np.asarray(iterates, dtype=float)
    if xs.ndim == 1:
        xs = xs[:, None]
    m = xs.shape[0]
    if max_period < 1:
        raise ValueError("max_period must be positive")
    if m < 3 * max_period:
        raise ValueError(f"window too short: need {3 * max_period} iterates, got {m}")
    start = m // 3
    window = xs[start:]
    best = math.inf
    for p in range(1, max_period + 1):
        dev = float(np.max(np.linalg.norm(window[p:] - window[:-p], axis=1)))
        best = min(best, dev)
        if dev > tol or p == 1:
            continue
        spread = max(
            float(np.max(np.linalg.norm(window[j:] - window[:-j], axis=1))) for j in range(1, p)
        )
        if spread > 10.0 * tol:
            return CycleReport(p, dev, (start, m))
    return CycleReport(None, best, (start, m))


# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RLinearFit:
    """``e_k <= gamma * c**k`` for every fitted ``k`` (``k`` counted from ``start``).

    ``c`` is the least-squares slope of ``log e_k`` and ``residual`` is the
    largest amount (in log scale) by which the data rises above that line;
    ``gamma`` includes this slack so the envelope dominates every point.
    """

    gamma: float
    c: float
    residual: float
    start: int
    count: int
    first: float

    @property
    def relative_gamma(self) -> float:
        """Envelope constant for the form ``e_k <= gamma' c**k e_start``."""
        return self.gamma / self.first

    @property
    def r_linear(self) -> bool:
        return self.c < 1.0 - 1e-6

    def bound(self, k) -> np.ndarray:
        return self.gamma * self.c ** (np.asarray(k, dtype=float) - self.start)


def fit_rlinear_envelope(errors, start: int = 0, min_length: int = 10) -> RLinearFit:
    """Fit a geometric envelope to a positive error sequence.

    ``start`` drops a prefix (the bootstrap point, a stabilization phase).
    The sequence is cut at its first exact zero.
    """
    e = np.asarray(errors, dtype=float).ravel()[start:]
    zeros = np.flatnonzero(e == 0)
    if zeros.size:
        e = e[: zeros[0]]
    if e.size < min_length:
        raise ValueError(f"need at least {min_length} positive errors, got {e.size}")
    if not np.all(np.isfinite(e)) or np.any(e < 0):
        raise ValueError("errors must be finite and nonnegative")
    k = np.arange(e.size, dtype=float)
    log_e = np.log(e)
    slope, intercept = np.polyfit(k, log_e, 1)
    residual = float(np.max(log_e - (intercept + slope * k)))
    residual = max(residual, 0.0)
    return RLinearFit(
        gamma=float(math.exp(intercept + residual)),
        c=float(math.exp(slope)),
        residual=residual,
        start=int(start),
        count=int(e.size),
        first=float(e[0]),
    )


# ---------------------------------------------------------------------------


def plain_bb(problem: Problem, x0, x1, rule: int = 1, max_iterations: int = 1000, rel_tol=1e-6):
    """Textbook BB loop (with the positive-stepsize safeguard) and no radius.

    Returns ``(g_norms, s_norms, alphas, x_final)`` with the same record
    layout as the solver trace (record 0 is the step ``x0 -> x1``).  Used to
    confirm that an infinite radius reproduces plain BB bit for bit.
    """
    x_prev = np.array(x0, dtype=float).ravel()
    x = np.array(x1, dtype=float).ravel()
    g_prev = np.ascontiguousarray(problem.gradient_at(x_prev), dtype=float)
    g = np.ascontiguousarray(problem.gradient_at(x), dtype=float)
    g0 = K.norm(g_prev)
    g_norms = [g0]
    s_norms = [K.norm(x - x_prev)]
    alphas = [K.norm(x - x_prev) / g0]
    with np.errstate(over="ignore", invalid="ignore"):
        for k in range(1, max_iterations):
            gn = K.norm(g)
            if not math.isfinite(gn) or gn <= rel_tol * g0:
                break
            s = x - x_prev
            y = g - g_prev
            sy = K.dot(s, y)
            ss = K.dot(s, s)
            yy = K.dot(y, y)
            alpha = ss / sy if rule == 1 else sy / yy
            if not (sy > 0 and math.isfinite(alpha) and alpha > 0):
                alpha = math.sqrt(ss) / math.sqrt(yy)
            g_norms.append(gn)
            s_norms.append(alpha * gn)
            alphas.append(alpha)
            x_prev, g_prev = x, g
            x = x - alpha * g
            g = np.ascontiguousarray(problem.gradient_at(x), dtype=float)
    return np.array(g_norms), np.array(s_norms), np.array(alphas), x
