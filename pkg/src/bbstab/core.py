"""Shared domain types, stopping rule and gradient-norm region classification."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from . import _kernels as K


@dataclass(frozen=True)
class SpectralBounds:
    """Uniform bounds ``lambda_lo <= eig(Hessian) <= lambda_hi``."""

    lambda_lo: float
    lambda_hi: float

    def __post_init__(self):
        lo, hi = float(self.lambda_lo), float(self.lambda_hi)
        if not (math.isfinite(lo) and math.isfinite(hi)) or not 0.0 < lo <= hi:
            raise ValueError(f"need 0 < lambda_lo <= lambda_hi, got {lo}, {hi}")
        object.__setattr__(self, "lambda_lo", lo)
        object.__setattr__(self, "lambda_hi", hi)

    @property
    def kappa(self) -> float:
        return self.lambda_hi / self.lambda_lo


@dataclass(frozen=True)
class Problem:
    """A differentiable objective.

    ``value_at`` and ``gradient_at`` take and return numpy arrays.  Builtin
    problems also carry ``kernel = (grad, args)`` where ``grad(x, args)`` is
    a compiled gradient; the solver then runs the compiled loop.  Problems
    without a kernel run the same loop in the interpreter.
    """

    dimension: int
    value_at: Callable[[np.ndarray], float]
    gradient_at: Callable[[np.ndarray], np.ndarray]
    minimizer: Optional[np.ndarray] = None
    spectral_bounds: Optional[SpectralBounds] = None
    name: str = "problem"
    kernel: Optional[tuple] = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if int(self.dimension) < 1:
            raise ValueError("dimension must be positive")


class Region(enum.IntEnum):
    """Where ``||g||`` sits relative to ``lambda_lo*delta``, ``lambda_hi*delta``, ``kappa*lambda_hi*delta``."""

    OMEGA1 = 1
    OMEGA2 = 2
    OMEGA3_PRIME = 3
    OMEGA3_OUTER = 4

    @property
    def in_omega3(self) -> bool:
        return self >= Region.OMEGA3_PRIME

    @property
    def label(self) -> str:
        return _REGION_LABELS[self]

    @classmethod
    def from_label(cls, text: str) -> "Region":
        return _REGION_BY_LABEL[text]


_REGION_LABELS = {
    Region.OMEGA1: "Omega1",
    Region.OMEGA2: "Omega2",
    Region.OMEGA3_PRIME: "Omega3Prime",
    Region.OMEGA3_OUTER: "Omega3Outer",
}
_REGION_BY_LABEL = {v: k for k, v in _REGION_LABELS.items()}


class Status(enum.Enum):
    CONVERGED = "Converged"
    ITERATION_LIMIT = "IterationLimit"
    NON_FINITE = "NonFiniteEncountered"
    ZERO_GRADIENT = "ZeroGradient"

    @property
    def solved(self) -> bool:
        return self in (Status.CONVERGED, Status.ZERO_GRADIENT)


_STATUS_BY_CODE = {
    K.STATUS_CONVERGED: Status.CONVERGED,
    K.STATUS_ITERATION_LIMIT: Status.ITERATION_LIMIT,
    K.STATUS_NON_FINITE: Status.NON_FINITE,
    K.STATUS_ZERO_GRADIENT: Status.ZERO_GRADIENT,
}


@dataclass(frozen=True)
class Termination:
    status: Status
    iteration: int

    def __str__(self):
        return f"{self.status.value}({self.iteration})"


class Rule(enum.Enum):
    BB1 = K.RULE_BB1
    BB2 = K.RULE_BB2

    @classmethod
    def parse(cls, text) -> "Rule":
        if isinstance(text, Rule):
            return text
        try:
            return cls[str(text).strip().upper()]
        except KeyError:
            raise ValueError(f"unknown stepsize rule {text!r}; expected bb1 or bb2") from None


@dataclass(frozen=True)
class DeltaPolicy:
    """How the stabilization radius is chosen.

    ``infinite`` never caps (plain BB), ``fixed`` uses ``value`` as the
    radius, ``adaptive`` uses ``value`` as the multiplier ``c`` applied to
    the shortest of the first three uncapped steps.
    """

    kind: str = "infinite"
    value: float = math.inf

    def __post_init__(self):
        if self.kind not in ("infinite", "fixed", "adaptive"):
            raise ValueError(f"unknown delta policy {self.kind!r}")
        if self.kind == "infinite":
            object.__setattr__(self, "value", math.inf)
        elif not (math.isfinite(self.value) and self.value > 0):
            raise ValueError(f"{self.kind} delta needs a finite positive value, got {self.value}")

    @classmethod
    def infinite(cls) -> "DeltaPolicy":
        return cls("infinite")

    @classmethod
    def fixed(cls, delta: float) -> "DeltaPolicy":
        return cls("fixed", float(delta))

    @classmethod
    def adaptive(cls, c: float) -> "DeltaPolicy":
        return cls("adaptive", float(c))

    @classmethod
    def parse(cls, text: str) -> "DeltaPolicy":
        """Parse ``inf``, a float, or ``auto:<c>``."""
        text = str(text).strip().lower()
        if text in ("inf", "infinite", "+inf", "none"):
            return cls.infinite()
        if text.startswith("auto:"):
            return cls.adaptive(float(text[5:]))
        value = float(text)
        if math.isinf(value) and value > 0:
            return cls.infinite()
        return cls.fixed(value)

    @property
    def code(self) -> int:
        return {"infinite": K.DELTA_INFINITE, "fixed": K.DELTA_FIXED, "adaptive": K.DELTA_ADAPTIVE}[
            self.kind
        ]

    def __str__(self):
        if self.kind == "infinite":
            return "inf"
        if self.kind == "adaptive":
            return f"auto:{self.value:g}"
        return f"{self.value:g}"


@dataclass(frozen=True)
class SolverConfig:
    rule: Rule = Rule.BB1
    delta_policy: DeltaPolicy = field(default_factory=DeltaPolicy.infinite)
    max_iterations: int = 100_000
    rel_tol: float = 1e-6
    safeguard_nonconvex: bool = True
    backtracking_max: int = 30

    def __post_init__(self):
        object.__setattr__(self, "rule", Rule.parse(self.rule))
        if isinstance(self.delta_policy, str):
            object.__setattr__(self, "delta_policy", DeltaPolicy.parse(self.delta_policy))
        if int(self.max_iterations) < 1:
            raise ValueError("max_iterations must be positive")
        if not self.rel_tol > 0:
            raise ValueError("rel_tol must be positive")
        if int(self.backtracking_max) < 1:
            raise ValueError("backtracking_max must be positive")

    @property
    def label(self) -> str:
        """Column label used in summaries, e.g. ``BB1`` or ``BB1stab(c=0.25)``."""
        name = self.rule.name
        policy = self.delta_policy
        if policy.kind == "infinite":
            return name
        if policy.kind == "adaptive":
            return f"{name}stab(c={policy.value:g})"
        return f"{name}stab(delta={policy.value:g})"


def classify_region(g_norm: float, delta: float, bounds: SpectralBounds) -> Region:
    if not math.isfinite(g_norm) or g_norm < 0:
        raise ValueError(f"g_norm must be finite and nonnegative, got {g_norm}")
    if not (math.isfinite(delta) and delta > 0):
        raise ValueError(f"delta must be finite and positive, got {delta}")
    lo, hi = bounds.lambda_lo, bounds.lambda_hi
    if g_norm <= lo * delta:
        return Region.OMEGA1
    if g_norm <= hi * delta:
        return Region.OMEGA2
    if g_norm <= bounds.kappa * hi * delta:
        return Region.OMEGA3_PRIME
    return Region.OMEGA3_OUTER


def should_terminate(
    g_norm: float, g0_norm: float, iteration: int, config: SolverConfig
) -> Optional[Termination]:
    """Stopping test applied to ``g_k`` before a step is taken.

    Convergence is checked before the iteration limit; an exactly zero
    gradient is reported as ``ZeroGradient``.
    """
    if not g0_norm > 0:
        raise ValueError("g0_norm must be positive")
    code = K.termination_code(
        float(g_norm), config.rel_tol * g0_norm, int(iteration), int(config.max_iterations)
    )
    if code == K.STATUS_RUNNING:
        return None
    return Termination(_STATUS_BY_CODE[code], int(iteration))


def status_from_code(code: int) -> Status:
    return _STATUS_BY_CODE[code]
