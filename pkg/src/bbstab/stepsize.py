"""Stepsize formulas: BB1/BB2, the nonconvexity safeguard, the stabilization cap
and the adaptive radius estimate.

These are the scalar building blocks of the iteration.  The compiled loop in
``_kernels`` makes the same decisions through the same helpers.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from . import _kernels as K
from .core import Rule


class Branch(enum.IntEnum):
    BB_RAW = K.BRANCH_BB_RAW
    BB_SAFEGUARDED = K.BRANCH_BB_SAFEGUARDED
    STAB_CAP = K.BRANCH_STAB_CAP
    BOOTSTRAP = K.BRANCH_BOOTSTRAP

    @property
    def label(self) -> str:
        return _BRANCH_LABELS[self]

    @classmethod
    def from_label(cls, text: str) -> "Branch":
        return _BRANCH_BY_LABEL[text]


_BRANCH_LABELS = {
    Branch.BB_RAW: "BBRaw",
    Branch.BB_SAFEGUARDED: "BBSafeguarded",
    Branch.STAB_CAP: "StabCap",
    Branch.BOOTSTRAP: "Bootstrap",
}
_BRANCH_BY_LABEL = {v: k for k, v in _BRANCH_LABELS.items()}


class DegeneratePairError(ValueError):
    """The curvature pair has ``y = 0`` (or ``s = 0``) and carries no information."""


@dataclass(frozen=True)
class StepPair:
    s: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        s = np.asarray(self.s, dtype=float).ravel()
        y = np.asarray(self.y, dtype=float).ravel()
        if s.shape != y.shape:
            raise ValueError(f"s and y differ in length: {s.shape[0]} vs {y.shape[0]}")
        object.__setattr__(self, "s", np.ascontiguousarray(s))
        object.__setattr__(self, "y", np.ascontiguousarray(y))

    @property
    def products(self):
        """(s's, s'y, y'y) with the same accumulation order as the solver."""
        return K.dot(self.s, self.s), K.dot(self.s, self.y), K.dot(self.y, self.y)


@dataclass(frozen=True)
class StepsizeOutcome:
    alpha: float
    branch: Branch


def _as_pair(pair) -> StepPair:
    if isinstance(pair, StepPair):
        return pair
    s, y = pair
    return StepPair(s, y)


def _value(pair, rule) -> Optional[float]:
    pair = _as_pair(pair)
    ss, sy, yy = pair.products
    if not ss > 0:
        raise ValueError("BB stepsizes need a nonzero step s")
    v = K.bb_value(ss, sy, yy, Rule.parse(rule).value)
    return None if math.isnan(v) else float(v)


def bb1(pair) -> Optional[float]:
    """``s's / s'y``, or None when ``s'y <= 0`` or the quotient overflows."""
    return _value(pair, Rule.BB1)


def bb2(pair) -> Optional[float]:
    """``s'y / y'y``, or None when ``s'y <= 0`` or ``y = 0``."""
    return _value(pair, Rule.BB2)


def safeguarded_bb(pair, rule=Rule.BB1) -> StepsizeOutcome:
    """The BB stepsize for ``rule``, replaced by ``||s||/||y||`` when unusable."""
    pair = _as_pair(pair)
    ss, sy, yy = pair.products
    if not ss > 0:
        raise ValueError("BB stepsizes need a nonzero step s")
    if not yy > 0:
        raise DegeneratePairError("y = 0: gradient did not change across the step")
    v = K.bb_value(ss, sy, yy, Rule.parse(rule).value)
    if math.isnan(v):
        return StepsizeOutcome(math.sqrt(ss) / math.sqrt(yy), Branch.BB_SAFEGUARDED)
    return StepsizeOutcome(float(v), Branch.BB_RAW)


def stab_stepsize(delta: float, g) -> float:
    """``delta / ||g||``; an infinite delta gives an infinite (non-binding) cap."""
    g_norm = K.norm(np.ascontiguousarray(g, dtype=float).ravel())
    if g_norm == 0:
        raise ValueError("stabilization stepsize undefined at a zero gradient")
    if not delta > 0:
        raise ValueError(f"delta must be positive, got {delta}")
    return float(delta) / g_norm


def combined_stepsize(alpha_bb: float, alpha_stab: float) -> StepsizeOutcome:
    """``min(alpha_bb, alpha_stab)``; a tie counts as the BB branch."""
    if not (alpha_bb > 0 and alpha_stab > 0):
        raise ValueError("stepsizes must be positive")
    if alpha_stab < alpha_bb:
        return StepsizeOutcome(float(alpha_stab), Branch.STAB_CAP)
    return StepsizeOutcome(float(alpha_bb), Branch.BB_RAW)


def adaptive_delta(step_norms: Sequence[float], c: float) -> float:
    """``c * min(step_norms)`` over exactly three leading uncapped step lengths."""
    norms = [float(v) for v in step_norms]
    if len(norms) != 3:
        raise ValueError(f"expected exactly 3 step norms, got {len(norms)}")
    if not (math.isfinite(c) and c > 0):
        raise ValueError(f"c must be finite and positive, got {c}")
    if not all(math.isfinite(v) and v > 0 for v in norms):
        raise ValueError(f"step norms must be finite and positive, got {norms}")
    return float(K.adaptive_delta_value(norms[0], norms[1], norms[2], float(c)))
