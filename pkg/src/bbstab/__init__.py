"""Stabilized Barzilai-Borwein gradient methods."""

from ._kernels import BACKEND
from .core import (
    DeltaPolicy,
    Problem,
    Region,
    Rule,
    SolverConfig,
    SpectralBounds,
    Status,
    Termination,
    classify_region,
    should_terminate,
)
from .solver import SolveResult, Trace, TraceRecord, run, run_from_pair
from .stepsize import Branch

__all__ = [
    "BACKEND",
    "Branch",
    "DeltaPolicy",
    "Problem",
    "Region",
    "Rule",
    "SolveResult",
    "SolverConfig",
    "SpectralBounds",
    "Status",
    "Termination",
    "Trace",
    "TraceRecord",
    "classify_region",
    "run",
    "run_from_pair",
    "should_terminate",
]
