"""Analytic test objectives.

* ``counterexample`` -- a strongly convex piecewise function on which plain
  BB cycles through four points; separable in n dimensions.
* ``raydan`` -- the "Strictly Convex 2" function ``sum_i i (e^{x_i} - x_i) / 10``.
* ``extended_rosenbrock`` -- separable-pairs Rosenbrock (SROSENBR layout).
* ``diagonal_quadratic`` -- ``x'Dx/2 - b'x`` with ``b = De``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._kernels import jit
from .core import Problem, SpectralBounds

SQRT5 = math.sqrt(5.0)


@dataclass(frozen=True)
class CounterexampleConstants:
    a: float = SQRT5 - 1.0
    b: float = SQRT5 + 3.0
    c1: float = (3.0 * SQRT5 + 8.0) / 4.0
    c2: float = -(5.0 * SQRT5 + 11.0) / 32.0

    @property
    def f_a(self) -> float:
        return self.c1 * self.a**2 / 2.0 + self.c2 * self.a**4 / 4.0

    @property
    def slope_at_a(self) -> float:
        return SQRT5 + 1.0


CONSTANTS = CounterexampleConstants()
_A, _B, _C1, _C2 = CONSTANTS.a, CONSTANTS.b, CONSTANTS.c1, CONSTANTS.c2
_FA = CONSTANTS.f_a
_SLOPE = CONSTANTS.slope_at_a


@jit
def _counterexample_values(x):
    left = 0.25 * (x + _A) ** 2 - _SLOPE * (x + _A) + _FA
    right = 0.25 * (x - _A) ** 2 + _SLOPE * (x - _A) + _FA
    x2 = x * x
    middle = 0.5 * _C1 * x2 + 0.25 * _C2 * x2 * x2
    return np.where(x < -_A, left, np.where(x > _A, right, middle))


@jit
def _counterexample_grads(x):
    left = 0.5 * (x + _A) - _SLOPE
    right = 0.5 * (x - _A) + _SLOPE
    middle = _C1 * x + _C2 * x * x * x
    return np.where(x < -_A, left, np.where(x > _A, right, middle))


@jit
def _counterexample_kernel(x, args):
    return _counterexample_grads(x)


def counterexample_value(x):
    """Piecewise value; accepts a scalar or an array (elementwise)."""
    arr = np.asarray(x, dtype=float)
    out = _counterexample_values(np.ascontiguousarray(arr.ravel())).reshape(arr.shape)
    return float(out) if out.ndim == 0 else out


def counterexample_grad(x):
    """Derivative of :func:`counterexample_value`; odd and increasing."""
    arr = np.asarray(x, dtype=float)
    out = _counterexample_grads(np.ascontiguousarray(arr.ravel())).reshape(arr.shape)
    return float(out) if out.ndim == 0 else out


def counterexample(n: int = 1) -> Problem:
    """Sum of ``n`` independent copies of the univariate counterexample."""
    n = int(n)
    if n < 1:
        raise ValueError("n must be positive")
    return Problem(
        dimension=n,
        value_at=lambda x: float(np.sum(_counterexample_values(_vec(x)))),
        gradient_at=lambda x: _counterexample_grads(_vec(x)),
        minimizer=np.zeros(n),
        spectral_bounds=SpectralBounds(0.5, _C1),
        name=f"counterexample:n={n}",
        kernel=(_counterexample_kernel, ()),
    )


def cycle_start(n: int = 1):
    """The pair ``(-b e, -a e)`` from which plain BB cycles."""
    return np.full(n, -_B), np.full(n, -_A)


# ---------------------------------------------------------------------------


def raydan_weights(n: int) -> np.ndarray:
    return np.arange(1, n + 1, dtype=float) / 10.0


@jit
def _raydan_grad(x, args):
    w = args[0]
    return w * (np.exp(x) - 1.0)


def raydan_value(x) -> float:
    x = _vec(x)
    w = raydan_weights(x.shape[0])
    return float(np.sum(w * (np.exp(x) - x)))


def raydan_grad(x) -> np.ndarray:
    x = _vec(x)
    return _raydan_grad(x, (raydan_weights(x.shape[0]),))


def raydan(n: int = 1000) -> Problem:
    """Strictly convex; overflow of ``exp`` is left to propagate."""
    n = int(n)
    if n < 1:
        raise ValueError("n must be positive")
    w = raydan_weights(n)
    args = (w,)
    return Problem(
        dimension=n,
        value_at=lambda x: float(np.sum(w * (np.exp(_vec(x)) - _vec(x)))),
        gradient_at=lambda x: _raydan_grad(_vec(x), args),
        minimizer=np.zeros(n),
        name=f"raydan:n={n}",
        kernel=(_raydan_grad, args),
    )


# ---------------------------------------------------------------------------


@jit
def _rosenbrock_grad(x, args):
    odd = x[0::2]
    even = x[1::2]
    r = even - odd * odd
    g = np.empty_like(x)
    g[0::2] = -400.0 * odd * r - 2.0 * (1.0 - odd)
    g[1::2] = 200.0 * r
    return g


def extended_rosenbrock_value(x) -> float:
    x = _even(x)
    odd, even = x[0::2], x[1::2]
    return float(np.sum(100.0 * (even - odd**2) ** 2 + (1.0 - odd) ** 2))


def extended_rosenbrock_grad(x) -> np.ndarray:
    return _rosenbrock_grad(_even(x), ())


def extended_rosenbrock(n: int = 2) -> Problem:
    n = int(n)
    if n < 2 or n % 2:
        raise ValueError(f"extended Rosenbrock needs an even dimension, got {n}")
    return Problem(
        dimension=n,
        value_at=extended_rosenbrock_value,
        gradient_at=extended_rosenbrock_grad,
        minimizer=np.ones(n),
        name=f"rosenbrock:n={n}",
        kernel=(_rosenbrock_grad, ()),
    )


# ---------------------------------------------------------------------------


@jit
def _diag_grad(x, args):
    lam, b = args
    return lam * x - b


def diagonal_quadratic(eigenvalues, name=None) -> Problem:
    """``f = x'diag(lam)x/2 - b'x`` with ``b = diag(lam) e``; minimizer ``e``."""
    lam = np.ascontiguousarray(eigenvalues, dtype=float).ravel()
    if lam.size == 0:
        raise ValueError("need at least one eigenvalue")
    if not np.all(np.isfinite(lam)) or np.any(lam <= 0):
        raise ValueError("eigenvalues must be finite and positive")
    b = lam * np.ones_like(lam)
    args = (lam, b)
    n = lam.size
    return Problem(
        dimension=n,
        value_at=lambda x: float(0.5 * _vec(x) @ (lam * _vec(x)) - b @ _vec(x)),
        gradient_at=lambda x: _diag_grad(_vec(x), args),
        minimizer=np.ones(n),
        spectral_bounds=SpectralBounds(lam.min(), lam.max()),
        name=name or f"diag:n={n}",
        kernel=(_diag_grad, args),
    )


def random_diagonal_quadratic(n: int, lo: float, hi: float, seed: int = 0) -> Problem:
    """Eigenvalues uniform in [lo, hi], with both endpoints included."""
    rng = np.random.default_rng(seed)
    lam = rng.uniform(lo, hi, size=n)
    if n >= 2:
        lam[0], lam[1] = lo, hi
    return diagonal_quadratic(lam, name=f"diag:n={n},lo={lo:g},hi={hi:g},seed={seed}")


# ---------------------------------------------------------------------------

BUILTIN = ("counterexample", "raydan", "rosenbrock", "diag", "randdiag")


def from_selector(selector: str) -> Problem:
    """Build a builtin problem from ``name:key=val,...``.

    ``counterexample:n=1``, ``raydan:n=1000``, ``rosenbrock:n=2``,
    ``diag:n=10`` (eigenvalues 1..n), ``randdiag:n=20,lo=1,hi=100,seed=0``.
    """
    name, _, rest = selector.partition(":")
    params = {}
    for item in filter(None, (p.strip() for p in rest.split(","))):
        key, eq, value = item.partition("=")
        if not eq:
            raise ValueError(f"bad problem parameter {item!r} in {selector!r}")
        params[key.strip()] = value.strip()
    name = name.strip().lower()
    n = int(params.get("n", 0))
    if name == "counterexample":
        return counterexample(n or 1)
    if name == "raydan":
        return raydan(n or 1000)
    if name in ("rosenbrock", "srosenbr"):
        return extended_rosenbrock(n or 2)
    if name == "diag":
        return diagonal_quadratic(np.arange(1, (n or 10) + 1, dtype=float), name=f"diag:n={n or 10}")
    if name == "randdiag":
        return random_diagonal_quadratic(
            n or 20,
            float(params.get("lo", 1.0)),
            float(params.get("hi", 100.0)),
            int(params.get("seed", 0)),
        )
    raise ValueError(f"unknown problem {name!r}; builtin problems are {', '.join(BUILTIN)}")


def _vec(x) -> np.ndarray:
    return np.ascontiguousarray(x, dtype=float).ravel()


def _even(x) -> np.ndarray:
    x = _vec(x)
    if x.shape[0] % 2:
        raise ValueError(f"extended Rosenbrock needs an even dimension, got {x.shape[0]}")
    return x
