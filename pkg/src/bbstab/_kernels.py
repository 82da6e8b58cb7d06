"""Hot loops: reductions, CSR matvec and the BB iteration itself.

Kernels are compiled with numba when it is importable.  Setting the
environment variable ``BBSTAB_DISABLE_NUMBA=1`` (checked at import time)
selects the pure-numpy path instead.  Both paths accumulate sums strictly
left to right, so ``dot``, ``norm`` and ``csr_matvec`` return bitwise
identical results on either backend.  Elementwise transcendental functions
(``np.exp``) are not guaranteed to match across backends.
"""

import functools
import math
import os

import numpy as np

try:
    import numba
except ImportError:  # pragma: no cover - numba is a hard dependency in practice
    numba = None

DISABLE_NUMBA = os.environ.get("BBSTAB_DISABLE_NUMBA", "").strip().lower() in (
    "1",
    "true",
    "yes",
    "on",
)
USE_NUMBA = numba is not None and not DISABLE_NUMBA
BACKEND = "numba" if USE_NUMBA else "numpy"


def jit(func):
    """Compile ``func`` in nopython mode, or return it untouched on the numpy path."""
    if USE_NUMBA:
        return numba.njit(cache=True)(func)

    # compiled code overflows to inf/nan silently; keep the fallback quiet too
    @functools.wraps(func)
    def quiet(*args):
        with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
            return func(*args)

    return quiet


# Codes shared between the compiled loop and the Python wrappers.
STATUS_RUNNING = 0
STATUS_CONVERGED = 1
STATUS_ITERATION_LIMIT = 2
STATUS_NON_FINITE = 3
STATUS_ZERO_GRADIENT = 4

BRANCH_BB_RAW = 0
BRANCH_BB_SAFEGUARDED = 1
BRANCH_STAB_CAP = 2
BRANCH_BOOTSTRAP = 3

DELTA_INFINITE = 0
DELTA_FIXED = 1
DELTA_ADAPTIVE = 2

RULE_BB1 = 1
RULE_BB2 = 2


# ---------------------------------------------------------------------------
# reductions


def _dot_loop(a, b):
    acc = 0.0
    for i in range(a.shape[0]):
        acc += a[i] * b[i]
    return acc


def _dot_numpy(a, b):
    if a.shape[0] == 0:
        return 0.0
    # cumsum is a strict left-to-right scan, matching the compiled loop
    with np.errstate(over="ignore", invalid="ignore"):
        return float(np.cumsum(a * b)[-1])


def _csr_matvec_loop(indptr, indices, data, x):
    n = indptr.shape[0] - 1
    y = np.empty(n)
    for i in range(n):
        acc = 0.0
        for jj in range(indptr[i], indptr[i + 1]):
            acc += data[jj] * x[indices[jj]]
        y[i] = acc
    return y


def _csr_matvec_numpy(indptr, indices, data, x):
    n = indptr.shape[0] - 1
    y = np.zeros(n)
    if n == 0 or data.shape[0] == 0:
        return y
    counts = np.diff(indptr)
    products = data * x[indices]
    # slab j adds the j-th stored entry of every row that has one,
    # which reproduces the row-major accumulation order
    for j in range(int(counts.max())):
        rows = np.flatnonzero(counts > j)
        y[rows] += products[indptr[rows] + j]
    return y


if USE_NUMBA:
    dot = jit(_dot_loop)
    csr_matvec = jit(_csr_matvec_loop)
else:
    dot = _dot_numpy
    csr_matvec = _csr_matvec_numpy


@jit
def norm(v):
    return math.sqrt(dot(v, v))


@jit
def all_finite(v):
    for i in range(v.shape[0]):
        if not math.isfinite(v[i]):
            return False
    return True


# ---------------------------------------------------------------------------
# scalar decisions shared by the public API and the compiled loop


@jit
def bb_value(ss, sy, yy, rule):
    """BB1 (rule 1) or BB2 (rule 2) from inner products; NaN when unusable."""
    if not sy > 0.0:
        return np.nan
    if rule == RULE_BB1:
        value = ss / sy
    else:
        value = sy / yy
    if math.isfinite(value) and value > 0.0:
        return value
    return np.nan


@jit
def termination_code(g_norm, abs_tol, k, max_iter):
    if not math.isfinite(g_norm):
        return STATUS_NON_FINITE
    if g_norm == 0.0:
        return STATUS_ZERO_GRADIENT
    if g_norm <= abs_tol:
        return STATUS_CONVERGED
    if k >= max_iter:
        return STATUS_ITERATION_LIMIT
    return STATUS_RUNNING


@jit
def adaptive_delta_value(n1, n2, n3, c):
    """c * min(n1, n2, n3), or +inf if any norm is unusable."""
    for v in (n1, n2, n3):
        if not (math.isfinite(v) and v > 0.0):
            return np.inf
    return c * min(n1, min(n2, n3))


# ---------------------------------------------------------------------------
# the iteration


def _bb_loop(
    grad,
    args,
    x_prev,
    g_prev,
    x,
    g,
    alpha0,
    rule,
    delta_mode,
    delta_param,
    max_iter,
    abs_tol,
    safeguard,
    keep_iterates,
):
    """Run the (stabilized) BB iteration from the pair (x_prev, x).

    Record ``j`` of the returned columns describes the step from x_j to
    x_{j+1}; record 0 is the step that produced x_1 from x_0.
    """
    cap = max_iter + 1
    g_norms = np.empty(cap)
    s_norms = np.empty(cap)
    alphas = np.empty(cap)
    deltas = np.empty(cap)
    branches = np.empty(cap, dtype=np.int8)
    history = [x_prev.copy()]
    if keep_iterates:
        history.append(x.copy())

    g_norms[0] = norm(g_prev)
    s_norms[0] = norm(x - x_prev)
    alphas[0] = alpha0
    deltas[0] = np.nan
    branches[0] = BRANCH_BOOTSTRAP

    delta = np.inf
    if delta_mode == DELTA_FIXED:
        delta = delta_param
    alpha_prev = alpha0
    k = 1
    gn = norm(g)
    while True:
        gn = norm(g)
        status = termination_code(gn, abs_tol, k, max_iter)
        if status == STATUS_RUNNING and not all_finite(x):
            status = STATUS_NON_FINITE
        if status != STATUS_RUNNING:
            break

        s = x - x_prev
        y = g - g_prev
        ss = dot(s, s)
        yy = dot(y, y)
        alpha_stab = delta / gn
        if ss > 0.0 and yy > 0.0:
            sy = dot(s, y)
            if not (math.isfinite(ss) and math.isfinite(yy) and math.isfinite(sy)):
                status = STATUS_NON_FINITE
                break
            alpha_bb = bb_value(ss, sy, yy, rule)
            branch = BRANCH_BB_RAW
            if alpha_bb != alpha_bb:
                if safeguard:
                    alpha_bb = math.sqrt(ss) / math.sqrt(yy)
                    branch = BRANCH_BB_SAFEGUARDED
                elif rule == RULE_BB1:
                    alpha_bb = ss / sy
                else:
                    alpha_bb = sy / yy
        elif delta < np.inf:
            alpha_bb = alpha_stab
            branch = BRANCH_STAB_CAP
        else:
            alpha_bb = alpha_prev
            branch = BRANCH_BB_SAFEGUARDED

        if alpha_stab < alpha_bb:
            alpha = alpha_stab
            branch = BRANCH_STAB_CAP
        else:
            alpha = alpha_bb
        if not math.isfinite(alpha):
            status = STATUS_NON_FINITE
            break

        g_norms[k] = gn
        s_norms[k] = alpha * gn
        alphas[k] = alpha
        deltas[k] = delta
        branches[k] = branch

        x_prev = x
        g_prev = g
        x = x - alpha * g
        g = grad(x, args)
        if keep_iterates:
            history.append(x)
        alpha_prev = alpha
        if delta_mode == DELTA_ADAPTIVE and k == 3:
            delta = adaptive_delta_value(s_norms[1], s_norms[2], s_norms[3], delta_param)
        k += 1

    return (
        status,
        k,
        x,
        gn,
        g_norms[:k].copy(),
        s_norms[:k].copy(),
        alphas[:k].copy(),
        deltas[:k].copy(),
        branches[:k].copy(),
        delta,
        history,
    )


bb_loop = jit(_bb_loop)
py_bb_loop = _bb_loop
