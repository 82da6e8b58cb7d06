import json
import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as hs
from hypothesis.extra.numpy import arrays

from bbstab import _kernels as K
from bbstab import problems as P
from bbstab.core import SolverConfig
from bbstab.quadratic_io import SparseMatrix
from bbstab.solver import gradient_step_x1, run_from_pair

from conftest import MATRIX_DIR, ROOT


@given(arrays(float, hs.integers(0, 200), elements=hs.floats(-1e6, 1e6)))
def test_dot_paths_bitwise_equal(a):
    b = a[::-1].copy()
    ref = K._dot_loop(a, b)
    assert K._dot_numpy(a, b) == ref
    assert K.dot(a, b) == ref


@given(hs.integers(1, 15), hs.integers(0, 2**32 - 1))
def test_csr_paths_bitwise_equal(n, seed):
    rng = np.random.default_rng(seed)
    d = np.where(rng.random((n, n)) < 0.4, rng.standard_normal((n, n)), 0.0)
    a = SparseMatrix.from_dense(d)
    x = rng.standard_normal(n)
    args = (a.row_offsets, a.column_indices, a.values, x)
    ref = K._csr_matvec_loop(*args)
    assert np.array_equal(K._csr_matvec_numpy(*args), ref)
    assert np.array_equal(K.csr_matvec(*args), ref)


def test_interpreted_loop_matches_compiled():
    prob = P.random_diagonal_quadratic(25, 1.0, 100.0, seed=8)
    x0 = np.zeros(25)
    x1 = gradient_step_x1(prob, x0).x1
    grad, args = prob.kernel
    g0, g1 = prob.gradient_at(x0), prob.gradient_at(x1)
    common = (x0, g0, x1, g1, 0.01, 1, K.DELTA_ADAPTIVE, 0.25, 1000, 1e-6 * K.norm(g0), True, False)
    fast = K.bb_loop(grad, args, *common)
    slow = K.py_bb_loop(grad, args, *common)
    assert fast[:2] == slow[:2]
    for a, b in zip(fast[2:10], slow[2:10]):
        assert np.array_equal(np.asarray(a), np.asarray(b), equal_nan=True)


_SCRIPT = r"""
import json, sys
import numpy as np
from bbstab import _kernels as K, problems as P, harness as H
from bbstab.core import SolverConfig
out = {"backend": K.BACKEND, "runs": {}}
cases = [
    ("diag", H.Instance(P.diagonal_quadratic(np.arange(1.0, 11.0)), True), "zero"),
    ("randdiag", H.Instance(P.random_diagonal_quadratic(40, 1.0, 100.0, 1), True), "const:-30"),
    ("counterexample", H.Instance(P.counterexample(3), False), "const:-5"),
    ("matrix", H.load_instance(matrix=sys.argv[1]), "zero"),
    ("raydan", H.Instance(P.raydan(200), False), "const:-3"),
]
for name, inst, x0 in cases:
    for delta in ("inf", "auto:0.25"):
        x0v, x1v = H.parse_x0(x0, inst.problem.dimension)
        res = H.solve_instance(inst, x0v, x1v, SolverConfig(delta_policy=delta))
        out["runs"][f"{name}/{delta}"] = {
            "iterations": res.iterations,
            "g_norm": res.trace.g_norm.tolist(),
            "alpha": res.trace.alpha.tolist(),
        }
print(json.dumps(out))
"""


def _run(disable):
    env = dict(os.environ)
    env.pop("BBSTAB_DISABLE_NUMBA", None)
    if disable:
        env["BBSTAB_DISABLE_NUMBA"] = "1"
    matrix = str(MATRIX_DIR / "lap2d_8.mtx")
    proc = subprocess.run(
        [sys.executable, "-c", _SCRIPT, matrix], env=env, cwd=ROOT, capture_output=True, text=True, check=True
    )
    return json.loads(proc.stdout)


@pytest.fixture(scope="module")
def both_backends():
    return _run(False), _run(True)


def test_backend_flag_respected(both_backends):
    fast, slow = both_backends
    assert slow["backend"] == "numpy"
    assert fast["backend"] == ("numba" if K.numba is not None else "numpy")


@pytest.mark.parametrize("case", ["diag", "randdiag", "counterexample", "matrix"])
@pytest.mark.parametrize("delta", ["inf", "auto:0.25"])
def test_backends_bitwise_on_polynomial_gradients(both_backends, case, delta):
    fast, slow = (b["runs"][f"{case}/{delta}"] for b in both_backends)
    assert fast == slow


@pytest.mark.parametrize("delta", ["inf", "auto:0.25"])
def test_backends_close_on_exp_gradients(both_backends, delta):
    # exp may round differently between backends and plain BB amplifies
    # the difference, so only the early trace is compared
    fast, slow = (b["runs"][f"raydan/{delta}"] for b in both_backends)
    k = min(10, len(fast["g_norm"]), len(slow["g_norm"]))
    assert np.allclose(fast["g_norm"][:k], slow["g_norm"][:k], rtol=1e-6)
