import math

import mpmath
import numpy as np
import pytest

from bbstab import problems as P
from bbstab.oracles import fd_gradient_check

C = P.CONSTANTS
SQ5 = math.sqrt(5.0)


def _mp_grad(x):
    # independent high-precision evaluation of the piecewise derivative
    mpmath.mp.dps = 50
    s5 = mpmath.sqrt(5)
    a, c1, c2 = s5 - 1, (3 * s5 + 8) / 4, -(5 * s5 + 11) / 32
    x = mpmath.mpf(x)
    if x < -a:
        return (x + a) / 2 - (s5 + 1)
    if x > a:
        return (x - a) / 2 + (s5 + 1)
    return c1 * x + c2 * x**3


def test_constants():
    assert C.a == SQ5 - 1 and C.b == SQ5 + 3
    assert C.c1 == pytest.approx((3 * SQ5 + 8) / 4, rel=1e-16)
    assert C.c2 == pytest.approx(-(5 * SQ5 + 11) / 32, rel=1e-16)


def test_grad_at_branch_points():
    assert abs(P.counterexample_grad(C.a) - (SQ5 + 1)) <= 1e-14
    assert abs(P.counterexample_grad(-C.a) + (SQ5 + 1)) <= 1e-14
    assert P.counterexample_grad(-C.a) == pytest.approx(float(_mp_grad(-C.a)), abs=1e-14)
    assert P.counterexample_grad(-C.b) == pytest.approx(-C.b, abs=1e-14)
    assert P.counterexample_grad(0.0) == 0.0


def test_tails_match_middle_at_boundary():
    a = C.a
    middle_val = C.c1 * a**2 / 2 + C.c2 * a**4 / 4
    eps = 1e-9
    assert abs(P.counterexample_value(a) - middle_val) <= 1e-14
    assert abs(P.counterexample_value(a + eps) - P.counterexample_value(a - eps)) <= 1e-8
    assert abs(P.counterexample_grad(a + 1e-12) - P.counterexample_grad(a - 1e-12)) <= 1e-11


@pytest.mark.parametrize("x", np.linspace(-8, 8, 41))
def test_grad_matches_high_precision(x):
    assert P.counterexample_grad(x) == pytest.approx(float(_mp_grad(x)), rel=1e-14, abs=1e-14)


def test_value_minimized_at_zero():
    xs = np.linspace(-6, 6, 1201)
    vals = P.counterexample_value(xs)
    assert xs[np.argmin(vals)] == 0.0


def test_curvature_bounds():
    rng = np.random.default_rng(0)
    h = 1e-4
    for x in rng.uniform(-10, 10, 200):
        q = (P.counterexample_value(x + h) - 2 * P.counterexample_value(x) + P.counterexample_value(x - h)) / h**2
        assert 0.5 - 1e-2 <= q <= C.c1 + 1e-2


def test_grad_is_odd():
    xs = np.random.default_rng(1).uniform(-10, 10, 500)
    assert np.array_equal(P.counterexample_grad(-xs), -P.counterexample_grad(xs))


def test_secant_chain_cycles():
    g = P.counterexample_grad
    xs = [-C.b, -C.a]
    for _ in range(4):
        x_prev, x = xs[-2], xs[-1]
        alpha = (x - x_prev) / (g(x) - g(x_prev))
        xs.append(x - alpha * g(x))
    assert np.allclose(xs[2:], [C.b, C.a, -C.b, -C.a], atol=1e-12, rtol=0)


def test_separable_extension():
    prob = P.counterexample(3)
    x = np.array([-1.0, 0.3, 2.0])
    assert prob.value_at(x) == pytest.approx(sum(P.counterexample_value(v) for v in x), rel=1e-15)
    assert np.array_equal(prob.gradient_at(x), P.counterexample_grad(x))
    assert prob.spectral_bounds.lambda_lo == 0.5 and prob.spectral_bounds.lambda_hi == C.c1
    x0, x1 = P.cycle_start(3)
    assert np.all(x0 == -C.b) and np.all(x1 == -C.a)


def test_raydan_values():
    assert np.array_equal(P.raydan_grad(np.zeros(7)), np.zeros(7))
    assert P.raydan(1000).value_at(np.zeros(1000)) == pytest.approx(50050.0, rel=1e-14)
    g = P.raydan_grad([1.0, -1.0])
    assert g == pytest.approx([0.1 * (math.e - 1), 0.2 * (math.exp(-1) - 1)], rel=1e-15)
    assert g == pytest.approx([0.171828, -0.126424], abs=1e-6)


def test_raydan_overflow_propagates():
    with np.errstate(over="ignore"):
        g = P.raydan_grad([1000.0, 0.0])
    assert g[0] == math.inf


def test_rosenbrock():
    prob = P.extended_rosenbrock(4)
    assert prob.value_at(np.ones(4)) == 0.0
    assert np.array_equal(prob.gradient_at(np.ones(4)), np.zeros(4))
    assert P.extended_rosenbrock_value([0.0, 0.0]) == 1.0
    assert np.array_equal(P.extended_rosenbrock_grad([0.0, 0.0]), [-2.0, 0.0])
    with pytest.raises(ValueError):
        P.extended_rosenbrock(3)
    with pytest.raises(ValueError):
        P.extended_rosenbrock_grad([1.0, 2.0, 3.0])


def test_rosenbrock_fd_random_points():
    prob = P.extended_rosenbrock(6)
    rng = np.random.default_rng(5)
    for _ in range(20):
        assert fd_gradient_check(prob, rng.uniform(-2, 2, 6)) <= 1e-6


def test_diagonal_quadratic():
    one = P.diagonal_quadratic([1.0])
    assert one.value_at([1.0]) == -0.5 and one.minimizer.tolist() == [1.0]
    two = P.diagonal_quadratic([1.0, 2.0])
    assert two.gradient_at([0.0, 0.0]).tolist() == [-1.0, -2.0]
    assert P.diagonal_quadratic([1.0, 10.0]).spectral_bounds.kappa == 10.0
    for bad in ([], [1.0, 0.0], [-1.0], [np.nan]):
        with pytest.raises(ValueError):
            P.diagonal_quadratic(bad)


def test_minimizers_are_stationary():
    for prob in (P.counterexample(4), P.raydan(10), P.extended_rosenbrock(4), P.diagonal_quadratic([1.0, 5.0])):
        x = prob.minimizer
        assert np.linalg.norm(prob.gradient_at(x)) <= 1e-12 * max(1.0, np.linalg.norm(x))


def test_random_diagonal_includes_endpoints():
    prob = P.random_diagonal_quadratic(20, 1.0, 100.0, seed=4)
    assert prob.spectral_bounds.lambda_lo == 1.0 and prob.spectral_bounds.lambda_hi == 100.0


def test_from_selector():
    assert P.from_selector("raydan:n=5").dimension == 5
    assert P.from_selector("counterexample").dimension == 1
    assert P.from_selector("srosenbr:n=4").name == "rosenbrock:n=4"
    assert P.from_selector("diag:n=3").spectral_bounds.lambda_hi == 3.0
    assert P.from_selector("randdiag:n=8,lo=2,hi=9,seed=1").spectral_bounds.kappa == 4.5
    with pytest.raises(ValueError):
        P.from_selector("cute:n=3")
    with pytest.raises(ValueError):
        P.from_selector("raydan:5")
