"""Benchmark problem: stable exact-solution evaluators and coefficients.

Frozen reference values come from a 50-digit mpmath evaluation of the naive
closed forms at the exact float64 inputs used here.
"""
import math
import pickle

import numpy as np
import pytest
from hypothesis import given, strategies as st

from layerfem.problems import (ExactSolution, bench_convection,
                               bench_convection_dx, bench_reaction,
                               benchmark_problem, exact_grad, exact_u,
                               layer_factors, rhs_f)

X_LAYER = float(np.float64(1.0) - np.float64(1e-6))  # omx = 1e-6, t = 1


def test_frozen_interior_values():
    # (0.5, 0.5), eps = 1e-6: layer factors fully decayed
    assert exact_u(0.5, 0.5, 1e-6) == pytest.approx(
        0.70710678118654752, rel=1e-14)
    ux, uy = exact_grad(0.5, 0.5, 1e-6)
    assert ux == pytest.approx(1.1107207345395916, rel=1e-14)
    assert uy == 0.0
    assert rhs_f(0.5, 0.5, 1e-6) == pytest.approx(
        2.7267430183052585, rel=1e-13)
    # same point, eps = 1e-8: only the -eps*u_xx contribution moves
    assert rhs_f(0.5, 0.5, 1e-8) == pytest.approx(
        2.7267412910363691, rel=1e-13)


def test_frozen_x_layer_values():
    u = exact_u(X_LAYER, 0.5, 1e-6, omx=1e-6)
    assert u == pytest.approx(0.63212055882732398, rel=1e-13)
    ux, _ = exact_grad(X_LAYER, 0.5, 1e-6, omx=1e-6)
    assert ux == pytest.approx(-367879.44116897494, rel=1e-13)
    assert rhs_f(X_LAYER, 0.5, 1e-6, omx=1e-6) == pytest.approx(
        0.58030633187421159, rel=1e-13)


def test_frozen_y_layer_values():
    assert exact_u(0.5, 0.001, 1e-6) == pytest.approx(
        0.44697673367510309, rel=1e-13)
    ux, uy = exact_grad(0.5, 0.001, 1e-6)
    assert ux == pytest.approx(0.7021094114196327, rel=1e-13)
    assert uy == pytest.approx(260.13004751144444, rel=1e-13)
    assert rhs_f(0.5, 0.001, 1e-6) == pytest.approx(
        1.9837603680244326, rel=1e-13)


def test_frozen_corner_values():
    assert exact_u(X_LAYER, 0.001, 1e-6, omx=1e-6) == pytest.approx(
        0.39957640089294821, rel=1e-13)
    assert rhs_f(X_LAYER, 0.001, 1e-6, omx=1e-6) == pytest.approx(
        0.59936772073045286, rel=1e-13)


def test_layer_factors():
    fac = layer_factors(X_LAYER, 0.5, 1e-6, omx=1e-6)
    # (e^-1 - e^-1/eps) / (1 - e^-1/eps) at t = 1
    assert fac.x_layer == pytest.approx(0.36787944117144232, rel=1e-14)
    assert fac.smooth == pytest.approx(math.cos(math.pi * 1e-6 / 2), rel=1e-15)
    fac0 = layer_factors(1.0, 0.5, 1e-6, omx=0.0)
    assert fac0.x_layer == 1.0
    assert fac0.smooth == 1.0


def test_homogeneous_boundary():
    eps = 1e-6
    ys = np.linspace(0.0, 1.0, 7)
    # outflow edge x=1 and both characteristic edges are exact zeros
    assert np.all(exact_u(1.0, ys, eps, omx=0.0) == 0.0)
    xs = np.linspace(0.0, 1.0, 7)
    assert np.all(exact_u(xs, 0.0, eps) == 0.0)
    assert np.all(exact_u(xs, 1.0, eps, omy=0.0) == 0.0)
    # inflow edge x=0 cancels to roundoff
    assert np.max(np.abs(exact_u(0.0, ys, eps))) < 1e-15


def _naive_u(x, y, eps):
    X = (math.sin(math.pi * x / 2)
         - (math.exp(-(1 - x) / eps) - math.exp(-1 / eps))
         / (1 - math.exp(-1 / eps)))
    se = math.sqrt(eps)
    Y = ((1 - math.exp(-y / se)) * (1 - math.exp(-(1 - y) / se))
         / (1 - math.exp(-1 / se)))
    return X * Y


@given(st.floats(0.0, 1.0), st.floats(0.0, 1.0))
def test_matches_naive_formula_at_moderate_eps(x, y):
    # at eps = 1e-2 the naive formula is itself accurate
    eps = 1e-2
    assert exact_u(x, y, eps) == pytest.approx(_naive_u(x, y, eps), abs=1e-12)


@pytest.mark.parametrize("eps", [1e-2, 1e-4, 1e-6])
def test_dX_matches_finite_difference(eps):
    sol = ExactSolution(eps)
    h = 1e-5
    for x in (0.2, 0.5, 0.8):
        fd = (sol.X(x + h) - sol.X(x - h)) / (2 * h)
        assert sol.dX(x) == pytest.approx(fd, rel=1e-6)


@pytest.mark.parametrize("eps", [1e-2, 1e-4, 1e-6])
def test_dY_matches_finite_difference(eps):
    sol = ExactSolution(eps)
    se = math.sqrt(eps)
    h = 1e-3 * se  # resolve the sqrt(eps)-wide layer
    # sample inside the layer; outside it the derivative decays to zero
    # and a difference quotient measures only cancellation noise
    for y in (0.3 * se, se, 3 * se):
        fd = (sol.Y(y + h) - sol.Y(y - h)) / (2 * h)
        assert sol.dY(y) == pytest.approx(fd, rel=1e-5)


@pytest.mark.parametrize("eps", [1e-2, 1e-4])
def test_second_derivatives_match_finite_difference(eps):
    sol = ExactSolution(eps)
    hx = 1e-4
    hy = 1e-3 * math.sqrt(eps)
    for p in (0.3, 0.6):
        fd = (sol.dX(p + hx) - sol.dX(p - hx)) / (2 * hx)
        assert sol.d2X(p) == pytest.approx(fd, rel=1e-5)
        fd = (sol.dY(p + hy) - sol.dY(p - hy)) / (2 * hy)
        assert sol.d2Y(p) == pytest.approx(fd, rel=1e-5)


def test_grouped_evaluators_match_their_parts():
    # conv_x = -eps X'' + (2-x) X'; neg_eps_d2Y = -eps Y''; both stay O(1)
    sol = ExactSolution(1e-4)
    xs = np.linspace(0.05, 0.95, 11)
    grouped = sol.conv_x(xs)
    parts = -1e-4 * sol.d2X(xs) + (2.0 - xs) * sol.dX(xs)
    np.testing.assert_allclose(grouped, parts, rtol=1e-9)
    ys = np.linspace(0.05, 0.95, 11)
    np.testing.assert_allclose(sol.neg_eps_d2Y(ys), -1e-4 * sol.d2Y(ys),
                               rtol=1e-12)
    assert np.max(np.abs(grouped)) < 3.5
    # the grouped x-layer contribution -t e^-t / D peaks at 1/e
    deep = ExactSolution(1e-12)
    assert abs(deep.conv_x(1.0, omx=1e-12)) < 3.5


def test_rhs_is_the_pde_applied_to_u():
    sol = ExactSolution(1e-3)
    xs, ys = np.meshgrid(np.linspace(0.1, 0.9, 5), np.linspace(0.1, 0.9, 5))
    lhs = (-1e-3 * (sol.d2X(xs) * sol.Y(ys) + sol.X(xs) * sol.d2Y(ys))
           + (2.0 - xs) * sol.dX(xs) * sol.Y(ys)
           + 1.5 * sol.X(xs) * sol.Y(ys))
    np.testing.assert_allclose(sol.rhs(xs, ys), lhs, rtol=1e-11)


def test_Y_is_symmetric():
    sol = ExactSolution(1e-8)
    ys = np.array([0.1, 0.25, 0.4])
    np.testing.assert_allclose(sol.Y(ys), sol.Y(1.0 - ys, omy=ys), rtol=1e-13)


def test_coefficients():
    assert bench_convection(0.25, 0.0) == pytest.approx(1.75)
    assert bench_convection(None, None, omx=0.75) == 1.75
    assert bench_convection_dx(0.3, 0.9) == -1.0
    assert bench_reaction(0.3, 0.9) == 1.5
    xs = np.linspace(0, 1, 5)
    assert bench_reaction(xs, xs).shape == xs.shape


def test_benchmark_problem_admissibility():
    p = benchmark_problem(1e-8)
    assert p.eps == 1e-8 and p.beta == 1.0 and p.mu0 == 2.0
    p.validate()  # b >= beta and c - b_x/2 >= mu0 hold for the benchmark
    assert benchmark_problem(1e-8, mu0=1.0).mu0 == 1.0
    # c - b_x/2 = 1.5 + 0.5 = 2 exactly; larger mu0 is inadmissible
    with pytest.raises(ValueError):
        benchmark_problem(1e-8, mu0=2.5)
    with pytest.raises(ValueError):
        benchmark_problem(1e-8, mu0=0.0)


def test_benchmark_problem_pickles():
    p = benchmark_problem(1e-10, mu0=1.0)
    q = pickle.loads(pickle.dumps(p))
    assert q.eps == p.eps and q.mu0 == p.mu0
    assert q.f(0.5, 0.5) == p.f(0.5, 0.5)
    assert q.exact.value(0.25, 0.75) == p.exact.value(0.25, 0.75)


def test_exact_solution_rejects_bad_eps():
    with pytest.raises(ValueError):
        ExactSolution(0.0)
    with pytest.raises(ValueError):
        ExactSolution(-1e-6)
