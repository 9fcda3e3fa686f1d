import mpmath
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from equihybrid import BifunctionOracle, CapabilityError, FeasibleSet
from equihybrid.core import InnerBudget
from equihybrid.prox import extragradient_pair, prox_step, vi_bifunction, vi_prox

from builders import paper_1d, vertex_vi_family

UNIT = FeasibleSet.box([0.0], [1.0])
PLANE = FeasibleSet.whole_space(2)


def zero_bifunction(dim):
    return BifunctionOracle(dim, lambda x, y: 0.0, 0.0, 0.0, subgrad2=lambda x, y: np.zeros(dim))


def test_paper_closed_form_against_high_precision():
    mpmath.mp.dps = 40
    expected = float(1 - mpmath.mpf("0.2") * (mpmath.e ** mpmath.mpf("0.5") + mpmath.sin(mpmath.mpf("0.5")) - 1))
    f = paper_1d(1, 0).bifunctions[0]
    r = prox_step(f, np.array([1.0]), 0.2, UNIT)
    assert r.inner_iters == 0 and r.optimality_residual == 0.0
    assert abs(r.y[0] - expected) <= 1e-15
    assert expected == 0.7743706381391338


def test_zero_bifunction_is_identity():
    x = np.array([0.3, -4.0])
    r = prox_step(zero_bifunction(2), x, 0.7, PLANE)
    assert np.array_equal(r.y, x)
    y, z = extragradient_pair(zero_bifunction(2), x, 0.7, PLANE)
    assert np.array_equal(y, x) and np.array_equal(z, x)


def test_missing_capability():
    f = BifunctionOracle(1, lambda x, y: 0.0, 0.0, 0.0, subgrad2=lambda x, y: np.zeros(1))
    object.__setattr__(f, "subgrad2", None)
    with pytest.raises(CapabilityError):
        prox_step(f, np.array([0.5]), 0.1, UNIT)
    with pytest.raises(ValueError):
        prox_step(zero_bifunction(1), np.array([0.5]), 0.0, UNIT)


def test_vi_prox_examples():
    assert vi_prox(lambda x: x, np.array([2.0, 2.0]), 0.5, PLANE).tolist() == [1.0, 1.0]
    x = np.array([0.25, -0.5])
    assert np.array_equal(vi_prox(lambda v: np.zeros(2), x, 3.0, FeasibleSet.box([-1, -1], [1, 1])), x)


def test_vi_prox_affine_on_box_by_clamping():
    M = np.array([[2.0, 1.0], [-1.0, 1.0]])
    q = np.array([0.5, -3.0])
    x = np.array([0.9, -0.4])
    rho = 0.4
    raw = [x[k] - rho * (M[k, 0] * x[0] + M[k, 1] * x[1] + q[k]) for k in range(2)]
    expected = [min(1.0, max(-1.0, v)) for v in raw]
    got = vi_prox(lambda v: M @ v + q, x, rho, FeasibleSet.box([-1, -1], [1, 1]))
    assert np.allclose(got, expected, rtol=0, atol=1e-15)


def test_affine_pair_uses_x_as_anchor():
    M = np.array([[1.0, 2.0], [-2.0, 1.0]])
    A = lambda v: M @ v  # noqa: E731
    C = FeasibleSet.box([-1, -1], [1, 1])
    x = np.array([0.5, 0.25])
    y, z = extragradient_pair(vi_bifunction(A, 3.0, 2), x, 0.2, C)
    assert np.array_equal(y, C.project(x - 0.2 * A(x)))
    assert np.array_equal(z, C.project(x - 0.2 * A(y)))


def test_paper_pair_below_threshold_is_stationary():
    f = paper_1d(2, 0).bifunctions[1]  # xi = 2/3
    y, z = extragradient_pair(f, np.array([0.5]), 0.2, UNIT)
    assert y[0] == z[0] == 0.5


def _quadratic_test_bifunction(A, q, h):
    # f(x, y) = <Ax + q, y - x> + h/2 ||y - x||^2
    return BifunctionOracle(
        2, lambda x, y: float((A @ x + q) @ (y - x) + 0.5 * h * (y - x) @ (y - x)), 0.0, 0.0,
        subgrad2=lambda x, y: A @ x + q + h * (y - x))


@pytest.mark.parametrize("rho", [0.1, 0.5, 3.0])
@pytest.mark.parametrize("x", [(0.3, -0.2), (0.9, -0.9), (-1.0, 1.0)])
def test_generic_inner_solver_matches_analytic_minimiser(rho, x):
    A = np.array([[2.0, 1.0], [0.0, 1.0]])
    q = np.array([0.5, -1.0])
    h = 1.0
    C = FeasibleSet.box([-1, -1], [1, 1])
    x = np.array(x)
    # the Hessian of the subproblem is (1 + rho h) I, so the box projection is exact
    analytic = np.clip(x - rho * (A @ x + q) / (1 + rho * h), -1, 1)
    r = prox_step(_quadratic_test_bifunction(A, q, h), x, rho, C)
    assert r.converged and r.inner_iters > 0
    assert np.max(np.abs(r.y - analytic)) <= 1e-8


def test_generic_inner_solver_agrees_with_closed_form_on_paper_family():
    closed = paper_1d(3, 0).bifunctions[0]
    generic = BifunctionOracle(1, closed.eval, 2.0, 2.0, subgrad2=closed.subgrad2)
    for x in (0.1, 0.4, 0.8, 1.0):
        a = prox_step(closed, np.array([x]), 0.2, UNIT).y
        b = prox_step(generic, np.array([x]), 0.2, UNIT)
        assert b.converged
        assert abs(a[0] - b.y[0]) <= 1e-8


def test_generic_inner_solver_flags_exhausted_budget():
    f = BifunctionOracle(1, lambda x, y: abs(y[0]) - abs(x[0]), 0.0, 0.0, subgrad2=lambda x, y: np.sign(y))
    r = prox_step(f, np.array([0.2]), 0.5, FeasibleSet.whole_space(1), InnerBudget(200, 1e-12))
    assert not r.converged and r.inner_iters == 200
    assert abs(r.y[0]) <= 1e-3  # soft threshold of 0.2 by 0.5 is 0


unit_points = st.floats(0.0, 1.0, allow_nan=False)


@settings(max_examples=200, deadline=None)
@given(x=unit_points, i=st.integers(0, 9), rho=st.floats(0.01, 0.2499))
def test_contraction_inequality_paper_family(x, i, rho):
    f = paper_1d(10, 0).bifunctions[i]
    xv = np.array([x])
    y, z = extragradient_pair(f, xv, rho, UNIT)
    xs = 0.0  # solves every f_i
    lhs = (z[0] - xs) ** 2
    rhs = (x - xs) ** 2 - (1 - 4 * rho) * (y[0] - x) ** 2 - (1 - 4 * rho) * (y[0] - z[0]) ** 2
    assert lhs <= rhs + 1e-14


@settings(max_examples=100, deadline=None)
@given(pt=st.lists(st.floats(-1, 1), min_size=3, max_size=3), k=st.integers(0, 2), frac=st.floats(0.05, 0.99))
def test_contraction_inequality_vertex_family(pt, k, frac):
    fam = vertex_vi_family()
    rho = frac / fam.lipschitz
    c = fam.lipschitz / 2
    f = vi_bifunction(fam.fields[k], fam.lipschitz, 3)
    x = np.array(pt)
    y, z = extragradient_pair(f, x, rho, fam.C)
    xs = fam.known_solution
    lhs = float((z - xs) @ (z - xs))
    rhs = float((x - xs) @ (x - xs)) - (1 - 2 * rho * c) * float((y - x) @ (y - x)) \
        - (1 - 2 * rho * c) * float((y - z) @ (y - z))
    assert lhs <= rhs + 1e-12


@settings(max_examples=100, deadline=None)
@given(x=unit_points, i=st.integers(0, 4), samples=st.lists(unit_points, min_size=1, max_size=10))
def test_prox_variational_inequality(x, i, samples):
    # optimality of y* for rho f(x, .) + 0.5 ||x - .||^2 over C:
    # rho (f(x, y) - f(x, y*)) >= <x - y*, y - y*> for every y in C
    rho = 0.2
    f = paper_1d(5, 0).bifunctions[i]
    xv = np.array([x])
    ys = prox_step(f, xv, rho, UNIT).y
    for s in samples:
        y = np.array([s])
        lhs = rho * (f.eval(xv, y) - f.eval(xv, ys))
        rhs = float((xv - ys) @ (y - ys))
        assert lhs >= rhs - 1e-14


def test_prox_inequality_with_reversed_sign_fails():
    # the variant with <y* - x, y - y*> on the right does not hold in general
    f = paper_1d(5, 0).bifunctions[0]
    x, y = np.array([1.0]), np.array([0.0])
    ys = prox_step(f, x, 0.2, UNIT).y
    lhs = 0.2 * (f.eval(x, y) - f.eval(x, ys))
    assert lhs < float((ys - x) @ (y - ys))
    assert lhs >= float((x - ys) @ (y - ys)) - 1e-15


@settings(max_examples=50, deadline=None)
@given(pt=st.lists(st.floats(-1, 1), min_size=2, max_size=2), rho=st.floats(0.05, 2.0),
       samples=st.lists(st.lists(st.floats(-1, 1), min_size=2, max_size=2), min_size=1, max_size=5))
def test_generic_prox_variational_inequality(pt, rho, samples):
    A = np.array([[2.0, 1.0], [0.0, 1.0]])
    q = np.array([0.5, -1.0])
    f = _quadratic_test_bifunction(A, q, 1.0)
    C = FeasibleSet.box([-1, -1], [1, 1])
    x = np.array(pt)
    r = prox_step(f, x, rho, C)
    assert r.converged
    for s in samples:
        y = np.array(s)
        lhs = rho * (f.eval(x, y) - f.eval(x, r.y))
        assert lhs >= float((x - r.y) @ (y - r.y)) - 1e-8
