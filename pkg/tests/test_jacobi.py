import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from numpy.polynomial import Polynomial

from ballspectral.jacobi import (
    JacobiParams,
    QuadratureError,
    eval_jacobi,
    eval_jacobi_deriv,
    gauss_jacobi_rule,
    jacobi_norm,
    jacobi_total_mass,
)

LEGENDRE = JacobiParams(0.0, 0.0)
HALF = JacobiParams(0.0, 0.5)


def test_degree_zero_is_one():
    assert eval_jacobi(0, JacobiParams(2.5, 0.25), 0.3) == 1.0


def test_degree_one_at_origin():
    assert eval_jacobi(1, HALF, 0.0) == pytest.approx(-0.25, abs=1e-15)


def test_legendre_p2_at_origin():
    assert eval_jacobi(2, LEGENDRE, 0.0) == pytest.approx(-0.5, abs=1e-15)


def test_vectorised_matches_scalar():
    t = np.linspace(-1, 1, 11)
    vec = eval_jacobi(5, JacobiParams(1.0, 2.5), t)
    assert vec.shape == t.shape
    for ti, vi in zip(t, vec):
        assert eval_jacobi(5, JacobiParams(1.0, 2.5), float(ti)) == pytest.approx(vi, rel=1e-15, abs=1e-15)


@pytest.mark.parametrize("bad", [(-1.0, 0.0), (0.0, -1.5), (float("nan"), 0.0)])
def test_params_rejected(bad):
    with pytest.raises(ValueError):
        JacobiParams(*bad)


def test_domain_error_and_clamp():
    with pytest.raises(ValueError):
        eval_jacobi(3, LEGENDRE, 1.0 + 1e-9)
    assert eval_jacobi(3, LEGENDRE, 1.0 + 1e-15, clamp=True) == pytest.approx(1.0)


@pytest.mark.parametrize(
    "n, params, expected",
    [(0, LEGENDRE, 2.0), (1, LEGENDRE, 2.0 / 3.0), (0, HALF, 4.0 * math.sqrt(2.0) / 3.0)],
)
def test_norm_examples(n, params, expected):
    assert jacobi_norm(n, params) == pytest.approx(expected, rel=1e-14)


def test_norm_large_degree_finite():
    h = jacobi_norm(300, JacobiParams(0.0, 150.5))
    assert math.isfinite(h) and h > 0


def test_derivative_examples():
    assert eval_jacobi_deriv(0, HALF, 0.4) == 0.0
    assert eval_jacobi_deriv(1, LEGENDRE, 0.7) == pytest.approx(1.0)
    assert eval_jacobi_deriv(2, LEGENDRE, 0.5) == pytest.approx(1.5)
    fd = (eval_jacobi(2, LEGENDRE, 0.5 + 1e-6) - eval_jacobi(2, LEGENDRE, 0.5 - 1e-6)) / 2e-6
    assert fd == pytest.approx(1.5, rel=1e-8)


@pytest.mark.parametrize("params", [LEGENDRE, HALF, JacobiParams(1.0, 1.0), JacobiParams(0.0, 6.5)])
def test_derivative_matches_finite_differences(params):
    rng = np.random.default_rng(7)
    t = rng.uniform(-0.95, 0.95, 20)
    h = 1e-6
    for n in range(1, 9):
        fd = (eval_jacobi(n, params, t + h) - eval_jacobi(n, params, t - h)) / (2 * h)
        exact = eval_jacobi_deriv(n, params, t)
        scale = np.max(np.abs(exact))
        assert np.max(np.abs(fd - exact)) <= 1e-6 * scale


@pytest.mark.parametrize("params", [LEGENDRE, HALF, JacobiParams(1.0, 1.0), JacobiParams(0.5, 3.5)])
def test_sturm_liouville_residual(params):
    a, b = params.alpha, params.beta
    nodes = np.cos(np.pi * (np.arange(32) + 0.5) / 32)
    t = np.linspace(-0.9, 0.9, 20)
    for n in range(11):
        p = Polynomial.fit(nodes, eval_jacobi(n, params, nodes), n, domain=[-1, 1], window=[-1, 1])
        d1, d2 = p.deriv(), p.deriv(2)
        # The weight w^{a,b} factors out of -d/dt(w^{a+1,b+1} P').
        lhs = -((1 - t * t) * d2(t) + ((b - a) - (a + b + 2) * t) * d1(t))
        rhs = n * (n + a + b + 1) * p(t)
        scale = max(1.0, np.max(np.abs(rhs)))
        assert np.max(np.abs(lhs - rhs)) <= 1e-10 * scale * max(1, n * n)


@pytest.mark.parametrize("params", [LEGENDRE, HALF, JacobiParams(2.0, 0.5), JacobiParams(0.0, 4.5)])
def test_endpoint_value(params):
    for n in range(25):
        expected = math.exp(math.lgamma(n + params.alpha + 1) - math.lgamma(n + 1) - math.lgamma(params.alpha + 1))
        assert eval_jacobi(n, params, 1.0) == pytest.approx(expected, rel=1e-13)


ORTHO_PARAMS = [LEGENDRE, HALF, JacobiParams(1.0, 1.0)] + [JacobiParams(0.0, n + 0.5) for n in range(7)]


@pytest.mark.parametrize("params", ORTHO_PARAMS, ids=lambda p: f"{p.alpha}-{p.beta}")
@pytest.mark.parametrize("m", [1, 2, 5, 17, 40])
def test_discrete_orthogonality(params, m):
    rule = gauss_jacobi_rule(m, params)
    V = np.array([eval_jacobi(i, params, rule.nodes) for i in range(m)])
    G = (V * rule.weights) @ V.T
    h = np.array([jacobi_norm(i, params) for i in range(m)])
    tol = 1e-12 * np.maximum.outer(h, h)
    assert np.all(np.abs(G - np.diag(h)) <= tol)


def test_rule_examples():
    one = gauss_jacobi_rule(1, HALF)
    assert one.nodes[0] == pytest.approx(0.2, abs=1e-15)
    assert one.weights[0] == pytest.approx(4 * math.sqrt(2) / 3, rel=1e-14)
    two = gauss_jacobi_rule(2, LEGENDRE)
    assert two.integrate(two.nodes**2) == pytest.approx(2.0 / 3.0, rel=1e-15)
    for m in (1, 3, 10, 64):
        assert np.sum(gauss_jacobi_rule(m, LEGENDRE).weights) == pytest.approx(2.0, rel=1e-14)


@settings(max_examples=30, deadline=None)
@given(
    m=st.integers(1, 60),
    a=st.floats(-0.9, 8.0),
    b=st.floats(-0.9, 8.0),
)
def test_rule_structure(m, a, b):
    params = JacobiParams(a, b)
    rule = gauss_jacobi_rule(m, params)
    assert len(rule) == m
    assert np.all(np.diff(rule.nodes) > 0)
    assert np.all(rule.weights > 0)
    assert np.all(np.abs(rule.nodes) < 1)
    assert np.sum(rule.weights) == pytest.approx(jacobi_total_mass(params), rel=1e-13)
    # nodes are zeros of P_m
    scale = np.max(np.abs(eval_jacobi(m, params, np.linspace(-1, 1, 201))))
    assert np.max(np.abs(eval_jacobi(m, params, rule.nodes))) <= 1e-11 * scale


def test_rule_exactness_degree():
    params = JacobiParams(0.0, 2.5)
    m = 9
    rule = gauss_jacobi_rule(m, params)
    # P_i P_j with i + j = 2m - 1 is integrated exactly (zero by orthogonality)
    vals = eval_jacobi(m - 1, params, rule.nodes) * eval_jacobi(m, params, rule.nodes)
    assert abs(rule.integrate(vals)) < 1e-13


def test_rule_rejects_nonpositive_size():
    with pytest.raises(ValueError):
        gauss_jacobi_rule(0, LEGENDRE)


def test_rule_arrays_are_read_only():
    rule = gauss_jacobi_rule(4, LEGENDRE)
    with pytest.raises(ValueError):
        rule.nodes[0] = 0.0


def test_quadrature_error_is_runtime_error():
    assert issubclass(QuadratureError, RuntimeError)
