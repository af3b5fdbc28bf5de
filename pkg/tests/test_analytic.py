import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate, special

from compbf.analytic import (ClusterConfig, SirCcdfCurve, alzer_bounds, alzer_kappa,
                             analytic_curve, ccdf_conditional_bounds, ccdf_conditional_exact,
                             ccdf_marginal_approx, ccdf_marginal_bounds, ccdf_marginal_upper,
                             ccdf_theorem1, delta1_cdf, delta1_mean, delta1_pdf,
                             low_sir_expansion, low_sir_slope)
from compbf.errors import DomainError, UnsupportedOrderError

GAMMA = np.logspace(-3, 3, 25)


def test_config_validation():
    with pytest.raises(DomainError):
        ClusterConfig(3, 2)
    with pytest.raises(DomainError, match="beta > 2"):
        ClusterConfig(1, 1, beta=2.0)
    with pytest.raises(DomainError):
        ClusterConfig(2, 2, delta1=1.5)
    with pytest.raises(DomainError):
        ClusterConfig(2, 2, c=3.0)
    assert ClusterConfig(1, 2, delta1=0.3).delta1 == 1.0
    assert ClusterConfig(4, 4, c=1.0).delta1 == pytest.approx(0.5)
    assert ClusterConfig(2, 4).order == 3


def test_alzer_kappa_values():
    assert alzer_kappa(1) == 1.0
    assert alzer_kappa(2) == pytest.approx(2 ** -0.5, rel=1e-14)
    assert alzer_kappa(3) == pytest.approx(6 ** (-1 / 3), rel=1e-14)
    assert alzer_kappa(3) == pytest.approx(0.55032, abs=1e-5)


@pytest.mark.parametrize("M", [1, 2, 3])
def test_alzer_sandwich(M):
    x = np.logspace(-3, 2, 100)
    lo, hi = alzer_bounds(M, x)
    p = special.gammainc(M, x)
    assert np.all(lo <= p + 1e-15) and np.all(p <= hi + 1e-15)


def test_conditional_bounds_at_zero():
    lo, up = ccdf_conditional_bounds(ClusterConfig(2, 4, delta1=0.5), 0.0)
    assert lo == pytest.approx(1.0) and up == pytest.approx(1.0)
    with pytest.raises(DomainError):
        ccdf_conditional_bounds(ClusterConfig(2, 4, delta1=0.5), -1.0)


@settings(max_examples=30)
@given(st.integers(1, 4), st.integers(0, 3), st.floats(0.05, 1.0), st.floats(2.5, 5.0))
def test_bounds_ordered_and_monotone(K, extra, d, beta):
    cfg = ClusterConfig(K, K + extra, beta, delta1=d)
    lo, up = ccdf_conditional_bounds(cfg, GAMMA)
    assert np.all(lo <= up + 1e-12)
    assert np.all((lo >= 0) & (up <= 1))
    assert np.all(np.diff(lo) <= 1e-12) and np.all(np.diff(up) <= 1e-12)


@given(st.integers(1, 6), st.floats(0.05, 1.0), st.floats(2.5, 5.0))
def test_bounds_coincide_with_exact_when_k_equals_nt(K, d, beta):
    cfg = ClusterConfig(K, K, beta, delta1=d)
    lo, up = ccdf_conditional_bounds(cfg, GAMMA)
    ex = ccdf_conditional_exact(cfg, GAMMA)
    np.testing.assert_allclose(lo, ex, atol=1e-12)
    np.testing.assert_allclose(up, ex, atol=1e-12)


def test_exact_single_antenna_value():
    v = ccdf_conditional_exact(ClusterConfig(1, 1, 4.0), 1.0)
    assert v == pytest.approx(1 / (1 + math.pi / 4), rel=1e-14)
    assert v == pytest.approx(0.56010, abs=1e-5)
    assert ccdf_conditional_exact(ClusterConfig(2, 2, 4.0, delta1=0.5), 0.0) == 1.0
    with pytest.raises(DomainError):
        ccdf_conditional_exact(ClusterConfig(2, 3, delta1=0.5), 1.0)


def test_exact_beta4_closed_form():
    d, K = 0.5, 2
    g = GAMMA
    t = np.sqrt(g) * d * d
    ref = 1 / (1 + t * np.arctan2(1, 1 / t)) ** K
    np.testing.assert_allclose(ccdf_conditional_exact(ClusterConfig(K, K, 4.0, delta1=d), g), ref,
                               rtol=1e-13)


@given(st.integers(1, 5), st.floats(0.01, 100.0), st.floats(0.05, 0.95), st.floats(1.01, 1.5))
def test_exact_nonincreasing_in_delta1(K, g, d, f):
    a = ccdf_conditional_exact(ClusterConfig(K, K, 4.0, delta1=d), g)
    b = ccdf_conditional_exact(ClusterConfig(K, K, 4.0, delta1=min(1.0, d * f)), g)
    assert b <= a + 1e-15


def test_series_ccdf_reduces_to_exact():
    cfg = ClusterConfig(2, 2, 4.0, delta1=0.6)
    g = np.array([0.1, 1.0, 10.0])
    np.testing.assert_allclose(ccdf_theorem1(cfg, g), ccdf_conditional_exact(cfg, g), atol=1e-6)


@pytest.mark.parametrize("K,nt,d", [(1, 2, 1.0), (2, 4, 0.5), (1, 4, 1.0), (3, 5, 0.7)])
def test_series_ccdf_inside_bounds(K, nt, d):
    cfg = ClusterConfig(K, nt, 4.0, delta1=d)
    g = np.array([0.05, 0.5, 1.0, 5.0, 50.0])
    lo, up = ccdf_conditional_bounds(cfg, g)
    ex = ccdf_theorem1(cfg, g)
    assert np.all(lo - 1e-9 <= ex) and np.all(ex <= up + 1e-9)


def test_series_ccdf_lambda_invariant():
    cfg = ClusterConfig(2, 4, 4.0, delta1=0.5)
    g = np.array([0.1, 1.0, 10.0])
    np.testing.assert_allclose(ccdf_theorem1(cfg, g, lam=0.5), ccdf_theorem1(cfg, g, lam=2.0), atol=1e-4)


def test_series_ccdf_order_limit():
    with pytest.raises(UnsupportedOrderError):
        ccdf_theorem1(ClusterConfig(1, 5, delta1=1.0), 1.0)


def test_series_ccdf_matches_single_antenna_rayleigh_integral():
    # K = 1, nt = 2: H1 ~ Gamma(2); P[SIR > g | r] = L(s) - s L'(s) at s = g r^beta.
    # Independent oracle: integrate over r with finite-difference derivatives of the
    # closed-form Laplace transform at beta = 4.
    g = 2.0

    def laplace(s, x):
        r2 = x / math.pi
        return math.exp(-x * math.sqrt(s / r2 ** 2) * math.atan(math.sqrt(s / r2 ** 2)))

    def cond(x):
        s = g * (x / math.pi) ** 2
        h = 1e-5 * s
        deriv = (laplace(s + h, x) - laplace(s - h, x)) / (2 * h)
        return (laplace(s, x) - s * deriv) * math.exp(-x)

    ref, _ = integrate.quad(cond, 0, 60, limit=200)
    assert ccdf_theorem1(ClusterConfig(1, 2, 4.0), g) == pytest.approx(ref, abs=1e-6)


def test_delta1_distribution():
    assert delta1_pdf(2, 0.3) == pytest.approx(0.6)
    for K in range(2, 11):
        total, _ = integrate.quad(lambda x: delta1_pdf(K, x), 0, 1)
        assert total == pytest.approx(1.0, abs=1e-12)
        xs = np.linspace(0.05, 0.95, 7)
        for x in xs:
            c, _ = integrate.quad(lambda t: delta1_pdf(K, t), 0, x)
            assert delta1_cdf(K, x) == pytest.approx(c, abs=1e-12)
    with pytest.raises(DomainError):
        delta1_pdf(2, 1.2)
    with pytest.raises(DomainError):
        delta1_pdf(1, 0.5)


def test_delta1_mean():
    assert delta1_mean(1) == pytest.approx(1.0)
    assert delta1_mean(2) == pytest.approx(2 / 3, rel=1e-14)
    m, _ = integrate.quad(lambda x: x * delta1_pdf(5, x), 0, 1)
    assert delta1_mean(5) == pytest.approx(m, rel=1e-12)
    # the mean decays like (sqrt(pi)/2)/sqrt(K), about 11% below 1/sqrt(K)
    assert delta1_mean(100) * 10 == pytest.approx(math.sqrt(math.pi) / 2, rel=0.01)
    m, _ = integrate.quad(lambda x: x * delta1_pdf(100, x), 0, 1, points=[0.1])
    assert delta1_mean(100) == pytest.approx(m, rel=1e-10)
    assert delta1_mean(100, approximate=True) == pytest.approx(0.1)


def test_marginal_bounds_basic():
    lo, up = ccdf_marginal_bounds(ClusterConfig(2, 4), 0.0)
    assert lo == pytest.approx(1.0) and up == pytest.approx(1.0)
    g = np.array([0.1, 1.0, 10.0])
    lo, up = ccdf_marginal_bounds(ClusterConfig(3, 3), g)
    np.testing.assert_allclose(lo, up, atol=1e-8)
    lo, up = ccdf_marginal_bounds(ClusterConfig(2, 4), g)
    assert np.all(lo <= up)
    np.testing.assert_allclose(ccdf_marginal_upper(ClusterConfig(2, 4), g), up, rtol=1e-12)


def test_marginal_bound_matches_double_integral_oracle():
    # independent route: average the exact conditional CCDF by a 2-D quadrature in (r1, rK)
    # using the joint Gamma arrival law of pi lam r^2
    K, g = 2, 1.0

    def inner(x1, xk):
        return ccdf_conditional_exact(ClusterConfig(K, K, 4.0, delta1=math.sqrt(x1 / xk)), g) * math.exp(-xk)

    ref, _ = integrate.dblquad(lambda x1, xk: inner(x1, xk), 0, 80, 0, lambda xk: xk)
    assert ccdf_marginal_bounds(ClusterConfig(K, K), g)[1] == pytest.approx(ref, abs=1e-7)


def test_approximation_anchors():
    g = GAMMA
    np.testing.assert_allclose(ccdf_marginal_approx(ClusterConfig(1, 1), g)[1],
                               ccdf_conditional_exact(ClusterConfig(1, 1), g), rtol=1e-13)
    lo, up = ccdf_marginal_approx(ClusterConfig(3, 3), 0.0)
    assert lo == 1.0 and up == 1.0
    K = 4
    ref = 1 / (1 + np.sqrt(g / K) * np.arctan2(1, np.sqrt(K / g)))
    np.testing.assert_allclose(ccdf_marginal_approx(ClusterConfig(K, K), g)[1], ref, rtol=1e-13)


@given(st.integers(1, 9), st.floats(1e-3, 1e3))
def test_approximation_nondecreasing_in_k(K, g):
    a = ccdf_marginal_approx(ClusterConfig(K, K), g)[1]
    b = ccdf_marginal_approx(ClusterConfig(K + 1, K + 1), g)[1]
    assert b >= a - 1e-15


def test_approximation_general_beta_and_nt():
    lo, up = ccdf_marginal_approx(ClusterConfig(2, 4, 3.5), GAMMA)
    assert np.all(lo <= up + 1e-12) and np.all(np.diff(up) <= 1e-12)


def test_low_sir_expansion_slopes():
    assert low_sir_slope(2, 4.0) == pytest.approx(1 / 3, rel=1e-14)
    assert low_sir_slope(3, 4.0) == pytest.approx(1 / 4, rel=1e-14)
    for K in range(1, 8):
        assert low_sir_slope(K, 4.0) == pytest.approx(1 / (K + 1), rel=1e-13)
    assert low_sir_expansion(2, 4.0, 0.03) == pytest.approx(1 - 0.01)


@pytest.mark.parametrize("K", [2, 3, 4])
def test_low_sir_behaviour_of_ccdf_forms(K):
    # Measured small-gamma slopes: the closed-form approximation loses 1/K per unit gamma,
    # the exact marginal CCDF loses 2/(K+1); neither equals the 1/(K+1) expansion slope.
    g = 1e-5
    cfg = ClusterConfig(K, K)
    approx_slope = (1 - ccdf_marginal_approx(cfg, g)[1]) / g
    exact_slope = (1 - ccdf_marginal_bounds(cfg, g)[1]) / g
    assert approx_slope == pytest.approx(1 / K, rel=2e-2)
    assert exact_slope == pytest.approx(2 / (K + 1), rel=2e-2)


def test_analytic_curve_kinds():
    g = np.array([0.1, 1.0])
    c = analytic_curve(ClusterConfig(2, 2, delta1=0.5), g, "exact")
    assert isinstance(c, SirCcdfCurve) and c.kind == "exact"
    np.testing.assert_allclose(c.gamma_db, [-10.0, 0.0])
    c1 = analytic_curve(ClusterConfig(1, 2), g, "exact")
    lo, up = ccdf_conditional_bounds(ClusterConfig(1, 2), g)
    assert np.all(lo - 1e-9 <= c1.values) and np.all(c1.values <= up + 1e-9)
    with pytest.raises(DomainError):
        analytic_curve(ClusterConfig(2, 3), g, "exact")
    with pytest.raises(ValueError):
        SirCcdfCurve(g, g, "bogus")
