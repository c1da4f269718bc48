import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from _oracles import abs_normal_mean_split, payoff_rate_quad
from cpmm_vol import DomainError
from cpmm_vol.analytics import (
    coefficients,
    expected_payoff_rate,
    folded_abs_mean,
    norm_cdf,
    vega,
    vega_low_vol_limit,
)


def test_coefficients_example():
    c = coefficients(1.0, 0.5, 0.25)
    assert (c.a_coef, c.b_coef, c.alpha, c.beta) == (0.046875, 0.125, 0.1875, 0.25)
    assert c.lam == pytest.approx(4 / 3, rel=1e-15)


def test_coefficients_zero_vol_and_other_price():
    c = coefficients(1.0, 0.0, 0.25)
    assert c.a_coef == 0.0 and c.b_coef == 0.0
    c = coefficients(4.0, 1.0, 1.0)
    assert c.a_coef == 3 / 16 and c.b_coef == 0.5


@given(
    st.floats(1e-3, 1e3), st.floats(0.0, 10.0), st.floats(1e-4, 10.0)
)
def test_coefficient_invariants(p, s, dt):
    c = coefficients(p, s, dt)
    assert c.a_coef == c.alpha * s * s
    assert c.b_coef == c.beta * s
    assert abs(c.lam - c.beta / c.alpha) <= 1e-14 * c.lam


@pytest.mark.parametrize("p, s, dt", [(0.0, 1.0, 1.0), (1.0, 1.0, 0.0), (1.0, -1.0, 1.0)])
def test_coefficient_domain(p, s, dt):
    with pytest.raises(DomainError):
        coefficients(p, s, dt)


def test_folded_examples():
    assert folded_abs_mean(0.0, 1.0) == pytest.approx(math.sqrt(2 / math.pi), rel=1e-15)
    assert folded_abs_mean(2.0, 0.0) == 2.0
    # frozen from the split Gauss-Legendre oracle
    assert abs_normal_mean_split(1.0, 1.0) == pytest.approx(1.1666309411753726, rel=1e-13)
    assert folded_abs_mean(1.0, 1.0) == pytest.approx(1.1666309411753726, rel=1e-14)


def test_folded_domain():
    with pytest.raises(DomainError):
        folded_abs_mean(-1.0, 1.0)
    with pytest.raises(DomainError):
        folded_abs_mean(1.0, -1.0)


def test_folded_against_oracle_random():
    rng = np.random.default_rng(11)
    for a, b in rng.uniform(0, 5, size=(1000, 2)):
        ref = abs_normal_mean_split(a, b)
        assert abs(folded_abs_mean(a, b) - ref) <= 1e-10 * ref


def test_printed_identity_disagrees_with_oracle():
    # sqrt(pi) [2A phi(B/A) + 2B Phi(B/A) - B] is not E|A - B eps|
    a, b = 0.046875, 0.125
    pdf = math.exp(-0.5 * (b / a) ** 2) / math.sqrt(2 * math.pi)
    printed = math.sqrt(math.pi) * (2 * a * pdf + 2 * b * norm_cdf(b / a) - b)
    ref = abs_normal_mean_split(a, b)
    assert abs(printed - ref) / ref > 0.05
    assert folded_abs_mean(a, b) == pytest.approx(ref, rel=1e-12)


def test_norm_cdf_accuracy():
    from scipy.special import ndtr

    for x in np.linspace(-30, 8, 400):
        assert abs(norm_cdf(x) - ndtr(x)) <= 1e-15


def test_payoff_rate_zero_vol():
    for p, dt, g in [(1.0, 0.25, 1.0), (3.0, 1.0, 0.003)]:
        assert expected_payoff_rate(p, 0.0, dt, g) == 0.0


@pytest.mark.parametrize(
    "sigma, frozen, spec_approx",
    # frozen values from scipy quad of the first moment (payoff_rate_quad)
    [(0.5, 0.10666718909301, 0.106671), (0.2, 0.040342198476342, 0.040342)],
)
def test_payoff_rate_examples(sigma, frozen, spec_approx):
    ref = payoff_rate_quad(1.0, sigma, 0.25, 1.0)
    assert ref == pytest.approx(frozen, rel=1e-12)
    got = expected_payoff_rate(1.0, sigma, 0.25, 1.0)
    assert got == pytest.approx(ref, rel=1e-12)
    assert got == pytest.approx(spec_approx, abs=5e-6)


@pytest.mark.parametrize("p", [0.3, 1.0, 2.7])
@pytest.mark.parametrize("sigma", [0.05, 0.7, 2.5])
@pytest.mark.parametrize("dt", [0.01, 0.25, 1.0])
def test_payoff_rate_matches_quadrature(p, sigma, dt):
    assert expected_payoff_rate(p, sigma, dt, 0.003) == pytest.approx(
        payoff_rate_quad(p, sigma, dt, 0.003), rel=1e-11
    )


def test_payoff_rate_monotone_in_sigma():
    grid = np.linspace(0.0, 5.0, 501)[1:]
    for p, dt in [(1.0, 0.25), (0.5, 0.05), (2.0, 1.0)]:
        vals = [expected_payoff_rate(p, s, dt, 0.01) for s in grid]
        assert all(b > a for a, b in zip(vals, vals[1:]))


def test_payoff_rate_linear_in_gamma():
    for s in [0.1, 0.9, 3.0]:
        unit = 0.25 ** 0 * (1.0 ** -1.5) * folded_abs_mean(*_ab(1.0, s, 0.25))
        for g in [0.001, 0.003, 0.01]:
            assert expected_payoff_rate(1.0, s, 0.25, g) == g * unit


def _ab(p, s, dt):
    c = coefficients(p, s, dt)
    return c.a_coef, c.b_coef


def test_payoff_rate_gamma_domain():
    with pytest.raises(DomainError):
        expected_payoff_rate(1.0, 0.5, 0.25, 0.0)
    with pytest.raises(DomainError):
        expected_payoff_rate(1.0, 0.5, 0.25, 1.5)


def _fd(p, s, dt, g, h=1e-5):
    return (expected_payoff_rate(p, s + h, dt, g) - expected_payoff_rate(p, s - h, dt, g)) / (2 * h)


def test_vega_example():
    assert _fd(1.0, 0.5, 0.25, 1.0) == pytest.approx(0.240741209, rel=1e-8)
    assert vega(1.0, 0.5, 0.25, 1.0) == pytest.approx(0.240743, abs=5e-6)


def test_vega_low_vol_limit():
    limit = vega_low_vol_limit(1.3, 0.25, 0.003)
    assert limit == pytest.approx(0.003 * 1.3**-1.5 * 0.25 * math.sqrt(2 / math.pi), rel=1e-15)
    # forward-difference extrapolation towards sigma = 0
    fd = (expected_payoff_rate(1.3, 2e-4, 0.25, 0.003) - expected_payoff_rate(1.3, 1e-4, 0.25, 0.003)) / 1e-4
    assert fd == pytest.approx(limit, rel=1e-3)
    assert vega(1.3, 1e-4, 0.25, 0.003) == pytest.approx(limit, rel=1e-3)


def test_vega_quadratic_regime():
    c = coefficients(1.0, 5.0, 0.25)
    assert vega(1.0, 5.0, 0.25, 1.0) / 5.0 == pytest.approx(2 * c.alpha, rel=0.1)


def test_vega_domain():
    with pytest.raises(DomainError):
        vega(1.0, 0.0, 0.25, 1.0)


def test_vega_matches_finite_differences_grid():
    for s in np.linspace(0.05, 3.0, 60):
        for p in (0.5, 1.0, 2.0):
            for dt in (0.05, 0.25, 1.0):
                assert vega(p, s, dt, 1.0) == pytest.approx(_fd(p, s, dt, 1.0), rel=1e-6)


@pytest.mark.xfail(
    strict=True,
    reason="vega ~ limit * (1 + 1.5 (A/B)^2): it drifts 7.5% by sigma = 0.3 at dt = 0.25, "
    "so a 2% band only holds up to sigma ~ 0.15",
)
def test_near_linearity_of_vega():
    limit = vega_low_vol_limit(1.0, 0.25, 1.0)
    vegas = [vega(1.0, s, 0.25, 1.0) for s in np.linspace(0.05, 0.3, 26)]
    assert max(abs(v - limit) for v in vegas) < 0.02 * limit


def test_quadratic_onset():
    for s in np.linspace(3.0, 10.0, 15):
        c = coefficients(1.0, s, 0.25)
        ratio = expected_payoff_rate(1.0, s, 0.25, 0.003) / (0.003 * c.alpha * s * s)
        assert 0.9 <= ratio <= 1.1


def test_vega_low_vol_expansion():
    # vega / limit = 1 + 1.5 x^2 + O(x^4) with x = A/B = alpha sigma / beta
    limit = vega_low_vol_limit(1.0, 0.25, 1.0)
    for s in np.linspace(0.01, 0.15, 15):
        c = coefficients(1.0, s, 0.25)
        x = c.a_coef / c.b_coef
        assert vega(1.0, s, 0.25, 1.0) / limit == pytest.approx(1 + 1.5 * x * x, abs=2 * x**4)
        assert abs(vega(1.0, s, 0.25, 1.0) - limit) < 0.02 * limit
