"""Closed-form expected fee rate per unit liquidity and its volatility sensitivity.

At price ``P`` the reserve increment over a step ``dt`` is modelled as
``L * P**-1.5 * (A - B * eps)`` with ``eps ~ N(0, 1)``,

    A = 3 * dt / (4 * P) * sigma**2     B = sqrt(dt) / 2 * sigma

so the expected fee per unit liquidity is ``gamma * P**-1.5 * E|A - B eps|``.

``E|a - b eps|`` is the folded-normal mean ``2 b phi(a/b) + a (2 Phi(a/b) - 1)``.
Note the argument is ``a/b``: the printed identity with argument ``b/a`` and a
``sqrt(pi)`` prefactor does not agree with direct quadrature of the integral,
so this module implements the quadrature-verified form.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

from . import DomainError

INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)
SQRT_2_OVER_PI = math.sqrt(2.0 / math.pi)


def norm_pdf(x: float) -> float:
    return INV_SQRT_2PI * math.exp(-0.5 * x * x)


def norm_cdf(x: float) -> float:
    return 0.5 * math.erfc(-x / math.sqrt(2.0))


def _two_cdf_minus_one(x: float) -> float:
    # 2 Phi(x) - 1 == erf(x / sqrt 2); erf avoids cancellation near x = 0
    return math.erf(x / math.sqrt(2.0))


@dataclass(frozen=True)
class PayoffCoefficients:
    a_coef: float
    b_coef: float
    alpha: float
    beta: float
    lam: float
    sigma: float


def coefficients(price: float, sigma: float, dt: float) -> PayoffCoefficients:
    if not price > 0.0:
        raise DomainError(f"price must be positive, got {price!r}")
    if not dt > 0.0:
        raise DomainError(f"dt must be positive, got {dt!r}")
    if not sigma >= 0.0:
        raise DomainError(f"sigma must be non-negative, got {sigma!r}")
    alpha = 3.0 * dt / (4.0 * price)
    beta = math.sqrt(dt) / 2.0
    return PayoffCoefficients(
        a_coef=alpha * sigma * sigma,
        b_coef=beta * sigma,
        alpha=alpha,
        beta=beta,
        lam=beta / alpha,
        sigma=sigma,
    )


def folded_abs_mean(a: float, b: float) -> float:
    """E|a - b * eps| for standard normal eps, with a, b >= 0."""
    if not (a >= 0.0 and b >= 0.0):
        raise DomainError(f"a and b must be non-negative, got a={a!r}, b={b!r}")
    if b == 0.0:
        return a
    x = a / b
    return 2.0 * b * norm_pdf(x) + a * _two_cdf_minus_one(x)


def _check_gamma(gamma: float) -> None:
    if not 0.0 < gamma <= 1.0:
        raise DomainError(f"gamma must lie in (0, 1], got {gamma!r}")


def expected_payoff_rate(price: float, sigma: float, dt: float, gamma: float) -> float:
    """Expected fee over one step of length ``dt`` per unit liquidity, at ``price``."""
    _check_gamma(gamma)
    c = coefficients(price, sigma, dt)
    return gamma * price**-1.5 * folded_abs_mean(c.a_coef, c.b_coef)


def vega(price: float, sigma: float, dt: float, gamma: float) -> float:
    """d(expected_payoff_rate)/d(sigma).

    Differentiating the folded-normal mean with A = alpha s^2, B = beta s gives
    ``2 beta phi(A/B) + 2 alpha s (2 Phi(A/B) - 1)``; the phi' terms cancel.
    Low volatility: slope -> beta sqrt(2/pi).  High volatility: ~ 2 alpha s.
    """
    if not sigma > 0.0:
        raise DomainError(f"sigma must be positive, got {sigma!r}")
    _check_gamma(gamma)
    c = coefficients(price, sigma, dt)
    x = c.a_coef / c.b_coef
    inner = 2.0 * c.beta * norm_pdf(x) + 2.0 * c.alpha * sigma * _two_cdf_minus_one(x)
    return gamma * price**-1.5 * inner


def vega_low_vol_limit(price: float, dt: float, gamma: float) -> float:
    """sigma -> 0+ limit of :func:`vega`."""
    c = coefficients(price, 0.0, dt)
    return gamma * price**-1.5 * c.beta * SQRT_2_OVER_PI
