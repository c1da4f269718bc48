"""Ensemble fee rate over the evolving price density, and its sum over a horizon."""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from . import DomainError, NumericalError
from .analytics import expected_payoff_rate, norm_pdf


class Scheme(str, enum.Enum):
    GAUSS_HERMITE = "gauss-hermite"
    ADAPTIVE_SIMPSON = "adaptive-simpson"


@dataclass(frozen=True)
class QuadratureSpec:
    node_count: int = 128
    truncation: float = 8.0
    scheme: Scheme = Scheme.GAUSS_HERMITE
    tolerance: float = 1e-10
    max_intervals: int = 200_000

    def __post_init__(self) -> None:
        if self.node_count < 16:
            raise DomainError("node_count must be at least 16")
        if self.truncation < 4.0:
            raise DomainError("truncation must be at least 4 standard deviations")


@dataclass(frozen=True)
class HorizonParams:
    horizon: float
    step: float
    initial_price: float
    sigma: float
    gamma: float

    def __post_init__(self) -> None:
        if not self.step > 0.0:
            raise DomainError(f"step must be positive, got {self.step!r}")
        if not self.horizon >= 0.0:
            raise DomainError(f"horizon must be non-negative, got {self.horizon!r}")
        if not self.initial_price > 0.0:
            raise DomainError("initial_price must be positive")
        if not self.sigma >= 0.0:
            raise DomainError("sigma must be non-negative")
        n = self.horizon / self.step
        if abs(n - round(n)) > 1e-9 * max(1.0, n):
            raise DomainError(f"step {self.step!r} does not divide horizon {self.horizon!r}")

    @property
    def steps(self) -> int:
        return int(round(self.horizon / self.step))


@lru_cache(maxsize=16)
def _hermite_rule(n: int) -> tuple[np.ndarray, np.ndarray]:
    # probabilists' Hermite: weight exp(-z^2/2); normalise to the N(0,1) measure
    z, w = np.polynomial.hermite_e.hermegauss(n)
    return z, w / math.sqrt(2.0 * math.pi)


def _rate_at_log_offset(z: float, scale: float, params: HorizonParams) -> float:
    price = params.initial_price * math.exp(scale * z)
    return expected_payoff_rate(price, params.sigma, params.step, params.gamma)


def _adaptive_simpson(f, lo: float, hi: float, tol: float, budget: int) -> float:
    """Iterative adaptive Simpson with a global interval budget."""
    def simpson(a, fa, b, fb):
        m = 0.5 * (a + b)
        fm = f(m)
        return m, fm, (b - a) / 6.0 * (fa + 4.0 * fm + fb)

    flo, fhi = f(lo), f(hi)
    m, fm, whole = simpson(lo, flo, hi, fhi)
    stack = [(lo, flo, hi, fhi, m, fm, whole, tol)]
    total = 0.0
    used = 0
    while stack:
        a, fa, b, fb, m, fm, whole, eps = stack.pop()
        used += 1
        if used > budget:
            raise NumericalError("adaptive Simpson exhausted its interval budget")
        lm, flm, left = simpson(a, fa, m, fm)
        rm, frm, right = simpson(m, fm, b, fb)
        delta = left + right - whole
        if abs(delta) <= 15.0 * eps or b - a < 1e-12:
            total += left + right + delta / 15.0
        else:
            stack.append((m, fm, b, fb, rm, frm, right, 0.5 * eps))
            stack.append((a, fa, m, fm, lm, flm, left, 0.5 * eps))
    return total


def ensemble_payoff_rate(t: float, params: HorizonParams, quad: QuadratureSpec = QuadratureSpec()) -> float:
    """Expected one-step fee per unit liquidity at time ``t``, averaged over the price density.

    Integrates over ``z = log(P / P0) / (sigma sqrt t)``, which turns the
    lognormal weight into a standard normal one.
    """
    if not t >= 0.0:
        raise DomainError(f"t must be non-negative, got {t!r}")
    if params.sigma == 0.0:
        return 0.0
    if t == 0.0:
        return expected_payoff_rate(params.initial_price, params.sigma, params.step, params.gamma)
    scale = params.sigma * math.sqrt(t)
    if quad.scheme is Scheme.GAUSS_HERMITE:
        z, w = _hermite_rule(quad.node_count)
        values = [_rate_at_log_offset(zi, scale, params) for zi in z]
        return math.fsum(wi * vi for wi, vi in zip(w, values))

    def integrand(z: float) -> float:
        return _rate_at_log_offset(z, scale, params) * norm_pdf(z)

    # P**-1.5 and P**-2.5 factors shift the mass to z ~ -2.5 * scale at most
    lo = -quad.truncation - 2.5 * scale
    return _adaptive_simpson(integrand, lo, quad.truncation, quad.tolerance, quad.max_intervals)


def expected_payoff_curve(params: HorizonParams, quad: QuadratureSpec = QuadratureSpec()) -> np.ndarray:
    """Cumulative expected fees per unit liquidity at each step boundary ``k * step``.

    Element 0 is 0; element k sums the ensemble rate over the first k steps.
    """
    rates = [ensemble_payoff_rate(k * params.step, params, quad) for k in range(params.steps)]
    curve = np.zeros(params.steps + 1)
    curve[1:] = np.cumsum(rates)
    return curve


def total_expected_payoff(params: HorizonParams, quad: QuadratureSpec = QuadratureSpec()) -> float:
    """Expected fees per unit liquidity over ``[0, horizon]``.

    The per-step rate already carries ``dt`` inside its coefficients, so the
    time integral is the sum of per-step rates at ``0, dt, ..., T - dt``.
    """
    return float(expected_payoff_curve(params, quad)[-1])
