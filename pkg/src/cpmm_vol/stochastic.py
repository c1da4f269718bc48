"""Geometric Brownian price process and its lognormal transition density."""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from . import DomainError

SQRT_2PI = math.sqrt(2.0 * math.pi)


class DriftConvention(str, enum.Enum):
    """Drift of the price SDE.

    ``MARTINGALE_PRICE``: E[P_{t+dt} | P_t] = P_t (SDE drift zero).
    ``DRIFTLESS_LOG``: log-price has zero drift (SDE drift sigma**2 / 2); this
    is the convention of the lognormal density below.
    """

    MARTINGALE_PRICE = "martingale"
    DRIFTLESS_LOG = "driftless-log"


@dataclass(frozen=True)
class GbmParams:
    sigma: float
    mu: float = 0.0
    drift_convention: DriftConvention = DriftConvention.MARTINGALE_PRICE

    def __post_init__(self) -> None:
        if not self.sigma >= 0.0:
            raise DomainError(f"sigma must be non-negative, got {self.sigma!r}")

    def log_drift(self) -> float:
        """Drift of log-price per unit time implied by the convention."""
        if self.drift_convention is DriftConvention.MARTINGALE_PRICE:
            return -0.5 * self.sigma**2
        return 0.0


@dataclass(frozen=True)
class StepDraw:
    epsilon: float
    dt: float

    def __post_init__(self) -> None:
        if not self.dt > 0.0:
            raise DomainError(f"dt must be positive, got {self.dt!r}")


@dataclass(frozen=True)
class DensityQuery:
    initial_price: float
    time: float
    price: float

    def __post_init__(self) -> None:
        for name in ("initial_price", "time", "price"):
            if not getattr(self, name) > 0.0:
                raise DomainError(f"{name} must be positive, got {getattr(self, name)!r}")


def rng_stream(master_seed: int, stream: int) -> np.random.Generator:
    """Counter-based stream ``stream`` of ``master_seed``.

    The Philox key is derived from the seed alone; the stream index occupies
    the top word of the 256-bit counter, so streams never overlap and each one
    is reproducible in isolation.
    """
    if not 0 <= master_seed < 2**64:
        raise DomainError(f"master seed must be a 64-bit unsigned integer, got {master_seed!r}")
    if not 0 <= stream < 2**64:
        raise DomainError(f"stream index out of range: {stream!r}")
    key = np.random.SeedSequence(master_seed).generate_state(2, np.uint64)
    return np.random.Generator(np.random.Philox(key=key, counter=[0, 0, 0, stream]))


def gbm_step(price: float, params: GbmParams, draw: StepDraw) -> float:
    """Exact lognormal update over one step of length ``draw.dt``."""
    if not price > 0.0:
        raise DomainError(f"price must be positive, got {price!r}")
    dt = draw.dt
    return price * math.exp(params.log_drift() * dt + params.sigma * math.sqrt(dt) * draw.epsilon)


def transition_density(query: DensityQuery, sigma: float) -> float:
    if not sigma > 0.0:
        raise DomainError("density is a point mass at sigma == 0")
    p, p0, t = query.price, query.initial_price, query.time
    var = sigma * sigma * t
    log_ratio = math.log(p / p0)
    return math.exp(-log_ratio * log_ratio / (2.0 * var)) / (p * sigma * math.sqrt(t) * SQRT_2PI)


def density_array(prices, initial_price: float, sigma: float, time: float) -> np.ndarray:
    """Vectorised :func:`transition_density` over an array of prices."""
    if not sigma > 0.0:
        raise DomainError("density is a point mass at sigma == 0")
    if not (initial_price > 0.0 and time > 0.0):
        raise DomainError("initial_price and time must be positive")
    p = np.asarray(prices, dtype=float)
    if np.any(p <= 0.0):
        raise DomainError("prices must be positive")
    var = sigma * sigma * time
    log_ratio = np.log(p / initial_price)
    return np.exp(-log_ratio**2 / (2.0 * var)) / (p * sigma * math.sqrt(time) * SQRT_2PI)


def sample_price(initial_price: float, sigma: float, time: float, rng: np.random.Generator, size=None):
    """Exact draw(s) from the lognormal transition density at ``time``."""
    if not initial_price > 0.0:
        raise DomainError(f"initial_price must be positive, got {initial_price!r}")
    if not time > 0.0:
        raise DomainError(f"time must be positive, got {time!r}")
    if not sigma >= 0.0:
        raise DomainError(f"sigma must be non-negative, got {sigma!r}")
    z = rng.standard_normal(size)
    return initial_price * np.exp(sigma * math.sqrt(time) * z)


def fokker_planck_residual(
    sigma: float,
    initial_price: float,
    prices,
    times,
    h: float = 1e-3,
) -> float:
    """Max |dp/dt + d/dP[mu P p] - 1/2 d2/dP2[sigma^2 P^2 p]| over a price x time lattice.

    The density is the analytic lognormal solution with ``mu = sigma**2 / 2``.
    Derivatives are second-order central differences with step ``h`` in both
    price and time.
    """
    if not sigma > 0.0:
        raise DomainError("sigma must be positive")
    P = np.asarray(prices, dtype=float)[:, None]
    T = np.asarray(times, dtype=float)[None, :]
    if np.any(T - h <= 0.0) or np.any(P - h <= 0.0):
        raise DomainError("lattice must stay clear of t = 0 and P = 0")
    mu = 0.5 * sigma * sigma

    def p(x, t):
        var = sigma * sigma * t
        lr = np.log(x / initial_price)
        return np.exp(-lr * lr / (2.0 * var)) / (x * np.sqrt(2.0 * np.pi * var))

    dp_dt = (p(P, T + h) - p(P, T - h)) / (2.0 * h)

    def drift_flux(x):
        return mu * x * p(x, T)

    def diffusion(x):
        return sigma * sigma * x * x * p(x, T)

    d_drift = (drift_flux(P + h) - drift_flux(P - h)) / (2.0 * h)
    d2_diff = (diffusion(P + h) - 2.0 * diffusion(P) + diffusion(P - h)) / (h * h)
    residual = dp_dt + d_drift - 0.5 * d2_diff
    return float(np.max(np.abs(residual)))
