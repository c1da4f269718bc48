"""Constant-product pool algebra.

Reserves are real-valued.  ``reserve_a * reserve_b == liquidity**2`` holds for
every pool produced here; fees are paid into an external accumulator and never
touch the reserves.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

from . import DomainError

INVARIANT_RTOL = 1e-12


def _require_positive(**values: float) -> None:
    for name, v in values.items():
        if not (v > 0.0) or not math.isfinite(v):
            raise DomainError(f"{name} must be positive and finite, got {v!r}")


@dataclass(frozen=True)
class PoolState:
    reserve_a: float
    reserve_b: float
    liquidity: float

    def __post_init__(self) -> None:
        _require_positive(
            reserve_a=self.reserve_a, reserve_b=self.reserve_b, liquidity=self.liquidity
        )
        k = self.liquidity * self.liquidity
        if abs(self.reserve_a * self.reserve_b - k) > INVARIANT_RTOL * k:
            raise DomainError(
                f"reserves {self.reserve_a!r} * {self.reserve_b!r} do not match liquidity {self.liquidity!r}"
            )

    @classmethod
    def from_reserves(cls, reserve_a: float, reserve_b: float) -> PoolState:
        _require_positive(reserve_a=reserve_a, reserve_b=reserve_b)
        return cls(reserve_a, reserve_b, math.sqrt(reserve_a * reserve_b))

    @classmethod
    def from_price(cls, liquidity: float, price: float) -> PoolState:
        _require_positive(liquidity=liquidity, price=price)
        root = math.sqrt(price)
        return cls(liquidity / root, liquidity * root, liquidity)


@dataclass(frozen=True)
class FeeParams:
    gamma: float

    def __post_init__(self) -> None:
        if not 0.0 < self.gamma < 1.0:
            raise DomainError(f"gamma must lie in (0, 1), got {self.gamma!r}")


@dataclass(frozen=True)
class FeeAccumulator:
    """Running total of fees in token-a units."""

    total: float = 0.0

    def __post_init__(self) -> None:
        if not self.total >= 0.0:
            raise DomainError(f"fee total must be non-negative, got {self.total!r}")

    def accrue(self, fee: float) -> FeeAccumulator:
        if not fee >= 0.0:
            raise DomainError(f"fee must be non-negative, got {fee!r}")
        return FeeAccumulator(self.total + fee)


def spot_price(pool: PoolState) -> float:
    """Token-b per token-a."""
    return pool.reserve_b / pool.reserve_a


def reserve_a_from_price(liquidity: float, price: float) -> float:
    _require_positive(liquidity=liquidity, price=price)
    return liquidity / math.sqrt(price)


def arbitrage_to_price(
    pool: PoolState, target_price: float, fees: FeeParams
) -> tuple[PoolState, float]:
    """Trade the pool to ``target_price`` along its invariant curve.

    Returns the new pool and the fee ``gamma * |delta reserve_a|`` owed to the
    fee vault.  A target equal to the current price is a no-op.
    """
    _require_positive(target_price=target_price)
    if target_price == spot_price(pool):
        return pool, 0.0
    new_pool = PoolState.from_price(pool.liquidity, target_price)
    delta_a = new_pool.reserve_a - pool.reserve_a
    return new_pool, fees.gamma * abs(delta_a)


def impermanent_loss(initial_price: float, final_price: float, liquidity: float) -> float:
    """Hold-minus-pool value at ``final_price``, in token-b units.

    The held portfolio is the pool's reserves at ``initial_price``.
    """
    _require_positive(
        initial_price=initial_price, final_price=final_price, liquidity=liquidity
    )
    r0 = math.sqrt(initial_price)
    r1 = math.sqrt(final_price)
    # hold - pool = L*(r0 + r1^2/r0 - 2 r1) = L*(r1 - r0)^2 / r0, exact zero at r1 == r0
    return liquidity * (r1 - r0) ** 2 / r0
