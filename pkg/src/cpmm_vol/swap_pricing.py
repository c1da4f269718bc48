"""Liquidity fees swap: the buyer pays a premium up front for the fees a
locked LP position earns over ``[0, T]``; the seller keeps the position and
bears its impermanent loss.

All settlement amounts are in token a.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

from . import DomainError
from .cpmm import FeeAccumulator, FeeParams, PoolState, arbitrage_to_price, impermanent_loss
from .temporal import HorizonParams, QuadratureSpec, total_expected_payoff


@dataclass(frozen=True)
class SwapTerms:
    liquidity: float
    horizon: float
    gamma: float
    initial_price: float
    sigma_quote: float
    premium: float = 0.0
    step: float = 0.25

    def __post_init__(self) -> None:
        for name in ("liquidity", "horizon", "initial_price", "step"):
            if not getattr(self, name) > 0.0:
                raise DomainError(f"{name} must be positive, got {getattr(self, name)!r}")
        if not 0.0 < self.gamma < 1.0:
            raise DomainError(f"gamma must lie in (0, 1), got {self.gamma!r}")
        if not self.sigma_quote >= 0.0:
            raise DomainError("sigma_quote must be non-negative")
        if not self.premium >= 0.0:
            raise DomainError("premium must be non-negative")
        self.horizon_params()

    def horizon_params(self) -> HorizonParams:
        return HorizonParams(
            horizon=self.horizon,
            step=self.step,
            initial_price=self.initial_price,
            sigma=self.sigma_quote,
            gamma=self.gamma,
        )

    @property
    def steps(self) -> int:
        return self.horizon_params().steps


@dataclass(frozen=True)
class SettlementReport:
    realized_fees: float
    impermanent_loss: float
    premium: float
    buyer_net: float
    seller_net: float


def fair_premium(terms: SwapTerms, quad: QuadratureSpec = QuadratureSpec()) -> float:
    """Premium that zeroes the buyer's expected P&L under the quoting volatility."""
    return terms.liquidity * total_expected_payoff(terms.horizon_params(), quad)


def settle(terms: SwapTerms, price_path) -> SettlementReport:
    """Settle the swap against a realised price path (one price per step boundary)."""
    prices = [float(p) for p in price_path]
    if len(prices) != terms.steps + 1:
        raise DomainError(f"path has {len(prices)} prices, expected {terms.steps + 1}")
    if any(not (p > 0.0 and math.isfinite(p)) for p in prices):
        raise DomainError("path prices must be positive and finite")
    if prices[0] != terms.initial_price:
        raise DomainError(f"path starts at {prices[0]!r}, terms say {terms.initial_price!r}")

    pool = PoolState.from_price(terms.liquidity, prices[0])
    fees = FeeAccumulator()
    params = FeeParams(terms.gamma)
    for target in prices[1:]:
        pool, fee = arbitrage_to_price(pool, target, params)
        fees = fees.accrue(fee)

    final = prices[-1]
    il_a = impermanent_loss(prices[0], final, terms.liquidity) / final
    return SettlementReport(
        realized_fees=fees.total,
        impermanent_loss=il_a,
        premium=terms.premium,
        buyer_net=fees.total - terms.premium,
        seller_net=terms.premium - il_a,
    )
