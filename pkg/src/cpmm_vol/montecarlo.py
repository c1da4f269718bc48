"""Monte-Carlo fee accrual along simulated GBM price paths.

Each path owns the counter-based RNG stream ``(master_seed, path_index)``.
Paths are processed in fixed-size blocks; per-step moments are merged in block
order, so results are bit-identical for any number of workers.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from . import DomainError
from .analytics import expected_payoff_rate
from .cpmm import FeeAccumulator, FeeParams, PoolState, arbitrage_to_price, spot_price
from .stochastic import DriftConvention, GbmParams, rng_stream
from .temporal import HorizonParams, QuadratureSpec, expected_payoff_curve

FEE_MODELS = ("arbitrage", "linearized")


class ConfigError(DomainError):
    pass


@dataclass(frozen=True)
class SimConfig:
    """One Monte-Carlo experiment.

    ``fee_model="arbitrage"`` (default) moves the pool exactly to each new
    price and charges ``gamma * |delta reserve_a|``.  ``"linearized"`` charges
    the first-order reserve increment ``P**-1.5 * |A - B eps|`` instead; it
    exists to separate discretisation error from the pool mechanics.
    """

    path_count: int = 10_000
    master_seed: int = 0
    step: float = 0.25
    horizon: float = 0.25
    sigma: float = 0.5
    gamma: float = 1.0
    initial_price: float = 1.0
    liquidity: float = 1.0
    convention: DriftConvention = DriftConvention.MARTINGALE_PRICE
    keep_paths: int = 0
    block_size: int = 1024
    memory_budget_mb: float = 512.0
    fee_model: str = "arbitrage"

    def __post_init__(self) -> None:
        if self.path_count < 1:
            raise ConfigError("path_count must be at least 1")
        if not 0 <= self.master_seed < 2**64:
            raise ConfigError("master_seed must be a 64-bit unsigned integer")
        if not self.step > 0.0 or not self.horizon > 0.0:
            raise ConfigError("step and horizon must be positive")
        n = self.horizon / self.step
        if abs(n - round(n)) > 1e-9 * max(1.0, n) or round(n) < 1:
            raise ConfigError(f"step {self.step!r} does not divide horizon {self.horizon!r}")
        if not self.sigma >= 0.0:
            raise ConfigError("sigma must be non-negative")
        if not 0.0 < self.gamma <= 1.0:
            raise ConfigError("gamma must lie in (0, 1]")
        if not (self.initial_price > 0.0 and self.liquidity > 0.0):
            raise ConfigError("initial_price and liquidity must be positive")
        if not 0 <= self.keep_paths <= self.path_count:
            raise ConfigError("keep_paths must lie in [0, path_count]")
        if self.block_size < 1:
            raise ConfigError("block_size must be positive")
        if self.fee_model not in FEE_MODELS:
            raise ConfigError(f"fee_model must be one of {FEE_MODELS}")
        # block workspace (eps, prices, reserves, cumulative) + retained paths + finals
        rows = min(self.block_size, self.path_count)
        need = 8 * ((4 * rows + self.keep_paths) * (self.steps + 1) + self.path_count)
        if need > self.memory_budget_mb * 2**20:
            raise ConfigError(
                f"run needs ~{need / 2**20:.1f} MiB, over the {self.memory_budget_mb} MiB budget"
            )

    @property
    def steps(self) -> int:
        return int(round(self.horizon / self.step))

    def to_dict(self) -> dict:
        d = asdict(self)
        d["convention"] = self.convention.value
        return d


@dataclass
class TrajectoryResult:
    times: np.ndarray
    mean_cumulative_fee: np.ndarray
    std_error: np.ndarray
    per_path_final: np.ndarray
    kept_paths: np.ndarray | None = None
    metadata: dict = field(default_factory=dict)


def _block_draws(config: SimConfig, start: int, stop: int) -> np.ndarray:
    eps = np.empty((stop - start, config.steps))
    for row, i in enumerate(range(start, stop)):
        eps[row] = rng_stream(config.master_seed, i).standard_normal(config.steps)
    return eps


def _price_paths(config: SimConfig, eps: np.ndarray) -> np.ndarray:
    """Prices at step boundaries, shape ``(paths, steps + 1)``."""
    gbm = GbmParams(sigma=config.sigma, drift_convention=config.convention)
    drift = gbm.log_drift() * config.step
    vol = config.sigma * math.sqrt(config.step)
    prices = np.empty((eps.shape[0], eps.shape[1] + 1))
    prices[:, 0] = config.initial_price
    for k in range(eps.shape[1]):
        prices[:, k + 1] = prices[:, k] * np.exp(drift + vol * eps[:, k])
    return prices


def _step_fees(config: SimConfig, prices: np.ndarray, eps: np.ndarray) -> np.ndarray:
    """Fees per unit liquidity for each step, shape ``(paths, steps)``."""
    if config.fee_model == "linearized":
        p = prices[:, :-1]
        a = 3.0 * config.step / (4.0 * p) * config.sigma**2
        b = 0.5 * math.sqrt(config.step) * config.sigma
        return config.gamma * p**-1.5 * np.abs(a - b * eps)
    reserve_a = config.liquidity / np.sqrt(prices)
    return config.gamma * np.abs(np.diff(reserve_a, axis=1)) / config.liquidity


def _run_block(config: SimConfig, start: int, stop: int):
    eps = _block_draws(config, start, stop)
    prices = _price_paths(config, eps)
    cumulative = np.zeros_like(prices)
    np.cumsum(_step_fees(config, prices, eps), axis=1, out=cumulative[:, 1:])
    n = stop - start
    mean = cumulative.mean(axis=0)
    m2 = ((cumulative - mean) ** 2).sum(axis=0)
    kept = cumulative[: max(0, min(config.keep_paths - start, n))]
    return n, mean, m2, cumulative[:, -1].copy(), kept


def simulate_paths(config: SimConfig, workers: int = 1) -> TrajectoryResult:
    blocks = [
        (s, min(s + config.block_size, config.path_count))
        for s in range(0, config.path_count, config.block_size)
    ]
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(lambda b: _run_block(config, *b), blocks))
    else:
        parts = [_run_block(config, *b) for b in blocks]

    # Chan et al. pairwise merge, always in block order
    count, mean, m2 = 0, None, None
    for n, b_mean, b_m2, _, _ in parts:
        if mean is None:
            count, mean, m2 = n, b_mean.copy(), b_m2.copy()
            continue
        total = count + n
        delta = b_mean - mean
        mean = mean + delta * (n / total)
        m2 = m2 + b_m2 + delta**2 * (count * n / total)
        count = total
    if count > 1:
        std_error = np.sqrt(m2 / (count - 1)) / math.sqrt(count)
    else:
        std_error = np.zeros_like(mean)

    finals = np.concatenate([p[3] for p in parts])
    kept = np.concatenate([p[4] for p in parts]) if config.keep_paths else None
    return TrajectoryResult(
        times=np.arange(config.steps + 1) * config.step,
        mean_cumulative_fee=mean,
        std_error=std_error,
        per_path_final=finals,
        kept_paths=kept,
        metadata=config.to_dict(),
    )


def price_path(config: SimConfig, path_index: int) -> np.ndarray:
    """The engine's price path for one path index, bit-identical to the batch run."""
    if not 0 <= path_index < config.path_count:
        raise ConfigError(f"path_index {path_index} outside [0, {config.path_count})")
    eps = _block_draws(config, path_index, path_index + 1)
    return _price_paths(config, eps)[0]


def replay_path(config: SimConfig, path_index: int) -> tuple[list[PoolState], list[float]]:
    """Scalar replay of one path through the pool operations.

    Returns the pool after every step (index 0 is the initial pool) and the
    cumulative fee per unit liquidity at each step boundary.
    """
    prices = price_path(config, path_index)
    fees = FeeParams(config.gamma) if config.gamma < 1.0 else _UnitFee()
    pool = PoolState.from_price(config.liquidity, float(prices[0]))
    acc = FeeAccumulator()
    pools, cumulative = [pool], [0.0]
    for target in prices[1:]:
        pool, fee = arbitrage_to_price(pool, float(target), fees)
        acc = acc.accrue(fee)
        pools.append(pool)
        cumulative.append(acc.total / config.liquidity)
    return pools, cumulative


class _UnitFee:
    # gamma == 1 normalises fees per unit fee rate; FeeParams forbids it for real pools
    gamma = 1.0


def check_pool_invariants(config: SimConfig, samples: int = 100, seed: int = 0, rtol: float = 1e-12) -> int:
    """Spot-check the pool invariant and fee agreement on random (path, step) pairs.

    Returns the number of pairs checked; raises AssertionError on violation.
    """
    rng = np.random.default_rng(seed)
    paths = rng.integers(0, config.path_count, size=samples)
    steps = rng.integers(1, config.steps + 1, size=samples)
    batch = simulate_paths(replace(config, keep_paths=config.path_count)) if samples else None
    for i, k in zip(paths, steps):
        pools, cumulative = replay_path(config, int(i))
        pool = pools[int(k)]
        inv = pool.liquidity**2
        assert abs(pool.reserve_a * pool.reserve_b - inv) <= rtol * inv
        engine_price = price_path(config, int(i))[int(k)]
        assert abs(spot_price(pool) - engine_price) <= rtol * engine_price
        engine_fee = batch.kept_paths[int(i), int(k)]
        assert abs(cumulative[int(k)] - engine_fee) <= rtol * max(engine_fee, 1e-300)
    return samples


@dataclass(frozen=True)
class PayoffCurveRow:
    sigma: float
    mc_mean: float
    mc_stderr: float
    closed_form: float


def payoff_curve(sigma_grid, config: SimConfig, workers: int = 1) -> list[PayoffCurveRow]:
    """Simulated versus closed-form first-step fee rate at ``initial_price`` for each sigma."""
    grid = [float(s) for s in sigma_grid]
    if not grid:
        raise ConfigError("sigma grid is empty")
    if any(b <= a for a, b in zip(grid, grid[1:])):
        raise ConfigError("sigma grid must be strictly increasing")
    rows = []
    for sigma in grid:
        cfg = replace(config, sigma=sigma, horizon=config.step, keep_paths=0)
        res = simulate_paths(cfg, workers=workers)
        closed = expected_payoff_rate(cfg.initial_price, sigma, cfg.step, cfg.gamma)
        rows.append(PayoffCurveRow(sigma, float(res.mean_cumulative_fee[1]), float(res.std_error[1]), closed))
    return rows


@dataclass
class EnsembleResult:
    trajectory: TrajectoryResult
    quadrature_curve: np.ndarray


def trajectory_ensemble(config: SimConfig, quad: QuadratureSpec = QuadratureSpec(), workers: int = 1) -> EnsembleResult:
    """Monte-Carlo cumulative fees alongside the deterministic quadrature curve."""
    traj = simulate_paths(config, workers=workers)
    params = HorizonParams(
        horizon=config.horizon,
        step=config.step,
        initial_price=config.initial_price,
        sigma=config.sigma,
        gamma=config.gamma,
    )
    return EnsembleResult(traj, expected_payoff_curve(params, quad))
