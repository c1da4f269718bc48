"""Command-line driver: emits data tables for the fee-payoff experiments.

Every output carries a manifest (subcommand, resolved parameters, seed, code
and schema version).  ``cpmm-vol rerun FILE`` re-executes a manifest.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from dataclasses import asdict, replace
from pathlib import Path

import numpy as np

from . import DomainError, NumericalError, __version__
from .montecarlo import SimConfig, payoff_curve, price_path, trajectory_ensemble
from .stochastic import DriftConvention, density_array
from .swap_pricing import SwapTerms, fair_premium, settle
from .temporal import QuadratureSpec, Scheme

SCHEMA_VERSION = 1
SEED_ENV = "CPMM_VOL_SEED"

EXIT_OK, EXIT_USAGE, EXIT_NUMERIC = 0, 2, 3


class UsageError(Exception):
    pass


def _seed(text) -> int:
    v = int(text)
    if not 0 <= v < 2**64:
        raise ValueError(f"seed must be a 64-bit unsigned integer, got {text!r}")
    return v


def _convention(text) -> str:
    return DriftConvention(text).value


def _scheme(text) -> str:
    return Scheme(text).value


# name -> (parser, default, help)
_QUAD = {
    "nodes": (int, 128, "Gauss-Hermite node count"),
    "scheme": (_scheme, Scheme.GAUSS_HERMITE.value, "gauss-hermite | adaptive-simpson"),
}

PARAMS: dict[str, dict[str, tuple]] = {
    "payoff-curve": {
        "sigma_min": (float, 0.1, "smallest volatility"),
        "sigma_max": (float, 1.5, "largest volatility"),
        "sigma_steps": (int, 15, "number of grid points"),
        "dt": (float, 0.25, "step length"),
        "p0": (float, 1.0, "price"),
        "gamma": (float, 1.0, "fee fraction (1 = per unit fee rate)"),
        "paths": (int, 10_000, "Monte-Carlo paths per sigma"),
        "seed": (_seed, 0, "master seed"),
        "convention": (_convention, DriftConvention.MARTINGALE_PRICE.value, "martingale | driftless-log"),
        "fee_model": (str, "arbitrage", "arbitrage | linearized"),
    },
    "ensemble": {
        "sigma": (float, 0.5, "volatility"),
        "dt": (float, 0.25, "step length"),
        "horizon": (float, 3.0, "horizon T"),
        "p0": (float, 1.0, "initial price"),
        "gamma": (float, 1.0, "fee fraction"),
        "paths": (int, 10_000, "Monte-Carlo paths"),
        "seed": (_seed, 0, "master seed"),
        "convention": (_convention, DriftConvention.DRIFTLESS_LOG.value, "martingale | driftless-log"),
        "fee_model": (str, "arbitrage", "arbitrage | linearized"),
        "keep_paths": (int, 0, "emit this many sample paths as extra columns"),
        **_QUAD,
    },
    "density": {
        "sigma": (float, 1.0, "volatility"),
        "time": (float, 1.0, "time t"),
        "p0": (float, 1.0, "initial price"),
        "points": (int, 2001, "grid points (log-spaced)"),
        "width": (float, 8.0, "grid half-width in log-price standard deviations"),
        "at": (str, "", "comma-separated prices; overrides the grid"),
    },
    "price": {
        "liquidity": (float, 1.0, "liquidity L locked by the seller"),
        "horizon": (float, 3.0, "swap tenor T"),
        "dt": (float, 0.25, "quoting step"),
        "p0": (float, 1.0, "initial price"),
        "sigma": (float, 0.5, "quoting volatility"),
        "gamma": (float, 0.003, "pool fee fraction"),
        **_QUAD,
    },
    "settle": {
        "path": (str, None, "price path CSV with header t,price"),
        "liquidity": (float, 1.0, "liquidity L"),
        "horizon": (float, None, "swap tenor T (default: last t in the file)"),
        "dt": (float, 0.25, "step"),
        "p0": (float, None, "initial price (default: first price in the file)"),
        "sigma_quote": (float, 0.5, "quoting volatility"),
        "gamma": (float, 0.003, "pool fee fraction"),
        "premium": (float, None, "premium paid (default: fair premium)"),
        **_QUAD,
    },
    "path": {
        "sigma": (float, 0.5, "volatility"),
        "dt": (float, 0.25, "step length"),
        "horizon": (float, 3.0, "horizon T"),
        "p0": (float, 1.0, "initial price"),
        "seed": (_seed, 0, "master seed"),
        "path_index": (int, 0, "path (stream) index"),
        "paths": (int, 10_000, "path count of the run the path belongs to"),
        "convention": (_convention, DriftConvention.DRIFTLESS_LOG.value, "martingale | driftless-log"),
    },
}

JSON_ONLY = {"price", "settle"}


# ---------------------------------------------------------------- formatting

def fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return str(bool(x)).lower()
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return format(float(x), ".17g")
    return str(x)


def manifest(command: str, params: dict) -> dict:
    return {
        "subcommand": command,
        "parameters": params,
        "master_seed": params.get("seed"),
        "code_version": __version__,
        "schema_version": SCHEMA_VERSION,
    }


def render_csv(man: dict, columns: list[str], rows: list[list]) -> str:
    buf = io.StringIO()
    buf.write(f"# subcommand: {man['subcommand']}\n")
    buf.write(f"# code_version: {man['code_version']}\n")
    buf.write(f"# schema_version: {man['schema_version']}\n")
    buf.write(f"# master_seed: {man['master_seed']}\n")
    buf.write(f"# parameters: {json.dumps(man['parameters'], sort_keys=True)}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([fmt(v) for v in row])
    return buf.getvalue()


def _jsonable(v):
    if isinstance(v, np.generic):
        return v.item()
    return v


def render_json(man: dict, columns: list[str], rows: list[list]) -> str:
    records = [{c: _jsonable(v) for c, v in zip(columns, row)} for row in rows]
    return json.dumps({"manifest": man, "records": records}, indent=2, sort_keys=True) + "\n"


def read_manifest(path: str | Path) -> dict:
    text = Path(path).read_text(encoding="utf-8")
    if text.lstrip().startswith("{"):
        return json.loads(text)["manifest"]
    man = {}
    for line in text.splitlines():
        if not line.startswith("# "):
            break
        key, _, value = line[2:].partition(": ")
        man[key] = json.loads(value) if key == "parameters" else value
    if "subcommand" not in man or "parameters" not in man:
        raise UsageError(f"{path}: no manifest found")
    return man


# ---------------------------------------------------------------- config

def read_config(path: str | Path) -> dict[str, str]:
    out = {}
    for n, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{n}: expected key=value")
        key, value = (s.strip() for s in line.split("=", 1))
        out[key.replace("-", "_")] = value
    return out


def resolve(command: str, flags: dict, config: dict | None = None, env=None) -> dict:
    """Parameters for ``command``: flags > config file > environment seed > defaults."""
    spec = PARAMS[command]
    env = os.environ if env is None else env
    resolved = {name: default for name, (_, default, _) in spec.items()}
    if "seed" in spec and env.get(SEED_ENV):
        resolved["seed"] = env[SEED_ENV]
    for key, value in (config or {}).items():
        if key not in spec:
            raise UsageError(f"unknown config key {key!r} for {command}")
        resolved[key] = value
    for key, value in flags.items():
        if value is not None:
            resolved[key] = value
    for name, (conv, _, _) in spec.items():
        if resolved[name] is not None:
            try:
                resolved[name] = conv(resolved[name])
            except (TypeError, ValueError) as exc:
                raise UsageError(f"bad value for {name}: {exc}") from None
    return resolved


# ---------------------------------------------------------------- commands

def _quad(p: dict) -> QuadratureSpec:
    return QuadratureSpec(node_count=p["nodes"], scheme=Scheme(p["scheme"]))


def run_payoff_curve(p: dict, workers: int = 1):
    lo, hi, n = p["sigma_min"], p["sigma_max"], p["sigma_steps"]
    if n < 1 or hi < lo:
        raise UsageError("need sigma_steps >= 1 and sigma_max >= sigma_min")
    # rounded so decimal grids print as typed (0.8, not 0.7999999999999999)
    grid = [lo] if hi == lo or n == 1 else [round(float(x), 12) for x in np.linspace(lo, hi, n)]
    cfg = SimConfig(
        path_count=p["paths"],
        master_seed=p["seed"],
        step=p["dt"],
        horizon=p["dt"],
        gamma=p["gamma"],
        initial_price=p["p0"],
        convention=DriftConvention(p["convention"]),
        fee_model=p["fee_model"],
    )
    rows = payoff_curve(grid, cfg, workers=workers)
    return ["sigma", "closed_form", "mc_mean", "mc_stderr"], [
        [r.sigma, r.closed_form, r.mc_mean, r.mc_stderr] for r in rows
    ]


def run_ensemble(p: dict, workers: int = 1):
    cfg = SimConfig(
        path_count=p["paths"],
        master_seed=p["seed"],
        step=p["dt"],
        horizon=p["horizon"],
        sigma=p["sigma"],
        gamma=p["gamma"],
        initial_price=p["p0"],
        convention=DriftConvention(p["convention"]),
        keep_paths=p["keep_paths"],
        fee_model=p["fee_model"],
    )
    res = trajectory_ensemble(cfg, _quad(p), workers=workers)
    traj = res.trajectory
    columns = ["t", "quadrature_mean", "mc_mean", "mc_stderr"]
    columns += [f"path_{i}" for i in range(p["keep_paths"])]
    rows = []
    for k, t in enumerate(traj.times):
        row = [t, res.quadrature_curve[k], traj.mean_cumulative_fee[k], traj.std_error[k]]
        if traj.kept_paths is not None:
            row += list(traj.kept_paths[:, k])
        rows.append(row)
    return columns, rows


def run_density(p: dict, workers: int = 1):
    p0, sigma, t = p["p0"], p["sigma"], p["time"]
    if p["at"]:
        prices = np.array([float(s) for s in p["at"].split(",")])
        return ["price", "density"], [[x, d] for x, d in zip(prices, density_array(prices, p0, sigma, t))]
    if p["points"] < 3:
        raise UsageError("points must be at least 3")
    half = p["width"] * sigma * math.sqrt(t)
    u = np.linspace(-half, half, p["points"])
    prices = p0 * np.exp(u)
    dens = density_array(prices, p0, sigma, t)
    # trapezoid in log-price: dP = P du
    weights = np.full(u.size, u[1] - u[0])
    weights[[0, -1]] *= 0.5
    mass = dens * prices * weights
    return ["price", "density", "mass"], [list(r) for r in zip(prices, dens, mass)]


def _premium_vega(terms: SwapTerms, quad: QuadratureSpec) -> float:
    # central difference in the quoting volatility; one-sided at the sigma = 0 boundary
    h = 1e-4 * max(1.0, terms.sigma_quote)
    up = fair_premium(_with_sigma(terms, terms.sigma_quote + h), quad)
    if terms.sigma_quote > h:
        down = fair_premium(_with_sigma(terms, terms.sigma_quote - h), quad)
        return (up - down) / (2.0 * h)
    return (up - fair_premium(terms, quad)) / h


def _with_sigma(terms: SwapTerms, sigma: float) -> SwapTerms:
    return replace(terms, sigma_quote=sigma)


def run_price(p: dict, workers: int = 1):
    terms = SwapTerms(
        liquidity=p["liquidity"],
        horizon=p["horizon"],
        gamma=p["gamma"],
        initial_price=p["p0"],
        sigma_quote=p["sigma"],
        step=p["dt"],
    )
    quad = _quad(p)
    return {"premium": fair_premium(terms, quad), "vega": _premium_vega(terms, quad)}


def read_price_path(path: str | Path) -> tuple[list[float], list[float]]:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc}") from None
    lines = [ln for ln in text.splitlines() if ln.strip() and not ln.startswith("#")]
    rows = list(csv.reader(lines))
    if not rows or [c.strip() for c in rows[0]] != ["t", "price"]:
        raise UsageError(f"{path}: expected header 't,price'")
    times, prices = [], []
    for n, row in enumerate(rows[1:], 2):
        if len(row) != 2:
            raise UsageError(f"{path}: row {n} has {len(row)} fields")
        try:
            times.append(float(row[0]))
            prices.append(float(row[1]))
        except ValueError:
            raise UsageError(f"{path}: row {n} is not numeric") from None
    if len(prices) < 2:
        raise UsageError(f"{path}: need at least two rows")
    return times, prices


def run_settle(p: dict, workers: int = 1):
    if not p["path"]:
        raise UsageError("--path is required")
    times, prices = read_price_path(p["path"])
    horizon = p["horizon"] if p["horizon"] is not None else times[-1] - times[0]
    terms = SwapTerms(
        liquidity=p["liquidity"],
        horizon=horizon,
        gamma=p["gamma"],
        initial_price=p["p0"] if p["p0"] is not None else prices[0],
        sigma_quote=p["sigma_quote"],
        step=p["dt"],
    )
    premium = p["premium"] if p["premium"] is not None else fair_premium(terms, _quad(p))
    report = settle(replace(terms, premium=premium), prices)
    return asdict(report)


def run_path(p: dict, workers: int = 1):
    cfg = SimConfig(
        path_count=p["paths"],
        master_seed=p["seed"],
        step=p["dt"],
        horizon=p["horizon"],
        sigma=p["sigma"],
        initial_price=p["p0"],
        convention=DriftConvention(p["convention"]),
    )
    prices = price_path(cfg, p["path_index"])
    return ["t", "price"], [[k * cfg.step, x] for k, x in enumerate(prices)]


RUNNERS = {
    "payoff-curve": run_payoff_curve,
    "ensemble": run_ensemble,
    "density": run_density,
    "price": run_price,
    "settle": run_settle,
    "path": run_path,
}


def execute(command: str, params: dict, fmt_name: str = "csv", workers: int = 1) -> str:
    """Run ``command`` with resolved ``params`` and return the rendered output."""
    man = manifest(command, params)
    result = RUNNERS[command](params, workers)
    if command in JSON_ONLY:
        body = {k: _jsonable(v) for k, v in result.items()}
        return json.dumps({"manifest": man, **body}, indent=2, sort_keys=True) + "\n"
    columns, rows = result
    if fmt_name == "json":
        return render_json(man, columns, rows)
    return render_csv(man, columns, rows)


# ---------------------------------------------------------------- parser

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cpmm-vol", description="Expected liquidity-fee payoff of CPMM positions under GBM."
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    for command, spec in PARAMS.items():
        sp = sub.add_parser(command)
        for name, (_, default, help_text) in spec.items():
            flag = "--" + name.replace("_", "-")
            sp.add_argument(flag, dest=name, default=None, help=f"{help_text} (default: {default})")
        sp.add_argument("--config", help="key=value file; flags override it")
        sp.add_argument("--output", "-o", help="write here instead of stdout")
        sp.add_argument("--workers", type=int, default=1, help="Monte-Carlo worker threads")
        if command not in JSON_ONLY:
            sp.add_argument("--format", choices=("csv", "json"), default="csv")
    rerun = sub.add_parser("rerun", help="re-execute the manifest embedded in an output file")
    rerun.add_argument("file")
    rerun.add_argument("--output", "-o")
    rerun.add_argument("--workers", type=int, default=1)
    return parser


def _write(text: str, output: str | None) -> None:
    if output:
        with open(output, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "rerun":
            man = read_manifest(args.file)
            command = man["subcommand"]
            if command not in PARAMS:
                raise UsageError(f"unknown subcommand {command!r} in manifest")
            params = resolve(command, man["parameters"], env={})
            fmt_name = "json" if Path(args.file).read_text(encoding="utf-8").lstrip().startswith("{") else "csv"
            text = execute(command, params, fmt_name, args.workers)
        else:
            spec = PARAMS[args.command]
            flags = {name: getattr(args, name) for name in spec}
            config = read_config(args.config) if args.config else None
            params = resolve(args.command, flags, config)
            text = execute(args.command, params, getattr(args, "format", "json"), args.workers)
        _write(text, args.output)
    except (UsageError, DomainError, ValueError) as exc:
        print(f"cpmm-vol: error: {exc}", file=sys.stderr)
        parser.print_usage(sys.stderr)
        return EXIT_USAGE
    except (NumericalError, FloatingPointError, OverflowError) as exc:
        print(f"cpmm-vol: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
