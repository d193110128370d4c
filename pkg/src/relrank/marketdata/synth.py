"""Synthetic markets with planted factor structure.

Each stock belongs to one latent factor. Daily log-returns are the factor's
value plus independent noise, and factor values follow a mildly persistent
AR(1) process, so stocks sharing a factor are correlated and a stock's
next-day return is partially predictable from the factor's recent level.
Averaging the histories of same-factor stocks denoises that level, which is
exactly the edge a relation-aware model can exploit. The relation tensor
carries ``same_factor`` edges inside each factor plus random ``random_link``
noise edges.

``lag_fraction`` optionally makes the trailing share of each factor's
members respond to the factor one day late (upstream stocks move first,
downstream stocks follow). Their next move is then written in their
neighbors' current returns but absent from their own history, which no
single-stock model can recover.

Everything is drawn from a single seeded generator in a fixed order, so a
given seed always reproduces the same market bit for bit.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from datetime import date, timedelta
from pathlib import Path

import numpy as np

from ..errors import DataError
from .prices import PriceSeries
from .relations import RelationTensor, save_relations

SAME_FACTOR = 0
RANDOM_LINK = 1
_TYPE_NAMES = ["same_factor", "random_link"]


@dataclass(frozen=True)
class SyntheticMarket:
    prices: list[PriceSeries]
    relations: RelationTensor
    factor_of: dict[str, int]
    lag_of: dict[str, int]


def _trading_calendar(n_days: int, start: str) -> list[str]:
    """Weekday calendar of the requested length starting at ``start``."""
    days: list[str] = []
    current = date.fromisoformat(start)
    while len(days) < n_days:
        if current.weekday() < 5:
            days.append(current.isoformat())
        current += timedelta(days=1)
    return days


def synth_market(
    n_stocks: int,
    n_days: int,
    n_factors: int,
    relation_density: float,
    noise_scale: float,
    seed: int,
    *,
    factor_persistence: float = 0.6,
    factor_vol: float = 0.01,
    lag_fraction: float = 0.0,
    start_date: str = "2013-01-02",
) -> SyntheticMarket:
    """Generate correlated geometric price paths plus their relation tensor."""
    if n_stocks <= 0 or n_days <= 0 or n_factors <= 0:
        raise DataError("synth_market: counts must be positive")
    if not 0.0 <= relation_density <= 1.0:
        raise DataError(f"synth_market: density {relation_density} outside [0, 1]")
    if not 0.0 <= lag_fraction <= 1.0:
        raise DataError(f"synth_market: lag_fraction {lag_fraction} outside [0, 1]")
    rng = np.random.default_rng(seed)
    width = max(3, len(str(n_stocks - 1)))
    symbols = [f"S{k:0{width}d}" for k in range(n_stocks)]
    factor_of = {symbols[k]: k % n_factors for k in range(n_stocks)}
    member_rank = {symbols[k]: k // n_factors for k in range(n_stocks)}
    factor_sizes = [sum(1 for s in symbols if factor_of[s] == f) for f in range(n_factors)]
    lag_of = {
        s: int(member_rank[s] >= round(factor_sizes[factor_of[s]] * (1.0 - lag_fraction)))
        for s in symbols
    }

    base_prices = rng.uniform(20.0, 180.0, size=n_stocks)
    factor_shocks = rng.normal(0.0, factor_vol, size=(n_factors, n_days - 1))
    factor_series = np.empty_like(factor_shocks)
    for f in range(n_factors):
        level = 0.0
        for t in range(n_days - 1):
            level = factor_persistence * level + factor_shocks[f, t]
            factor_series[f, t] = level
    idiosyncratic = rng.normal(0.0, 1.0, size=(n_stocks, n_days - 1))

    calendar = _trading_calendar(n_days, start_date)
    prices: list[PriceSeries] = []
    for k, symbol in enumerate(symbols):
        driver = factor_series[factor_of[symbol]]
        if lag_of[symbol]:
            driver = np.concatenate([[0.0], driver[:-1]])
        log_returns = driver + noise_scale * idiosyncratic[k]
        closes = base_prices[k] * np.exp(np.concatenate([[0.0], np.cumsum(log_returns)]))
        prices.append(PriceSeries(symbol=symbol, dates=tuple(calendar), closes=closes))

    edges: dict[tuple[int, int], set[int]] = {}
    for i in range(n_stocks):
        for j in range(i + 1, n_stocks):
            if factor_of[symbols[i]] == factor_of[symbols[j]]:
                edges.setdefault((i, j), set()).add(SAME_FACTOR)
                edges.setdefault((j, i), set()).add(SAME_FACTOR)
    for i in range(n_stocks):
        for j in range(n_stocks):
            if i != j and rng.random() < relation_density:
                edges.setdefault((i, j), set()).add(RANDOM_LINK)
    relations = RelationTensor(
        symbols=symbols,
        type_names=list(_TYPE_NAMES),
        edges={key: frozenset(val) for key, val in sorted(edges.items())},
    )
    return SyntheticMarket(
        prices=prices, relations=relations, factor_of=factor_of, lag_of=lag_of
    )


def write_market(out_dir, market: SyntheticMarket) -> None:
    """Persist a market as per-symbol CSVs, relations.json, and factors.json."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for series in market.prices:
        lines = ["date,close"]
        lines.extend(
            f"{day},{float(close)!r}" for day, close in zip(series.dates, series.closes)
        )
        (out / f"{series.symbol}.csv").write_text("\n".join(lines) + "\n")
    save_relations(out / "relations.json", market.relations, symmetric_types={SAME_FACTOR})
    (out / "factors.json").write_text(
        json.dumps(market.factor_of, indent=2, sort_keys=True) + "\n"
    )
