"""Closing-price ingestion and trading-calendar alignment.

Price files live one per symbol in a directory, named ``<SYMBOL>.csv`` with
header ``date,close``; dates are ISO ``YYYY-MM-DD`` and closes are positive
decimals. The usable calendar is the intersection of all series' dates:
stocks with gaps must be filtered upstream, this layer never imputes.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from datetime import date
from pathlib import Path

import numpy as np

from ..errors import DataError


@dataclass(frozen=True)
class PriceSeries:
    """Daily closes for one symbol, dates strictly increasing."""

    symbol: str
    dates: tuple[str, ...]
    closes: np.ndarray

    def __post_init__(self):
        closes = np.asarray(self.closes, dtype=np.float64)
        object.__setattr__(self, "closes", closes)
        if len(self.dates) != closes.shape[0]:
            raise DataError(
                f"{self.symbol}: {len(self.dates)} dates vs {closes.shape[0]} closes"
            )
        if closes.size and closes.min() <= 0:
            raise DataError(f"{self.symbol}: non-positive price")
        if any(a >= b for a, b in zip(self.dates, self.dates[1:])):
            raise DataError(f"{self.symbol}: dates not strictly increasing")

    def __len__(self) -> int:
        return len(self.dates)

    def restricted_to(self, calendar: list[str]) -> "PriceSeries":
        """Series limited to the given dates, order preserved."""
        wanted = set(calendar)
        keep = [k for k, d in enumerate(self.dates) if d in wanted]
        return PriceSeries(
            symbol=self.symbol,
            dates=tuple(self.dates[k] for k in keep),
            closes=self.closes[keep],
        )


def _parse_iso_date(text: str) -> str:
    date.fromisoformat(text)
    return text


def load_price_file(path: Path) -> PriceSeries:
    symbol = path.stem
    rows: list[tuple[str, float]] = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [c.strip().lower() for c in header] != ["date", "close"]:
            raise DataError(f"{path}: expected header 'date,close', got {header}")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 2:
                raise DataError(f"{path}:{lineno}: expected 2 fields, got {len(row)}")
            try:
                day = _parse_iso_date(row[0].strip())
                close = float(row[1])
            except ValueError as exc:
                raise DataError(f"{path}:{lineno}: malformed row: {exc}") from exc
            if not np.isfinite(close) or close <= 0:
                raise DataError(f"{path}:{lineno}: non-positive price {row[1]}")
            rows.append((day, close))
    rows.sort(key=lambda item: item[0])
    for (d1, _), (d2, _) in zip(rows, rows[1:]):
        if d1 == d2:
            raise DataError(f"{path}: duplicate date {d1}")
    return PriceSeries(
        symbol=symbol,
        dates=tuple(day for day, _ in rows),
        closes=np.array([close for _, close in rows]),
    )


def load_prices(path) -> list[PriceSeries]:
    """All ``*.csv`` series under a directory, sorted by symbol."""
    root = Path(path)
    if not root.is_dir():
        raise DataError(f"{root}: not a directory")
    files = sorted(root.glob("*.csv"))
    if not files:
        raise DataError(f"{root}: no price CSV files found")
    series = [load_price_file(f) for f in files]
    symbols = [s.symbol for s in series]
    if len(set(symbols)) != len(symbols):
        raise DataError(f"{root}: duplicate symbols among price files")
    return series


def align_calendar(prices: list[PriceSeries]) -> tuple[list[PriceSeries], list[str]]:
    """Restrict every series to the dates all of them share.

    Returns the aligned series (input order preserved) and the shared
    calendar in chronological order.
    """
    if not prices:
        raise DataError("align_calendar: no price series given")
    shared = set(prices[0].dates)
    for series in prices[1:]:
        shared &= set(series.dates)
    if not shared:
        raise DataError("align_calendar: series share no trading days")
    calendar = sorted(shared)
    return [s.restricted_to(calendar) for s in prices], calendar
