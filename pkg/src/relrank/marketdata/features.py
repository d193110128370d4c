"""Feature and label construction from aligned price series.

Features per stock and day: the closing price normalized by the stock's
maximum close over the whole sample, followed by 5/10/20/30-day moving
averages of that normalized close. The first 29 days are warm-up (no full
30-day window) and are excluded from the usable day range. Labels are 1-day
return ratios on raw closes, so they are invariant to any positive rescaling
of a price series.

The per-stock maximum is taken over the entire dataset, including future
days. This look-ahead is deliberate and documented in the README; it matches
how the feature is commonly defined for this task.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import DataError
from .prices import PriceSeries

MOVING_AVERAGE_WINDOWS = (5, 10, 20, 30)
WARMUP_DAYS = max(MOVING_AVERAGE_WINDOWS) - 1
FEATURE_NAMES = ("close_norm",) + tuple(f"ma{w}" for w in MOVING_AVERAGE_WINDOWS)
N_FEATURES = len(FEATURE_NAMES)


@dataclass(frozen=True)
class FeatureTensor:
    """(stock, day, feature) array over the usable (post warm-up) days."""

    values: np.ndarray
    stock_index: dict[str, int]
    day_index: dict[str, int]

    @property
    def n_stocks(self) -> int:
        return self.values.shape[0]

    @property
    def n_days(self) -> int:
        return self.values.shape[1]

    @property
    def days(self) -> list[str]:
        return sorted(self.day_index, key=self.day_index.get)


@dataclass(frozen=True)
class ReturnMatrix:
    """(stock, day) 1-day return ratios aligned with FeatureTensor columns.

    Column ``t`` holds the return realized from usable day ``t`` to ``t+1``;
    the final usable day has no next-day close and carries no column.
    """

    values: np.ndarray
    stock_index: dict[str, int]
    day_index: dict[str, int]

    @property
    def n_days(self) -> int:
        return self.values.shape[1]


def _check_aligned(prices: list[PriceSeries]) -> tuple[list[str], int]:
    if not prices:
        raise DataError("no price series given")
    calendar = list(prices[0].dates)
    for series in prices[1:]:
        if list(series.dates) != calendar:
            raise DataError(
                f"{series.symbol}: calendar differs from {prices[0].symbol}; "
                "align_calendar first"
            )
    symbols = [s.symbol for s in prices]
    if len(set(symbols)) != len(symbols):
        raise DataError("duplicate symbols among price series")
    return calendar, len(calendar)


def moving_average(values: np.ndarray, window: int) -> np.ndarray:
    """Trailing arithmetic mean over ``window`` entries ending at each index.

    Entries before the first full window are NaN placeholders; callers drop
    the warm-up range.
    """
    out = np.full(values.shape[0], np.nan)
    cumulative = np.concatenate([[0.0], np.cumsum(values)])
    out[window - 1 :] = (cumulative[window:] - cumulative[:-window]) / window
    return out


def build_features(prices: list[PriceSeries]) -> FeatureTensor:
    """Normalized close plus moving averages over the post warm-up days."""
    calendar, n_days = _check_aligned(prices)
    if n_days < WARMUP_DAYS + 2:
        raise DataError(
            f"need at least {WARMUP_DAYS + 2} aligned days for features, got {n_days}"
        )
    n_stocks = len(prices)
    usable = n_days - WARMUP_DAYS
    values = np.empty((n_stocks, usable, N_FEATURES))
    for row, series in enumerate(prices):
        normalized = series.closes / series.closes.max()
        values[row, :, 0] = normalized[WARMUP_DAYS:]
        for col, window in enumerate(MOVING_AVERAGE_WINDOWS, start=1):
            values[row, :, col] = moving_average(normalized, window)[WARMUP_DAYS:]
    if not np.all(np.isfinite(values)):
        raise DataError("non-finite feature values")
    return FeatureTensor(
        values=values,
        stock_index={s.symbol: k for k, s in enumerate(prices)},
        day_index={day: k for k, day in enumerate(calendar[WARMUP_DAYS:])},
    )


def build_labels(prices: list[PriceSeries]) -> ReturnMatrix:
    """1-day return ratios on raw closes, aligned to the feature day range."""
    calendar, n_days = _check_aligned(prices)
    if n_days < WARMUP_DAYS + 2:
        raise DataError(
            f"need at least {WARMUP_DAYS + 2} aligned days for labels, got {n_days}"
        )
    n_stocks = len(prices)
    labeled = n_days - WARMUP_DAYS - 1
    values = np.empty((n_stocks, labeled))
    for row, series in enumerate(prices):
        closes = series.closes
        returns = (closes[1:] - closes[:-1]) / closes[:-1]
        values[row, :] = returns[WARMUP_DAYS:]
    if not np.all(np.isfinite(values)):
        raise DataError("non-finite return values")
    return ReturnMatrix(
        values=values,
        stock_index={s.symbol: k for k, s in enumerate(prices)},
        day_index={day: k for k, day in enumerate(calendar[WARMUP_DAYS : n_days - 1])},
    )
