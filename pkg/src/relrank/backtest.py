"""Daily buy-hold-sell simulation over the test split, with metrics.

Each test day the strategy buys the top-k stocks by predicted score at the
close and sells them at the next close, spending the same budget every day
(equal weight within the basket). The cumulative return is therefore the
plain sum of daily mean returns — no compounding — and transaction costs
are ignored. Ranking ties break by ascending stock index so ledgers are
reproducible.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, NumericalError, ShapeError


def rank_day(scores: np.ndarray) -> np.ndarray:
    """Stock indices sorted by descending score, ties by ascending index."""
    scores = np.asarray(scores, dtype=np.float64)
    if not np.all(np.isfinite(scores)):
        raise NumericalError("rank_day: non-finite score")
    return np.lexsort((np.arange(scores.shape[0]), -scores))


def metric_mse(predictions: np.ndarray, truths: np.ndarray) -> float:
    """Mean squared error over the full (day, stock) grid."""
    predictions = np.asarray(predictions, dtype=np.float64)
    truths = np.asarray(truths, dtype=np.float64)
    if predictions.shape != truths.shape:
        raise ShapeError(
            f"metric_mse: shapes {predictions.shape} and {truths.shape} differ"
        )
    gap = predictions - truths
    return float(np.mean(gap * gap))


def true_rank(stock: int, day_truths: np.ndarray) -> int:
    """1-based rank of a stock in the descending true-return ordering."""
    r = day_truths[stock]
    better = int(np.sum(day_truths > r))
    tied_before = int(np.sum(day_truths[:stock] == r))
    return 1 + better + tied_before


@dataclass
class TradeLedger:
    """Per-day rankings, selections, realized returns, and cumulative total."""

    day_ids: list[int]
    rankings: list[np.ndarray]
    selected: list[np.ndarray]
    selected_returns: list[np.ndarray]
    day_returns: np.ndarray
    cumulative: np.ndarray
    symbols: list[str] | None = None

    @property
    def final_irr(self) -> float:
        return float(self.cumulative[-1]) if self.cumulative.size else 0.0

    def selected_symbols(self, row: int) -> list[str]:
        picks = self.selected[row]
        if self.symbols is None:
            return [str(int(i)) for i in picks]
        return [self.symbols[int(i)] for i in picks]


@dataclass(frozen=True)
class MetricsReport:
    mse: float
    mrr: float
    irr: float

    def as_dict(self) -> dict[str, float]:
        return {"mse": self.mse, "mrr": self.mrr, "irr": self.irr}


def simulate(
    scores: np.ndarray,
    returns: np.ndarray,
    top_k: int,
    day_ids: list[int] | None = None,
    symbols: list[str] | None = None,
) -> TradeLedger:
    """Run the fixed-budget strategy for a (day, stock) score matrix."""
    scores = np.asarray(scores, dtype=np.float64)
    returns = np.asarray(returns, dtype=np.float64)
    if scores.shape != returns.shape or scores.ndim != 2:
        raise ShapeError(
            f"simulate: scores {scores.shape} vs returns {returns.shape}"
        )
    if top_k < 1:
        raise ConfigError(f"simulate: top_k must be >= 1, got {top_k}")
    n_days, n_stocks = scores.shape
    day_ids = list(range(n_days)) if day_ids is None else list(day_ids)
    rankings, selected, selected_returns = [], [], []
    day_returns = np.empty(n_days)
    for d in range(n_days):
        order = rank_day(scores[d])
        picks = order[: min(top_k, n_stocks)]
        realized = returns[d, picks]
        rankings.append(order)
        selected.append(picks)
        selected_returns.append(realized)
        day_returns[d] = realized.mean()
    return TradeLedger(
        day_ids=day_ids,
        rankings=rankings,
        selected=selected,
        selected_returns=selected_returns,
        day_returns=day_returns,
        cumulative=np.cumsum(day_returns),
        symbols=symbols,
    )


def metric_mrr(ledger: TradeLedger, truths: np.ndarray) -> float:
    """Mean reciprocal true-return rank of each day's top-1 pick."""
    truths = np.asarray(truths, dtype=np.float64)
    if truths.shape[0] != len(ledger.rankings):
        raise ShapeError(
            f"metric_mrr: {truths.shape[0]} truth rows vs "
            f"{len(ledger.rankings)} ledger days"
        )
    ranks = [
        true_rank(int(ledger.rankings[d][0]), truths[d])
        for d in range(len(ledger.rankings))
    ]
    return float(np.mean([1.0 / r for r in ranks]))


def evaluate_scores(scores: np.ndarray, returns: np.ndarray, top_k: int) -> MetricsReport:
    """MSE/MRR/IRR of a score matrix against realized returns."""
    ledger = simulate(scores, returns, top_k)
    return MetricsReport(
        mse=metric_mse(scores, returns),
        mrr=metric_mrr(ledger, returns),
        irr=ledger.final_irr,
    )


def run_backtest(
    params,
    dataset,
    relations,
    config,
    top_k: int,
    oracle: bool = False,
) -> tuple[TradeLedger, MetricsReport]:
    """Score the test split with a trained model and simulate trading.

    ``oracle=True`` replaces the model's scores with the true returns,
    giving the perfect-foresight upper bound. Test days whose feature
    window does not fit (or whose next-day label is missing) are excluded.
    """
    from . import ranker  # deferred: ranker imports this module for metrics

    statics = ranker.build_statics(config, relations)
    days = ranker.eligible_days(
        dataset.split.test_days, config.window, dataset.n_labeled_days
    )
    if not days:
        raise ShapeError("run_backtest: no evaluable test days")
    returns = dataset.labels.values[:, days].T
    if oracle:
        scores = returns.copy()
    else:
        scores = ranker.predict_matrix(params, config, dataset, days, statics)
    ledger = simulate(scores, returns, top_k, day_ids=days, symbols=dataset.symbols)
    report = MetricsReport(
        mse=metric_mse(scores, returns),
        mrr=metric_mrr(ledger, returns),
        irr=ledger.final_irr,
    )
    return ledger, report


def write_ledger_csv(path, ledger: TradeLedger, dates: list[str] | None = None) -> None:
    """Rows of day, pipe-joined selected symbols, day return, cumulative."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["day", "selected_symbols", "day_return", "cumulative_irr"])
        for row, day in enumerate(ledger.day_ids):
            label = dates[row] if dates is not None else day
            writer.writerow(
                [
                    label,
                    "|".join(ledger.selected_symbols(row)),
                    repr(float(ledger.day_returns[row])),
                    repr(float(ledger.cumulative[row])),
                ]
            )


def write_curve_csv(path, ledger: TradeLedger, dates: list[str] | None = None) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["day", "cumulative_irr"])
        for row, day in enumerate(ledger.day_ids):
            label = dates[row] if dates is not None else day
            writer.writerow([label, repr(float(ledger.cumulative[row]))])


def write_report_json(path, report: MetricsReport) -> None:
    with open(path, "w") as fh:
        json.dump(report.as_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")
