"""Chronological splits and the assembled training dataset."""

from __future__ import annotations

from dataclasses import dataclass

from ..errors import DataError
from .features import FeatureTensor, ReturnMatrix, build_features, build_labels
from .prices import PriceSeries, align_calendar


@dataclass(frozen=True)
class DatasetSplit:
    """Contiguous train/validation/test day ranges, in chronological order."""

    train_days: range
    val_days: range
    test_days: range

    @property
    def n_days(self) -> int:
        return len(self.train_days) + len(self.val_days) + len(self.test_days)


def chronological_split(n_days: int, boundaries: tuple[int, int]) -> DatasetSplit:
    """Split days [0, n_days) at the two boundaries: train < val < test."""
    b1, b2 = boundaries
    if not 0 < b1 < b2 < n_days:
        raise DataError(
            f"split boundaries must satisfy 0 < {b1} < {b2} < {n_days}"
        )
    return DatasetSplit(
        train_days=range(0, b1),
        val_days=range(b1, b2),
        test_days=range(b2, n_days),
    )


@dataclass(frozen=True)
class MarketDataset:
    """Features, labels, and split over one aligned stock universe."""

    symbols: list[str]
    features: FeatureTensor
    labels: ReturnMatrix
    split: DatasetSplit

    @property
    def n_stocks(self) -> int:
        return len(self.symbols)

    @property
    def n_labeled_days(self) -> int:
        return self.labels.values.shape[1]


def build_dataset(
    prices: list[PriceSeries],
    boundaries: tuple[int, int] | None = None,
    fractions: tuple[float, float] | None = None,
) -> MarketDataset:
    """Align, featurize, label, and split a set of price series.

    Pass either absolute ``boundaries`` (day indices over the labeled range)
    or ``fractions`` (train and validation shares of the labeled days).
    """
    aligned, _ = align_calendar(prices)
    features = build_features(aligned)
    labels = build_labels(aligned)
    n_labeled = labels.values.shape[1]
    if (boundaries is None) == (fractions is None):
        raise DataError("give exactly one of boundaries or fractions")
    if fractions is not None:
        train_frac, val_frac = fractions
        if not (0 < train_frac and 0 < val_frac and train_frac + val_frac < 1):
            raise DataError(f"bad split fractions ({train_frac}, {val_frac})")
        boundaries = (
            int(round(n_labeled * train_frac)),
            int(round(n_labeled * (train_frac + val_frac))),
        )
    split = chronological_split(n_labeled, boundaries)
    return MarketDataset(
        symbols=[s.symbol for s in aligned],
        features=features,
        labels=labels,
        split=split,
    )
