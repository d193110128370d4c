"""Price ingestion, feature/label construction, relations, splits, synthesis."""

from .dataset import DatasetSplit, MarketDataset, build_dataset, chronological_split
from .features import (
    FEATURE_NAMES,
    MOVING_AVERAGE_WINDOWS,
    N_FEATURES,
    WARMUP_DAYS,
    FeatureTensor,
    ReturnMatrix,
    build_features,
    build_labels,
    moving_average,
)
from .prices import PriceSeries, align_calendar, load_price_file, load_prices
from .relations import RelationTensor, load_relations, save_relations
from .synth import SyntheticMarket, synth_market, write_market

__all__ = [
    "DatasetSplit",
    "FEATURE_NAMES",
    "FeatureTensor",
    "MarketDataset",
    "MOVING_AVERAGE_WINDOWS",
    "N_FEATURES",
    "PriceSeries",
    "RelationTensor",
    "ReturnMatrix",
    "SyntheticMarket",
    "WARMUP_DAYS",
    "align_calendar",
    "build_dataset",
    "build_features",
    "build_labels",
    "chronological_split",
    "load_price_file",
    "load_prices",
    "load_relations",
    "moving_average",
    "save_relations",
    "synth_market",
    "write_market",
]
