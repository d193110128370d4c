"""Prediction layer, combined ranking objective, training loop, grid search.

A model scores all stocks of one day jointly: the LSTM turns the feature
window into sequential embeddings, an optional relational layer revises
them, and a shared linear head maps (concatenated) embeddings to scores.
Each training day is one gradient step against the mean-squared score error
plus a hinge penalty on pairs ranked in the wrong order. The ``gbr``
baseline instead adds a Laplacian smoothness penalty on the scores.

Both loss terms are normalized (by N and N squared) so the pairwise weight
is comparable across universe sizes; set ``normalized_loss=False`` for the
raw summed form.
"""

from __future__ import annotations

import itertools
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from . import backtest
from .diffcore import (
    AdamState,
    Node,
    adam_step,
    add,
    backward,
    concat_cols,
    constant,
    matmul,
    mul,
    neg,
    positive_part,
    reshape,
    sub,
    total,
    wrap_params,
)
from .errors import ConfigError, NumericalError, ShapeError
from .marketdata import MarketDataset, RelationTensor
from .relembed import (
    LaplacianMatrix,
    NeighborIndex,
    NormalizedAdjacency,
    TgcParams,
    build_neighbor_index,
    gcn_layer,
    graph_laplacian,
    graph_regularizer,
    normalized_adjacency,
    tgc_propagate,
)
from .seqembed import LstmWeights, init_lstm_arrays, sequential_embedding

MODES = ("rank_lstm", "gbr", "gcn", "rsr_e", "rsr_i")
RELATIONAL_MODES = ("gbr", "gcn", "rsr_e", "rsr_i")

STANDARD_GRID = {
    "window": [2, 4, 8, 16],
    "hidden_units": [16, 32, 64, 128],
    "pairwise_weight": [0.1, 1.0, 10.0],
}


@dataclass(frozen=True)
class RankModelConfig:
    mode: str = "rank_lstm"
    window: int = 4
    hidden_units: int = 16
    pairwise_weight: float = 1.0
    graph_reg_weight: float = 0.1
    epochs: int = 50
    seed: int = 0
    learning_rate: float = 0.001
    normalized_loss: bool = True
    softmax_divide_by_degree: bool = False
    gcn_self_loops: bool = False

    def validate(self) -> "RankModelConfig":
        if self.mode not in MODES:
            raise ConfigError(f"unknown mode {self.mode!r}; choose from {MODES}")
        if self.window < 1 or self.hidden_units < 1:
            raise ConfigError("window and hidden_units must be positive")
        if self.pairwise_weight < 0 or self.graph_reg_weight < 0:
            raise ConfigError("loss weights must be nonnegative")
        if self.epochs < 1:
            raise ConfigError("epochs must be at least 1")
        if self.learning_rate < 0:
            raise ConfigError("learning_rate must be nonnegative")
        return self


@dataclass
class ModelParams:
    """Named parameter arrays for one mode; checkpoint round-trips losslessly."""

    mode: str
    arrays: dict[str, np.ndarray]

    def copy(self) -> "ModelParams":
        return ModelParams(self.mode, {k: v.copy() for k, v in self.arrays.items()})


@dataclass(frozen=True)
class EpochStats:
    train_loss: float
    val_mse: float
    val_mrr: float
    val_irr: float


@dataclass
class TrainHistory:
    epochs: list[EpochStats] = field(default_factory=list)
    selected_epoch: int = 0

    @property
    def selected(self) -> EpochStats:
        return self.epochs[self.selected_epoch]


def fc_input_size(mode: str, hidden_units: int) -> int:
    return hidden_units if mode in ("rank_lstm", "gbr") else 2 * hidden_units


def init_model_arrays(
    config: RankModelConfig, n_features: int, n_relation_types: int | None, rng
) -> dict[str, np.ndarray]:
    """All trainable arrays for the configured mode, in a fixed draw order."""
    u = config.hidden_units
    arrays = init_lstm_arrays(u, n_features, rng)
    if config.mode in ("rsr_e", "rsr_i"):
        if n_relation_types is None:
            raise ConfigError(f"mode {config.mode} needs a relation tensor")
        dim = n_relation_types if config.mode == "rsr_e" else 2 * u + n_relation_types
        limit = 1.0 / np.sqrt(dim)
        arrays["tgc.weight"] = rng.uniform(-limit, limit, dim)
        arrays["tgc.bias"] = np.zeros(())
    elif config.mode == "gcn":
        limit = 1.0 / np.sqrt(u)
        arrays["gcn.weight"] = rng.uniform(-limit, limit, (u, u))
        arrays["gcn.bias"] = np.zeros(u)
    fc_in = fc_input_size(config.mode, u)
    limit = 1.0 / np.sqrt(fc_in)
    arrays["fc.weight"] = rng.uniform(-limit, limit, fc_in)
    arrays["fc.bias"] = np.zeros(())
    return arrays


def predict_scores(seq_emb: Node, rel_emb: Node | None, weight: Node, bias: Node) -> Node:
    """Linear head over (concatenated) embeddings, shared across stocks."""
    joined = concat_cols(seq_emb, rel_emb) if rel_emb is not None else seq_emb
    n_stocks, width = joined.value.shape
    if weight.value.shape != (width,):
        raise ShapeError(
            f"predict_scores: weight {weight.value.shape}, expected ({width},)"
        )
    flat = reshape(matmul(joined, reshape(weight, (width, 1))), (n_stocks,))
    return add(flat, bias)


def ranking_loss(
    predicted: Node, truths, pairwise_weight: float, normalized: bool = True
) -> Node:
    """Squared score error plus a hinge on discordant score pairs."""
    truths = np.asarray(truths, dtype=np.float64)
    n = truths.shape[0]
    if predicted.value.shape != (n,):
        raise ShapeError(
            f"ranking_loss: predictions {predicted.value.shape} vs truths ({n},)"
        )
    if pairwise_weight < 0:
        raise ConfigError("pairwise_weight must be nonnegative")
    diff = sub(predicted, constant(truths))
    pointwise = total(mul(diff, diff))
    pred_gap = sub(reshape(predicted, (n, 1)), reshape(predicted, (1, n)))
    truth_gap = truths[:, None] - truths[None, :]
    hinge = total(positive_part(mul(neg(pred_gap), constant(truth_gap))))
    if normalized:
        pointwise = mul(pointwise, 1.0 / n)
        hinge = mul(hinge, 1.0 / (n * n))
    return add(pointwise, mul(hinge, float(pairwise_weight)))


@dataclass
class RelationStatics:
    """Mode-dependent precomputed relation structure reused every step."""

    index: NeighborIndex | None = None
    adjacency: NormalizedAdjacency | None = None
    laplacian: LaplacianMatrix | None = None


def build_statics(config: RankModelConfig, relations: RelationTensor | None) -> RelationStatics:
    if config.mode == "rank_lstm":
        return RelationStatics()
    if relations is None:
        raise ConfigError(f"mode {config.mode} requires relation data")
    if config.mode in ("rsr_e", "rsr_i"):
        return RelationStatics(index=build_neighbor_index(relations))
    if config.mode == "gcn":
        return RelationStatics(
            adjacency=normalized_adjacency(
                relations, symmetric=True, self_loops=config.gcn_self_loops
            )
        )
    return RelationStatics(laplacian=graph_laplacian(relations))


def score_window(
    nodes: dict[str, Node],
    config: RankModelConfig,
    window: np.ndarray,
    statics: RelationStatics,
) -> Node:
    """Forward pass: window -> embeddings -> (relational) -> scores."""
    seq_emb = sequential_embedding(window, LstmWeights.from_mapping(nodes))
    rel_emb: Node | None = None
    if config.mode in ("rsr_e", "rsr_i"):
        tgc = TgcParams.from_mapping(
            nodes,
            mode="explicit" if config.mode == "rsr_e" else "implicit",
            softmax_divide_by_degree=config.softmax_divide_by_degree,
        )
        rel_emb = tgc_propagate(seq_emb, statics.index, tgc)
    elif config.mode == "gcn":
        rel_emb = gcn_layer(seq_emb, statics.adjacency, nodes["gcn.weight"], nodes["gcn.bias"])
    return predict_scores(seq_emb, rel_emb, nodes["fc.weight"], nodes["fc.bias"])


def day_loss(
    nodes: dict[str, Node],
    config: RankModelConfig,
    window: np.ndarray,
    truths: np.ndarray,
    statics: RelationStatics,
) -> Node:
    scores = score_window(nodes, config, window, statics)
    loss = ranking_loss(scores, truths, config.pairwise_weight, config.normalized_loss)
    if config.mode == "gbr":
        penalty = graph_regularizer(scores, statics.laplacian)
        loss = add(loss, mul(penalty, float(config.graph_reg_weight)))
    return loss


def eligible_days(days, window: int, n_labeled: int) -> list[int]:
    """Days whose feature window fits and whose next-day label exists."""
    return [t for t in days if t >= window - 1 and t < n_labeled]


def predict_matrix(
    params: ModelParams,
    config: RankModelConfig,
    dataset: MarketDataset,
    days: list[int],
    statics: RelationStatics,
) -> np.ndarray:
    """(day, stock) score matrix over the given day indices."""
    features = dataset.features.values
    out = np.empty((len(days), dataset.n_stocks))
    for row, t in enumerate(days):
        nodes = wrap_params(params.arrays)
        window = features[:, t - config.window + 1 : t + 1, :]
        out[row] = score_window(nodes, config, window, statics).value
    return out


def evaluate_days(
    params: ModelParams,
    config: RankModelConfig,
    dataset: MarketDataset,
    days,
    statics: RelationStatics,
    top_k: int = 1,
) -> backtest.MetricsReport:
    usable = eligible_days(days, config.window, dataset.n_labeled_days)
    if not usable:
        raise ConfigError("no evaluable days: window exceeds the range")
    scores = predict_matrix(params, config, dataset, usable, statics)
    returns = dataset.labels.values[:, usable].T
    return backtest.evaluate_scores(scores, returns, top_k)


def train(
    dataset: MarketDataset,
    relations: RelationTensor | None,
    config: RankModelConfig,
) -> tuple[ModelParams, TrainHistory]:
    """Fit one configuration; returns parameters from the best-IRR epoch.

    Every epoch visits the eligible training days in a seed-shuffled order,
    taking one Adam step per day on the full cross-section, then scores the
    validation split. The epoch with the highest validation IRR wins, the
    earliest on ties.
    """
    config.validate()
    statics = build_statics(config, relations)
    rng = np.random.default_rng(config.seed)
    n_types = relations.n_types if relations is not None else None
    arrays = init_model_arrays(config, dataset.features.values.shape[2], n_types, rng)
    state = AdamState(learning_rate=config.learning_rate)

    features = dataset.features.values
    labels = dataset.labels.values
    train_days = eligible_days(dataset.split.train_days, config.window, dataset.n_labeled_days)

    history = TrainHistory()
    best_irr = -np.inf
    best_arrays = {k: v.copy() for k, v in arrays.items()}
    for epoch in range(config.epochs):
        epoch_loss = 0.0
        order = rng.permutation(len(train_days)) if train_days else []
        for pick in order:
            t = train_days[pick]
            nodes = wrap_params(arrays)
            window = features[:, t - config.window + 1 : t + 1, :]
            try:
                loss = day_loss(nodes, config, window, labels[:, t], statics)
                grads = backward(loss)
            except NumericalError as exc:
                raise NumericalError(
                    f"epoch {epoch}, day {t}: {exc}"
                ) from exc
            grad_map = {name: grads.wrt(node) for name, node in nodes.items()}
            arrays = adam_step(arrays, grad_map, state)
            epoch_loss += float(loss.value)
        model = ModelParams(config.mode, arrays)
        report = evaluate_days(model, config, dataset, dataset.split.val_days, statics)
        history.epochs.append(
            EpochStats(
                train_loss=epoch_loss / max(len(train_days), 1),
                val_mse=report.mse,
                val_mrr=report.mrr,
                val_irr=report.irr,
            )
        )
        if report.irr > best_irr:
            best_irr = report.irr
            best_arrays = {k: v.copy() for k, v in arrays.items()}
            history.selected_epoch = epoch
    return ModelParams(config.mode, best_arrays), history


def _toy_relation_tensor(n_stocks: int, n_types: int, rng) -> RelationTensor:
    """Connected random tensor: a directed ring plus sprinkled extra edges."""
    edges: dict[tuple[int, int], set[int]] = {}
    for i in range(n_stocks):
        edges[(i, (i + 1) % n_stocks)] = {int(rng.integers(0, n_types))}
    for i in range(n_stocks):
        for j in range(n_stocks):
            if i != j and rng.random() < 0.3:
                edges.setdefault((i, j), set()).add(int(rng.integers(0, n_types)))
    return RelationTensor(
        symbols=[f"S{k}" for k in range(n_stocks)],
        type_names=[f"t{k}" for k in range(n_types)],
        edges={key: frozenset(val) for key, val in sorted(edges.items())},
    )


def _corrupted_identity(node: Node) -> Node:
    """Identity with a deliberately wrong gradient; gradcheck harness hook."""
    return Node(node.value, op="corrupted_identity", parents=(node,), vjps=(lambda g: 1.1 * g,))


def full_model_gradient_check(
    mode: str,
    seed: int,
    n_stocks: int = 4,
    window: int = 2,
    hidden_units: int = 3,
    n_types: int = 2,
    n_features: int = 5,
    epsilon: float = 1e-5,
    corrupt: bool = False,
):
    """Finite-difference check of the complete per-day loss for one mode.

    Random features, labels, relations, and parameters are drawn from the
    seed; the check covers every trainable parameter. ``corrupt`` breaks one
    gradient on purpose so harness failures are detectable.
    """
    from .diffcore import finite_diff_check

    config = RankModelConfig(
        mode=mode, window=window, hidden_units=hidden_units, seed=seed
    ).validate()
    rng = np.random.default_rng(seed)
    relations = _toy_relation_tensor(n_stocks, n_types, rng)
    statics = build_statics(config, relations if mode in RELATIONAL_MODES else None)
    window_data = rng.normal(size=(n_stocks, window, n_features))
    truths = rng.normal(0.0, 0.05, size=n_stocks)
    arrays = init_model_arrays(
        config, n_features, relations.n_types if mode in ("rsr_e", "rsr_i") else None, rng
    )
    for name in arrays:  # random biases exercise every path
        if name.endswith("bias") or name.startswith("lstm.b_"):
            arrays[name] = rng.normal(0.0, 0.3, size=arrays[name].shape)

    def build(nodes):
        if corrupt:
            nodes = dict(nodes)
            nodes["fc.weight"] = _corrupted_identity(nodes["fc.weight"])
        return day_loss(nodes, config, window_data, truths, statics)

    return finite_diff_check(build, arrays, epsilon=epsilon)


GRID_AXES = ("window", "hidden_units", "pairwise_weight", "graph_reg_weight")


@dataclass(frozen=True)
class GridCell:
    config: RankModelConfig
    val_mse: float
    val_mrr: float
    val_irr: float
    selected_epoch: int


@dataclass
class GridSearchResult:
    best: RankModelConfig
    cells: list[GridCell]


def _grid_cell_worker(args) -> GridCell:
    dataset, relations, config = args
    _, history = train(dataset, relations, config)
    stats = history.selected
    return GridCell(
        config=config,
        val_mse=stats.val_mse,
        val_mrr=stats.val_mrr,
        val_irr=stats.val_irr,
        selected_epoch=history.selected_epoch,
    )


def grid_search(
    dataset: MarketDataset,
    relations: RelationTensor | None,
    base_config: RankModelConfig,
    grids: dict[str, list],
    workers: int = 1,
) -> GridSearchResult:
    """Exhaustive sweep over the grid axes; best validation IRR wins.

    Ties go to the lexicographically smallest setting in the fixed axis
    order (window, hidden units, pairwise weight, graph-reg weight).
    """
    if not grids:
        raise ConfigError("grid_search: empty grid")
    unknown = set(grids) - set(GRID_AXES)
    if unknown:
        raise ConfigError(f"grid_search: unknown axes {sorted(unknown)}")
    axes = [axis for axis in GRID_AXES if axis in grids]
    combos = [
        dict(zip(axes, values))
        for values in itertools.product(*(grids[axis] for axis in axes))
    ]
    configs = [replace(base_config, **combo).validate() for combo in combos]
    jobs = [(dataset, relations, config) for config in configs]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            cells = list(pool.map(_grid_cell_worker, jobs))
    else:
        cells = [_grid_cell_worker(job) for job in jobs]

    def sort_key(pair):
        cell, combo = pair
        return (-cell.val_irr, tuple(combo[axis] for axis in axes))

    ranked = sorted(zip(cells, combos), key=sort_key)
    return GridSearchResult(best=ranked[0][0].config, cells=cells)
