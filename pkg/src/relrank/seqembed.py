"""LSTM cell and sequence unrolling for per-stock sequential embeddings.

The cell is applied with shared weights across all stocks at once (rows are
independent), starting from zero hidden and cell states. A stock's embedding
is its final hidden state after consuming the feature window.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .diffcore import Node, add, constant, matmul, mul, sigmoid, tanh, transpose
from .errors import ShapeError

GATE_NAMES = ("cand", "in", "forget", "out")


@dataclass
class LstmWeights:
    """Input maps (U x D), recurrent maps (U x U), and biases (U) per gate."""

    wx: dict[str, Node]
    wh: dict[str, Node]
    bias: dict[str, Node]

    @classmethod
    def from_mapping(cls, params: dict[str, Node], prefix: str = "lstm.") -> "LstmWeights":
        return cls(
            wx={g: params[f"{prefix}wx_{g}"] for g in GATE_NAMES},
            wh={g: params[f"{prefix}wh_{g}"] for g in GATE_NAMES},
            bias={g: params[f"{prefix}b_{g}"] for g in GATE_NAMES},
        )

    @property
    def n_hidden(self) -> int:
        return self.wx["cand"].value.shape[0]

    @property
    def n_features(self) -> int:
        return self.wx["cand"].value.shape[1]


@dataclass
class LstmState:
    """Hidden and cell state, one row per stock."""

    h: Node
    c: Node


def init_lstm_arrays(
    n_hidden: int, n_features: int, rng: np.random.Generator, prefix: str = "lstm."
) -> dict[str, np.ndarray]:
    """Uniform init in [-1/sqrt(U), 1/sqrt(U)]; biases start at zero."""
    limit = 1.0 / np.sqrt(n_hidden)
    arrays: dict[str, np.ndarray] = {}
    for gate in GATE_NAMES:
        arrays[f"{prefix}wx_{gate}"] = rng.uniform(-limit, limit, (n_hidden, n_features))
        arrays[f"{prefix}wh_{gate}"] = rng.uniform(-limit, limit, (n_hidden, n_hidden))
        arrays[f"{prefix}b_{gate}"] = np.zeros(n_hidden)
    return arrays


def zero_state(n_rows: int, n_hidden: int) -> LstmState:
    return LstmState(
        h=constant(np.zeros((n_rows, n_hidden))),
        c=constant(np.zeros((n_rows, n_hidden))),
    )


def _gate(x: Node, state_h: Node, weights: LstmWeights, gate: str) -> Node:
    pre = add(
        add(matmul(x, transpose(weights.wx[gate])), matmul(state_h, transpose(weights.wh[gate]))),
        weights.bias[gate],
    )
    return tanh(pre) if gate == "cand" else sigmoid(pre)


def lstm_cell(x: Node, state: LstmState, weights: LstmWeights) -> LstmState:
    """One step of the gated recurrence over a batch of row-wise inputs."""
    if x.value.ndim != 2 or x.value.shape[1] != weights.n_features:
        raise ShapeError(
            f"lstm_cell: input shape {x.value.shape} incompatible with "
            f"feature dimension {weights.n_features}"
        )
    if state.h.value.shape != (x.value.shape[0], weights.n_hidden):
        raise ShapeError(
            f"lstm_cell: state shape {state.h.value.shape} incompatible with "
            f"input rows {x.value.shape[0]} and hidden size {weights.n_hidden}"
        )
    candidate = _gate(x, state.h, weights, "cand")
    gate_in = _gate(x, state.h, weights, "in")
    gate_forget = _gate(x, state.h, weights, "forget")
    gate_out = _gate(x, state.h, weights, "out")
    cell = add(mul(gate_forget, state.c), mul(gate_in, candidate))
    hidden = mul(gate_out, tanh(cell))
    return LstmState(h=hidden, c=cell)


def sequential_embedding(window: np.ndarray, weights: LstmWeights) -> Node:
    """Final hidden state per stock over a (stock, step, feature) window."""
    window = np.asarray(window, dtype=np.float64)
    if window.ndim != 3:
        raise ShapeError(f"sequential_embedding: expected 3-D window, got {window.shape}")
    n_stocks, n_steps, n_features = window.shape
    if n_steps < 1:
        raise ShapeError("sequential_embedding: empty window")
    if n_features != weights.n_features:
        raise ShapeError(
            f"sequential_embedding: window features {n_features} != weights {weights.n_features}"
        )
    state = zero_state(n_stocks, weights.n_hidden)
    for step in range(n_steps):
        state = lstm_cell(constant(window[:, step, :]), state, weights)
    return state.h
