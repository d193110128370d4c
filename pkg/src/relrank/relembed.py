"""Relational embeddings: propagation over the stock-relation graph.

Three propagation flavors share one structure. Uniform propagation averages
the embeddings of a stock's in-neighbors. The learnable variants weight each
neighbor by a relation-strength score computed from the pair's multi-hot
relation vector and, because it consumes the current embeddings, the score
moves with the market state:

* explicit mode multiplies the embedding inner product (similarity) by a
  leaky-rectified linear regression on the relation vector, then divides by
  the in-degree;
* implicit mode feeds [target embedding; neighbor embedding; relation
  vector] through one rectified linear map and normalizes the scores with a
  masked softmax over the neighbor set.

Stocks without in-neighbors receive the zero vector; the prediction layer
still sees their own sequential embedding.

The module also provides the static-graph machinery used by the baseline
models: a normalized adjacency for the one-layer graph convolution, and the
symmetric normalized Laplacian whose quadratic form penalizes score
differences across related stocks.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .diffcore import (
    Node,
    add,
    concat_vec,
    constant,
    dot,
    leaky_relu,
    masked_softmax_rows,
    matmul,
    mul,
    reshape,
    slice_vec,
    transpose,
)
from .errors import DataError, ShapeError
from .marketdata import RelationTensor


@dataclass
class NeighborIndex:
    """Per-stock in-neighbor lists with their multi-hot relation vectors."""

    n_stocks: int
    n_types: int
    neighbors: list[list[int]]
    multi_hots: list[np.ndarray]
    degrees: np.ndarray

    @cached_property
    def mask(self) -> np.ndarray:
        """(target, source) binary matrix of the in-neighbor structure."""
        out = np.zeros((self.n_stocks, self.n_stocks))
        for i, nbrs in enumerate(self.neighbors):
            out[i, nbrs] = 1.0
        return out

    @cached_property
    def relation_stack(self) -> np.ndarray:
        """(target * source, type) flattening of the relation vectors."""
        out = np.zeros((self.n_stocks * self.n_stocks, self.n_types))
        for i, nbrs in enumerate(self.neighbors):
            for pos, j in enumerate(nbrs):
                out[i * self.n_stocks + j] = self.multi_hots[i][pos]
        return out

    @cached_property
    def inv_degree(self) -> np.ndarray:
        """(stock, 1) column of 1/degree, zero for isolated stocks."""
        return np.where(
            self.degrees[:, None] > 0, 1.0 / np.maximum(self.degrees[:, None], 1), 0.0
        )


def build_neighbor_index(rel: RelationTensor) -> NeighborIndex:
    """In-neighbors of every stock, sorted by stock index."""
    incoming: list[list[int]] = [[] for _ in range(rel.n_stocks)]
    for src, dst in rel.edges:
        incoming[dst].append(src)
    neighbors = [sorted(nbrs) for nbrs in incoming]
    multi_hots = [
        np.array([rel.multi_hot(j, i) for j in nbrs]).reshape(len(nbrs), rel.n_types)
        for i, nbrs in enumerate(neighbors)
    ]
    return NeighborIndex(
        n_stocks=rel.n_stocks,
        n_types=rel.n_types,
        neighbors=neighbors,
        multi_hots=multi_hots,
        degrees=np.array([len(nbrs) for nbrs in neighbors], dtype=np.int64),
    )


@dataclass
class TgcParams:
    """Relation-strength parameters: a weight vector and a scalar bias.

    Explicit mode regresses on the relation vector alone (weight length K);
    implicit mode regresses on both embeddings and the relation vector
    (weight length 2U + K).
    """

    mode: str
    weight: Node
    bias: Node
    softmax_divide_by_degree: bool = False

    def __post_init__(self):
        if self.mode not in ("explicit", "implicit"):
            raise DataError(f"unknown TGC mode {self.mode!r}")

    @classmethod
    def from_mapping(
        cls,
        params: dict[str, Node],
        mode: str,
        prefix: str = "tgc.",
        softmax_divide_by_degree: bool = False,
    ) -> "TgcParams":
        return cls(
            mode=mode,
            weight=params[f"{prefix}weight"],
            bias=params[f"{prefix}bias"],
            softmax_divide_by_degree=softmax_divide_by_degree,
        )


def _check_tgc_dims(p: TgcParams, n_hidden: int, n_types: int) -> None:
    expected = n_types if p.mode == "explicit" else 2 * n_hidden + n_types
    if p.weight.value.shape != (expected,):
        raise ShapeError(
            f"TGC {p.mode} weight shape {p.weight.value.shape}, expected ({expected},)"
        )
    if p.bias.value.shape != ():
        raise ShapeError(f"TGC bias must be scalar, got {p.bias.value.shape}")


def relation_strength(
    mode: str, relation_vec: np.ndarray, emb_target: Node, emb_neighbor: Node, p: TgcParams
) -> Node:
    """Pre-normalization influence of one neighbor on one target stock."""
    relation_vec = np.asarray(relation_vec, dtype=np.float64)
    n_hidden = emb_target.value.shape[0]
    if emb_neighbor.value.shape != (n_hidden,) or relation_vec.ndim != 1:
        raise ShapeError(
            f"relation_strength: shapes {emb_target.value.shape}, "
            f"{emb_neighbor.value.shape}, {relation_vec.shape} disagree"
        )
    if mode == "explicit":
        if p.weight.value.shape != relation_vec.shape:
            raise ShapeError(
                f"relation_strength: weight {p.weight.value.shape} vs "
                f"relation vector {relation_vec.shape}"
            )
        similarity = dot(emb_target, emb_neighbor)
        importance = leaky_relu(add(dot(p.weight, constant(relation_vec)), p.bias))
        return mul(similarity, importance)
    if mode == "implicit":
        joint = concat_vec([emb_target, emb_neighbor, constant(relation_vec)])
        if p.weight.value.shape != joint.value.shape:
            raise ShapeError(
                f"relation_strength: weight {p.weight.value.shape} vs "
                f"joint input {joint.value.shape}"
            )
        return leaky_relu(add(dot(p.weight, joint), p.bias))
    raise DataError(f"unknown relation-strength mode {mode!r}")


def uniform_propagate(embeddings: Node, index: NeighborIndex) -> Node:
    """Average of in-neighbor embeddings; zero vector when there are none."""
    if embeddings.value.shape[0] != index.n_stocks:
        raise ShapeError(
            f"uniform_propagate: {embeddings.value.shape[0]} embedding rows for "
            f"{index.n_stocks} stocks"
        )
    return mul(matmul(constant(index.mask), embeddings), constant(index.inv_degree))


def _strength_matrix(embeddings: Node, index: NeighborIndex, p: TgcParams) -> Node:
    """(target, source) relation strengths, meaningful on the mask support."""
    n = index.n_stocks
    n_hidden = embeddings.value.shape[1]
    n_types = index.n_types
    if p.mode == "explicit":
        rel_weight = p.weight
    else:
        rel_weight = slice_vec(p.weight, 2 * n_hidden, 2 * n_hidden + n_types)
    rel_lin = add(
        reshape(
            matmul(constant(index.relation_stack), reshape(rel_weight, (n_types, 1))),
            (n, n),
        ),
        p.bias,
    )
    if p.mode == "explicit":
        similarity = matmul(embeddings, transpose(embeddings))
        return mul(similarity, leaky_relu(rel_lin))
    target_term = matmul(embeddings, reshape(slice_vec(p.weight, 0, n_hidden), (n_hidden, 1)))
    neighbor_term = transpose(
        matmul(embeddings, reshape(slice_vec(p.weight, n_hidden, 2 * n_hidden), (n_hidden, 1)))
    )
    return leaky_relu(add(add(target_term, neighbor_term), rel_lin))


def tgc_propagate(
    embeddings: Node,
    index: NeighborIndex,
    p: TgcParams,
    *,
    unit_strength: bool = False,
) -> Node:
    """Strength-weighted propagation of embeddings along in-edges.

    Explicit mode scales each neighbor by strength/degree; implicit mode
    softmax-normalizes the strengths over each neighbor set. The
    ``unit_strength`` hook replaces all strengths with 1 (explicit mode then
    reduces to uniform propagation; implicit softmax of equal scores does
    the same).
    """
    if embeddings.value.ndim != 2 or embeddings.value.shape[0] != index.n_stocks:
        raise ShapeError(
            f"tgc_propagate: embeddings {embeddings.value.shape} vs "
            f"{index.n_stocks} stocks"
        )
    _check_tgc_dims(p, embeddings.value.shape[1], index.n_types)
    mask = index.mask
    strength = (
        constant(mask) if unit_strength else _strength_matrix(embeddings, index, p)
    )
    if p.mode == "explicit":
        weighted = mul(strength, constant(mask))
        return mul(matmul(weighted, embeddings), constant(index.inv_degree))
    attention = masked_softmax_rows(strength, mask.astype(bool))
    out = matmul(attention, embeddings)
    if p.softmax_divide_by_degree:
        out = mul(out, constant(index.inv_degree))
    return out


@dataclass(frozen=True)
class NormalizedAdjacency:
    """Propagation matrix (target row, source column) with unit row sums.

    ``column`` normalization divides each target's incoming edges by its
    in-degree (the averaging form the uniform propagation reduces to);
    ``row`` divides by the source's out-degree instead.
    """

    matrix: np.ndarray
    normalization: str
    self_loops: bool


def normalized_adjacency(
    rel: RelationTensor,
    normalization: str = "column",
    self_loops: bool = False,
    symmetric: bool = False,
) -> NormalizedAdjacency:
    if normalization not in ("column", "row"):
        raise DataError(f"unknown normalization {normalization!r}")
    n = rel.n_stocks
    binary = np.zeros((n, n))
    for src, dst in rel.edges:
        binary[dst, src] = 1.0
    if symmetric:
        binary = ((binary + binary.T) > 0).astype(np.float64)
    if self_loops:
        binary = binary + np.eye(n)
    if normalization == "column":
        sums = binary.sum(axis=1, keepdims=True)
        matrix = np.divide(binary, sums, out=np.zeros_like(binary), where=sums > 0)
    else:
        sums = binary.sum(axis=0, keepdims=True)
        matrix = np.divide(binary, sums, out=np.zeros_like(binary), where=sums > 0)
    return NormalizedAdjacency(matrix=matrix, normalization=normalization, self_loops=self_loops)


def gcn_layer(embeddings: Node, adjacency: NormalizedAdjacency, weight: Node, bias: Node) -> Node:
    """One graph convolution: adjacency @ (embeddings @ weight + bias)."""
    n_hidden = embeddings.value.shape[1]
    if weight.value.shape != (n_hidden, n_hidden):
        raise ShapeError(
            f"gcn_layer: weight {weight.value.shape}, expected ({n_hidden}, {n_hidden})"
        )
    if bias.value.shape != (n_hidden,):
        raise ShapeError(f"gcn_layer: bias {bias.value.shape}, expected ({n_hidden},)")
    if adjacency.matrix.shape != (embeddings.value.shape[0],) * 2:
        raise ShapeError(
            f"gcn_layer: adjacency {adjacency.matrix.shape} vs "
            f"embeddings {embeddings.value.shape}"
        )
    return matmul(constant(adjacency.matrix), add(matmul(embeddings, weight), bias))


@dataclass(frozen=True)
class LaplacianMatrix:
    """Symmetric normalized Laplacian of the binary symmetrized graph."""

    matrix: np.ndarray
    degrees: np.ndarray


def graph_laplacian(rel: RelationTensor) -> LaplacianMatrix:
    """D^{-1/2} (D - A) D^{-1/2} over edges in either direction.

    Isolated vertices contribute zero rows and columns (0/0 treated as 0).
    """
    n = rel.n_stocks
    adjacency = np.zeros((n, n))
    for src, dst in rel.edges:
        adjacency[dst, src] = 1.0
        adjacency[src, dst] = 1.0
    degrees = adjacency.sum(axis=1)
    inv_sqrt = np.where(degrees > 0, 1.0 / np.sqrt(np.maximum(degrees, 1e-300)), 0.0)
    lap = (np.diag(degrees) - adjacency) * inv_sqrt[:, None] * inv_sqrt[None, :]
    return LaplacianMatrix(matrix=lap, degrees=degrees)


def graph_regularizer(scores: Node, laplacian: LaplacianMatrix) -> Node:
    """Quadratic smoothness penalty of a score vector over the graph."""
    n = laplacian.matrix.shape[0]
    if scores.value.shape != (n,):
        raise ShapeError(
            f"graph_regularizer: scores {scores.value.shape} vs graph of {n}"
        )
    column = reshape(scores, (n, 1))
    quad = matmul(transpose(column), matmul(constant(laplacian.matrix), column))
    return reshape(quad, ())
