"""Multi-hot stock relation encodings and their JSON ingestion.

Relation files carry a type table and an edge list:

    {"types": [{"name": "same_industry", "symmetric": true}, ...],
     "edges": [{"src": "GOOGL", "dst": "FB", "types": [0, 2]}, ...]}

Edges are directed src -> dst; types flagged symmetric are mirrored into the
opposite direction on load. Edges touching symbols outside the requested
universe are skipped with a logged warning.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..errors import DataError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class RelationType:
    name: str
    symmetric: bool


@dataclass
class RelationTensor:
    """Sparse (src, dst) -> set of relation-type indices over a stock universe."""

    symbols: list[str]
    type_names: list[str]
    edges: dict[tuple[int, int], frozenset[int]] = field(default_factory=dict)

    def __post_init__(self):
        n, k = self.n_stocks, self.n_types
        for (src, dst), types in self.edges.items():
            if src == dst:
                raise DataError(f"self-edge on stock index {src}")
            if not (0 <= src < n and 0 <= dst < n):
                raise DataError(f"edge ({src}, {dst}) outside universe of {n}")
            if not types:
                raise DataError(f"edge ({src}, {dst}) with empty type set")
            if any(t < 0 or t >= k for t in types):
                raise DataError(f"edge ({src}, {dst}) has type index out of range")

    @property
    def n_stocks(self) -> int:
        return len(self.symbols)

    @property
    def n_types(self) -> int:
        return len(self.type_names)

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    def type_set(self, src: int, dst: int) -> frozenset[int]:
        return self.edges.get((src, dst), frozenset())

    def multi_hot(self, src: int, dst: int) -> np.ndarray:
        out = np.zeros(self.n_types)
        for t in self.edges.get((src, dst), ()):
            out[t] = 1.0
        return out

    def dense(self) -> np.ndarray:
        """(dst, src, type) binary array: entry [i, j] is the vector for j -> i."""
        out = np.zeros((self.n_stocks, self.n_stocks, self.n_types))
        for (src, dst), types in self.edges.items():
            for t in types:
                out[dst, src, t] = 1.0
        return out


def _validate_keys(obj: dict, allowed: set[str], context: str) -> None:
    unknown = set(obj) - allowed
    if unknown:
        raise DataError(f"{context}: unknown keys {sorted(unknown)}")
    missing = allowed - set(obj)
    if missing:
        raise DataError(f"{context}: missing keys {sorted(missing)}")


def load_relations(path, universe: list[str]) -> RelationTensor:
    """Relation tensor over ``universe``, mirroring symmetric types.

    Unknown symbols are skipped (a summary warning reports the count);
    self-edges and out-of-range type indices are hard errors.
    """
    path = Path(path)
    try:
        payload = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise DataError(f"{path}: cannot read relation file: {exc}") from exc
    if not isinstance(payload, dict):
        raise DataError(f"{path}: top-level JSON must be an object")
    _validate_keys(payload, {"types", "edges"}, str(path))

    types: list[RelationType] = []
    for k, entry in enumerate(payload["types"]):
        _validate_keys(entry, {"name", "symmetric"}, f"{path}: types[{k}]")
        types.append(RelationType(str(entry["name"]), bool(entry["symmetric"])))
    n_types = len(types)

    index = {symbol: k for k, symbol in enumerate(universe)}
    if len(index) != len(universe):
        raise DataError("universe contains duplicate symbols")

    edges: dict[tuple[int, int], set[int]] = {}
    skipped = 0
    for k, entry in enumerate(payload["edges"]):
        _validate_keys(entry, {"src", "dst", "types"}, f"{path}: edges[{k}]")
        src_sym, dst_sym = str(entry["src"]), str(entry["dst"])
        type_ids = [int(t) for t in entry["types"]]
        if not type_ids:
            raise DataError(f"{path}: edges[{k}]: empty type list")
        for t in type_ids:
            if t < 0 or t >= n_types:
                raise DataError(
                    f"{path}: edges[{k}]: type index {t} out of range (K={n_types})"
                )
        if src_sym == dst_sym:
            raise DataError(f"{path}: edges[{k}]: self-edge on {src_sym}")
        if src_sym not in index or dst_sym not in index:
            skipped += 1
            continue
        src, dst = index[src_sym], index[dst_sym]
        edges.setdefault((src, dst), set()).update(type_ids)
        mirrored = {t for t in type_ids if types[t].symmetric}
        if mirrored:
            edges.setdefault((dst, src), set()).update(mirrored)
    if skipped:
        logger.warning(
            "%s: skipped %d edge(s) referencing symbols outside the universe",
            path,
            skipped,
        )
    return RelationTensor(
        symbols=list(universe),
        type_names=[t.name for t in types],
        edges={key: frozenset(val) for key, val in sorted(edges.items())},
    )


def save_relations(path, rel: RelationTensor, symmetric_types: set[int] | None = None) -> None:
    """Write a relation tensor back to the JSON wire format.

    Symmetric types are emitted once per unordered pair (src < dst); loading
    the file restores both directions.
    """
    symmetric_types = symmetric_types or set()
    emitted: dict[tuple[int, int], set[int]] = {}
    for (src, dst), types in rel.edges.items():
        for t in sorted(types):
            if t in symmetric_types and src > dst and t in rel.type_set(dst, src):
                continue  # mirror image, the (dst, src) entry covers it
            emitted.setdefault((src, dst), set()).add(t)
    payload = {
        "types": [
            {"name": name, "symmetric": k in symmetric_types}
            for k, name in enumerate(rel.type_names)
        ],
        "edges": [
            {
                "src": rel.symbols[src],
                "dst": rel.symbols[dst],
                "types": sorted(types),
            }
            for (src, dst), types in sorted(emitted.items())
        ],
    }
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
