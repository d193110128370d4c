"""Dense float64 tensors with reverse-mode differentiation.

Values are numpy arrays; every operation records its inputs and a
vector-Jacobian product so that ``backward`` can accumulate gradients in
reverse topological order. Graphs are rebuilt per evaluation (define-by-run),
which keeps the engine small and makes every run deterministic: node creation
order is a topological order, and accumulation follows it exactly.

Every public operation checks its output for NaN/Inf and fails fast naming
the producing op.
"""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

from ..errors import NumericalError, ShapeError

Array = np.ndarray


def as_array(value) -> Array:
    """Coerce to a float64 ndarray without copying when already one."""
    return np.asarray(value, dtype=np.float64)


class Node:
    """One value in the computation graph, with its gradient slot."""

    __slots__ = ("value", "op", "parents", "vjps", "grad")

    def __init__(
        self,
        value,
        op: str = "leaf",
        parents: tuple["Node", ...] = (),
        vjps: tuple[Callable[[Array], Array], ...] = (),
    ):
        self.value = as_array(value)
        self.op = op
        self.parents = parents
        self.vjps = vjps
        self.grad: Array | None = None

    @property
    def shape(self) -> tuple[int, ...]:
        return self.value.shape

    def __repr__(self) -> str:
        return f"Node(op={self.op!r}, shape={self.value.shape})"

    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(other, self)

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(other, self)

    def __matmul__(self, other):
        return matmul(self, other)

    def __neg__(self):
        return neg(self)


def leaf(value) -> Node:
    """Graph input; gradients accumulate here but nothing flows past it."""
    return Node(value, op="leaf")


constant = leaf


def _as_node(value) -> Node:
    return value if isinstance(value, Node) else leaf(value)


def _make(op: str, value: Array, parents: tuple[Node, ...], vjps) -> Node:
    if not np.all(np.isfinite(value)):
        raise NumericalError(f"non-finite values produced by op '{op}'")
    return Node(value, op=op, parents=parents, vjps=vjps)


def _unbroadcast(grad: Array, shape: tuple[int, ...]) -> Array:
    """Sum a gradient over the axes numpy broadcasting introduced."""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


def add(a, b) -> Node:
    a, b = _as_node(a), _as_node(b)
    return _make(
        "add",
        a.value + b.value,
        (a, b),
        (
            lambda g: _unbroadcast(g, a.value.shape),
            lambda g: _unbroadcast(g, b.value.shape),
        ),
    )


def sub(a, b) -> Node:
    a, b = _as_node(a), _as_node(b)
    return _make(
        "sub",
        a.value - b.value,
        (a, b),
        (
            lambda g: _unbroadcast(g, a.value.shape),
            lambda g: _unbroadcast(-g, b.value.shape),
        ),
    )


def neg(a) -> Node:
    a = _as_node(a)
    return _make("neg", -a.value, (a,), (lambda g: -g,))


def mul(a, b) -> Node:
    """Elementwise product with numpy broadcasting."""
    a, b = _as_node(a), _as_node(b)
    return _make(
        "mul",
        a.value * b.value,
        (a, b),
        (
            lambda g: _unbroadcast(g * b.value, a.value.shape),
            lambda g: _unbroadcast(g * a.value, b.value.shape),
        ),
    )


def matmul(a, b) -> Node:
    """2-D matrix product."""
    a, b = _as_node(a), _as_node(b)
    if a.value.ndim != 2 or b.value.ndim != 2 or a.value.shape[1] != b.value.shape[0]:
        raise ShapeError(
            f"matmul: incompatible shapes {a.value.shape} and {b.value.shape}"
        )
    return _make(
        "matmul",
        a.value @ b.value,
        (a, b),
        (lambda g: g @ b.value.T, lambda g: a.value.T @ g),
    )


def transpose(a) -> Node:
    a = _as_node(a)
    if a.value.ndim != 2:
        raise ShapeError(f"transpose expects a matrix, got shape {a.value.shape}")
    return _make("transpose", a.value.T, (a,), (lambda g: g.T,))


def reshape(a, shape) -> Node:
    a = _as_node(a)
    old = a.value.shape
    return _make(
        "reshape", a.value.reshape(shape), (a,), (lambda g: g.reshape(old),)
    )


def concat_cols(a, b) -> Node:
    """Join two matrices with equal row counts along columns."""
    a, b = _as_node(a), _as_node(b)
    if a.value.ndim != 2 or b.value.ndim != 2 or a.value.shape[0] != b.value.shape[0]:
        raise ShapeError(
            f"concat_cols: incompatible shapes {a.value.shape} and {b.value.shape}"
        )
    split = a.value.shape[1]
    return _make(
        "concat_cols",
        np.hstack([a.value, b.value]),
        (a, b),
        (lambda g: g[:, :split], lambda g: g[:, split:]),
    )


def concat_vec(parts: Sequence) -> Node:
    """Join 1-D vectors end to end."""
    nodes = tuple(_as_node(p) for p in parts)
    for n in nodes:
        if n.value.ndim != 1:
            raise ShapeError(f"concat_vec expects vectors, got shape {n.value.shape}")
    offsets = np.cumsum([0] + [n.value.shape[0] for n in nodes])

    def make_vjp(k):
        return lambda g: g[offsets[k] : offsets[k + 1]]

    return _make(
        "concat_vec",
        np.concatenate([n.value for n in nodes]),
        nodes,
        tuple(make_vjp(k) for k in range(len(nodes))),
    )


def take_row(a, index: int) -> Node:
    """Row of a matrix as a vector; gradient scatters back into that row."""
    a = _as_node(a)
    if a.value.ndim != 2:
        raise ShapeError(f"take_row expects a matrix, got shape {a.value.shape}")
    shape = a.value.shape

    def vjp(g):
        out = np.zeros(shape)
        out[index, :] = g
        return out

    return _make("take_row", a.value[index, :], (a,), (vjp,))


def slice_vec(a, start: int, stop: int) -> Node:
    a = _as_node(a)
    if a.value.ndim != 1:
        raise ShapeError(f"slice_vec expects a vector, got shape {a.value.shape}")
    size = a.value.shape[0]

    def vjp(g):
        out = np.zeros(size)
        out[start:stop] = g
        return out

    return _make("slice_vec", a.value[start:stop], (a,), (vjp,))


def dot(u, v) -> Node:
    u, v = _as_node(u), _as_node(v)
    if u.value.shape != v.value.shape or u.value.ndim != 1:
        raise ShapeError(
            f"dot: incompatible shapes {u.value.shape} and {v.value.shape}"
        )
    return _make(
        "dot",
        np.dot(u.value, v.value),
        (u, v),
        (lambda g: g * v.value, lambda g: g * u.value),
    )


def total(a) -> Node:
    """Sum of all entries, as a scalar node."""
    a = _as_node(a)
    shape = a.value.shape
    return _make(
        "total", a.value.sum(), (a,), (lambda g: np.broadcast_to(g, shape).copy(),)
    )


def mean(a) -> Node:
    a = _as_node(a)
    shape = a.value.shape
    count = a.value.size
    return _make(
        "mean",
        a.value.mean(),
        (a,),
        (lambda g: np.broadcast_to(g / count, shape).copy(),),
    )


def sigmoid(a) -> Node:
    a = _as_node(a)
    out = 1.0 / (1.0 + np.exp(-a.value))
    return _make("sigmoid", out, (a,), (lambda g: g * out * (1.0 - out),))


def tanh(a) -> Node:
    a = _as_node(a)
    out = np.tanh(a.value)
    return _make("tanh", out, (a,), (lambda g: g * (1.0 - out * out),))


def leaky_relu(a, slope: float = 0.2) -> Node:
    a = _as_node(a)
    mask = a.value > 0
    factor = np.where(mask, 1.0, slope)
    return _make("leaky_relu", a.value * factor, (a,), (lambda g: g * factor,))


def positive_part(a) -> Node:
    """max(0, x) with subgradient 0 at the kink."""
    a = _as_node(a)
    mask = (a.value > 0).astype(np.float64)
    return _make("positive_part", a.value * mask, (a,), (lambda g: g * mask,))


def activation(kind: str, a) -> Node:
    """Elementwise nonlinearity selected by name."""
    if kind == "sigmoid":
        return sigmoid(a)
    if kind == "tanh":
        return tanh(a)
    if kind == "leaky_relu":
        return leaky_relu(a)
    raise ValueError(f"unknown activation kind: {kind!r}")


def masked_softmax(x, mask) -> Node:
    """Softmax over the True entries of ``mask``; zeros elsewhere.

    Stabilized by subtracting the masked maximum. Raises on an all-False
    mask: there is nothing to normalize over.
    """
    x = _as_node(x)
    mask = np.asarray(mask, dtype=bool)
    if x.value.ndim != 1 or mask.shape != x.value.shape:
        raise ShapeError(
            f"masked_softmax: incompatible shapes {x.value.shape} and {mask.shape}"
        )
    if not mask.any():
        raise NumericalError("masked_softmax: mask selects no entries")
    shifted = np.where(mask, x.value - x.value[mask].max(), 0.0)
    exps = np.where(mask, np.exp(shifted), 0.0)
    out = exps / exps.sum()

    def vjp(g):
        inner = (g * out).sum()
        return out * (g - inner)

    return _make("masked_softmax", out, (x,), (vjp,))


def masked_softmax_rows(x, mask) -> Node:
    """Row-wise masked softmax of a matrix.

    Unlike the vector form, a row whose mask is all False yields a zero row
    (callers use this for graph nodes without neighbors).
    """
    x = _as_node(x)
    mask = np.asarray(mask, dtype=bool)
    if x.value.ndim != 2 or mask.shape != x.value.shape:
        raise ShapeError(
            f"masked_softmax_rows: incompatible shapes {x.value.shape} and {mask.shape}"
        )
    any_row = mask.any(axis=1, keepdims=True)
    masked_vals = np.where(mask, x.value, -np.inf)
    row_max = np.where(any_row, masked_vals.max(axis=1, keepdims=True), 0.0)
    exps = np.where(mask, np.exp(np.where(mask, x.value - row_max, 0.0)), 0.0)
    denom = np.where(any_row, exps.sum(axis=1, keepdims=True), 1.0)
    out = exps / denom

    def vjp(g):
        inner = (g * out).sum(axis=1, keepdims=True)
        return out * (g - inner)

    return _make("masked_softmax_rows", out, (x,), (vjp,))


class Gradients:
    """Result of a backward pass; zero for nodes the loss never touched."""

    def __init__(self, table: dict[int, Array]):
        self._table = table

    def wrt(self, node: Node) -> Array:
        grad = self._table.get(id(node))
        if grad is None:
            return np.zeros_like(node.value)
        return grad


def _topological_order(root: Node) -> list[Node]:
    order: list[Node] = []
    seen: set[int] = set()
    stack: list[tuple[Node, bool]] = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for parent in node.parents:
            if id(parent) not in seen:
                stack.append((parent, False))
    return order


def backward(loss: Node) -> Gradients:
    """Accumulate d(loss)/d(node) for every node reachable from ``loss``.

    The loss must be scalar. Gradients are also stored on each node's
    ``grad`` slot; accumulation order is fixed, so repeated runs over an
    identical graph are bit-identical.
    """
    if loss.value.shape != ():
        raise ShapeError(f"backward expects a scalar loss, got shape {loss.value.shape}")
    order = _topological_order(loss)
    table: dict[int, Array] = {id(loss): np.ones(())}
    for node in reversed(order):
        grad = table.get(id(node))
        if grad is None:
            continue
        node.grad = grad
        for parent, vjp in zip(node.parents, node.vjps):
            contribution = vjp(grad)
            key = id(parent)
            if key in table:
                table[key] = table[key] + contribution
            else:
                table[key] = np.array(contribution, dtype=np.float64, copy=True)
    return Gradients(table)


def wrap_params(arrays: dict[str, Array]) -> dict[str, Node]:
    """Fresh leaf nodes for one forward/backward pass over named parameters."""
    return {name: leaf(value) for name, value in arrays.items()}
