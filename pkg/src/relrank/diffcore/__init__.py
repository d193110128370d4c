"""Reverse-mode autodiff engine, Adam optimizer, checkpoints, gradient checks."""

from .adam import AdamState, adam_step
from .autodiff import (
    Array,
    Gradients,
    Node,
    activation,
    add,
    as_array,
    backward,
    concat_cols,
    concat_vec,
    constant,
    dot,
    leaf,
    leaky_relu,
    masked_softmax,
    masked_softmax_rows,
    matmul,
    mean,
    mul,
    neg,
    positive_part,
    reshape,
    sigmoid,
    slice_vec,
    sub,
    take_row,
    tanh,
    total,
    transpose,
    wrap_params,
)
from .checkpoint import load_checkpoint, save_checkpoint
from .gradcheck import FiniteDiffReport, finite_diff_check

__all__ = [
    "AdamState",
    "Array",
    "FiniteDiffReport",
    "Gradients",
    "Node",
    "activation",
    "add",
    "adam_step",
    "as_array",
    "backward",
    "concat_cols",
    "concat_vec",
    "constant",
    "dot",
    "finite_diff_check",
    "leaf",
    "leaky_relu",
    "load_checkpoint",
    "masked_softmax",
    "masked_softmax_rows",
    "matmul",
    "mean",
    "mul",
    "neg",
    "positive_part",
    "reshape",
    "save_checkpoint",
    "sigmoid",
    "slice_vec",
    "sub",
    "take_row",
    "tanh",
    "total",
    "transpose",
    "wrap_params",
]
