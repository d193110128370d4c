"""Central finite-difference checking of analytic gradients."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from ..errors import NumericalError
from .autodiff import Array, Node, backward, wrap_params

LossBuilder = Callable[[dict[str, Node]], Node]


@dataclass
class FiniteDiffReport:
    """Worst relative error overall and per parameter."""

    max_rel_err: float
    per_param: dict[str, float]

    def ok(self, tolerance: float) -> bool:
        return self.max_rel_err < tolerance


def _evaluate(build_loss: LossBuilder, arrays: dict[str, Array]) -> float:
    loss = build_loss(wrap_params(arrays))
    value = float(loss.value)
    if not np.isfinite(value):
        raise NumericalError("finite_diff_check: loss is not finite")
    return value


def finite_diff_check(
    build_loss: LossBuilder,
    params: dict[str, Array],
    epsilon: float = 1e-5,
) -> FiniteDiffReport:
    """Compare analytic gradients of ``build_loss`` against central differences.

    ``build_loss`` receives freshly wrapped parameter nodes and returns the
    scalar loss node; it is re-run twice per parameter coordinate. Relative
    error per coordinate is |a - n| / max(1e-8, |a| + |n|).
    """
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    nodes = wrap_params(params)
    grads = backward(build_loss(nodes))
    analytic = {name: grads.wrt(node) for name, node in nodes.items()}

    per_param: dict[str, float] = {}
    for name in params:
        base = params[name]
        worst = 0.0
        flat = base.reshape(-1)
        for i in range(flat.size):
            original = flat[i]
            flat[i] = original + epsilon
            plus = _evaluate(build_loss, params)
            flat[i] = original - epsilon
            minus = _evaluate(build_loss, params)
            flat[i] = original
            numeric = (plus - minus) / (2.0 * epsilon)
            a = float(analytic[name].reshape(-1)[i])
            rel = abs(a - numeric) / max(1e-8, abs(a) + abs(numeric))
            worst = max(worst, rel)
        per_param[name] = worst
    overall = max(per_param.values()) if per_param else 0.0
    return FiniteDiffReport(max_rel_err=overall, per_param=per_param)
