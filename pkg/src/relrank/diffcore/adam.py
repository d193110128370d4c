"""Adam optimizer with bias correction over named parameter dicts."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import ShapeError
from .autodiff import Array


@dataclass
class AdamState:
    """Per-parameter moment estimates plus the shared step counter."""

    learning_rate: float = 0.001
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    step: int = 0
    first_moment: dict[str, Array] = field(default_factory=dict)
    second_moment: dict[str, Array] = field(default_factory=dict)


def adam_step(
    params: dict[str, Array], grads: dict[str, Array], state: AdamState
) -> dict[str, Array]:
    """One update over all named parameters; mutates ``state``, returns new arrays."""
    state.step += 1
    t = state.step
    updated: dict[str, Array] = {}
    for name, value in params.items():
        grad = np.asarray(grads[name], dtype=np.float64)
        if grad.shape != value.shape:
            raise ShapeError(
                f"adam_step: gradient shape {grad.shape} does not match "
                f"parameter '{name}' shape {value.shape}"
            )
        m = state.first_moment.get(name)
        v = state.second_moment.get(name)
        if m is None:
            m = np.zeros_like(value)
            v = np.zeros_like(value)
        m = state.beta1 * m + (1.0 - state.beta1) * grad
        v = state.beta2 * v + (1.0 - state.beta2) * grad * grad
        state.first_moment[name] = m
        state.second_moment[name] = v
        m_hat = m / (1.0 - state.beta1**t)
        v_hat = v / (1.0 - state.beta2**t)
        updated[name] = value - state.learning_rate * m_hat / (np.sqrt(v_hat) + state.epsilon)
    return updated
