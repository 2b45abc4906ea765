from dataclasses import dataclass, field
from typing import Dict, Sequence

import numpy as np

from app.autodiff.graph import Gradients
from app.autodiff.params import ParameterStore
from app.core.errors import GraphError, ShapeError


@dataclass
class OptimizerState:
    learning_rate: float = 0.0005
    beta1: float = 0.01
    beta2: float = 0.9999
    epsilon: float = 1e-8
    step: int = 0
    first_moment: Dict[str, np.ndarray] = field(default_factory=dict)
    second_moment: Dict[str, np.ndarray] = field(default_factory=dict)

    @classmethod
    def for_store(cls, store: ParameterStore, learning_rate: float, beta1: float, beta2: float, epsilon: float) -> "OptimizerState":
        state = cls(learning_rate=learning_rate, beta1=beta1, beta2=beta2, epsilon=epsilon)
        for param in store.trainable():
            state.first_moment[param.name] = np.zeros_like(param.value)
            state.second_moment[param.name] = np.zeros_like(param.value)
        return state


def adam_step(state: OptimizerState, store: ParameterStore, gradients: Gradients) -> None:
    """Bias-corrected Adam update, in place. Lookup tables only move the rows a graph touched."""
    state.step += 1
    t = state.step
    correction1 = 1.0 - state.beta1 ** t
    correction2 = 1.0 - state.beta2 ** t

    for param in store.trainable():
        grad = gradients.values.get(param.name)
        if grad is None:
            continue
        if grad.shape != param.value.shape:
            raise ShapeError(f"adam:{param.name}", param.value.shape, grad.shape)
        m = state.first_moment.setdefault(param.name, np.zeros_like(param.value))
        v = state.second_moment.setdefault(param.name, np.zeros_like(param.value))

        if param.sparse:
            rows = sorted(gradients.touched_rows.get(param.name, ()))
            if not rows:
                continue
            index = np.array(rows, dtype=np.int64)
            g = grad[index]
            m[index] = state.beta1 * m[index] + (1.0 - state.beta1) * g
            v[index] = state.beta2 * v[index] + (1.0 - state.beta2) * g * g
            m_hat = m[index] / correction1
            v_hat = v[index] / correction2
            param.value[index] -= state.learning_rate * m_hat / (np.sqrt(v_hat) + state.epsilon)
            continue

        m *= state.beta1
        m += (1.0 - state.beta1) * grad
        v *= state.beta2
        v += (1.0 - state.beta2) * grad * grad
        m_hat = m / correction1
        v_hat = v / correction2
        param.value -= state.learning_rate * m_hat / (np.sqrt(v_hat) + state.epsilon)


def clip_gradients(gradients: Gradients, max_norm: float = 5.0) -> Gradients:
    norm = gradients.global_norm()
    if norm <= max_norm or norm == 0.0:
        return gradients
    return gradients.scaled(max_norm / norm)


def dropout_mask(shape: Sequence[int], rate: float, rng: np.random.Generator) -> np.ndarray:
    """Inverted dropout: kept entries are scaled by 1 / (1 - rate)."""
    if not 0.0 <= rate < 1.0:
        raise GraphError(f"dropout rate must be in [0, 1), got {rate}")
    shape = tuple(shape)
    if rate == 0.0:
        return np.ones(shape)
    keep = rng.random(shape) >= rate
    return keep.astype(np.float64) / (1.0 - rate)
