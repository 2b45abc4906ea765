from dataclasses import dataclass
from typing import List, Sequence, Tuple

import numpy as np

from app.autodiff.graph import Graph, Node
from app.autodiff.params import ParameterStore
from app.core.errors import ShapeError

LSTMState = Tuple[Node, Node]


@dataclass(frozen=True)
class LSTMSpec:
    prefix: str
    input_dim: int
    hidden_dim: int

    @property
    def weight(self) -> str:
        return f"{self.prefix}.W"

    @property
    def bias(self) -> str:
        return f"{self.prefix}.b"


def add_lstm(store: ParameterStore, prefix: str, input_dim: int, hidden_dim: int, rng: np.random.Generator) -> LSTMSpec:
    """Registers one single-layer LSTM; gates are stacked as input, forget, output, candidate."""
    spec = LSTMSpec(prefix, input_dim, hidden_dim)
    store.add(spec.weight, (4 * hidden_dim, input_dim + hidden_dim), rng)
    bias = np.zeros(4 * hidden_dim)
    bias[hidden_dim:2 * hidden_dim] = 1.0
    store.add(spec.bias, (4 * hidden_dim,), value=bias)
    return spec


def initial_state(graph: Graph, spec: LSTMSpec) -> LSTMState:
    zeros = np.zeros(spec.hidden_dim)
    return graph.constant(zeros), graph.constant(zeros)


def lstm_step(graph: Graph, spec: LSTMSpec, x: Node, state: LSTMState) -> LSTMState:
    hidden, cell = state
    h = spec.hidden_dim
    if x.shape != (spec.input_dim,):
        raise ShapeError(f"lstm_step:{spec.prefix}", x.shape, (spec.input_dim,))
    if hidden.shape != (h,) or cell.shape != (h,):
        raise ShapeError(f"lstm_step:{spec.prefix}", hidden.shape, (h,))

    z = graph.add(graph.matvec(graph.param(spec.weight), graph.concat([x, hidden])), graph.param(spec.bias))
    input_gate = graph.sigmoid(graph.slice(z, 0, h))
    forget_gate = graph.sigmoid(graph.slice(z, h, 2 * h))
    output_gate = graph.sigmoid(graph.slice(z, 2 * h, 3 * h))
    candidate = graph.tanh(graph.slice(z, 3 * h, 4 * h))

    new_cell = graph.add(graph.mul(forget_gate, cell), graph.mul(input_gate, candidate))
    new_hidden = graph.mul(output_gate, graph.tanh(new_cell))
    return new_hidden, new_cell


def run_lstm(graph: Graph, spec: LSTMSpec, inputs: Sequence[Node], reverse: bool = False) -> List[Node]:
    """Hidden states aligned with `inputs`; a reverse run starts from the last input."""
    state = initial_state(graph, spec)
    order = range(len(inputs) - 1, -1, -1) if reverse else range(len(inputs))
    outputs: List[Node] = [None] * len(inputs)  # type: ignore[list-item]
    for position in order:
        state = lstm_step(graph, spec, inputs[position], state)
        outputs[position] = state[0]
    return outputs
