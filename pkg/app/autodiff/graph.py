"""Reverse-mode automatic differentiation over an append-only node list.

Every operation appends a node whose inputs already exist, so the list is a
topological order and backward simply walks it in reverse. Values are float64
numpy arrays: vectors are 1-D, scalars have shape (1,), weight matrices are 2-D.
"""

from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Set, Tuple

import numpy as np
from scipy.special import expit
from scipy.special import logsumexp as _logsumexp

from app.autodiff.params import ParameterStore
from app.core.errors import GraphError, ShapeError

BackwardFn = Callable[[np.ndarray], Sequence[Optional[np.ndarray]]]


class Node:
    __slots__ = ("graph", "index")

    def __init__(self, graph: "Graph", index: int) -> None:
        self.graph = graph
        self.index = index

    @property
    def value(self) -> np.ndarray:
        return self.graph.values[self.index]

    @property
    def shape(self) -> Tuple[int, ...]:
        return tuple(self.value.shape)

    def scalar(self) -> float:
        return float(self.value[0])

    def __repr__(self) -> str:
        return f"Node(index={self.index}, shape={self.shape})"


@dataclass
class Gradients:
    values: Dict[str, np.ndarray] = field(default_factory=dict)
    touched_rows: Dict[str, Set[int]] = field(default_factory=dict)

    def __getitem__(self, name: str) -> np.ndarray:
        return self.values[name]

    def global_norm(self) -> float:
        total = 0.0
        for grad in self.values.values():
            total += float(np.sum(grad * grad))
        return float(np.sqrt(total))

    def scaled(self, factor: float) -> "Gradients":
        return Gradients(
            {name: grad * factor for name, grad in self.values.items()},
            {name: set(rows) for name, rows in self.touched_rows.items()},
        )


class Graph:
    def __init__(self, store: Optional[ParameterStore] = None) -> None:
        self.store = store if store is not None else ParameterStore()
        self.values: List[np.ndarray] = []
        self._parents: List[Tuple[int, ...]] = []
        self._backward: List[Optional[BackwardFn]] = []
        self._param_nodes: Dict[str, Node] = {}
        self._lookups: List[Tuple[int, str, int]] = []
        self._grads: Optional[List[Optional[np.ndarray]]] = None

    def __len__(self) -> int:
        return len(self.values)

    def _record(self, value: np.ndarray, parents: Tuple[Node, ...] = (), backward: Optional[BackwardFn] = None) -> Node:
        for parent in parents:
            if parent.graph is not self:
                raise GraphError("Node belongs to a different graph")
        self.values.append(value)
        self._parents.append(tuple(parent.index for parent in parents))
        self._backward.append(backward)
        return Node(self, len(self.values) - 1)

    # leaves

    def constant(self, value) -> Node:
        return self._record(np.array(value, dtype=np.float64, ndmin=1))

    def scalar(self, value: float) -> Node:
        return self._record(np.array([value], dtype=np.float64))

    def variable(self, value) -> Node:
        """A leaf whose gradient is readable with grad() after backward()."""
        return self._record(np.array(value, dtype=np.float64, ndmin=1))

    def param(self, name: str) -> Node:
        node = self._param_nodes.get(name)
        if node is None:
            param = self.store[name]
            node = self._record(param.value)
            if not param.frozen:
                self._param_nodes[name] = node
        return node

    def lookup(self, name: str, row: int) -> Node:
        param = self.store[name]
        rows = param.value.shape[0]
        if not 0 <= row < rows:
            raise ShapeError(f"lookup:{name}", (row,), param.value.shape)
        node = self._record(param.value[row].copy())
        if not param.frozen:
            self._lookups.append((node.index, name, row))
        return node

    # linear algebra

    def matvec(self, matrix: Node, vector: Node) -> Node:
        W, x = matrix.value, vector.value
        if W.ndim != 2 or x.ndim != 1 or W.shape[1] != x.shape[0]:
            raise ShapeError("matvec", W.shape, x.shape)

        def backward(g: np.ndarray):
            return np.outer(g, x), W.T @ g

        return self._record(W @ x, (matrix, vector), backward)

    def dot(self, left: Node, right: Node) -> Node:
        a, b = left.value, right.value
        if a.shape != b.shape or a.ndim != 1:
            raise ShapeError("dot", a.shape, b.shape)

        def backward(g: np.ndarray):
            return g[0] * b, g[0] * a

        return self._record(np.array([a @ b]), (left, right), backward)

    def add(self, left: Node, right: Node) -> Node:
        a, b = left.value, right.value
        if a.shape != b.shape:
            raise ShapeError("add", a.shape, b.shape)
        return self._record(a + b, (left, right), lambda g: (g, g))

    def sub(self, left: Node, right: Node) -> Node:
        a, b = left.value, right.value
        if a.shape != b.shape:
            raise ShapeError("sub", a.shape, b.shape)
        return self._record(a - b, (left, right), lambda g: (g, -g))

    def mul(self, left: Node, right: Node) -> Node:
        a, b = left.value, right.value
        if a.shape != b.shape:
            raise ShapeError("mul", a.shape, b.shape)
        return self._record(a * b, (left, right), lambda g: (g * b, g * a))

    def scale(self, node: Node, factor: float) -> Node:
        factor = float(factor)
        return self._record(node.value * factor, (node,), lambda g: (g * factor,))

    def add_constant(self, node: Node, offset: float) -> Node:
        return self._record(node.value + float(offset), (node,), lambda g: (g,))

    def mask(self, node: Node, mask: np.ndarray) -> Node:
        if mask.shape != node.value.shape:
            raise ShapeError("mask", node.value.shape, mask.shape)
        mask = np.asarray(mask, dtype=np.float64)
        return self._record(node.value * mask, (node,), lambda g: (g * mask,))

    def concat(self, nodes: Sequence[Node]) -> Node:
        if not nodes:
            raise GraphError("concat needs at least one input")
        for node in nodes:
            if node.value.ndim != 1:
                raise ShapeError("concat", nodes[0].value.shape, node.value.shape)
        sizes = [node.value.shape[0] for node in nodes]
        bounds = np.cumsum([0] + sizes)

        def backward(g: np.ndarray):
            return [g[bounds[k]:bounds[k + 1]] for k in range(len(sizes))]

        return self._record(np.concatenate([node.value for node in nodes]), tuple(nodes), backward)

    def slice(self, node: Node, start: int, stop: int) -> Node:
        x = node.value
        if x.ndim != 1 or not 0 <= start < stop <= x.shape[0]:
            raise ShapeError("slice", x.shape, (start, stop))

        def backward(g: np.ndarray):
            full = np.zeros_like(x)
            full[start:stop] = g
            return (full,)

        return self._record(x[start:stop].copy(), (node,), backward)

    def pick(self, node: Node, index: int) -> Node:
        x = node.value
        if x.ndim != 1 or not 0 <= index < x.shape[0]:
            raise ShapeError("pick", x.shape, (index,))

        def backward(g: np.ndarray):
            full = np.zeros_like(x)
            full[index] = g[0]
            return (full,)

        return self._record(np.array([x[index]]), (node,), backward)

    # nonlinearities

    def relu(self, node: Node) -> Node:
        x = node.value
        active = (x > 0).astype(np.float64)
        return self._record(x * active, (node,), lambda g: (g * active,))

    def sigmoid(self, node: Node) -> Node:
        y = expit(node.value)
        return self._record(y, (node,), lambda g: (g * y * (1.0 - y),))

    def tanh(self, node: Node) -> Node:
        y = np.tanh(node.value)
        return self._record(y, (node,), lambda g: (g * (1.0 - y * y),))

    # reductions over lists of scalars

    def logsumexp(self, nodes: Sequence[Node]) -> Node:
        if not nodes:
            raise GraphError("logsumexp needs at least one input")
        for node in nodes:
            if node.value.shape != (1,):
                raise ShapeError("logsumexp", (1,), node.value.shape)
        xs = np.array([node.value[0] for node in nodes])
        total = float(_logsumexp(xs))
        weights = np.exp(xs - total)

        def backward(g: np.ndarray):
            return [np.array([g[0] * w]) for w in weights]

        return self._record(np.array([total]), tuple(nodes), backward)

    def sum(self, nodes: Sequence[Node]) -> Node:
        if not nodes:
            return self.scalar(0.0)
        shape = nodes[0].value.shape
        total = np.zeros(shape)
        for node in nodes:
            if node.value.shape != shape:
                raise ShapeError("sum", shape, node.value.shape)
            total = total + node.value
        return self._record(total, tuple(nodes), lambda g: [g] * len(nodes))

    # backward

    def backward(self, loss: Node) -> Gradients:
        if loss.graph is not self:
            raise GraphError("Loss node belongs to a different graph")
        if loss.value.shape != (1,):
            raise GraphError(f"Loss must be a scalar node, got shape {loss.value.shape}")

        grads: List[Optional[np.ndarray]] = [None] * len(self.values)
        grads[loss.index] = np.ones(1)
        for index in range(loss.index, -1, -1):
            grad = grads[index]
            backward = self._backward[index]
            if grad is None or backward is None:
                continue
            for parent, parent_grad in zip(self._parents[index], backward(grad)):
                if parent_grad is None:
                    continue
                current = grads[parent]
                grads[parent] = parent_grad if current is None else current + parent_grad
        self._grads = grads

        result = Gradients()
        for param in self.store.trainable():
            result.values[param.name] = np.zeros_like(param.value)
        for name, node in self._param_nodes.items():
            grad = grads[node.index]
            if grad is not None:
                result.values[name] = result.values[name] + grad
        for index, name, row in self._lookups:
            grad = grads[index]
            if grad is None:
                continue
            result.values[name][row] += grad
            result.touched_rows.setdefault(name, set()).add(row)
        return result

    def grad(self, node: Node) -> np.ndarray:
        if self._grads is None:
            raise GraphError("backward() has not been run on this graph")
        grad = self._grads[node.index]
        return np.zeros_like(node.value) if grad is None else grad
