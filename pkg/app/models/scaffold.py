"""Binary span-constituency scaffold trained alongside the argument model.

The scaffold reads the same span table as the argument model and is only ever
used for its loss; decoding never touches its parameters.
"""

from dataclasses import dataclass
from typing import AbstractSet, List, Optional, Tuple

import numpy as np
from scipy.special import softmax

from app.autodiff.graph import Graph, Node
from app.autodiff.params import ParameterStore
from app.core.errors import DataValidationError
from app.models.encoders import SpanTable

Span = Tuple[int, int]


@dataclass(frozen=True)
class ScaffoldParams:
    hidden_weight: str
    output_weight: str
    label_table: str


def add_scaffold(store: ParameterStore, prefix: str, span_dim: int, label_dim: int, hidden_dim: int, rng: np.random.Generator) -> ScaffoldParams:
    store.add(f"{prefix}.label", (2, label_dim), rng)
    store.add(f"{prefix}.W1", (hidden_dim, span_dim + label_dim), rng)
    store.add(f"{prefix}.w2", (hidden_dim,), rng)
    return ScaffoldParams(f"{prefix}.W1", f"{prefix}.w2", f"{prefix}.label")


def psi(graph: Graph, params: ScaffoldParams, spans: SpanTable, i: int, j: int, r: int) -> Node:
    """w~2 . reLU(W~1 [h_span; v_r])"""
    if r not in (0, 1):
        raise DataValidationError(f"scaffold label must be 0 or 1, got {r}", field="r")
    features = graph.concat([spans[(i, j)], graph.lookup(params.label_table, r)])
    hidden = graph.relu(graph.matvec(graph.param(params.hidden_weight), features))
    return graph.dot(graph.param(params.output_weight), hidden)


def candidate_spans(spans: SpanTable, max_length: int) -> List[Span]:
    return sorted(span for span in spans if span[1] - span[0] < max_length)


def scaffold_loss(
    graph: Graph,
    params: ScaffoldParams,
    spans: SpanTable,
    positives: AbstractSet[Span],
    max_length: int,
) -> Node:
    """Per-span binary logistic loss summed over every candidate span."""
    terms: List[Node] = []
    for i, j in candidate_spans(spans, max_length):
        scores = [psi(graph, params, spans, i, j, 0), psi(graph, params, spans, i, j, 1)]
        gold = 1 if (i, j) in positives else 0
        terms.append(graph.sub(graph.logsumexp(scores), scores[gold]))
    return graph.sum(terms)


def span_probabilities(graph: Graph, params: ScaffoldParams, spans: SpanTable, i: int, j: int) -> Tuple[float, float]:
    p0, p1 = softmax([psi(graph, params, spans, i, j, label).scalar() for label in (0, 1)])
    return float(p0), float(p1)


def joint_loss(graph: Graph, arg_loss: Optional[Node], scaffold: Node, delta: float) -> Node:
    """arg_loss + delta * scaffold; sentences without frame annotations have no arg_loss."""
    if delta < 0:
        raise DataValidationError(f"delta must be >= 0, got {delta}", field="delta")
    weighted = graph.scale(scaffold, delta)
    if arg_loss is None:
        return weighted
    return graph.add(arg_loss, weighted)
