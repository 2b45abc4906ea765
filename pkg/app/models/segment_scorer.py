from dataclasses import dataclass
from typing import Dict, Optional, Tuple

import numpy as np

from app.autodiff.graph import Graph, Node
from app.autodiff.params import ParameterStore
from app.core.errors import DataValidationError
from app.data.segments import Segment
from app.models.encoders import SpanTable

Span = Tuple[int, int]

# (lower, upper) inclusive; the last bin is open-ended
LENGTH_BINS: Tuple[Tuple[int, int], ...] = ((1, 1), (2, 2), (3, 3), (4, 4), (5, 5), (6, 7), (8, 11), (12, 15), (16, 10 ** 9))
POSITIONS: Tuple[str, ...] = ("before", "after", "overlapping", "within")
FEATURE_DIM = len(LENGTH_BINS) + len(POSITIONS)


def length_bin(length: int) -> int:
    for index, (lower, upper) in enumerate(LENGTH_BINS):
        if lower <= length <= upper:
            return index
    raise DataValidationError(f"invalid span length {length}", field="span")


def relative_position(span: Span, target: Span) -> str:
    i, j = span
    start, end = target
    if j < start:
        return "before"
    if i > end:
        return "after"
    if start <= i and j <= end:
        return "within"
    return "overlapping"


def segment_features(span: Span, target: Span) -> np.ndarray:
    """mu: one-hot length bin followed by one-hot position relative to the target."""
    features = np.zeros(FEATURE_DIM)
    features[length_bin(span[1] - span[0] + 1)] = 1.0
    features[len(LENGTH_BINS) + POSITIONS.index(relative_position(span, target))] = 1.0
    return features


@dataclass(frozen=True)
class SegmentScorer:
    role_table: str
    hidden_weight: str
    output_weight: str


def add_segment_scorer(
    store: ParameterStore,
    prefix: str,
    role_count: int,
    role_dim: int,
    span_dim: int,
    context_dim: int,
    hidden_dim: int,
    rng: np.random.Generator,
) -> SegmentScorer:
    """role_count includes row 0 for the null label."""
    store.add(f"{prefix}.role", (role_count, role_dim), rng, sparse=True)
    input_dim = span_dim + role_dim + FEATURE_DIM + context_dim
    store.add(f"{prefix}.W1", (hidden_dim, input_dim), rng)
    store.add(f"{prefix}.w2", (hidden_dim,), rng)
    return SegmentScorer(f"{prefix}.role", f"{prefix}.W1", f"{prefix}.w2")


def segment_repr(
    graph: Graph,
    scorer: SegmentScorer,
    segment: Segment,
    spans: SpanTable,
    role_rows: Dict[Optional[str], int],
    target: Span,
) -> Node:
    """v_s = [h_span; v_y; mu]. role_rows maps the frame's roles and None to table rows."""
    if segment.label not in role_rows:
        raise DataValidationError(f"role {segment.label!r} is not valid for this frame", field="role")
    span = (segment.i, segment.j)
    return graph.concat(
        [
            spans[span],
            graph.lookup(scorer.role_table, role_rows[segment.label]),
            graph.constant(segment_features(span, target)),
        ]
    )


def phi(graph: Graph, scorer: SegmentScorer, v_s: Node, v_context: Node) -> Node:
    """w2 . reLU(W1 [v_s; v_{f,l,t}])"""
    hidden = graph.relu(graph.matvec(graph.param(scorer.hidden_weight), graph.concat([v_s, v_context])))
    return graph.dot(graph.param(scorer.output_weight), hidden)
