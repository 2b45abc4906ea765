"""Token, span and target encoders shared by the argument model and the scaffold."""

from dataclasses import dataclass
from typing import Dict, Iterator, List, Optional, Sequence, Tuple

import numpy as np

from app.autodiff.graph import Graph, Node
from app.autodiff.lstm import LSTMSpec, add_lstm, initial_state, lstm_step, run_lstm
from app.autodiff.optim import dropout_mask
from app.autodiff.params import ParameterStore
from app.core.errors import DataValidationError

Span = Tuple[int, int]


@dataclass(frozen=True)
class TokenInput:
    word_id: int
    pretrained_id: int
    pos_id: int
    # signed offset from the target start, already clamped; None when there is no target
    target_distance: Optional[int] = 0


def clamp_distance(position: int, target_start: int, radius: int) -> int:
    return max(-radius, min(radius, position - target_start))


def distance_row(target_distance: Optional[int], radius: int) -> int:
    """Rows 0..2r hold clamped offsets; row 2r+1 is reserved for sentences without a target."""
    if target_distance is None:
        return 2 * radius + 1
    return target_distance + radius


@dataclass(frozen=True)
class TokenEncoder:
    word_table: str
    pretrained_table: str
    pos_table: str
    distance_table: Optional[str]
    distance_radius: int
    forward: LSTMSpec
    backward: LSTMSpec

    @property
    def output_dim(self) -> int:
        return self.forward.hidden_dim + self.backward.hidden_dim


def add_token_encoder(
    store: ParameterStore,
    prefix: str,
    vocab_size: int,
    pos_size: int,
    pretrained: np.ndarray,
    word_dim: int,
    pos_dim: int,
    hidden_dim: int,
    rng: np.random.Generator,
    distance_dim: int = 0,
    distance_radius: int = 0,
) -> TokenEncoder:
    store.add(f"{prefix}.word", (vocab_size, word_dim), rng, sparse=True)
    store.add(f"{prefix}.pretrained", pretrained.shape, value=pretrained, frozen=True)
    store.add(f"{prefix}.pos", (pos_size, pos_dim), rng, sparse=True)
    input_dim = word_dim + pretrained.shape[1] + pos_dim
    distance_table = None
    if distance_dim > 0:
        distance_table = f"{prefix}.distance"
        store.add(distance_table, (2 * distance_radius + 2, distance_dim), rng, sparse=True)
        input_dim += distance_dim
    return TokenEncoder(
        word_table=f"{prefix}.word",
        pretrained_table=f"{prefix}.pretrained",
        pos_table=f"{prefix}.pos",
        distance_table=distance_table,
        distance_radius=distance_radius,
        forward=add_lstm(store, f"{prefix}.tok.fwd", input_dim, hidden_dim, rng),
        backward=add_lstm(store, f"{prefix}.tok.bwd", input_dim, hidden_dim, rng),
    )


def token_vector(graph: Graph, encoder: TokenEncoder, token: TokenInput) -> Node:
    """v_q = [d_q; e_q; o_q; emb(gamma_q)]."""
    parts = [
        graph.lookup(encoder.word_table, token.word_id),
        graph.lookup(encoder.pretrained_table, token.pretrained_id),
        graph.lookup(encoder.pos_table, token.pos_id),
    ]
    if encoder.distance_table is not None:
        parts.append(graph.lookup(encoder.distance_table, distance_row(token.target_distance, encoder.distance_radius)))
    return graph.concat(parts)


def encode_tokens(
    graph: Graph,
    encoder: TokenEncoder,
    tokens: Sequence[TokenInput],
    dropout: float = 0.0,
    rng: Optional[np.random.Generator] = None,
) -> List[Node]:
    """h_tok for every position; dropout is applied to inputs only when an rng is given."""
    if not tokens:
        raise DataValidationError("cannot encode an empty sentence", field="tokens")
    inputs = [token_vector(graph, encoder, token) for token in tokens]
    if rng is not None and dropout > 0.0:
        inputs = [graph.mask(node, dropout_mask(node.shape, dropout, rng)) for node in inputs]
    forward = run_lstm(graph, encoder.forward, inputs)
    backward = run_lstm(graph, encoder.backward, inputs, reverse=True)
    return [graph.concat([f, b]) for f, b in zip(forward, backward)]


@dataclass(frozen=True)
class SpanEncoder:
    forward: LSTMSpec
    backward: LSTMSpec

    @property
    def output_dim(self) -> int:
        return self.forward.hidden_dim + self.backward.hidden_dim


def add_span_encoder(store: ParameterStore, prefix: str, input_dim: int, hidden_dim: int, rng: np.random.Generator) -> SpanEncoder:
    return SpanEncoder(
        forward=add_lstm(store, f"{prefix}.span.fwd", input_dim, hidden_dim, rng),
        backward=add_lstm(store, f"{prefix}.span.bwd", input_dim, hidden_dim, rng),
    )


class SpanTable:
    """h_span for every (i, j) with j - i + 1 <= max_length."""

    def __init__(self, n: int, max_length: int, entries: Dict[Span, Node]) -> None:
        self.n = n
        self.max_length = max_length
        self.entries = entries

    def __getitem__(self, span: Span) -> Node:
        try:
            return self.entries[span]
        except KeyError as exc:
            raise DataValidationError(f"span {span} is not in the span table", field="span") from exc

    def __contains__(self, span: Span) -> bool:
        return span in self.entries

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self) -> Iterator[Span]:
        return iter(self.entries)


def span_count(n: int, max_length: int) -> int:
    return sum(min(max_length, n - i) for i in range(n))


def encode_spans(graph: Graph, encoder: SpanEncoder, h_tok: Sequence[Node], max_length: int) -> SpanTable:
    """One forward run per start and one backward run per end; their prefix states
    give every span ending (resp. starting) within max_length."""
    if max_length < 1:
        raise DataValidationError("max span length must be at least 1", field="max_span_length")
    n = len(h_tok)
    forward_states: Dict[Span, Node] = {}
    for i in range(n):
        state = initial_state(graph, encoder.forward)
        for j in range(i, min(n, i + max_length)):
            state = lstm_step(graph, encoder.forward, h_tok[j], state)
            forward_states[(i, j)] = state[0]

    backward_states: Dict[Span, Node] = {}
    for j in range(n):
        state = initial_state(graph, encoder.backward)
        for i in range(j, max(-1, j - max_length), -1):
            state = lstm_step(graph, encoder.backward, h_tok[i], state)
            backward_states[(i, j)] = state[0]

    entries = {span: graph.concat([forward_states[span], backward_states[span]]) for span in forward_states}
    return SpanTable(n, max_length, entries)


def encode_span_naive(graph: Graph, encoder: SpanEncoder, h_tok: Sequence[Node], i: int, j: int) -> Node:
    window = list(h_tok[i:j + 1])
    forward = run_lstm(graph, encoder.forward, window)[-1]
    backward = run_lstm(graph, encoder.backward, window, reverse=True)[0]
    return graph.concat([forward, backward])


def target_window(n: int, target: Span) -> range:
    start, end = target
    if not 0 <= start <= end < n:
        raise DataValidationError(f"target {list(target)} outside sentence of {n} tokens", field="target")
    return range(max(0, start - 1), min(n - 1, end + 1) + 1)


def encode_target(graph: Graph, lstm: LSTMSpec, h_tok: Sequence[Node], target: Span) -> Node:
    """Forward LSTM over the target plus one neighbour each side, skipping missing neighbours."""
    window = [h_tok[q] for q in target_window(len(h_tok), target)]
    return run_lstm(graph, lstm, window)[-1]


@dataclass(frozen=True)
class FrameLUTables:
    frame_table: str
    lu_table: str


def add_frame_lu_tables(
    store: ParameterStore, prefix: str, frame_count: int, lu_count: int, frame_dim: int, lu_dim: int, rng: np.random.Generator
) -> FrameLUTables:
    store.add(f"{prefix}.frame", (frame_count, frame_dim), rng, sparse=True)
    store.add(f"{prefix}.lu", (lu_count, lu_dim), rng, sparse=True)
    return FrameLUTables(f"{prefix}.frame", f"{prefix}.lu")


def lookup_frame_lu(graph: Graph, tables: FrameLUTables, frame_id: int, lu_id: int) -> Tuple[Node, Node]:
    return graph.lookup(tables.frame_table, frame_id), graph.lookup(tables.lu_table, lu_id)
