"""Segmental-RNN argument identification with an optional syntactic scaffold."""

import logging
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from app.autodiff.graph import Graph, Node
from app.autodiff.lstm import LSTMSpec, add_lstm
from app.autodiff.params import ParameterStore
from app.core.config import ModelConfig
from app.core.errors import DataValidationError
from app.data.corpus import ArgInstance
from app.data.segments import Segment, Segmentation
from app.data.trees import ScaffoldInstance
from app.models.encoders import (
    FrameLUTables,
    SpanEncoder,
    SpanTable,
    TokenEncoder,
    add_frame_lu_tables,
    add_span_encoder,
    add_token_encoder,
    encode_spans,
    encode_target,
    encode_tokens,
    lookup_frame_lu,
)
from app.models.resources import Resources
from app.models.scaffold import ScaffoldParams, add_scaffold, joint_loss, scaffold_loss
from app.models.segment_scorer import SegmentScorer, add_segment_scorer, phi, segment_repr
from app.models.semimarkov import CostConfig, ScoreLattice, softmax_margin_loss, viterbi

logger = logging.getLogger("SegRNN.argid")

Span = Tuple[int, int]


@dataclass(frozen=True)
class ArgParams:
    tokens: TokenEncoder
    spans: SpanEncoder
    target: LSTMSpec
    tables: FrameLUTables
    scorer: SegmentScorer
    scaffold: Optional[ScaffoldParams] = None


class ArgumentModel:
    PREFIX = "arg"
    SCAFFOLD_PREFIX = "scaffold"

    def __init__(self, config: ModelConfig, resources: Resources, store: ParameterStore, params: ArgParams) -> None:
        self.config = config
        self.resources = resources
        self.store = store
        self.params = params
        self.cost = CostConfig(alpha=config.alpha)

    @classmethod
    def create(cls, config: ModelConfig, resources: Resources, seed: int) -> "ArgumentModel":
        rng = np.random.default_rng(seed)
        store = ParameterStore()
        prefix = cls.PREFIX
        tokens = add_token_encoder(
            store,
            prefix,
            vocab_size=len(resources.words),
            pos_size=len(resources.pos),
            pretrained=resources.pretrained.matrix,
            word_dim=config.word_dim,
            pos_dim=config.pos_dim,
            hidden_dim=config.token_hidden,
            rng=rng,
            distance_dim=config.distance_dim,
            distance_radius=config.distance_clamp,
        )
        spans = add_span_encoder(store, prefix, tokens.output_dim, config.span_hidden, rng)
        target = add_lstm(store, f"{prefix}.tgt", tokens.output_dim, config.target_hidden, rng)
        tables = add_frame_lu_tables(
            store, prefix, resources.frame_count, len(resources.lus), config.frame_dim, config.lu_dim, rng
        )
        scorer = add_segment_scorer(
            store,
            prefix,
            role_count=resources.role_count,
            role_dim=config.role_dim,
            span_dim=spans.output_dim,
            context_dim=config.frame_dim + config.lu_dim + config.target_hidden,
            hidden_dim=config.mlp_hidden,
            rng=rng,
        )
        scaffold = None
        if config.use_scaffold:
            scaffold = add_scaffold(
                store, cls.SCAFFOLD_PREFIX, spans.output_dim, config.scaffold_label_dim, config.mlp_hidden, rng
            )
        return cls(config, resources, store, ArgParams(tokens, spans, target, tables, scorer, scaffold))

    @property
    def max_length(self) -> int:
        return self.config.max_span_length

    def encode(
        self,
        graph: Graph,
        tokens: Sequence[str],
        pos: Sequence[str],
        target: Optional[Span],
        rng: Optional[np.random.Generator] = None,
    ) -> Tuple[List[Node], SpanTable]:
        """Token and span encodings. Without a target every token reads the no-target distance row."""
        inputs = self.resources.token_inputs(
            tokens,
            pos,
            None if target is None else target[0],
            self.config.distance_clamp,
            self.config.unk_probability,
            rng,
        )
        h_tok = encode_tokens(graph, self.params.tokens, inputs, self.config.dropout, rng)
        return h_tok, encode_spans(graph, self.params.spans, h_tok, self.max_length)

    def context_vector(self, graph: Graph, h_tok: Sequence[Node], target: Span, frame: str, lu: str) -> Node:
        """v_{f,l,t} = [v_f; v_l; v_t]"""
        v_f, v_l = lookup_frame_lu(graph, self.params.tables, self.resources.frame_row(frame), self.resources.lu_row(lu))
        v_t = encode_target(graph, self.params.target, h_tok, target)
        return graph.concat([v_f, v_l, v_t])

    def build_lattice(
        self,
        graph: Graph,
        tokens: Sequence[str],
        pos: Sequence[str],
        target: Span,
        lu: str,
        frame: str,
        rng: Optional[np.random.Generator] = None,
    ) -> ScoreLattice:
        h_tok, spans = self.encode(graph, tokens, pos, target, rng)
        context = self.context_vector(graph, h_tok, target, frame, lu)
        labels = self.resources.labels(frame)
        role_rows = self.resources.role_rows(frame)
        lattice_cap = self.config.null_length_cap
        n = len(tokens)

        cells: Dict[Tuple[int, int, int], Node] = {}
        for j in range(n):
            for i in range(j, max(-1, j - self.max_length), -1):
                for y, label in enumerate(labels):
                    if label is None and j - i + 1 > lattice_cap:
                        continue
                    v_s = segment_repr(graph, self.params.scorer, Segment(i, j, label), spans, role_rows, target)
                    cells[(i, j, y)] = phi(graph, self.params.scorer, v_s, context)
        return ScoreLattice(graph, n, self.max_length, labels, cells, lattice_cap)

    def instance_lattice(self, graph: Graph, instance: ArgInstance, rng: Optional[np.random.Generator] = None) -> ScoreLattice:
        return self.build_lattice(graph, instance.tokens, instance.pos, instance.target, instance.lu, instance.frame, rng)

    def instance_loss(self, graph: Graph, instance: ArgInstance, rng: Optional[np.random.Generator] = None) -> Node:
        lattice = self.instance_lattice(graph, instance, rng)
        gold = instance.gold
        if self.config.null_length_cap < self.max_length:
            gold = Segmentation.from_arguments(instance.n, gold.arguments, self.config.null_length_cap)
        return softmax_margin_loss(lattice, gold, self.cost, self.config.numerator_mode)

    def scaffold_term(self, graph: Graph, instance: ScaffoldInstance, rng: Optional[np.random.Generator] = None) -> Node:
        if self.params.scaffold is None:
            raise DataValidationError("model was built without scaffold parameters", field="use_scaffold")
        _, spans = self.encode(graph, instance.tokens, instance.pos, None, rng)
        return scaffold_loss(graph, self.params.scaffold, spans, instance.positive_spans, self.max_length)

    def sentence_loss(
        self,
        graph: Graph,
        instances: Sequence[ArgInstance],
        scaffold: Optional[ScaffoldInstance] = None,
        rng: Optional[np.random.Generator] = None,
    ) -> Node:
        """Summed softmax-margin loss of a sentence's frames, plus delta times its scaffold loss."""
        arg_loss = None
        if instances:
            arg_loss = graph.sum([self.instance_loss(graph, instance, rng) for instance in instances])
        if scaffold is None or self.params.scaffold is None:
            if arg_loss is None:
                raise DataValidationError("sentence has neither frame annotations nor a scaffold", field="sentence")
            return arg_loss
        return joint_loss(graph, arg_loss, self.scaffold_term(graph, scaffold, rng), self.config.delta)

    def lattice_scores(self, tokens: Sequence[str], pos: Sequence[str], target: Span, lu: str, frame: str) -> ScoreLattice:
        """Prediction-time lattice: no dropout, no UNK replacement."""
        return self.build_lattice(Graph(self.store), tokens, pos, target, lu, frame)

    def decode(self, tokens: Sequence[str], pos: Sequence[str], target: Span, lu: str, frame: str) -> Segmentation:
        return viterbi(self.lattice_scores(tokens, pos, target, lu, frame))
