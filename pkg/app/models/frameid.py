"""Frame identification: choose the frame a target evokes among its lexical unit's candidates."""

import logging
from dataclasses import dataclass
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np
from scipy.special import softmax

from app.autodiff.graph import Graph, Node
from app.autodiff.lstm import LSTMSpec, add_lstm
from app.autodiff.params import ParameterStore
from app.core.config import ModelConfig
from app.core.errors import DataValidationError
from app.data.corpus import AnnotatedSentence, instance_id
from app.models.encoders import TokenEncoder, add_token_encoder, encode_target, encode_tokens
from app.models.resources import Resources


logger = logging.getLogger("SegRNN.frameid")

Span = Tuple[int, int]


@dataclass(frozen=True)
class FrameIdInstance:
    instance_id: str
    tokens: Tuple[str, ...]
    pos: Tuple[str, ...]
    target: Span
    lu: str
    frame: Optional[str] = None


def build_frame_instances(sentences: Sequence[AnnotatedSentence]) -> List[FrameIdInstance]:
    return [
        FrameIdInstance(instance_id(s_index, a_index), sentence.tokens, sentence.pos, annotation.target, annotation.lu, annotation.frame)
        for s_index, sentence in enumerate(sentences)
        for a_index, annotation in enumerate(sentence.annotations)
    ]


@dataclass(frozen=True)
class FrameIdParams:
    tokens: TokenEncoder
    target: LSTMSpec
    lu_table: str
    w3_table: str
    w4_table: str


class FrameIdentifier:
    PREFIX = "frameid"

    def __init__(self, config: ModelConfig, resources: Resources, store: ParameterStore, params: FrameIdParams) -> None:
        self.config = config
        self.resources = resources
        self.store = store
        self.params = params

    @classmethod
    def create(cls, config: ModelConfig, resources: Resources, seed: int) -> "FrameIdentifier":
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
            hidden_dim=config.frame_hidden,
            rng=rng,
        )
        target = add_lstm(store, f"{prefix}.tgt", tokens.output_dim, config.frame_hidden, rng)
        store.add(f"{prefix}.lu", (len(resources.lus), config.lu_dim), rng, sparse=True)
        store.add(f"{prefix}.w3", (resources.frame_count, 1), rng, sparse=True)
        store.add(f"{prefix}.w4", (resources.frame_count, config.frame_hidden + config.lu_dim), rng, sparse=True)
        params = FrameIdParams(tokens, target, f"{prefix}.lu", f"{prefix}.w3", f"{prefix}.w4")
        return cls(config, resources, store, params)

    def candidates(self, lu: str) -> Tuple[str, ...]:
        return self.resources.ontology.candidates(lu)

    def encode_sentence(
        self, graph: Graph, tokens: Sequence[str], pos: Sequence[str], rng: Optional[np.random.Generator] = None
    ) -> List[Node]:
        """One biLSTM pass shared by every target in the sentence."""
        inputs = self.resources.token_inputs(tokens, pos, unk_probability=self.config.unk_probability, rng=rng)
        return encode_tokens(graph, self.params.tokens, inputs, self.config.dropout, rng)

    def frame_scores(self, graph: Graph, h_tok: Sequence[Node], target: Span, lu: str) -> Dict[str, Node]:
        """nu(f) = w3_f * reLU(w4_f . [u_t; u_l]) for f in F_l."""
        u_t = encode_target(graph, self.params.target, h_tok, target)
        u_l = graph.lookup(self.params.lu_table, self.resources.lu_row(lu))
        context = graph.concat([u_t, u_l])
        scores: Dict[str, Node] = {}
        for frame in self.candidates(lu):
            row = self.resources.frame_row(frame)
            hidden = graph.relu(graph.dot(graph.lookup(self.params.w4_table, row), context))
            scores[frame] = graph.mul(graph.lookup(self.params.w3_table, row), hidden)
        return scores

    def instance_scores(self, instance: FrameIdInstance) -> Dict[str, float]:
        graph = Graph(self.store)
        h_tok = self.encode_sentence(graph, instance.tokens, instance.pos)
        return {frame: node.scalar() for frame, node in self.frame_scores(graph, h_tok, instance.target, instance.lu).items()}

    def sentence_scores(self, tokens: Sequence[str], pos: Sequence[str], targets: Sequence[Tuple[Span, str]]) -> List[Dict[str, float]]:
        graph = Graph(self.store)
        h_tok = self.encode_sentence(graph, tokens, pos)
        return [
            {frame: node.scalar() for frame, node in self.frame_scores(graph, h_tok, target, lu).items()}
            for target, lu in targets
        ]

    def loss(self, graph: Graph, instance: FrameIdInstance, rng: Optional[np.random.Generator] = None) -> Optional[Node]:
        if instance.frame not in self.candidates(instance.lu):
            logger.warning("Skipping %s: gold frame %s not among candidates of %s", instance.instance_id, instance.frame, instance.lu)
            return None
        h_tok = self.encode_sentence(graph, instance.tokens, instance.pos, rng)
        return frameid_loss(graph, self.frame_scores(graph, h_tok, instance.target, instance.lu), instance.frame)


def frame_posterior(scores: Mapping[str, float]) -> Dict[str, float]:
    if not scores:
        raise DataValidationError("no candidate frames to normalise", field="frames")
    names = list(scores.keys())
    probabilities = softmax(np.array([scores[name] for name in names], dtype=np.float64))
    return {name: float(p) for name, p in zip(names, probabilities)}


def frameid_loss(graph: Graph, scores: Mapping[str, Node], gold: str) -> Node:
    """-log p(gold) with the softmax restricted to the candidate frames."""
    if gold not in scores:
        raise DataValidationError(f"gold frame {gold!r} is not a candidate", field="frame")
    nodes = list(scores.values())
    return graph.sub(graph.logsumexp(nodes), scores[gold])


def frameid_ensemble(member_scores: Sequence[Mapping[str, float]], frame_order: Sequence[str]) -> str:
    """Argmax of summed scores; ties go to the frame listed first in frame_order,
    which at prediction time is the lexical unit's candidate list."""
    if not member_scores:
        raise DataValidationError("no ensemble members", field="frames")
    candidates = set(member_scores[0].keys())
    for scores in member_scores[1:]:
        if set(scores.keys()) != candidates:
            raise DataValidationError("ensemble members disagree on candidate frames", field="frames")
    ordered = [frame for frame in frame_order if frame in candidates]
    ordered.extend(sorted(candidates - set(ordered)))

    best_frame = None
    best_total = None
    for frame in ordered:
        total = 0.0
        for scores in member_scores:
            total += scores[frame]
        if best_total is None or total > best_total:
            best_frame, best_total = frame, total
    return best_frame
