"""Ensembled decoding, prediction files and evaluation against a gold corpus."""

import json
import logging
import multiprocessing
from dataclasses import dataclass
from typing import Any, Dict, Iterator, List, Optional, Sequence, Tuple

from app.core.errors import CheckpointError, DataValidationError
from app.data.corpus import AnnotatedSentence, Annotation, instance_id
from app.data.segments import Segment, Segmentation
from app.evaluation.metrics import EvalReport, argument_set, score_arguments, score_frames
from app.models.argid import ArgumentModel
from app.models.frameid import FrameIdentifier, frameid_ensemble
from app.models.semimarkov import sum_lattices, viterbi
from app.training.checkpoint import check_compatible, load_checkpoint

logger = logging.getLogger("SegRNN.predict")

ARGS_GOLD_FRAMES = "args-gold-frames"
FRAMES = "frames"
END_TO_END = "end-to-end"
MODES = (ARGS_GOLD_FRAMES, FRAMES, END_TO_END)

Span = Tuple[int, int]


@dataclass(frozen=True)
class Prediction:
    instance_id: str
    frame: str
    segments: Tuple[Tuple[int, int, str], ...] = ()

    def to_dict(self) -> Dict[str, Any]:
        return {"instance_id": self.instance_id, "frame": self.frame, "segments": [list(item) for item in self.segments]}

    @classmethod
    def from_dict(cls, raw: Any, line: int) -> "Prediction":
        if not isinstance(raw, dict) or not isinstance(raw.get("instance_id"), str) or not isinstance(raw.get("frame"), str):
            raise DataValidationError("prediction needs string instance_id and frame", line=line)
        items = raw.get("segments", [])
        if not isinstance(items, list):
            raise DataValidationError("segments must be a list", line=line, field="segments")
        segments = []
        for item in items:
            if not isinstance(item, list) or len(item) != 3:
                raise DataValidationError("segment must be [i, j, role]", line=line, field="segments")
            try:
                segments.append((int(item[0]), int(item[1]), str(item[2])))
            except (TypeError, ValueError) as exc:
                raise DataValidationError(f"segment bounds must be integers, got {item!r}", line=line, field="segments") from exc
        return cls(raw["instance_id"], raw["frame"], tuple(segments))

    def as_segments(self) -> List[Segment]:
        return [Segment(i, j, role) for i, j, role in self.segments]


class EnsembleParser:
    """Sums member scores before a single decode. Any member count works, including one."""

    def __init__(self, arg_models: Sequence[ArgumentModel] = (), frame_models: Sequence[FrameIdentifier] = ()) -> None:
        self.arg_models = list(arg_models)
        self.frame_models = list(frame_models)

    @classmethod
    def from_checkpoints(cls, arg_paths: Sequence[str] = (), frame_paths: Sequence[str] = ()) -> "EnsembleParser":
        arg_checkpoints = [load_checkpoint(path) for path in arg_paths]
        frame_checkpoints = [load_checkpoint(path) for path in frame_paths]
        for group, kind in ((arg_checkpoints, "arg"), (frame_checkpoints, "frame")):
            if not group:
                continue
            check_compatible(group)
            if group[0].kind != kind:
                raise DataValidationError(f"expected {kind} checkpoints, got {group[0].kind}", field="checkpoints")
        if arg_checkpoints and frame_checkpoints and arg_checkpoints[0].ontology_hash != frame_checkpoints[0].ontology_hash:
            raise CheckpointError("argument and frame checkpoints were trained on different ontologies")
        logger.info("Loaded ensemble | arg_members=%d frame_members=%d", len(arg_checkpoints), len(frame_checkpoints))
        return cls(
            [checkpoint.build_model() for checkpoint in arg_checkpoints],
            [checkpoint.build_model() for checkpoint in frame_checkpoints],
        )

    def predict_frames(
        self, tokens: Sequence[str], pos: Sequence[str], targets: Sequence[Tuple[Span, str]]
    ) -> List[Tuple[str, Dict[str, float]]]:
        """Frames for every (target, lu) of one sentence; each member encodes the sentence once."""
        if not self.frame_models:
            raise DataValidationError("no frame identification models loaded", field="checkpoints")
        per_member = [model.sentence_scores(tokens, pos, targets) for model in self.frame_models]
        results = []
        for k, (_, lu) in enumerate(targets):
            member_scores = [scores[k] for scores in per_member]
            totals: Dict[str, float] = {}
            for scores in member_scores:
                for frame, score in scores.items():
                    totals[frame] = totals.get(frame, 0.0) + score
            results.append((frameid_ensemble(member_scores, self.frame_models[0].candidates(lu)), totals))
        return results

    def predict_frame(self, tokens: Sequence[str], pos: Sequence[str], target: Span, lu: str) -> Tuple[str, Dict[str, float]]:
        return self.predict_frames(tokens, pos, [(target, lu)])[0]

    def decode_arguments(self, tokens: Sequence[str], pos: Sequence[str], target: Span, lu: str, frame: str) -> Segmentation:
        if not self.arg_models:
            raise DataValidationError("no argument identification models loaded", field="checkpoints")
        lattices = [model.lattice_scores(tokens, pos, target, lu, frame) for model in self.arg_models]
        if len(lattices) == 1:
            return viterbi(lattices[0])
        return viterbi(sum_lattices(lattices))

    def parse(self, tokens: Sequence[str], pos: Sequence[str], target: Span, lu: str, frame: Optional[str] = None) -> Dict[str, Any]:
        frame_scores: Dict[str, float] = {}
        if frame is None:
            frame, frame_scores = self.predict_frame(tokens, pos, target, lu)
        segmentation = self.decode_arguments(tokens, pos, target, lu, frame)
        return {
            "frame": frame,
            "frame_scores": frame_scores,
            "segments": [[s.i, s.j, s.label] for s in segmentation.arguments],
        }

    def predict_sentence(self, sentence: AnnotatedSentence, mode: str, s_index: int) -> List[Prediction]:
        tokens, pos = sentence.tokens, sentence.pos
        if mode == ARGS_GOLD_FRAMES:
            frames = [annotation.frame for annotation in sentence.annotations]
        elif sentence.annotations:
            targets = [(annotation.target, annotation.lu) for annotation in sentence.annotations]
            frames = [frame for frame, _ in self.predict_frames(tokens, pos, targets)]
        else:
            frames = []
        predictions = []
        for a_index, (annotation, frame) in enumerate(zip(sentence.annotations, frames)):
            identifier = instance_id(s_index, a_index)
            if mode == FRAMES:
                predictions.append(Prediction(identifier, frame))
                continue
            segmentation = self.decode_arguments(tokens, pos, annotation.target, annotation.lu, frame)
            predictions.append(Prediction(identifier, frame, tuple(s.as_triple() for s in segmentation.arguments)))
        return predictions


def iter_annotations(sentences: Sequence[AnnotatedSentence]) -> Iterator[Tuple[str, AnnotatedSentence, Annotation]]:
    for s_index, sentence in enumerate(sentences):
        for a_index, annotation in enumerate(sentence.annotations):
            yield instance_id(s_index, a_index), sentence, annotation


_WORKER: Dict[str, Any] = {}


def _init_worker(parser: EnsembleParser, mode: str) -> None:
    _WORKER["parser"] = parser
    _WORKER["mode"] = mode


def _predict_sentence(item: Tuple[int, AnnotatedSentence]) -> List[Prediction]:
    s_index, sentence = item
    return _WORKER["parser"].predict_sentence(sentence, _WORKER["mode"], s_index)


def predict(parser: EnsembleParser, sentences: Sequence[AnnotatedSentence], mode: str, workers: int = 1) -> List[Prediction]:
    if mode not in MODES:
        raise DataValidationError(f"mode must be one of {list(MODES)}, got {mode!r}", field="mode")
    items = list(enumerate(sentences))
    if workers <= 1:
        _init_worker(parser, mode)
        batches = [_predict_sentence(item) for item in items]
    else:
        with multiprocessing.Pool(processes=workers, initializer=_init_worker, initargs=(parser, mode)) as pool:
            batches = pool.map(_predict_sentence, items)
    predictions = [prediction for batch in batches for prediction in batch]
    logger.info("Predicted %d instances | mode=%s workers=%d", len(predictions), mode, workers)
    return predictions


def write_predictions(path: str, predictions: Sequence[Prediction]) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        for prediction in predictions:
            handle.write(json.dumps(prediction.to_dict(), ensure_ascii=False) + "\n")


def read_predictions(path: str) -> List[Prediction]:
    predictions: List[Prediction] = []
    try:
        handle = open(path, encoding="utf-8")
    except FileNotFoundError as exc:
        raise DataValidationError(f"predictions file not found: {path}") from exc
    with handle:
        for line_no, text in enumerate(handle, start=1):
            if not text.strip():
                continue
            try:
                raw = json.loads(text)
            except json.JSONDecodeError as exc:
                raise DataValidationError(f"malformed JSON: {exc.msg}", line=line_no) from exc
            predictions.append(Prediction.from_dict(raw, line_no))
    return predictions


def _gold_segments(annotation: Annotation) -> List[Segment]:
    return [Segment(el.span[0], el.span[1], el.role) for el in annotation.elements]


def evaluate(predictions: Sequence[Prediction], sentences: Sequence[AnnotatedSentence], mode: str) -> EvalReport:
    """Gold spans longer than the model's cap stay in the gold set and count as misses."""
    if mode not in MODES:
        raise DataValidationError(f"mode must be one of {list(MODES)}, got {mode!r}", field="mode")
    gold = {identifier: annotation for identifier, _, annotation in iter_annotations(sentences)}
    by_id: Dict[str, Prediction] = {}
    for prediction in predictions:
        if prediction.instance_id not in gold:
            raise DataValidationError(f"prediction for unknown instance {prediction.instance_id}", field="instance_id")
        if prediction.instance_id in by_id:
            raise DataValidationError(f"duplicate prediction for {prediction.instance_id}", field="instance_id")
        by_id[prediction.instance_id] = prediction
    missing = [identifier for identifier in gold if identifier not in by_id]
    if missing:
        raise DataValidationError(f"{len(missing)} gold instances have no prediction, first {missing[0]}", field="instance_id")

    identifiers = list(gold)
    frame_accuracy = None
    if mode in (FRAMES, END_TO_END):
        frame_accuracy = score_frames([by_id[i].frame for i in identifiers], [gold[i].frame for i in identifiers])
    if mode == FRAMES:
        return EvalReport.from_counts(0, 0, 0, instances=len(identifiers), frame_accuracy=frame_accuracy)

    with_frame = mode == END_TO_END
    predicted_sets = [
        argument_set(by_id[i].as_segments(), by_id[i].frame if with_frame else None) for i in identifiers
    ]
    gold_sets = [argument_set(_gold_segments(gold[i]), gold[i].frame if with_frame else None) for i in identifiers]
    report = score_arguments(predicted_sets, gold_sets)
    if frame_accuracy is None:
        return report
    return EvalReport.from_counts(
        report.true_positives, report.false_positives, report.false_negatives, report.instances, frame_accuracy
    )
