import json
from dataclasses import asdict, dataclass
from typing import Any, Dict, FrozenSet, Hashable, Iterable, Optional, Sequence, Union

from app.core.errors import DataValidationError
from app.data.segments import Segment, Segmentation

ArgumentSet = FrozenSet[Hashable]


@dataclass(frozen=True)
class EvalReport:
    true_positives: int
    false_positives: int
    false_negatives: int
    precision: float
    recall: float
    f1: float
    frame_accuracy: Optional[float] = None
    instances: int = 0

    @classmethod
    def from_counts(cls, tp: int, fp: int, fn: int, instances: int = 0, frame_accuracy: Optional[float] = None) -> "EvalReport":
        precision = tp / (tp + fp) if tp + fp else 0.0
        recall = tp / (tp + fn) if tp + fn else 0.0
        f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
        return cls(tp, fp, fn, precision, recall, f1, frame_accuracy, instances)

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)

    def render_table(self) -> str:
        rows = [
            ("instances", str(self.instances)),
            ("true positives", str(self.true_positives)),
            ("false positives", str(self.false_positives)),
            ("false negatives", str(self.false_negatives)),
            ("precision", f"{self.precision:.4f}"),
            ("recall", f"{self.recall:.4f}"),
            ("f1", f"{self.f1:.4f}"),
        ]
        if self.frame_accuracy is not None:
            rows.append(("frame accuracy", f"{self.frame_accuracy:.4f}"))
        width = max(len(name) for name, _ in rows)
        value_width = max(len(value) for _, value in rows)
        return "\n".join(f"{name.ljust(width)}  {value.rjust(value_width)}" for name, value in rows)


def argument_set(
    segments: Union[Segmentation, Iterable[Segment]], frame: Optional[str] = None
) -> ArgumentSet:
    """Non-null (i, j, role) triples; with a frame, (i, j, role, frame) so a wrong frame
    makes every argument of the instance wrong."""
    items = segments.segments if isinstance(segments, Segmentation) else segments
    if frame is None:
        return frozenset((s.i, s.j, s.label) for s in items if not s.is_null)
    return frozenset((s.i, s.j, s.label, frame) for s in items if not s.is_null)


def score_arguments(predictions: Sequence[ArgumentSet], golds: Sequence[ArgumentSet]) -> EvalReport:
    """Micro-averaged exact labelled-span P/R/F1."""
    if len(predictions) != len(golds):
        raise DataValidationError(
            f"{len(predictions)} predicted instances against {len(golds)} gold instances", field="instances"
        )
    tp = fp = fn = 0
    for predicted, gold in zip(predictions, golds):
        predicted, gold = frozenset(predicted), frozenset(gold)
        matched = len(predicted & gold)
        tp += matched
        fp += len(predicted) - matched
        fn += len(gold) - matched
    return EvalReport.from_counts(tp, fp, fn, instances=len(golds))


def score_frames(predictions: Sequence[str], golds: Sequence[str]) -> float:
    if len(predictions) != len(golds):
        raise DataValidationError(
            f"{len(predictions)} predicted frames against {len(golds)} gold frames", field="instances"
        )
    if not golds:
        return 0.0
    return sum(1 for predicted, gold in zip(predictions, golds) if predicted == gold) / len(golds)
