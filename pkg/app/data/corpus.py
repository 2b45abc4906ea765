import hashlib
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple

from app.core.errors import DataValidationError
from app.data.segments import Segment, Segmentation


logger = logging.getLogger("SegRNN.corpus")

Span = Tuple[int, int]


@dataclass(frozen=True)
class FrameElement:
    role: str
    span: Span


@dataclass(frozen=True)
class Annotation:
    target: Span
    lu: str
    frame: str
    elements: Tuple[FrameElement, ...] = ()


@dataclass(frozen=True)
class AnnotatedSentence:
    tokens: Tuple[str, ...]
    pos: Tuple[str, ...]
    annotations: Tuple[Annotation, ...] = ()


@dataclass(frozen=True)
class FrameOntology:
    frames: Dict[str, Tuple[str, ...]] = field(default_factory=dict)
    lexicon: Dict[str, Tuple[str, ...]] = field(default_factory=dict)

    @property
    def frame_names(self) -> List[str]:
        return list(self.frames.keys())

    def roles(self, frame: str) -> Tuple[str, ...]:
        try:
            return self.frames[frame]
        except KeyError as exc:
            raise DataValidationError(f"unknown frame {frame!r}", field="frame") from exc

    def candidates(self, lu: str) -> Tuple[str, ...]:
        """F_l for a known lexical unit; every frame for an unseen one."""
        return self.lexicon.get(lu) or tuple(self.frames.keys())

    def to_dict(self) -> Dict[str, Any]:
        return {
            "frames": {name: list(roles) for name, roles in self.frames.items()},
            "lexicon": {lu: list(frames) for lu, frames in self.lexicon.items()},
        }

    def fingerprint(self) -> str:
        canonical = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()

    @classmethod
    def from_dict(cls, raw: Dict[str, Any]) -> "FrameOntology":
        frames_raw = raw.get("frames")
        lexicon_raw = raw.get("lexicon", {})
        if not isinstance(frames_raw, dict) or not isinstance(lexicon_raw, dict):
            raise DataValidationError("ontology needs 'frames' and 'lexicon' objects", field="frames")

        frames: Dict[str, Tuple[str, ...]] = {}
        for name, roles in frames_raw.items():
            if not isinstance(roles, list) or not all(isinstance(role, str) for role in roles):
                raise DataValidationError(f"roles of {name!r} must be a list of strings", field="frames")
            if len(set(roles)) != len(roles):
                raise DataValidationError(f"duplicate roles in frame {name!r}", field="frames")
            frames[str(name)] = tuple(roles)

        lexicon: Dict[str, Tuple[str, ...]] = {}
        for lu, candidates in lexicon_raw.items():
            if not isinstance(candidates, list) or not candidates:
                raise DataValidationError(f"lexical unit {lu!r} needs a nonempty frame list", field="lexicon")
            for frame in candidates:
                if frame not in frames:
                    raise DataValidationError(f"lexical unit {lu!r} lists unknown frame {frame!r}", field="lexicon")
            lexicon[str(lu)] = tuple(candidates)
        return cls(frames=frames, lexicon=lexicon)


def load_ontology(path: str) -> FrameOntology:
    try:
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
    except FileNotFoundError as exc:
        raise DataValidationError(f"ontology file not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise DataValidationError(f"ontology is not valid JSON: {exc}", line=exc.lineno) from exc
    if not isinstance(raw, dict):
        raise DataValidationError("ontology must be a JSON object")
    return FrameOntology.from_dict(raw)


def _span(value: Any, n: int, line: int, name: str) -> Span:
    if (
        not isinstance(value, list)
        or len(value) != 2
        or not all(isinstance(item, int) and not isinstance(item, bool) for item in value)
    ):
        raise DataValidationError(f"expected [start, end], got {value!r}", line=line, field=name)
    start, end = value
    if not 0 <= start <= end < n:
        raise DataValidationError(f"span {value} outside sentence of {n} tokens", line=line, field=name)
    return start, end


def _is_discontinuous(value: Any) -> bool:
    return isinstance(value, list) and len(value) > 0 and all(isinstance(item, list) for item in value)


def parse_sentence(raw: Any, line: int, ontology: Optional[FrameOntology] = None) -> AnnotatedSentence:
    if not isinstance(raw, dict):
        raise DataValidationError("each line must be a JSON object", line=line)
    tokens = raw.get("tokens")
    pos = raw.get("pos")
    if not isinstance(tokens, list) or not tokens or not all(isinstance(tok, str) for tok in tokens):
        raise DataValidationError("tokens must be a nonempty list of strings", line=line, field="tokens")
    if not isinstance(pos, list) or len(pos) != len(tokens) or not all(isinstance(tag, str) for tag in pos):
        raise DataValidationError("pos must be a list of strings as long as tokens", line=line, field="pos")
    n = len(tokens)

    annotations: List[Annotation] = []
    seen_targets: Dict[Span, int] = {}
    raw_annotations = raw.get("annotations") or []
    if not isinstance(raw_annotations, list):
        raise DataValidationError("annotations must be a list", line=line, field="annotations")
    for position, item in enumerate(raw_annotations):
        prefix = f"annotations[{position}]"
        if not isinstance(item, dict):
            raise DataValidationError("annotation must be an object", line=line, field=prefix)
        target = _span(item.get("target"), n, line, f"{prefix}.target")
        lu = item.get("lu")
        frame = item.get("frame")
        if not isinstance(lu, str) or not lu:
            raise DataValidationError("lu must be a nonempty string", line=line, field=f"{prefix}.lu")
        if not isinstance(frame, str) or not frame:
            raise DataValidationError("frame must be a nonempty string", line=line, field=f"{prefix}.frame")
        if ontology is not None and frame not in ontology.frames:
            raise DataValidationError(f"unknown frame {frame!r}", line=line, field=f"{prefix}.frame")

        elements: List[FrameElement] = []
        raw_elements = item.get("elements") or []
        if not isinstance(raw_elements, list):
            raise DataValidationError("elements must be a list", line=line, field=f"{prefix}.elements")
        for index, element in enumerate(raw_elements):
            name = f"{prefix}.elements[{index}]"
            if not isinstance(element, dict) or not isinstance(element.get("role"), str):
                raise DataValidationError("element needs a string role", line=line, field=name)
            role = element["role"]
            if ontology is not None and role not in ontology.frames[frame]:
                raise DataValidationError(f"role {role!r} not in frame {frame!r}", line=line, field=f"{name}.role")
            if _is_discontinuous(element.get("span")):
                logger.warning("Dropping discontinuous argument | line=%d role=%s", line, role)
                continue
            elements.append(FrameElement(role, _span(element.get("span"), n, line, f"{name}.span")))

        ordered = sorted(elements, key=lambda el: el.span)
        for left, right in zip(ordered, ordered[1:]):
            if right.span[0] <= left.span[1]:
                raise DataValidationError(
                    f"elements {left.role} {list(left.span)} and {right.role} {list(right.span)} overlap",
                    line=line,
                    field=f"{prefix}.elements",
                )

        if target in seen_targets:
            logger.warning(
                "Duplicate annotation for target %s | line=%d kept=annotations[%d]",
                list(target), line, seen_targets[target],
            )
            continue
        seen_targets[target] = position
        annotations.append(Annotation(target, lu, frame, tuple(elements)))

    return AnnotatedSentence(tuple(tokens), tuple(pos), tuple(annotations))


def load_corpus(path: str, ontology: Optional[FrameOntology] = None) -> List[AnnotatedSentence]:
    sentences: List[AnnotatedSentence] = []
    try:
        handle = open(path, encoding="utf-8")
    except FileNotFoundError as exc:
        raise DataValidationError(f"corpus file not found: {path}") from exc
    with handle:
        for line_no, text in enumerate(handle, start=1):
            if not text.strip():
                continue
            try:
                raw = json.loads(text)
            except json.JSONDecodeError as exc:
                raise DataValidationError(f"malformed JSON: {exc.msg}", line=line_no) from exc
            sentences.append(parse_sentence(raw, line_no, ontology))
    logger.info("Loaded %d sentences from %s", len(sentences), path)
    return sentences


def sentence_to_dict(sentence: AnnotatedSentence) -> Dict[str, Any]:
    return {
        "tokens": list(sentence.tokens),
        "pos": list(sentence.pos),
        "annotations": [
            {
                "target": list(annotation.target),
                "lu": annotation.lu,
                "frame": annotation.frame,
                "elements": [{"role": el.role, "span": list(el.span)} for el in annotation.elements],
            }
            for annotation in sentence.annotations
        ],
    }


def save_corpus(sentences: Sequence[AnnotatedSentence], path: str) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        for sentence in sentences:
            handle.write(json.dumps(sentence_to_dict(sentence), ensure_ascii=False) + "\n")


@dataclass(frozen=True)
class ArgInstance:
    instance_id: str
    tokens: Tuple[str, ...]
    pos: Tuple[str, ...]
    target: Span
    lu: str
    frame: str
    gold: Segmentation

    @property
    def n(self) -> int:
        return len(self.tokens)


def instance_id(sentence_index: int, annotation_index: int) -> str:
    return f"{sentence_index}:{annotation_index}"


def build_instances(
    sentences: Sequence[AnnotatedSentence],
    ontology: FrameOntology,
    max_length: int,
    keep_oversized: bool = False,
) -> List[ArgInstance]:
    """One instance per (sentence, annotation). Gold spans longer than max_length drop
    the instance unless keep_oversized is set, in which case those spans are left out
    of the instance's gold (they still count as misses at evaluation)."""
    instances: List[ArgInstance] = []
    excluded = 0
    for s_index, sentence in enumerate(sentences):
        n = len(sentence.tokens)
        for a_index, annotation in enumerate(sentence.annotations):
            roles = ontology.roles(annotation.frame)
            arguments = []
            oversized = []
            for element in annotation.elements:
                if element.role not in roles:
                    raise DataValidationError(
                        f"role {element.role!r} not in frame {annotation.frame!r}", field="elements.role"
                    )
                segment = Segment(element.span[0], element.span[1], element.role)
                (oversized if segment.length > max_length else arguments).append(segment)

            if oversized and not keep_oversized:
                excluded += 1
                logger.warning(
                    "Excluding instance %s: %d gold argument(s) longer than %d tokens",
                    instance_id(s_index, a_index), len(oversized), max_length,
                )
                continue

            instances.append(
                ArgInstance(
                    instance_id=instance_id(s_index, a_index),
                    tokens=sentence.tokens,
                    pos=sentence.pos,
                    target=annotation.target,
                    lu=annotation.lu,
                    frame=annotation.frame,
                    gold=Segmentation.from_arguments(n, arguments, max_length),
                )
            )
    if excluded:
        logger.info("Built %d instances, excluded %d", len(instances), excluded)
    return instances
