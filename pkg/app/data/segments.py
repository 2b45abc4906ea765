from dataclasses import dataclass
from typing import FrozenSet, Iterable, List, Optional, Sequence, Tuple

from app.core.errors import DataValidationError


@dataclass(frozen=True)
class Segment:
    """Tokens i..j inclusive (0-based) labelled with a role, or None for null."""

    i: int
    j: int
    label: Optional[str] = None

    @property
    def length(self) -> int:
        return self.j - self.i + 1

    @property
    def is_null(self) -> bool:
        return self.label is None

    def as_triple(self) -> Tuple[int, int, Optional[str]]:
        return self.i, self.j, self.label


@dataclass(frozen=True)
class Segmentation:
    segments: Tuple[Segment, ...]

    @classmethod
    def of(cls, segments: Iterable[Segment]) -> "Segmentation":
        return cls(tuple(segments))

    @property
    def length(self) -> int:
        return self.segments[-1].j + 1 if self.segments else 0

    @property
    def arguments(self) -> Tuple[Segment, ...]:
        return tuple(segment for segment in self.segments if not segment.is_null)

    def argument_set(self) -> FrozenSet[Segment]:
        return frozenset(self.arguments)

    def validate(self, n: int, max_length: int) -> None:
        if n <= 0:
            raise DataValidationError("segmentation of an empty sentence")
        expected_start = 0
        for segment in self.segments:
            if segment.i != expected_start or segment.j < segment.i:
                raise DataValidationError(f"segments do not tile the sentence at {segment}")
            if segment.length > max_length:
                raise DataValidationError(f"segment {segment} is longer than {max_length}")
            expected_start = segment.j + 1
        if expected_start != n:
            raise DataValidationError(f"segments cover {expected_start} of {n} tokens")

    @classmethod
    def from_arguments(cls, n: int, arguments: Sequence[Segment], max_length: int) -> "Segmentation":
        """Tiles the gaps between arguments with null segments chunked left to right."""
        segments: List[Segment] = []
        cursor = 0
        for argument in sorted(arguments, key=lambda item: (item.i, item.j)):
            if argument.i < cursor:
                raise DataValidationError(f"argument {argument} overlaps a previous argument")
            segments.extend(null_chunks(cursor, argument.i - 1, max_length))
            segments.append(argument)
            cursor = argument.j + 1
        segments.extend(null_chunks(cursor, n - 1, max_length))
        return cls(tuple(segments))


def null_chunks(start: int, end: int, max_length: int) -> List[Segment]:
    chunks: List[Segment] = []
    position = start
    while position <= end:
        stop = min(end, position + max_length - 1)
        chunks.append(Segment(position, stop, None))
        position = stop + 1
    return chunks
