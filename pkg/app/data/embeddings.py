import logging
from dataclasses import dataclass
from typing import Dict, List, Optional

import numpy as np

from app.core.errors import DataValidationError


logger = logging.getLogger("SegRNN.embeddings")


@dataclass
class PretrainedTable:
    """Fixed word vectors. Row 0 is the zero vector returned for absent words."""

    words: List[str]
    matrix: np.ndarray

    def __post_init__(self) -> None:
        self._index: Dict[str, int] = {word: row + 1 for row, word in enumerate(self.words)}
        self.matrix.setflags(write=False)

    @property
    def dim(self) -> int:
        return int(self.matrix.shape[1])

    def __len__(self) -> int:
        return len(self.words)

    def row(self, word: str) -> int:
        row = self._index.get(word)
        if row is None:
            row = self._index.get(word.lower(), 0)
        return row

    def vector(self, word: str) -> np.ndarray:
        return self.matrix[self.row(word)]

    @classmethod
    def empty(cls, dim: int) -> "PretrainedTable":
        return cls(words=[], matrix=np.zeros((1, dim)))


def load_pretrained(path: str, expected_dim: Optional[int] = None) -> PretrainedTable:
    words: List[str] = []
    vectors: List[np.ndarray] = []
    seen: Dict[str, int] = {}
    dim = expected_dim

    try:
        handle = open(path, encoding="utf-8")
    except FileNotFoundError as exc:
        raise DataValidationError(f"embedding file not found: {path}") from exc
    with handle:
        for line_no, text in enumerate(handle, start=1):
            parts = text.split()
            if not parts or not parts[0]:
                continue
            word, values = parts[0], parts[1:]
            if dim is None:
                dim = len(values)
            if len(values) != dim:
                raise DataValidationError(f"expected {dim} values, found {len(values)}", line=line_no)
            if word in seen:
                logger.warning("Duplicate pretrained word %r on line %d; keeping line %d", word, line_no, seen[word])
                continue
            try:
                vector = np.array([float(value) for value in values], dtype=np.float64)
            except ValueError as exc:
                raise DataValidationError(f"non-numeric value: {exc}", line=line_no) from exc
            seen[word] = line_no
            words.append(word)
            vectors.append(vector)

    if dim is None:
        raise DataValidationError(f"embedding file {path} is empty and no dimension was given")
    matrix = np.zeros((len(words) + 1, dim))
    if vectors:
        matrix[1:] = np.stack(vectors)
    logger.info("Loaded %d pretrained vectors of dim %d from %s", len(words), dim, path)
    return PretrainedTable(words=words, matrix=matrix)
