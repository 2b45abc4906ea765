import logging
from dataclasses import dataclass, field
from typing import FrozenSet, List, Optional, Sequence, Tuple

from app.core.errors import DataValidationError


logger = logging.getLogger("SegRNN.trees")

TREEBANK = "treebank"
FRAMENET = "framenet"


@dataclass(frozen=True)
class ScaffoldInstance:
    tokens: Tuple[str, ...]
    pos: Tuple[str, ...]
    positive_spans: FrozenSet[Tuple[int, int]] = field(default_factory=frozenset)
    source: str = TREEBANK


class _TreeReader:
    """Recursive-descent reader for one parenthesized tree.

    A node is "(" label child* ")", a child being a bare token or another node.
    Every node covering at least one token contributes its span; each token takes
    the label of its innermost node as its tag.
    """

    def __init__(self, text: str) -> None:
        self.text = text
        self.offset = 0
        self.tokens: List[str] = []
        self.pos: List[str] = []
        self.spans: set = set()

    def _skip_spaces(self) -> None:
        while self.offset < len(self.text) and self.text[self.offset].isspace():
            self.offset += 1

    def _read_atom(self) -> str:
        start = self.offset
        while self.offset < len(self.text) and not self.text[self.offset].isspace() and self.text[self.offset] not in "()":
            self.offset += 1
        return self.text[start:self.offset]

    def read(self) -> None:
        self._skip_spaces()
        if self.offset >= len(self.text) or self.text[self.offset] != "(":
            raise DataValidationError(f"tree must start with '(' at offset {self.offset}", field="tree")
        self._read_node()
        self._skip_spaces()
        if self.offset != len(self.text):
            raise DataValidationError(f"unexpected text after tree at offset {self.offset}", field="tree")

    def _read_node(self) -> Optional[Tuple[int, int]]:
        opened_at = self.offset
        self.offset += 1
        self._skip_spaces()
        label = self._read_atom()
        start = len(self.tokens)
        while True:
            self._skip_spaces()
            if self.offset >= len(self.text):
                raise DataValidationError(f"unbalanced parenthesis opened at offset {opened_at}", field="tree")
            char = self.text[self.offset]
            if char == ")":
                self.offset += 1
                break
            if char == "(":
                self._read_node()
            else:
                self.tokens.append(self._read_atom())
                self.pos.append(label or "X")
        end = len(self.tokens) - 1
        if end < start:
            return None
        self.spans.add((start, end))
        return start, end


def parse_bracketed_tree(line: str, max_length: int = 20) -> ScaffoldInstance:
    text = line.strip()
    depth = 0
    for offset, char in enumerate(text):
        if char == "(":
            depth += 1
        elif char == ")":
            depth -= 1
            if depth < 0:
                raise DataValidationError(f"unbalanced ')' at offset {offset}", field="tree")
    if depth != 0:
        raise DataValidationError(f"unbalanced tree: {depth} unclosed '(' at offset {len(text)}", field="tree")

    reader = _TreeReader(text)
    reader.read()
    if not reader.tokens:
        raise DataValidationError("tree has no tokens", field="tree")
    positives = frozenset(span for span in reader.spans if span[1] - span[0] + 1 <= max_length)
    return ScaffoldInstance(tuple(reader.tokens), tuple(reader.pos), positives, TREEBANK)


def load_trees(path: str, max_length: int = 20) -> List[ScaffoldInstance]:
    instances: List[ScaffoldInstance] = []
    try:
        handle = open(path, encoding="utf-8")
    except FileNotFoundError as exc:
        raise DataValidationError(f"tree file not found: {path}") from exc
    with handle:
        for line_no, text in enumerate(handle, start=1):
            if not text.strip():
                continue
            try:
                instances.append(parse_bracketed_tree(text, max_length))
            except DataValidationError as exc:
                raise DataValidationError(str(exc), line=line_no) from exc
    logger.info("Loaded %d trees from %s", len(instances), path)
    return instances


def framenet_scaffold(tokens: Sequence[str], pos: Sequence[str], spans: Sequence[Tuple[int, int]], max_length: int = 20) -> ScaffoldInstance:
    """Positive spans are every frame-element span of any frame in the sentence."""
    positives = frozenset((i, j) for i, j in spans if j - i + 1 <= max_length)
    return ScaffoldInstance(tuple(tokens), tuple(pos), positives, FRAMENET)
