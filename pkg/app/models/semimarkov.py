"""Exact zeroth-order semi-Markov inference over labelled segmentations.

All sums run in log space. Label index 0 is always the null label.
"""

from dataclasses import dataclass
from typing import Dict, Iterator, List, Mapping, Optional, Sequence, Tuple

from app.autodiff.graph import Graph, Node
from app.core.errors import DataValidationError, EnumerationLimitError
from app.data.segments import Segment, Segmentation, null_chunks

Cell = Tuple[int, int, int]

ENUMERATION_LIMIT = 8


@dataclass(frozen=True)
class CostConfig:
    """alpha weights false negatives. alpha = 0 drops the cost from the partition
    function altogether, which is plain conditional log-likelihood."""

    alpha: float = 2.0

    def __post_init__(self) -> None:
        if self.alpha < 0:
            raise DataValidationError(f"alpha must be >= 0, got {self.alpha}", field="alpha")

    @property
    def enabled(self) -> bool:
        return self.alpha > 0


class ScoreLattice:
    def __init__(
        self,
        graph: Graph,
        n: int,
        max_length: int,
        labels: Sequence[Optional[str]],
        cells: Dict[Cell, Node],
        null_max_length: Optional[int] = None,
    ) -> None:
        if not labels or labels[0] is not None:
            raise DataValidationError("lattice labels must start with the null label", field="labels")
        self.graph = graph
        self.n = n
        self.max_length = max_length
        self.labels = list(labels)
        self.label_index = {label: index for index, label in enumerate(self.labels)}
        self.null_max_length = min(null_max_length or max_length, max_length)
        self.cells = cells
        for cell in self.allowed_cells():
            if cell not in cells:
                raise DataValidationError(f"lattice is missing cell {cell}", field="lattice")

    def allows(self, i: int, j: int, y: int) -> bool:
        length = j - i + 1
        if length < 1 or length > self.max_length or i < 0 or j >= self.n:
            return False
        return y != 0 or length <= self.null_max_length

    def allowed_cells(self) -> Iterator[Cell]:
        for j in range(self.n):
            for i in range(j, max(-1, j - self.max_length), -1):
                for y in range(len(self.labels)):
                    if self.allows(i, j, y):
                        yield i, j, y

    def node(self, i: int, j: int, y: int) -> Node:
        return self.cells[(i, j, y)]

    def value(self, i: int, j: int, y: int) -> float:
        return self.cells[(i, j, y)].scalar()

    def node_for(self, segment: Segment) -> Node:
        y = self.label_index.get(segment.label)
        if y is None:
            raise DataValidationError(f"label {segment.label!r} not in lattice", field="role")
        if not self.allows(segment.i, segment.j, y):
            raise DataValidationError(f"segment {segment} not allowed in lattice", field="segment")
        return self.node(segment.i, segment.j, y)

    def values(self) -> Dict[Cell, float]:
        return {cell: node.scalar() for cell, node in self.cells.items()}

    @classmethod
    def from_values(
        cls,
        values: Mapping[Cell, float],
        n: int,
        max_length: int,
        labels: Sequence[Optional[str]],
        null_max_length: Optional[int] = None,
        graph: Optional[Graph] = None,
    ) -> "ScoreLattice":
        """Wraps plain scores as graph leaves; grad() on a cell reads its gradient."""
        graph = graph or Graph()
        cells = {cell: graph.variable([float(score)]) for cell, score in values.items()}
        return cls(graph, n, max_length, labels, cells, null_max_length)


def sum_lattices(lattices: Sequence[ScoreLattice]) -> ScoreLattice:
    """Ensemble lattice: each cell is the sum of the members' segment scores."""
    if not lattices:
        raise DataValidationError("need at least one lattice to ensemble", field="lattice")
    first = lattices[0]
    for other in lattices[1:]:
        if other.n != first.n or other.labels != first.labels or other.max_length != first.max_length:
            raise DataValidationError("ensembled lattices disagree on shape or labels", field="lattice")
    totals: Dict[Cell, float] = {}
    for cell in first.allowed_cells():
        total = 0.0
        for lattice in lattices:
            total += lattice.value(*cell)
        totals[cell] = total
    return ScoreLattice.from_values(totals, first.n, first.max_length, first.labels, first.null_max_length)


def span_cost(segment: Segment, gold: Segmentation, cfg: CostConfig) -> float:
    """Recall-oriented cost of one predicted segment. A missed gold argument is blamed
    on the predicted segment containing its first token."""
    if segment in gold.segments:
        return 0.0
    missed = sum(1 for argument in gold.arguments if segment.i <= argument.i <= segment.j)
    return (0.0 if segment.is_null else 1.0) + cfg.alpha * missed


def segmentation_cost(prediction: Segmentation, gold: Segmentation, cfg: CostConfig) -> float:
    return sum(span_cost(segment, gold, cfg) for segment in prediction.segments)


def _cost_table(lattice: ScoreLattice, gold: Segmentation, cfg: CostConfig) -> Dict[Cell, float]:
    return {
        (i, j, y): span_cost(Segment(i, j, lattice.labels[y]), gold, cfg)
        for i, j, y in lattice.allowed_cells()
    }


def log_partition(lattice: ScoreLattice, gold: Optional[Segmentation] = None, cfg: Optional[CostConfig] = None) -> Node:
    """log Z with z_j = sum over segments <i, j, y> of z_{i-1} exp(phi + cost)."""
    if lattice.n == 0:
        raise DataValidationError("cannot compute a partition function for an empty sentence", field="tokens")
    graph = lattice.graph
    costs = _cost_table(lattice, gold, cfg) if gold is not None and cfg is not None and cfg.enabled else {}

    prefix: List[Node] = [graph.scalar(0.0)]
    for j in range(lattice.n):
        terms: List[Node] = []
        for i in range(j, max(-1, j - lattice.max_length), -1):
            for y in range(len(lattice.labels)):
                if not lattice.allows(i, j, y):
                    continue
                term = graph.add(prefix[i], lattice.node(i, j, y))
                cost = costs.get((i, j, y), 0.0)
                if cost:
                    term = graph.add_constant(term, cost)
                terms.append(term)
        prefix.append(graph.logsumexp(terms))
    return prefix[lattice.n]


def _null_gap(lattice: ScoreLattice, start: int, end: int, mode: str) -> List[Node]:
    graph = lattice.graph
    cap = lattice.null_max_length
    if mode == "canonical":
        return [lattice.node(chunk.i, chunk.j, 0) for chunk in null_chunks(start, end, cap)]

    prefix: Dict[int, Node] = {start: graph.scalar(0.0)}
    for j in range(start, end + 1):
        terms = [
            graph.add(prefix[i], lattice.node(i, j, 0))
            for i in range(j, max(start - 1, j - cap), -1)
        ]
        prefix[j + 1] = graph.logsumexp(terms)
    return [prefix[end + 1]]


def constrained_log_numerator(lattice: ScoreLattice, gold: Segmentation, mode: str = "marginal") -> Node:
    """log of the summed exp-score of every segmentation with exactly gold's arguments.

    "marginal" sums over all null tilings of the gaps between arguments; "canonical"
    scores only the left-to-right chunking of each gap."""
    if mode not in {"marginal", "canonical"}:
        raise DataValidationError(f"unknown numerator mode {mode!r}", field="numerator_mode")
    parts: List[Node] = []
    cursor = 0
    for argument in sorted(gold.arguments, key=lambda item: (item.i, item.j)):
        if argument.length > lattice.max_length:
            raise DataValidationError(f"gold argument {argument} longer than {lattice.max_length}", field="gold")
        if argument.i > cursor:
            parts.extend(_null_gap(lattice, cursor, argument.i - 1, mode))
        parts.append(lattice.node_for(argument))
        cursor = argument.j + 1
    if cursor < lattice.n:
        parts.extend(_null_gap(lattice, cursor, lattice.n - 1, mode))
    return lattice.graph.sum(parts)


def softmax_margin_loss(lattice: ScoreLattice, gold: Segmentation, cfg: CostConfig, mode: str = "marginal") -> Node:
    """-log(exp phi(s*) / Z) with the cost inside Z."""
    graph = lattice.graph
    return graph.sub(log_partition(lattice, gold, cfg), constrained_log_numerator(lattice, gold, mode))


def viterbi_with_score(lattice: ScoreLattice) -> Tuple[Segmentation, float]:
    """Best segmentation. For each end j, starts are scanned from j downwards and labels
    in lattice order (null first); a candidate wins only on strict improvement."""
    if lattice.n == 0:
        raise DataValidationError("cannot decode an empty sentence", field="tokens")
    best: List[float] = [0.0]
    back: List[Cell] = []
    for j in range(lattice.n):
        best_score = None
        best_cell: Optional[Cell] = None
        for i in range(j, max(-1, j - lattice.max_length), -1):
            for y in range(len(lattice.labels)):
                if not lattice.allows(i, j, y):
                    continue
                score = best[i] + lattice.value(i, j, y)
                if best_score is None or score > best_score:
                    best_score = score
                    best_cell = (i, j, y)
        best.append(best_score)
        back.append(best_cell)

    segments: List[Segment] = []
    j = lattice.n - 1
    while j >= 0:
        i, _, y = back[j]
        segments.append(Segment(i, j, lattice.labels[y]))
        j = i - 1
    segments.reverse()
    return Segmentation(tuple(segments)), best[lattice.n]


def viterbi(lattice: ScoreLattice) -> Segmentation:
    return viterbi_with_score(lattice)[0]


def segmentation_score(lattice: ScoreLattice, segmentation: Segmentation) -> float:
    total = 0.0
    for segment in segmentation.segments:
        total += lattice.node_for(segment).scalar()
    return total


def enumerate_segmentations(
    n: int,
    labels: Sequence[Optional[str]],
    max_length: int,
    null_max_length: Optional[int] = None,
) -> List[Segmentation]:
    """Every labelled segmentation of n tokens. Only meant as a test oracle."""
    if n > ENUMERATION_LIMIT:
        raise EnumerationLimitError(f"refusing to enumerate segmentations of {n} > {ENUMERATION_LIMIT} tokens")
    null_cap = min(null_max_length or max_length, max_length)
    results: List[Segmentation] = []

    def extend(start: int, prefix: List[Segment]) -> None:
        if start == n:
            results.append(Segmentation(tuple(prefix)))
            return
        for end in range(start, min(n, start + max_length)):
            for label in labels:
                if label is None and end - start + 1 > null_cap:
                    continue
                prefix.append(Segment(start, end, label))
                extend(end + 1, prefix)
                prefix.pop()

    if n > 0:
        extend(0, [])
    return results
