import hashlib
import json
from collections import Counter
from dataclasses import dataclass, field
from typing import Any, Dict, Iterable, List, Optional, Sequence

import numpy as np

UNK = "<unk>"


@dataclass
class Vocabulary:
    """Dense ids with <unk> at 0; frequencies come from training data only."""

    items: List[str] = field(default_factory=lambda: [UNK])
    counts: Dict[str, int] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if not self.items or self.items[0] != UNK:
            self.items = [UNK] + [item for item in self.items if item != UNK]
        self._index = {item: position for position, item in enumerate(self.items)}

    @classmethod
    def build(cls, streams: Iterable[Sequence[str]]) -> "Vocabulary":
        counter: Counter = Counter()
        for stream in streams:
            counter.update(stream)
        # first-seen order keeps ids deterministic
        items = [UNK] + [item for item in counter if item != UNK]
        return cls(items=items, counts=dict(counter))

    def __len__(self) -> int:
        return len(self.items)

    def __contains__(self, item: str) -> bool:
        return item in self._index

    def id(self, item: str) -> int:
        return self._index.get(item, 0)

    def frequency(self, item: str) -> int:
        return self.counts.get(item, 0)

    def to_dict(self) -> Dict[str, Any]:
        return {"items": list(self.items), "counts": dict(self.counts)}

    @classmethod
    def from_dict(cls, raw: Dict[str, Any]) -> "Vocabulary":
        return cls(items=list(raw["items"]), counts={str(k): int(v) for k, v in raw.get("counts", {}).items()})

    def fingerprint(self) -> str:
        canonical = json.dumps(self.items, separators=(",", ":"), ensure_ascii=False)
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def apply_unk_policy(
    vocab: Vocabulary,
    tokens: Sequence[str],
    probability: float = 0.1,
    rng: Optional[np.random.Generator] = None,
) -> List[int]:
    """Maps tokens to ids. With an rng (training), each occurrence of a word seen once
    in training becomes <unk> with the given probability; without one (prediction),
    only out-of-vocabulary words map to <unk>."""
    ids: List[int] = []
    for token in tokens:
        token_id = vocab.id(token)
        if rng is not None and token_id != 0 and vocab.frequency(token) == 1 and rng.random() < probability:
            token_id = 0
        ids.append(token_id)
    return ids
