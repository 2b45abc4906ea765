import hashlib
import json
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence

import numpy as np

from app.core.errors import DataValidationError
from app.data.corpus import AnnotatedSentence, FrameOntology
from app.data.embeddings import PretrainedTable
from app.data.vocab import Vocabulary, apply_unk_policy
from app.models.encoders import TokenInput, clamp_distance


@dataclass
class Resources:
    """Index spaces shared by a model and every checkpoint made from it."""

    words: Vocabulary
    pos: Vocabulary
    lus: Vocabulary
    ontology: FrameOntology
    pretrained: PretrainedTable
    roles: List[str] = field(default_factory=list)

    def __post_init__(self) -> None:
        if not self.roles:
            seen: Dict[str, None] = {}
            for frame_roles in self.ontology.frames.values():
                for role in frame_roles:
                    seen.setdefault(role, None)
            self.roles = list(seen)
        self._role_rows = {role: row + 1 for row, role in enumerate(self.roles)}
        self._frame_rows = {frame: row for row, frame in enumerate(self.ontology.frame_names)}

    @classmethod
    def build(
        cls,
        sentences: Sequence[AnnotatedSentence],
        ontology: FrameOntology,
        pretrained: PretrainedTable,
    ) -> "Resources":
        lu_names: List[str] = list(ontology.lexicon.keys())
        for sentence in sentences:
            for annotation in sentence.annotations:
                if annotation.lu not in ontology.lexicon and annotation.lu not in lu_names:
                    lu_names.append(annotation.lu)
        return cls(
            words=Vocabulary.build(sentence.tokens for sentence in sentences),
            pos=Vocabulary.build(sentence.pos for sentence in sentences),
            lus=Vocabulary(items=lu_names),
            ontology=ontology,
            pretrained=pretrained,
        )

    @property
    def frame_count(self) -> int:
        return len(self._frame_rows)

    @property
    def role_count(self) -> int:
        return len(self.roles) + 1

    def frame_row(self, frame: str) -> int:
        if frame not in self._frame_rows:
            raise DataValidationError(f"unknown frame {frame!r}", field="frame")
        return self._frame_rows[frame]

    def lu_row(self, lu: str) -> int:
        return self.lus.id(lu)

    def role_rows(self, frame: str) -> Dict[Optional[str], int]:
        rows: Dict[Optional[str], int] = {None: 0}
        for role in self.ontology.roles(frame):
            rows[role] = self._role_rows[role]
        return rows

    def labels(self, frame: str) -> List[Optional[str]]:
        return [None] + list(self.ontology.roles(frame))

    def token_inputs(
        self,
        tokens: Sequence[str],
        pos: Sequence[str],
        target_start: Optional[int] = 0,
        radius: int = 20,
        unk_probability: float = 0.1,
        rng: Optional[np.random.Generator] = None,
    ) -> List[TokenInput]:
        word_ids = apply_unk_policy(self.words, tokens, unk_probability, rng)
        return [
            TokenInput(
                word_id=word_id,
                pretrained_id=self.pretrained.row(token),
                pos_id=self.pos.id(tag),
                target_distance=None if target_start is None else clamp_distance(position, target_start, radius),
            )
            for position, (token, word_id, tag) in enumerate(zip(tokens, word_ids, pos))
        ]

    def vocabulary_hash(self) -> str:
        payload = json.dumps(
            {
                "words": self.words.fingerprint(),
                "pos": self.pos.fingerprint(),
                "lus": self.lus.fingerprint(),
                "roles": self.roles,
                "pretrained": self.pretrained.words,
            },
            sort_keys=True,
            separators=(",", ":"),
        )
        return hashlib.sha256(payload.encode("utf-8")).hexdigest()

    def ontology_hash(self) -> str:
        return self.ontology.fingerprint()

    def to_dict(self) -> Dict[str, Any]:
        return {
            "words": self.words.to_dict(),
            "pos": self.pos.to_dict(),
            "lus": self.lus.to_dict(),
            "roles": list(self.roles),
            "ontology": self.ontology.to_dict(),
            "pretrained_words": list(self.pretrained.words),
        }

    @classmethod
    def from_dict(cls, raw: Dict[str, Any], pretrained_matrix: np.ndarray) -> "Resources":
        return cls(
            words=Vocabulary.from_dict(raw["words"]),
            pos=Vocabulary.from_dict(raw["pos"]),
            lus=Vocabulary.from_dict(raw["lus"]),
            ontology=FrameOntology.from_dict(raw["ontology"]),
            pretrained=PretrainedTable(list(raw["pretrained_words"]), np.array(pretrained_matrix)),
            roles=list(raw["roles"]),
        )
