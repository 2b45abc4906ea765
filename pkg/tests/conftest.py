import json
from typing import Callable, Dict, List

import numpy as np
import pytest

from app.core.config import ModelConfig, validate_config
from app.data.corpus import AnnotatedSentence, FrameOntology, parse_sentence
from app.data.embeddings import PretrainedTable
from app.models.resources import Resources


ONTOLOGY = {
    "frames": {
        "Motion": ["Theme", "Goal"],
        "Giving": ["Donor", "Recipient", "Theme"],
        "Perception": ["Perceiver", "Phenomenon"],
    },
    "lexicon": {
        "go.v": ["Motion"],
        "give.v": ["Giving"],
        "see.v": ["Perception", "Motion"],
    },
}

SENTENCES: List[Dict] = [
    {
        "tokens": ["the", "dog", "went", "home"],
        "pos": ["DT", "NN", "VBD", "NN"],
        "annotations": [
            {"target": [2, 2], "lu": "go.v", "frame": "Motion",
             "elements": [{"role": "Theme", "span": [0, 1]}, {"role": "Goal", "span": [3, 3]}]},
        ],
    },
    {
        "tokens": ["Kim", "gave", "Lee", "a", "book"],
        "pos": ["NNP", "VBD", "NNP", "DT", "NN"],
        "annotations": [
            {"target": [1, 1], "lu": "give.v", "frame": "Giving",
             "elements": [{"role": "Donor", "span": [0, 0]}, {"role": "Recipient", "span": [2, 2]},
                          {"role": "Theme", "span": [3, 4]}]},
        ],
    },
    {
        "tokens": ["a", "cat", "went", "away"],
        "pos": ["DT", "NN", "VBD", "RB"],
        "annotations": [
            {"target": [2, 2], "lu": "go.v", "frame": "Motion",
             "elements": [{"role": "Theme", "span": [0, 1]}, {"role": "Goal", "span": [3, 3]}]},
        ],
    },
    {
        "tokens": ["Lee", "saw", "the", "bird"],
        "pos": ["NNP", "VBD", "DT", "NN"],
        "annotations": [
            {"target": [1, 1], "lu": "see.v", "frame": "Perception",
             "elements": [{"role": "Perceiver", "span": [0, 0]}, {"role": "Phenomenon", "span": [2, 3]}]},
        ],
    },
    {
        "tokens": ["Kim", "went"],
        "pos": ["NNP", "VBD"],
        "annotations": [
            {"target": [1, 1], "lu": "go.v", "frame": "Motion", "elements": [{"role": "Theme", "span": [0, 0]}]},
        ],
    },
]

TREES = [
    "(S (NP the dog) (VP (V barked)))",
    "(S (NP Kim) (VP (V saw) (NP a cat)))",
]

TINY = {
    "word_dim": 4,
    "pos_dim": 2,
    "pretrained_dim": 3,
    "frame_dim": 3,
    "lu_dim": 3,
    "role_dim": 3,
    "scaffold_label_dim": 2,
    "distance_dim": 2,
    "distance_clamp": 4,
    "token_hidden": 3,
    "span_hidden": 3,
    "target_hidden": 3,
    "mlp_hidden": 6,
    "frame_hidden": 3,
    "max_span_length": 3,
    "dropout": 0.0,
    "unk_probability": 0.0,
    "learning_rate": 0.02,
    "ensemble_size": 2,
    "epochs": 2,
}


@pytest.fixture
def ontology() -> FrameOntology:
    return FrameOntology.from_dict(ONTOLOGY)


@pytest.fixture
def sentences(ontology) -> List[AnnotatedSentence]:
    return [parse_sentence(raw, line, ontology) for line, raw in enumerate(SENTENCES, start=1)]


@pytest.fixture
def make_config() -> Callable[..., ModelConfig]:
    def factory(**overrides) -> ModelConfig:
        values = dict(TINY)
        values.update(overrides)
        return validate_config(ModelConfig(**values))

    return factory


@pytest.fixture
def tiny_config(make_config) -> ModelConfig:
    return make_config()


@pytest.fixture
def pretrained() -> PretrainedTable:
    rng = np.random.default_rng(7)
    words = ["the", "dog", "cat", "went", "saw"]
    matrix = np.vstack([np.zeros((1, 3)), rng.uniform(-1, 1, size=(len(words), 3))])
    return PretrainedTable(words, matrix)


@pytest.fixture
def resources(sentences, ontology, pretrained) -> Resources:
    return Resources.build(sentences, ontology, pretrained)


@pytest.fixture
def data_files(tmp_path):
    """Writes the fixture corpus, ontology and trees; returns their paths."""
    corpus = tmp_path / "train.jsonl"
    corpus.write_text("\n".join(json.dumps(raw) for raw in SENTENCES) + "\n", encoding="utf-8")
    ontology_path = tmp_path / "ontology.json"
    ontology_path.write_text(json.dumps(ONTOLOGY), encoding="utf-8")
    trees = tmp_path / "trees.txt"
    trees.write_text("\n".join(TREES) + "\n", encoding="utf-8")
    return {"corpus": str(corpus), "ontology": str(ontology_path), "trees": str(trees), "dir": tmp_path}


def finite_difference(fn: Callable[[], float], array: np.ndarray, h: float = 1e-5) -> np.ndarray:
    """Central differences of fn() with respect to every entry of array, perturbed in place."""
    grad = np.zeros_like(array)
    flat = array.reshape(-1)
    out = grad.reshape(-1)
    for index in range(flat.size):
        original = flat[index]
        flat[index] = original + h
        plus = fn()
        flat[index] = original - h
        minus = fn()
        flat[index] = original
        out[index] = (plus - minus) / (2 * h)
    return grad


@pytest.fixture
def numeric_grad() -> Callable[..., np.ndarray]:
    return finite_difference
