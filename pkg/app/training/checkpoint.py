"""Self-describing model checkpoints.

Layout (all integers little-endian):
    magic b"SEGRNNCK", uint32 format version,
    uint64 length + canonical config JSON,
    uint64 length + metadata JSON (resources, hashes, best metric),
    uint32 tensor count, then per tensor:
        uint32 name length + utf-8 name, uint32 ndim, uint64 dims, raw float64 data.
"""

import json
import logging
import struct
from dataclasses import dataclass, field
from typing import Any, BinaryIO, Dict, List, Optional, Union

import numpy as np

from app.autodiff.optim import OptimizerState
from app.autodiff.params import ParameterStore
from app.core.config import ModelConfig
from app.core.errors import CheckpointError, ConfigError
from app.models.argid import ArgumentModel
from app.models.frameid import FrameIdentifier
from app.models.resources import Resources

logger = logging.getLogger("SegRNN.checkpoint")

MAGIC = b"SEGRNNCK"
FORMAT_VERSION = 1
KINDS = {"arg": ArgumentModel, "frame": FrameIdentifier}

Model = Union[ArgumentModel, FrameIdentifier]

_PARAM = "param/"
_FIRST_MOMENT = "adam.m/"
_SECOND_MOMENT = "adam.v/"


@dataclass
class Checkpoint:
    kind: str
    config: ModelConfig
    resources: Resources
    store: ParameterStore
    metadata: Dict[str, Any] = field(default_factory=dict)
    optimizer: Optional[OptimizerState] = None
    version: int = FORMAT_VERSION

    @property
    def best_metric(self) -> Optional[float]:
        return self.metadata.get("best_metric")

    @property
    def vocabulary_hash(self) -> str:
        return self.metadata["vocabulary_hash"]

    @property
    def ontology_hash(self) -> str:
        return self.metadata["ontology_hash"]

    def build_model(self) -> Model:
        template = KINDS[self.kind].create(self.config, self.resources, seed=0)
        for name in template.store.names():
            if name not in self.store:
                raise CheckpointError(f"checkpoint is missing parameter {name}")
            if self.store[name].shape != template.store[name].shape:
                raise CheckpointError(
                    f"parameter {name} has shape {self.store[name].shape}, model expects {template.store[name].shape}"
                )
        extra = set(self.store.names()) - set(template.store.names())
        if extra:
            raise CheckpointError(f"checkpoint has unexpected parameters: {sorted(extra)}")
        return KINDS[self.kind](self.config, self.resources, self.store, template.params)


def _write_block(handle: BinaryIO, payload: bytes) -> None:
    handle.write(struct.pack("<Q", len(payload)))
    handle.write(payload)


def _write_tensor(handle: BinaryIO, name: str, value: np.ndarray) -> None:
    encoded = name.encode("utf-8")
    array = np.ascontiguousarray(value, dtype="<f8")
    handle.write(struct.pack("<I", len(encoded)))
    handle.write(encoded)
    handle.write(struct.pack("<I", array.ndim))
    handle.write(struct.pack(f"<{array.ndim}Q", *array.shape))
    handle.write(array.tobytes())


def _read_exact(handle: BinaryIO, size: int) -> bytes:
    data = handle.read(size)
    if len(data) != size:
        raise CheckpointError("checkpoint is truncated")
    return data


def save_checkpoint(
    path: str,
    model: Model,
    optimizer: Optional[OptimizerState] = None,
    best_metric: Optional[float] = None,
    epoch: Optional[int] = None,
    seed: Optional[int] = None,
) -> None:
    kind = "arg" if isinstance(model, ArgumentModel) else "frame"
    metadata = {
        "kind": kind,
        "resources": model.resources.to_dict(),
        "vocabulary_hash": model.resources.vocabulary_hash(),
        "ontology_hash": model.resources.ontology_hash(),
        "best_metric": best_metric,
        "epoch": epoch,
        "seed": seed,
        "params": [
            {"name": name, "frozen": model.store[name].frozen, "sparse": model.store[name].sparse}
            for name in model.store.names()
        ],
    }
    tensors: List = [(_PARAM + name, model.store.value(name)) for name in model.store.names()]
    if optimizer is not None:
        metadata["optimizer"] = {
            "learning_rate": optimizer.learning_rate,
            "beta1": optimizer.beta1,
            "beta2": optimizer.beta2,
            "epsilon": optimizer.epsilon,
            "step": optimizer.step,
        }
        for name in sorted(optimizer.first_moment):
            tensors.append((_FIRST_MOMENT + name, optimizer.first_moment[name]))
            tensors.append((_SECOND_MOMENT + name, optimizer.second_moment[name]))

    with open(path, "wb") as handle:
        handle.write(MAGIC)
        handle.write(struct.pack("<I", FORMAT_VERSION))
        _write_block(handle, model.config.to_json().encode("utf-8"))
        _write_block(handle, json.dumps(metadata, sort_keys=True, separators=(",", ":")).encode("utf-8"))
        handle.write(struct.pack("<I", len(tensors)))
        for name, value in tensors:
            _write_tensor(handle, name, value)
    logger.info("Saved %s checkpoint | path=%s tensors=%d best=%s", kind, path, len(tensors), best_metric)


def _read_raw(path: str) -> Dict[str, Any]:
    try:
        handle = open(path, "rb")
    except FileNotFoundError as exc:
        raise CheckpointError(f"checkpoint not found: {path}") from exc
    with handle:
        if _read_exact(handle, len(MAGIC)) != MAGIC:
            raise CheckpointError(f"{path} is not a checkpoint (bad magic)")
        (version,) = struct.unpack("<I", _read_exact(handle, 4))
        if version != FORMAT_VERSION:
            raise CheckpointError(f"unsupported checkpoint version {version}, expected {FORMAT_VERSION}")
        (config_size,) = struct.unpack("<Q", _read_exact(handle, 8))
        config_json = _read_exact(handle, config_size).decode("utf-8")
        (meta_size,) = struct.unpack("<Q", _read_exact(handle, 8))
        metadata = json.loads(_read_exact(handle, meta_size).decode("utf-8"))
        (count,) = struct.unpack("<I", _read_exact(handle, 4))
        tensors: Dict[str, np.ndarray] = {}
        for _ in range(count):
            (name_size,) = struct.unpack("<I", _read_exact(handle, 4))
            name = _read_exact(handle, name_size).decode("utf-8")
            (ndim,) = struct.unpack("<I", _read_exact(handle, 4))
            shape = struct.unpack(f"<{ndim}Q", _read_exact(handle, 8 * ndim))
            size = int(np.prod(shape)) if ndim else 1
            data = np.frombuffer(_read_exact(handle, 8 * size), dtype="<f8")
            tensors[name] = data.reshape(shape).astype(np.float64)
    return {"version": version, "config_json": config_json, "metadata": metadata, "tensors": tensors}


def load_checkpoint(path: str) -> Checkpoint:
    raw = _read_raw(path)
    metadata = raw["metadata"]
    kind = metadata.get("kind")
    if kind not in KINDS:
        raise CheckpointError(f"unknown checkpoint kind {kind!r}")
    try:
        config = ModelConfig.from_json(raw["config_json"])
    except ConfigError as exc:
        raise CheckpointError(f"checkpoint config is invalid: {exc}") from exc

    tensors = raw["tensors"]
    store = ParameterStore()
    for entry in metadata["params"]:
        name = entry["name"]
        if _PARAM + name not in tensors:
            raise CheckpointError(f"checkpoint is missing tensor for {name}")
        value = tensors[_PARAM + name]
        store.add(name, value.shape, value=value, frozen=entry["frozen"], sparse=entry["sparse"])

    pretrained_name = f"{KINDS[kind].PREFIX}.pretrained"
    if pretrained_name not in store:
        raise CheckpointError(f"checkpoint is missing parameter {pretrained_name}")
    resources = Resources.from_dict(metadata["resources"], store.value(pretrained_name))
    if resources.vocabulary_hash() != metadata["vocabulary_hash"]:
        raise CheckpointError(f"{path}: vocabulary hash mismatch")
    if resources.ontology_hash() != metadata["ontology_hash"]:
        raise CheckpointError(f"{path}: ontology hash mismatch")

    optimizer = None
    if "optimizer" in metadata:
        settings = metadata["optimizer"]
        optimizer = OptimizerState(
            learning_rate=settings["learning_rate"],
            beta1=settings["beta1"],
            beta2=settings["beta2"],
            epsilon=settings["epsilon"],
            step=settings["step"],
        )
        for name, value in tensors.items():
            if name.startswith(_FIRST_MOMENT):
                optimizer.first_moment[name[len(_FIRST_MOMENT):]] = value
            elif name.startswith(_SECOND_MOMENT):
                optimizer.second_moment[name[len(_SECOND_MOMENT):]] = value

    return Checkpoint(kind, config, resources, store, metadata, optimizer, raw["version"])


def load_model(path: str) -> Model:
    return load_checkpoint(path).build_model()


def inspect_checkpoint(path: str) -> Dict[str, Any]:
    raw = _read_raw(path)
    metadata = raw["metadata"]
    return {
        "path": path,
        "format_version": raw["version"],
        "kind": metadata.get("kind"),
        "config": json.loads(raw["config_json"]),
        "vocabulary_hash": metadata.get("vocabulary_hash"),
        "ontology_hash": metadata.get("ontology_hash"),
        "best_metric": metadata.get("best_metric"),
        "epoch": metadata.get("epoch"),
        "seed": metadata.get("seed"),
        "optimizer_step": metadata.get("optimizer", {}).get("step"),
        "tensors": {name: list(value.shape) for name, value in raw["tensors"].items()},
    }


def check_compatible(checkpoints: List[Checkpoint]) -> None:
    """Ensemble members must index the same vocabularies and ontology."""
    if not checkpoints:
        raise CheckpointError("no checkpoints given")
    first = checkpoints[0]
    for other in checkpoints[1:]:
        if other.kind != first.kind:
            raise CheckpointError(f"cannot ensemble {first.kind} with {other.kind} checkpoints")
        if other.vocabulary_hash != first.vocabulary_hash:
            raise CheckpointError("ensemble members have different vocabulary hashes")
        if other.ontology_hash != first.ontology_hash:
            raise CheckpointError("ensemble members have different ontology hashes")
