import json
import logging
import os
from dataclasses import asdict, dataclass, fields, replace
from typing import Any, Dict, List, Optional, Sequence

from dotenv import dotenv_values, load_dotenv

from app.core.errors import ConfigError


load_dotenv()

logger = logging.getLogger("SegRNN.config")

NUMERATOR_MODES = {"marginal", "canonical"}
MOVING_AVERAGE_MODES = {"beta", "complement"}
SCAFFOLD_SOURCES = {"treebank", "framenet", "both"}


@dataclass(frozen=True)
class AppSettings:
    app_mode: str
    host: str
    port: int
    log_level: str
    db_path: str
    arg_checkpoints: List[str]
    frame_checkpoints: List[str]


def _split_paths(raw: str) -> List[str]:
    return [part.strip() for part in (raw or "").split(",") if part.strip()]


def get_settings() -> AppSettings:
    app_mode = os.getenv("APP_MODE", "cli").strip().lower()
    if app_mode not in {"cli", "api"}:
        app_mode = "cli"

    port_raw = os.getenv("PORT", "8080").strip()
    try:
        port = int(port_raw)
    except ValueError:
        port = 8080

    return AppSettings(
        app_mode=app_mode,
        host=os.getenv("APP_HOST", "0.0.0.0").strip(),
        port=port,
        log_level=os.getenv("SEGRNN_LOG_LEVEL", "INFO").strip(),
        db_path=os.getenv("SEGRNN_DB_PATH", "").strip(),
        arg_checkpoints=_split_paths(os.getenv("SEGRNN_ARG_CHECKPOINTS", "")),
        frame_checkpoints=_split_paths(os.getenv("SEGRNN_FRAME_CHECKPOINTS", "")),
    )


@dataclass(frozen=True)
class ModelConfig:
    # embedding sizes
    word_dim: int = 60
    pos_dim: int = 4
    pretrained_dim: int = 100
    frame_dim: int = 100
    lu_dim: int = 64
    role_dim: int = 50
    scaffold_label_dim: int = 8
    distance_dim: int = 16
    distance_clamp: int = 20
    # recurrent / feed-forward sizes
    token_hidden: int = 64
    span_hidden: int = 64
    target_hidden: int = 64
    mlp_hidden: int = 64
    frame_hidden: int = 64
    # structure
    max_span_length: int = 20
    null_max_length: int = 0
    numerator_mode: str = "marginal"
    alpha: float = 2.0
    delta: float = 0.17
    use_scaffold: bool = True
    scaffold_source: str = "treebank"
    # optimisation
    dropout: float = 0.05
    learning_rate: float = 0.0005
    adam_beta1: float = 0.01
    adam_beta2: float = 0.9999
    adam_epsilon: float = 1e-8
    adam_moving_average_mode: str = "beta"
    clip_norm: float = 5.0
    epochs: int = 15
    unk_probability: float = 0.1
    seed: int = 0
    data_seed: int = 0
    ensemble_size: int = 5

    @property
    def null_length_cap(self) -> int:
        if self.null_max_length <= 0:
            return self.max_span_length
        return min(self.null_max_length, self.max_span_length)

    @property
    def effective_beta1(self) -> float:
        if self.adam_moving_average_mode == "complement":
            return 1.0 - self.adam_beta1
        return self.adam_beta1

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True, separators=(",", ":"))

    @classmethod
    def from_json(cls, text: str) -> "ModelConfig":
        try:
            raw = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"Invalid config JSON: {exc}") from exc
        return validate_config(_apply_values(cls(), {str(k): v for k, v in raw.items()}))


_FIELD_TYPES: Dict[str, type] = {}


def _field_types() -> Dict[str, type]:
    if not _FIELD_TYPES:
        defaults = ModelConfig()
        for item in fields(ModelConfig):
            _FIELD_TYPES[item.name] = type(getattr(defaults, item.name))
    return _FIELD_TYPES


def _coerce(key: str, value: Any) -> Any:
    types = _field_types()
    if key not in types:
        raise ConfigError(f"Unknown config key: {key}")
    target = types[key]
    if isinstance(value, target) and not (target is int and isinstance(value, bool)):
        return value
    text = str(value).strip()
    try:
        if target is bool:
            lowered = text.lower()
            if lowered in {"1", "true", "yes", "on"}:
                return True
            if lowered in {"0", "false", "no", "off"}:
                return False
            raise ValueError(text)
        if target is int:
            return int(text)
        if target is float:
            return float(text)
    except ValueError as exc:
        raise ConfigError(f"Invalid value for {key}: {value!r}") from exc
    return text


def _apply_values(config: ModelConfig, values: Dict[str, Any]) -> ModelConfig:
    changes = {key.strip().lower(): _coerce(key.strip().lower(), value) for key, value in values.items()}
    return replace(config, **changes)


def parse_overrides(overrides: Sequence[str]) -> Dict[str, str]:
    parsed: Dict[str, str] = {}
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"Override must look like key=value, got {item!r}")
        key, value = item.split("=", 1)
        parsed[key.strip()] = value.strip()
    return parsed


def validate_config(config: ModelConfig) -> ModelConfig:
    positive = [
        "word_dim", "pos_dim", "pretrained_dim", "frame_dim", "lu_dim", "role_dim",
        "scaffold_label_dim", "distance_dim", "distance_clamp", "token_hidden",
        "span_hidden", "target_hidden", "mlp_hidden", "frame_hidden",
        "max_span_length", "ensemble_size",
    ]
    for name in positive:
        if getattr(config, name) <= 0:
            raise ConfigError(f"{name} must be positive, got {getattr(config, name)}")
    if config.epochs < 0:
        raise ConfigError(f"epochs must be >= 0, got {config.epochs}")
    if config.null_max_length < 0:
        raise ConfigError("null_max_length must be >= 0")
    if config.numerator_mode not in NUMERATOR_MODES:
        raise ConfigError(f"numerator_mode must be one of {sorted(NUMERATOR_MODES)}")
    if config.adam_moving_average_mode not in MOVING_AVERAGE_MODES:
        raise ConfigError(f"adam_moving_average_mode must be one of {sorted(MOVING_AVERAGE_MODES)}")
    if config.scaffold_source not in SCAFFOLD_SOURCES:
        raise ConfigError(f"scaffold_source must be one of {sorted(SCAFFOLD_SOURCES)}")
    if not 0.0 <= config.dropout < 1.0:
        raise ConfigError(f"dropout must be in [0, 1), got {config.dropout}")
    if not 0.0 <= config.unk_probability <= 1.0:
        raise ConfigError(f"unk_probability must be in [0, 1], got {config.unk_probability}")
    if config.alpha < 0:
        raise ConfigError(f"alpha must be >= 0, got {config.alpha}")
    if config.delta < 0:
        raise ConfigError(f"delta must be >= 0, got {config.delta}")
    for name in ("learning_rate", "adam_epsilon", "clip_norm"):
        if getattr(config, name) <= 0:
            raise ConfigError(f"{name} must be positive")
    for name in ("adam_beta1", "adam_beta2"):
        if not 0.0 <= getattr(config, name) < 1.0:
            raise ConfigError(f"{name} must be in [0, 1)")

    if config.alpha < 1:
        logger.warning("alpha=%s is below 1; the cost no longer favours recall", config.alpha)
    if config.delta >= 1:
        logger.warning("delta=%s is not below 1; the scaffold is no longer de-emphasised", config.delta)
    return config


def load_model_config(path: Optional[str] = None, overrides: Sequence[str] = ()) -> ModelConfig:
    config = ModelConfig()
    if path:
        if not os.path.exists(path):
            raise ConfigError(f"Config file not found: {path}")
        values = {key: value for key, value in dotenv_values(path).items() if value is not None}
        config = _apply_values(config, values)
    if overrides:
        config = _apply_values(config, parse_overrides(overrides))
    return validate_config(config)
