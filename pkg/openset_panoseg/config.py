"""
Configuration module for training runs.
Supports flat `key = value` files and YAML files, with environment variable overrides.
"""
import hashlib
import json
from pathlib import Path
from typing import Any, Dict, List, Literal, Optional, Tuple, Type

import yaml
from pydantic import Field, ValidationError, model_validator
from pydantic_settings import BaseSettings, PydanticBaseSettingsSource, SettingsConfigDict

from .exceptions import ConfigurationError


class TrainConfig(BaseSettings):
    """All hyperparameters of a training run. Every key has a default."""

    model_config = SettingsConfigDict(
        env_prefix="PANOSEG_",
        extra="forbid",
        validate_assignment=True,
    )

    # Loss weights
    gamma: float = Field(0.1, ge=0.0)               # graph-loss weight in the total objective
    beta: float = Field(0.1, ge=0.0)                # unknown-aware regularization weight
    use_match_loss: bool = True
    use_edge_loss: bool = True
    use_unknown_loss: bool = True

    # Teacher / memory
    alpha_teacher: float = Field(0.999, ge=0.0, le=1.0)
    alpha_mem: float = Field(0.99, ge=0.0, le=1.0)

    # Euler-margin attention
    attention_mode: Literal["euler", "plain"] = "euler"
    attention_blocks: int = Field(2, ge=0)
    attention_heads: int = Field(4, ge=1)
    feature_dim: int = Field(64, ge=2)
    tau_sort: float = Field(0.1, gt=0.0)
    hard_sort_eval: bool = True
    use_margin_projection: bool = True
    learn_amplitude: bool = True
    learn_scale: bool = True
    learn_bias: bool = True

    # Graph matching adapter
    nodes_per_class: int = Field(8, ge=1)           # K
    sinkhorn_iters: int = Field(20, ge=1)
    graph_dropout: float = Field(0.1, ge=0.0, lt=1.0)
    graph_heads: int = Field(1, ge=1)
    graph_stride: int = Field(1, ge=1)              # run the graph branch every N steps
    prototype_noise: float = Field(0.1, ge=0.0)     # fraction of the class feature std
    match_all_kinds: bool = True                    # prototypes/synthesized nodes enter the matching term
    edge_loss_dropout: bool = True                  # edge term uses the post-dropout affinity

    # Self-training
    pseudo_threshold: float = Field(0.6, gt=0.0, lt=1.0)
    border_top: float = Field(15 / 512, ge=0.0, lt=1.0)
    border_bottom: float = Field(120 / 512, ge=0.0, lt=1.0)
    rcs_enabled: bool = True
    rcs_temperature: float = Field(0.01, gt=0.0)
    rcs_min_pixels: int = Field(3000, ge=0)         # at 512x512 crops, scaled to crop area
    hflip: bool = True

    # Optimization
    lr: float = Field(6e-5, gt=0.0)
    decoder_lr_mult: float = Field(10.0, gt=0.0)
    weight_decay: float = Field(0.01, ge=0.0)
    warmup_steps: int = Field(1500, ge=0)
    total_steps: int = Field(40000, ge=1)
    eval_interval: int = Field(4000, ge=0)          # 0 disables periodic validation
    log_interval: int = Field(50, ge=1)
    max_skips: int = Field(10, ge=1)                # consecutive non-finite steps before abort

    # Data
    crop_height: int = Field(32, ge=16)
    crop_width: int = Field(32, ge=16)
    batch_size: int = Field(2, ge=1)

    seed: int = 0
    dtype: Literal["float32", "float64"] = "float32"

    @classmethod
    def settings_customise_sources(
        cls,
        settings_cls: Type[BaseSettings],
        init_settings: PydanticBaseSettingsSource,
        env_settings: PydanticBaseSettingsSource,
        dotenv_settings: PydanticBaseSettingsSource,
        file_secret_settings: PydanticBaseSettingsSource,
    ) -> Tuple[PydanticBaseSettingsSource, ...]:
        # Environment variables > config file > defaults
        return env_settings, init_settings

    @model_validator(mode="after")
    def _check_consistency(self) -> "TrainConfig":
        if self.total_steps < self.warmup_steps:
            raise ValueError(
                f"total_steps ({self.total_steps}) must be >= warmup_steps ({self.warmup_steps})"
            )
        if self.feature_dim % (2 * self.attention_heads) != 0:
            raise ValueError(
                f"feature_dim ({self.feature_dim}) must be divisible by 2*attention_heads "
                f"({2 * self.attention_heads})"
            )
        if self.crop_height % 16 or self.crop_width % 16:
            raise ValueError("crop_height and crop_width must be multiples of 16")
        return self

    @property
    def crop(self) -> Tuple[int, int]:
        return self.crop_height, self.crop_width

    @property
    def scaled_min_pixels(self) -> int:
        """Rare-class presence threshold rescaled from 512x512 crops to the desk crop."""
        return int(self.rcs_min_pixels * self.crop_height * self.crop_width / (512 * 512))


def _read_flat(path: Path) -> Dict[str, str]:
    data: Dict[str, str] = {}
    with open(path, "r", encoding="utf-8") as f:
        for lineno, raw in enumerate(f, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigurationError(f"{path}:{lineno}: expected 'key = value', got {raw.strip()!r}")
            key, value = (part.strip() for part in line.split("=", 1))
            if not key:
                raise ConfigurationError(f"{path}:{lineno}: empty key")
            if key in data:
                raise ConfigurationError(f"{path}:{lineno}: duplicate key {key!r}")
            data[key] = value
    return data


def _read_file(path: Path) -> Dict[str, Any]:
    if path.suffix in (".yaml", ".yml"):
        with open(path, "r", encoding="utf-8") as f:
            loaded = yaml.safe_load(f) or {}
        if not isinstance(loaded, dict):
            raise ConfigurationError(f"{path}: top level must be a mapping")
        return loaded
    return _read_flat(path)


def build_config(data: Dict[str, Any]) -> TrainConfig:
    """Validate a raw key/value mapping into a TrainConfig."""
    unknown = sorted(set(data) - set(TrainConfig.model_fields))
    if unknown:
        raise ConfigurationError(f"Unknown configuration keys: {', '.join(unknown)}")
    try:
        return TrainConfig(**data)
    except ValidationError as e:
        raise ConfigurationError(f"Invalid configuration: {e}") from e


def load_config(
    config_path: Optional[str] = None,
    overrides: Optional[Dict[str, Any]] = None,
) -> TrainConfig:
    """
    Load configuration from a flat or YAML file with environment variable overrides.

    Priority: Environment variables > overrides > file > default values

    Args:
        config_path: Path to a `key = value` file or a YAML file. None uses defaults only.
        overrides: Extra key/value pairs (e.g. from `--set` on the command line)

    Returns:
        Validated TrainConfig

    Raises:
        ConfigurationError: If the file is missing, malformed, or holds unknown keys
    """
    data: Dict[str, Any] = {}
    if config_path is not None:
        path = Path(config_path)
        if not path.is_file():
            raise ConfigurationError(f"Config file not found: {path}")
        data = _read_file(path)
    if overrides:
        data.update(overrides)
    return build_config(data)


def config_hash(config: TrainConfig) -> str:
    """SHA-256 over the canonical JSON form of the configuration."""
    canonical = json.dumps(config.model_dump(mode="json"), sort_keys=True)
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def diff_config(left: Dict[str, Any], right: Dict[str, Any]) -> List[str]:
    """Keys whose values differ between two config dumps."""
    keys = set(left) | set(right)
    return sorted(k for k in keys if left.get(k) != right.get(k))


# Global config instance
_config: Optional[TrainConfig] = None


def get_config(config_path: Optional[str] = None) -> TrainConfig:
    """Get global config instance (singleton)."""
    global _config
    if _config is None:
        _config = load_config(config_path)
    return _config


def reload_config(config_path: Optional[str] = None) -> TrainConfig:
    """Reload configuration."""
    global _config
    _config = load_config(config_path)
    return _config
