"""Application Configuration: single source of truth.

Architecture hyperparameters (ModelConfig), the training protocol
(TrainConfig) and process-level settings all live here. CLI commands and
services import from apps.core.config.

Precedence, lowest first:
    field defaults
    → infra/config/<CENHDR_ENV>.yaml
    → environment variables (CENHDR_THREADS, LOG_LEVEL, LOG_FORMAT, CENHDR_METRICS_PORT)
    → experiment file (--config, flat YAML mapping)
    → command-line flags
"""

from enum import Enum
from functools import lru_cache
from pathlib import Path
from typing import Any, Dict, Optional, Tuple
import os

import yaml
from dotenv import load_dotenv
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator
from pydantic_settings import BaseSettings, SettingsConfigDict

from apps.core.errors import ConfigError

load_dotenv()


class AttentionVariant(str, Enum):
    """Attention module placed between encoder and merger"""
    SCRAM = "scram"
    SCRAM_SPATIAL_ONLY = "scram_spatial_only"
    SCRAM_CHANNEL_ONLY = "scram_channel_only"
    AHDRNET_LIKE = "ahdrnet_like"
    NONE = "none"


class ModelConfig(BaseModel):
    """Architecture hyperparameters of the merging network"""

    model_config = ConfigDict(frozen=True, extra="forbid")

    encoder_widths: Tuple[int, int] = (16, 32)
    merge_width: int = 64
    # attention input width 64 reduced by 3
    scram_spatial_channels: int = Field(default=21, ge=1)
    scram_hidden: Tuple[int, int, int] = (120, 120, 120)
    scram_shared_across_frames: bool = False
    conv_m1_shared: bool = True
    upscale: int = 2
    gamma: float = Field(default=2.2, gt=0)
    attention: AttentionVariant = AttentionVariant.SCRAM

    @model_validator(mode="after")
    def _check_widths(self) -> "ModelConfig":
        if min(self.encoder_widths) < 1 or self.merge_width < 1:
            raise ValueError("encoder and merge widths must be >= 1")
        if min(self.scram_hidden) < 1:
            raise ValueError("scram_hidden sizes must be >= 1")
        if self.upscale != 2:
            raise ValueError(f"upscale must be 2, got {self.upscale}")
        if self.merge_width != self.encoder_widths[0] * self.upscale ** 2:
            raise ValueError(
                f"merge_width ({self.merge_width}) must equal encoder_widths[0] * upscale^2 "
                f"({self.encoder_widths[0] * self.upscale ** 2}) so the decoder output "
                "can be added to the reference skip features"
            )
        return self

    @property
    def attention_width(self) -> int:
        """Channels of the concatenated SCRAM input X_i"""
        return 2 * self.encoder_widths[1]


class TrainConfig(BaseModel):
    """Training protocol: patches, augmentation, optimizer, LR schedule"""

    model_config = ConfigDict(extra="forbid")

    patch_size: int = Field(default=256, ge=2)
    stride: int = Field(default=128, ge=1)
    batch_size: int = Field(default=8, ge=1)
    epochs: int = Field(default=500, ge=1)
    lr0: float = Field(default=1e-4, gt=0)
    lr_fixed_epochs: int = Field(default=80, ge=0)
    lr_decay: float = Field(default=0.8, gt=0, le=1)
    lr_decay_every: int = Field(default=20, ge=1)
    alpha: float = Field(default=0.2, ge=0, le=1)
    kd_enabled: bool = True
    mu: float = Field(default=5000.0, gt=0)
    seed: int = Field(default=0, ge=0)
    checkpoint_every: int = Field(default=50, ge=1)
    max_steps: Optional[int] = Field(default=None, ge=1)
    augment: bool = True
    workers: int = Field(default=0, ge=0)

    @model_validator(mode="after")
    def _check_patch(self) -> "TrainConfig":
        if self.patch_size % 2:
            raise ValueError(f"patch_size must be even, got {self.patch_size}")
        return self


class ObservabilityConfig(BaseModel):
    log_level: str = "INFO"
    log_format: str = "console"
    metrics_port: Optional[int] = None


class RuntimeConfig(BaseModel):
    # caps kernel-internal parallelism (CENHDR_THREADS)
    threads: int = 1


class BenchmarkConfig(BaseModel):
    runs: int = 500
    warmup: int = 50


class Settings(BaseSettings):
    """
    Process settings, loaded from YAML then overridden by env vars.

    Import convention:
        from apps.core.config import get_settings
    """

    environment: str = "dev"

    app_name: str = "cenhdr"
    app_version: str = "1.0.0"

    model: ModelConfig = ModelConfig()
    train: TrainConfig = TrainConfig()
    observability: ObservabilityConfig = ObservabilityConfig()
    runtime: RuntimeConfig = RuntimeConfig()
    benchmark: BenchmarkConfig = BenchmarkConfig()

    model_config = SettingsConfigDict(
        env_file=".env",
        env_file_encoding="utf-8",
        extra="ignore",
        protected_namespaces=(),
    )


def _load_yaml(environment: str) -> Dict[str, Any]:
    config_dir = Path(__file__).parent.parent.parent / "infra" / "config"
    config_file = config_dir / f"{environment}.yaml"
    if not config_file.exists():
        return {}
    with open(config_file, "r") as f:
        return yaml.safe_load(f) or {}


def _env_int(name: str) -> int:
    value = os.getenv(name, "")
    try:
        return int(value)
    except ValueError:
        raise ConfigError(f"{name} must be an integer, got {value!r}")


def _apply_env_overrides(config: Dict[str, Any]) -> Dict[str, Any]:
    """
    Apply environment variable overrides on top of YAML config.

    Env vars take precedence over YAML values.
    """
    if os.getenv("CENHDR_THREADS"):
        config.setdefault("runtime", {})["threads"] = _env_int("CENHDR_THREADS")

    obs = config.setdefault("observability", {})
    if os.getenv("LOG_LEVEL"):
        obs["log_level"] = os.getenv("LOG_LEVEL")
    if os.getenv("LOG_FORMAT"):
        obs["log_format"] = os.getenv("LOG_FORMAT")
    if os.getenv("CENHDR_METRICS_PORT"):
        obs["metrics_port"] = _env_int("CENHDR_METRICS_PORT")

    return config


@lru_cache()
def get_settings() -> Settings:
    environment = os.getenv("CENHDR_ENV", "dev")
    config = _load_yaml(environment)
    config = _apply_env_overrides(config)
    config["environment"] = environment
    try:
        settings = Settings(**config)
    except ValidationError as exc:
        raise ConfigError(f"invalid settings for environment {environment!r}: {exc}") from exc
    _validate_settings(settings)
    return settings


def _validate_settings(settings: Settings) -> None:
    """
    Startup-time configuration gate.

    Collects every violation and raises a single ConfigError so a broken
    profile fails before any file is read or written.
    """
    errors: list[str] = []

    if settings.runtime.threads < 1:
        errors.append(f"CENHDR_THREADS must be >= 1, got {settings.runtime.threads}")

    if settings.observability.log_level.upper() not in ("DEBUG", "INFO", "WARNING", "ERROR"):
        errors.append(f"LOG_LEVEL {settings.observability.log_level!r} is not a log level")

    if settings.observability.log_format not in ("json", "console"):
        errors.append(
            f"LOG_FORMAT must be 'json' or 'console', got {settings.observability.log_format!r}"
        )

    if settings.benchmark.runs < 1 or settings.benchmark.warmup < 0:
        errors.append("benchmark runs must be >= 1 and warmup >= 0")

    if errors:
        bullet_list = "\n  - ".join(errors)
        raise ConfigError(f"{len(errors)} configuration error(s):\n  - {bullet_list}")


# Experiment files: flat key/value mapping over ModelConfig and TrainConfig fields

def load_experiment_file(path: Path) -> Tuple[Dict[str, Any], Dict[str, Any]]:
    """
    Read a flat YAML experiment file and split it into model and train overrides.

    Raises:
        ConfigError: unreadable file, nested values, or unknown keys
    """
    try:
        raw = yaml.safe_load(Path(path).read_text()) or {}
    except (OSError, yaml.YAMLError) as exc:
        raise ConfigError(f"cannot read experiment file {path}: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError(f"experiment file {path} must be a flat key: value mapping")

    model_fields = set(ModelConfig.model_fields)
    train_fields = set(TrainConfig.model_fields)
    model_overrides: Dict[str, Any] = {}
    train_overrides: Dict[str, Any] = {}
    for key, value in raw.items():
        if isinstance(value, dict):
            raise ConfigError(f"experiment file key {key!r} must not be nested")
        if key in model_fields:
            model_overrides[key] = value
        elif key in train_fields:
            train_overrides[key] = value
        else:
            raise ConfigError(f"unknown experiment file key {key!r}")
    return model_overrides, train_overrides


def merge_model_config(base: ModelConfig, **overrides: Any) -> ModelConfig:
    """Return a validated copy of `base` with non-None overrides applied"""
    data = base.model_dump()
    data.update({k: v for k, v in overrides.items() if v is not None})
    try:
        return ModelConfig(**data)
    except ValidationError as exc:
        raise ConfigError(f"invalid model configuration: {exc}") from exc


def merge_train_config(base: TrainConfig, **overrides: Any) -> TrainConfig:
    """Return a validated copy of `base` with non-None overrides applied"""
    data = base.model_dump()
    data.update({k: v for k, v in overrides.items() if v is not None})
    try:
        return TrainConfig(**data)
    except ValidationError as exc:
        raise ConfigError(f"invalid training configuration: {exc}") from exc
