"""Shared helpers for CLI subcommands: argument types, stage tagging, config resolution."""

from contextlib import contextmanager
from pathlib import Path
from typing import Dict, Iterator, Optional, Tuple
import argparse

from apps.core.config import (
    AttentionVariant,
    ModelConfig,
    Settings,
    TrainConfig,
    load_experiment_file,
    merge_model_config,
    merge_train_config,
)
from apps.core.errors import CenHdrError
from apps.core.observability.metrics import stage_timer


def even_int(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"{text!r} is not an integer")
    if value < 2 or value % 2:
        raise argparse.ArgumentTypeError(f"{value} must be an even integer >= 2")
    return value


def positive_int(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"{text!r} is not an integer")
    if value < 1:
        raise argparse.ArgumentTypeError(f"{value} must be >= 1")
    return value


def non_negative_int(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"{text!r} is not an integer")
    if value < 0:
        raise argparse.ArgumentTypeError(f"{value} must be >= 0")
    return value


def unit_float(text: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"{text!r} is not a number")
    if not 0.0 <= value <= 1.0:
        raise argparse.ArgumentTypeError(f"{value} must be within [0, 1]")
    return value


def add_config_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", type=Path, help="flat YAML experiment file (ModelConfig/TrainConfig keys)")
    parser.add_argument(
        "--attention",
        choices=[v.value for v in AttentionVariant],
        help="attention variant (default from config)",
    )


class StageFailed(Exception):
    """Wraps a failure with the name of the pipeline stage it happened in."""

    def __init__(self, stage: str, cause: BaseException):
        super().__init__(f"{stage}: {cause}")
        self.stage = stage
        self.cause = cause


@contextmanager
def stage(name: str, timings: Optional[Dict[str, float]] = None) -> Iterator[None]:
    """Time a block and tag library/file errors raised in it with the stage name."""
    try:
        with stage_timer(name, timings):
            yield
    except StageFailed:
        raise
    except (CenHdrError, OSError) as exc:
        raise StageFailed(name, exc) from exc


def resolve_configs(
    settings: Settings, args: argparse.Namespace, **train_flags
) -> Tuple[ModelConfig, TrainConfig]:
    """settings (YAML + env) → experiment file → command-line flags."""
    model_overrides: dict = {}
    train_overrides: dict = {}
    if getattr(args, "config", None) is not None:
        with stage("read_config"):
            model_overrides, train_overrides = load_experiment_file(args.config)
    with stage("resolve_config"):
        model = merge_model_config(settings.model, **model_overrides)
        model = merge_model_config(model, attention=getattr(args, "attention", None))
        train = merge_train_config(settings.train, **train_overrides)
        train = merge_train_config(train, **train_flags)
    return model, train
