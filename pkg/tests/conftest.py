"""Shared fixtures: project root on sys.path, small model configs, synthetic scenes."""

import sys
from pathlib import Path

import numpy as np
import pytest

PROJECT_ROOT = Path(__file__).parent.parent
sys.path.insert(0, str(PROJECT_ROOT))

from apps.core.config import ModelConfig, TrainConfig  # noqa: E402
from apps.core.kernels.parallel import set_thread_limit  # noqa: E402


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: long-running training / benchmark checks")


@pytest.fixture(autouse=True)
def _single_thread():
    set_thread_limit(1)
    yield
    set_thread_limit(None)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def default_config() -> ModelConfig:
    return ModelConfig()


@pytest.fixture
def tiny_config() -> ModelConfig:
    """Same topology as the default network with narrow layers."""
    return ModelConfig(
        encoder_widths=(4, 8),
        merge_width=16,
        scram_spatial_channels=3,
        scram_hidden=(5, 5, 5),
    )


@pytest.fixture
def tiny_train_config() -> TrainConfig:
    return TrainConfig(
        patch_size=8,
        stride=8,
        batch_size=2,
        epochs=2,
        lr0=1e-3,
        lr_fixed_epochs=1,
        lr_decay_every=1,
        checkpoint_every=1,
        kd_enabled=False,
    )


@pytest.fixture
def scene_root(tmp_path, rng) -> Path:
    """Two 16x24 synthetic scenes with teacher predictions."""
    from scripts.seed_dev import write_scene

    root = tmp_path / "data"
    for i in range(2):
        write_scene(root, f"scene_{i}", 16, 24, rng, teacher=True)
    return root
