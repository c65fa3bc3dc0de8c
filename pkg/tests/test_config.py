"""
Settings profiles, environment overrides and experiment files.
"""

import pytest

from apps.core.config import (
    AttentionVariant,
    ModelConfig,
    TrainConfig,
    get_settings,
    load_experiment_file,
    merge_model_config,
    merge_train_config,
)
from apps.core.errors import ConfigError


@pytest.fixture(autouse=True)
def fresh_settings():
    get_settings.cache_clear()
    yield
    get_settings.cache_clear()


def test_dev_profile_loads():
    settings = get_settings()
    assert settings.environment == "dev"
    assert settings.model.attention == AttentionVariant.SCRAM
    assert settings.train.patch_size == 64


def test_prod_profile_uses_full_protocol(monkeypatch):
    monkeypatch.setenv("CENHDR_ENV", "prod")
    settings = get_settings()
    assert settings.train.patch_size == 256
    assert settings.train.epochs == 500
    assert settings.benchmark.runs == 500 and settings.benchmark.warmup == 50


def test_environment_overrides(monkeypatch):
    monkeypatch.setenv("CENHDR_THREADS", "3")
    monkeypatch.setenv("LOG_FORMAT", "json")
    settings = get_settings()
    assert settings.runtime.threads == 3
    assert settings.observability.log_format == "json"


def test_invalid_settings_are_collected(monkeypatch):
    monkeypatch.setenv("CENHDR_THREADS", "0")
    monkeypatch.setenv("LOG_FORMAT", "xml")
    with pytest.raises(ConfigError) as exc:
        get_settings()
    assert "2 configuration error(s)" in str(exc.value)


def test_experiment_file_splits_model_and_train_keys(tmp_path):
    path = tmp_path / "exp.yaml"
    path.write_text("attention: channel_only_typo\n")
    model, train = load_experiment_file(path)
    assert model == {"attention": "channel_only_typo"} and train == {}
    with pytest.raises(ConfigError):
        merge_model_config(ModelConfig(), **model)

    path.write_text("scram_shared_across_frames: true\nalpha: 0.5\nepochs: 3\n")
    model, train = load_experiment_file(path)
    assert merge_model_config(ModelConfig(), **model).scram_shared_across_frames is True
    assert merge_train_config(TrainConfig(), **train).epochs == 3


@pytest.mark.parametrize("content", ["learning_rate: 1\n", "model:\n  attention: none\n", "- a\n- b\n"])
def test_experiment_file_rejects_unknown_nested_or_non_mapping(tmp_path, content):
    path = tmp_path / "exp.yaml"
    path.write_text(content)
    with pytest.raises(ConfigError):
        load_experiment_file(path)


def test_none_overrides_keep_base_values():
    base = TrainConfig(epochs=7)
    assert merge_train_config(base, epochs=None, alpha=0.3).epochs == 7


def test_model_config_width_constraint():
    with pytest.raises(ValueError):
        ModelConfig(encoder_widths=(16, 32), merge_width=32)
    with pytest.raises(ValueError):
        TrainConfig(alpha=1.5)
