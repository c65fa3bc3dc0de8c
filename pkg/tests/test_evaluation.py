"""
Dataset evaluation: per-scene rows, mean row, skipping rules.
"""

import math

import numpy as np
import pytest

from apps.adapters.dataset.scenes import load_dataset
from apps.core.domain.bracket import ExposureBracket
from apps.core.errors import MetricError
from apps.core.services import cenhdr
from apps.core.services.evaluation import evaluate


def test_ground_truth_as_prediction_scores_perfectly(scene_root, tiny_config):
    dataset = load_dataset(scene_root)
    report = evaluate(dataset, None, tiny_config, predictor=lambda b: b.gt_hdr)
    assert [r.scene for r in report.rows] == ["scene_0", "scene_1"]
    for row in report.rows + [report.mean]:
        assert row.psnr == math.inf and row.mu_psnr == math.inf
        assert row.ssim == pytest.approx(1.0) and row.mu_ssim == pytest.approx(1.0)


def test_network_predictions_are_scored(scene_root, tiny_config):
    weights = cenhdr.build_model(tiny_config, seed=0)
    report = evaluate(load_dataset(scene_root), weights, tiny_config)
    assert len(report.rows) == 2
    assert all(math.isfinite(r.psnr) and -1.0 <= r.ssim <= 1.0 for r in report.rows)
    assert report.mean.psnr == pytest.approx(sum(r.psnr for r in report.rows) / 2)


def test_scenes_without_gt_are_skipped(scene_root, tiny_config, rng):
    dataset = load_dataset(scene_root)
    frames = tuple(rng.random((16, 16, 3)).astype(np.float32) for _ in range(3))
    no_gt = ExposureBracket.from_evs(frames, (-2, 0, 2), name="no_gt")
    report = evaluate([no_gt, *dataset], None, tiny_config, predictor=lambda b: b.gt_hdr)
    assert report.skipped == ["no_gt"]
    assert len(report.rows) == 2


def test_too_small_scene_is_skipped_and_all_skipped_raises(tiny_config, rng):
    frames = tuple(rng.random((6, 6, 3)).astype(np.float32) for _ in range(3))
    small = ExposureBracket.from_evs(frames, (-2, 0, 2), gt_hdr=np.ones((6, 6, 3), np.float32), name="small")
    with pytest.raises(MetricError):
        evaluate([small], None, tiny_config, predictor=lambda b: b.gt_hdr)


def test_evaluate_needs_weights_or_predictor(scene_root, tiny_config):
    with pytest.raises(MetricError):
        evaluate(load_dataset(scene_root), None, tiny_config)
