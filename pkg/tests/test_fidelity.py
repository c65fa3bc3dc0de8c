"""
PSNR / SSIM and their mu-law tone-mapped variants.
"""

import math

import cv2
import numpy as np
import pytest

from apps.core.errors import MetricError
from apps.core.services import fidelity
from apps.core.services.pipeline import mu_law


def test_psnr_identical_is_infinite(rng):
    img = rng.random((12, 12, 3))
    assert fidelity.psnr(img, img) == math.inf
    assert fidelity.mu_psnr(img, img) == math.inf


def test_psnr_known_value():
    a = np.zeros((4, 4, 3))
    b = np.full((4, 4, 3), 0.1)
    assert fidelity.psnr(a, b) == pytest.approx(20.0)


def test_psnr_constant_half_difference():
    a = np.zeros((6, 6, 3))
    assert fidelity.psnr(a, a + 0.5) == pytest.approx(6.0206, abs=1e-4)


def test_mu_psnr_is_psnr_of_tonemapped(rng):
    a, b = rng.random((8, 8, 3)) * 3, rng.random((8, 8, 3)) * 3
    assert fidelity.mu_psnr(a, b) == pytest.approx(fidelity.psnr(mu_law(a), mu_law(b)))


def test_ssim_identical_is_one(rng):
    img = rng.random((16, 20, 3))
    assert fidelity.ssim(img, img) == pytest.approx(1.0)
    assert fidelity.mu_ssim(img, img) == pytest.approx(1.0)


def test_ssim_matches_reference_formula(rng):
    a = rng.random((20, 20, 3))
    b = np.clip(a + rng.normal(0, 0.05, a.shape), 0, 1)
    ga, gb = a.mean(axis=2), b.mean(axis=2)
    k = cv2.getGaussianKernel(11, 1.5)
    w = k @ k.T
    scores = []
    for i in range(20 - 10):
        for j in range(20 - 10):
            pa, pb = ga[i:i + 11, j:j + 11], gb[i:i + 11, j:j + 11]
            ma, mb = (w * pa).sum(), (w * pb).sum()
            va = (w * pa * pa).sum() - ma ** 2
            vb = (w * pb * pb).sum() - mb ** 2
            cov = (w * pa * pb).sum() - ma * mb
            scores.append(((2 * ma * mb + 1e-4) * (2 * cov + 9e-4)) / ((ma ** 2 + mb ** 2 + 1e-4) * (va + vb + 9e-4)))
    assert fidelity.ssim(a, b) == pytest.approx(np.mean(scores), rel=1e-6)


def test_ssim_constant_black_against_white():
    black = np.zeros((16, 16, 3))
    assert fidelity.ssim(black, black + 1.0) == pytest.approx(1e-4 / (1 + 1e-4), abs=1e-7)


def test_ssim_decreases_with_noise(rng):
    img = rng.random((24, 24, 3))
    light = np.clip(img + rng.normal(0, 0.02, img.shape), 0, 1)
    heavy = np.clip(img + rng.normal(0, 0.2, img.shape), 0, 1)
    assert fidelity.ssim(img, light) > fidelity.ssim(img, heavy)


def test_metric_errors():
    with pytest.raises(MetricError):
        fidelity.psnr(np.zeros((2, 2, 3)), np.zeros((2, 3, 3)))
    with pytest.raises(MetricError):
        fidelity.ssim(np.zeros((8, 8, 3)), np.zeros((8, 8, 3)))
