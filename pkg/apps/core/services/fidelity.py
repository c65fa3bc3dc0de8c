"""
Fidelity metrics: PSNR and SSIM in the linear domain and after mu-law
tone mapping.

SSIM follows the common 11×11 Gaussian window (sigma 1.5) with K1 = 0.01,
K2 = 0.03 on a dynamic range of 1.0, computed on the channel-mean gray
image over the valid filter region.
"""

import math

import cv2
import numpy as np

from apps.core.errors import MetricError
from apps.core.services.pipeline import mu_law

SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_C1 = 0.01 ** 2
SSIM_C2 = 0.03 ** 2


def _check_pair(a: np.ndarray, b: np.ndarray) -> None:
    if a.shape != b.shape:
        raise MetricError(f"images differ in shape: {a.shape} vs {b.shape}")


def psnr(a: np.ndarray, b: np.ndarray, peak: float = 1.0) -> float:
    """10·log10(peak² / MSE); +inf for identical images."""
    _check_pair(a, b)
    mse = float(np.mean((np.asarray(a, np.float64) - np.asarray(b, np.float64)) ** 2))
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(peak ** 2 / mse)


def mu_psnr(a: np.ndarray, b: np.ndarray, mu: float = 5000.0) -> float:
    return psnr(mu_law(a, mu), mu_law(b, mu))


def _gray(img: np.ndarray) -> np.ndarray:
    img = np.asarray(img, dtype=np.float64)
    return img.mean(axis=2) if img.ndim == 3 else img


def ssim(a: np.ndarray, b: np.ndarray) -> float:
    _check_pair(a, b)
    img1, img2 = _gray(a), _gray(b)
    if min(img1.shape) < SSIM_WINDOW:
        raise MetricError(
            f"SSIM needs images of at least {SSIM_WINDOW}x{SSIM_WINDOW}, got {img1.shape[1]}x{img1.shape[0]}"
        )

    kernel = cv2.getGaussianKernel(SSIM_WINDOW, SSIM_SIGMA)
    window = np.outer(kernel, kernel.transpose())
    r = SSIM_WINDOW // 2

    def filt(x: np.ndarray) -> np.ndarray:
        return cv2.filter2D(x, -1, window)[r:-r, r:-r]  # valid

    mu1, mu2 = filt(img1), filt(img2)
    mu1_sq, mu2_sq, mu1_mu2 = mu1 ** 2, mu2 ** 2, mu1 * mu2
    sigma1_sq = filt(img1 ** 2) - mu1_sq
    sigma2_sq = filt(img2 ** 2) - mu2_sq
    sigma12 = filt(img1 * img2) - mu1_mu2

    ssim_map = ((2 * mu1_mu2 + SSIM_C1) * (2 * sigma12 + SSIM_C2)) / (
        (mu1_sq + mu2_sq + SSIM_C1) * (sigma1_sq + sigma2_sq + SSIM_C2)
    )
    return float(ssim_map.mean())


def mu_ssim(a: np.ndarray, b: np.ndarray, mu: float = 5000.0) -> float:
    return ssim(mu_law(a, mu), mu_law(b, mu))
