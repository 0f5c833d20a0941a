"""PSNR and SSIM as used for the quantitative evaluation tables."""
from __future__ import annotations

import math

import numpy as np
from scipy.ndimage import correlate1d

SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_K1 = 0.01
SSIM_K2 = 0.03


def _check_pair(a: np.ndarray, b: np.ndarray):
    if a.shape != b.shape:
        raise ValueError(f"image shape mismatch: {a.shape} vs {b.shape}")
    return np.asarray(a, dtype=np.float64), np.asarray(b, dtype=np.float64)


def psnr(x_ref: np.ndarray, x: np.ndarray, data_range: float = 1.0) -> float:
    """10 log10(range^2 / MSE) in dB; identical images give +inf."""
    a, b = _check_pair(x_ref, x)
    if data_range <= 0:
        raise ValueError("data_range must be positive")
    mse = float(np.mean((a - b) ** 2))
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(data_range * data_range / mse)


def gaussian_window(size: int = SSIM_WINDOW, sigma: float = SSIM_SIGMA) -> np.ndarray:
    half = (size - 1) / 2.0
    t = np.arange(size) - half
    w = np.exp(-(t * t) / (2.0 * sigma * sigma))
    return w / w.sum()


def _local_mean(img: np.ndarray, w: np.ndarray) -> np.ndarray:
    # separable window; crop to windows fully inside the image
    tmp = correlate1d(img, w, axis=0, mode="constant")
    tmp = correlate1d(tmp, w, axis=1, mode="constant")
    half = (w.shape[0] - 1) // 2
    return tmp[half:img.shape[0] - half, half:img.shape[1] - half]


def ssim(x_ref: np.ndarray, x: np.ndarray, data_range: float = 1.0) -> float:
    """Mean local SSIM with an 11x11 Gaussian window (sigma 1.5)."""
    a, b = _check_pair(x_ref, x)
    if min(a.shape) < SSIM_WINDOW:
        raise ValueError(f"images must be at least {SSIM_WINDOW} pixels per side")
    w = gaussian_window()
    mu_a = _local_mean(a, w)
    mu_b = _local_mean(b, w)
    var_a = _local_mean(a * a, w) - mu_a * mu_a
    var_b = _local_mean(b * b, w) - mu_b * mu_b
    cov = _local_mean(a * b, w) - mu_a * mu_b
    c1 = (SSIM_K1 * data_range) ** 2
    c2 = (SSIM_K2 * data_range) ** 2
    num = (2.0 * mu_a * mu_b + c1) * (2.0 * cov + c2)
    den = (mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2)
    return float(np.mean(num / den))
