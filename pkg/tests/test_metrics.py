import math

import numpy as np
import pytest

from motionct.metrics import gaussian_window, psnr, ssim


def test_psnr_identical_is_infinite():
    x = np.random.default_rng(0).random((32, 32))
    assert math.isinf(psnr(x, x))


def test_psnr_constant_images():
    a = np.full((16, 16), 0.5)
    b = np.full((16, 16), 0.75)
    # MSE 0.0625 -> 10 log10(16) = 12.0412 dB
    assert psnr(a, b) == pytest.approx(12.0412, abs=1e-3)


def test_psnr_matches_two_line_oracle():
    rng = np.random.default_rng(1)
    a = rng.random((20, 20))
    b = rng.random((20, 20))
    mse = np.mean((a - b) ** 2)
    want = 10 * np.log10(1.0 / mse)
    assert psnr(a, b) == pytest.approx(want, rel=1e-10)


def test_psnr_symmetric_and_validating():
    rng = np.random.default_rng(2)
    a, b = rng.random((12, 12)), rng.random((12, 12))
    assert psnr(a, b) == psnr(b, a)
    with pytest.raises(ValueError):
        psnr(a, np.zeros((5, 5)))
    with pytest.raises(ValueError):
        psnr(a, b, data_range=0.0)


def test_ssim_identical_is_one():
    x = np.random.default_rng(3).random((32, 32))
    assert ssim(x, x) == pytest.approx(1.0, abs=1e-12)


def test_ssim_inverted_below_one():
    rng = np.random.default_rng(4)
    x = rng.random((32, 32))
    assert ssim(x, 1.0 - x) < 1.0


def test_ssim_matches_sliding_window_oracle():
    rng = np.random.default_rng(5)
    a = rng.random((24, 24))
    b = np.clip(a + 0.1 * rng.standard_normal((24, 24)), 0, 1)
    w1 = gaussian_window()
    w2 = np.outer(w1, w1)
    c1, c2 = 0.01 ** 2, 0.03 ** 2
    vals = []
    for i in range(5, 24 - 5):
        for j in range(5, 24 - 5):
            pa = a[i - 5:i + 6, j - 5:j + 6]
            pb = b[i - 5:i + 6, j - 5:j + 6]
            mu_a = float(np.sum(w2 * pa))
            mu_b = float(np.sum(w2 * pb))
            va = float(np.sum(w2 * pa * pa)) - mu_a ** 2
            vb = float(np.sum(w2 * pb * pb)) - mu_b ** 2
            cov = float(np.sum(w2 * pa * pb)) - mu_a * mu_b
            vals.append(((2 * mu_a * mu_b + c1) * (2 * cov + c2))
                        / ((mu_a ** 2 + mu_b ** 2 + c1) * (va + vb + c2)))
    assert ssim(a, b) == pytest.approx(float(np.mean(vals)), abs=1e-8)


def test_ssim_symmetric():
    rng = np.random.default_rng(6)
    a, b = rng.random((20, 20)), rng.random((20, 20))
    assert ssim(a, b) == pytest.approx(ssim(b, a), rel=1e-12)


def test_ssim_monotone_under_gain_and_offset():
    rng = np.random.default_rng(7)
    x = rng.random((32, 32))
    gains = [ssim(x, a * x) for a in (1.0, 1.25, 1.5)]
    assert gains[0] > gains[1] > gains[2]
    offsets = [ssim(x, x + c) for c in (0.0, 0.15, 0.3)]
    assert offsets[0] > offsets[1] > offsets[2]


def test_ssim_rejects_small_images():
    with pytest.raises(ValueError):
        ssim(np.zeros((8, 8)), np.zeros((8, 8)))
