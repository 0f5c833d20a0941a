import numpy as np
import pytest

from motionct.geometry import FAN, PARALLEL, make_geometry, pixel_centers
from motionct.perturb import (
    MAX_SHIFT_PX, SINUSOIDS_FAN, SINUSOIDS_PARALLEL, eval_drift,
    generate_trajectory, sweep_length, warp_image, zero_trajectory,
)

G_PAR = make_geometry(PARALLEL, 90, 91, None, 64)
G_FAN = make_geometry(FAN, 40, 121, 7773.4, 64)


def test_trajectory_deterministic():
    a = generate_trajectory(99, G_PAR)
    b = generate_trajectory(99, G_PAR)
    assert np.array_equal(a.eps_r, b.eps_r)
    assert np.array_equal(a.xi_r, b.xi_r)
    assert np.array_equal(a.xi_rot, b.xi_rot)
    assert a.sigma == b.sigma


def test_sinusoid_counts():
    assert len(generate_trajectory(3, G_PAR).sinusoids) == SINUSOIDS_PARALLEL
    assert len(generate_trajectory(3, G_FAN).sinusoids) == SINUSOIDS_FAN


def test_drift_clipped():
    for seed in range(10):
        t = generate_trajectory(seed, G_PAR)
        assert np.abs(t.eps_r).max() <= MAX_SHIFT_PX + 1e-12
        assert t.eps_r.shape == (90, 2)
        assert t.xi_rot.shape == (90,)


def test_sigma_statistics():
    # per-trajectory stds are drawn from N(0.127, 0.0254^2), truncated at 0
    draws = []
    for seed in range(3000):
        draws.extend(generate_trajectory(seed, G_PAR).sigma)
    draws = np.array(draws)
    assert 0.125 <= draws.mean() <= 0.129
    assert 0.023 <= draws.std() <= 0.028
    assert draws.min() >= 0.0


def test_drift_continuity_bound():
    # consecutive-angle drift differences respect the wave-derivative bound
    t = generate_trajectory(17, G_PAR)
    sweep = sweep_length(G_PAR)
    dphi = float(G_PAR.angles[1] - G_PAR.angles[0]) / sweep
    lipschitz = sum(
        max(p.amplitude) * (p.frequency + p.damping) for p in t.sinusoids
    )
    diffs = np.abs(np.diff(t.eps_r, axis=0)).max()
    assert diffs <= lipschitz * dphi + 1e-9


def test_zero_trajectory_identity():
    t = zero_trajectory(G_PAR)
    assert np.all(t.eps_r == 0.0) and np.all(t.xi_r == 0.0)
    rot, shift = t.motion(5)
    img = np.arange(64.0 * 64).reshape(64, 64)
    assert np.array_equal(warp_image(img, (rot, shift)), img)


def test_warp_identity_bit_exact():
    rng = np.random.default_rng(0)
    img = rng.random((33, 33))
    out = warp_image(img, (0.0, np.zeros(2)))
    assert np.array_equal(out, img)


def test_warp_integer_shift():
    rng = np.random.default_rng(1)
    img = rng.random((16, 16))
    out = warp_image(img, (0.0, np.array([1.0, 0.0])))
    # content moves one column left; rightmost column reads outside -> 0
    assert np.array_equal(out[:, :-1], img[:, 1:])
    assert np.all(out[:, -1] == 0.0)
    out2 = warp_image(img, (0.0, np.array([0.0, -2.0])))
    assert np.array_equal(out2[2:, :], img[:-2, :])
    assert np.all(out2[:2, :] == 0.0)


def test_warp_linearity_exact():
    rng = np.random.default_rng(2)
    a = rng.random((24, 24))
    b = rng.random((24, 24))
    motion = (3.7, np.array([0.4, -1.3]))
    lhs = warp_image(2.0 * a + 0.25 * b, motion)
    rhs = 2.0 * warp_image(a, motion) + 0.25 * warp_image(b, motion)
    assert np.allclose(lhs, rhs, rtol=0, atol=1e-14)


def test_warp_roundtrip_small_motion():
    # smooth content comes back to within 2% after warping there and back
    c = pixel_centers(96)
    x1, x2 = np.meshgrid(c, c)
    img = np.exp(-(x1 ** 2 + x2 ** 2) / 0.18)
    motion = (0.4, np.array([1.3, -0.8]))
    back = warp_image(warp_image(img, motion), (-motion[0], -motion[1]))
    sel = slice(8, -8)  # borders lose mass by construction
    err = np.linalg.norm((back - img)[sel, sel]) / np.linalg.norm(img[sel, sel])
    assert err <= 0.02


def test_eval_drift_starts_at_zero():
    t = generate_trajectory(5, G_PAR)
    angles = np.array([p.start for p in t.sinusoids])
    drift = eval_drift(t.sinusoids, angles, sweep_length(G_PAR))
    # each wave contributes nothing at its own start angle; earlier waves may
    assert drift.shape == (len(angles), 2)


def test_trajectory_scaled():
    t = generate_trajectory(11, G_PAR)
    t2 = t.scaled(2.0)
    assert np.allclose(t2.eps_r, 2.0 * t.eps_r)
    assert np.allclose(t2.xi_rot, 2.0 * t.xi_rot)
