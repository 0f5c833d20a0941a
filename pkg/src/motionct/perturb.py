"""Per-angle rigid object motion: damped sinusoids plus Gaussian jitter.

A trajectory assigns every scan angle a rigid motion: a deterministic drift
``eps`` built from overlapping damped sine waves (38 for parallel beams, 9
for fan beams), plus i.i.d. Gaussian jitter in both translation components
(pixels) and rotation (degrees).  The jitter standard deviations are
themselves drawn once per trajectory from N(0.127, 0.0254^2), truncated at
zero.  Translations are clipped to +/- MAX_SHIFT_PX per component.
"""
from __future__ import annotations

from dataclasses import dataclass, asdict
from typing import List

import numpy as np

from .geometry import FAN, Geometry

SINUSOIDS_PARALLEL = 38
SINUSOIDS_FAN = 9
MAX_SHIFT_PX = 2.0
SIGMA_MEAN = 0.127
SIGMA_STD = 0.0254

# declared drift defaults (amplitudes in pixels, frequency and damping per
# full sweep); chosen so drifts wander on the +/-2 px scale
AMPLITUDE_RANGE = (0.1, 1.2)
FREQUENCY_RANGE = (2.0, 40.0)
DAMPING_RANGE = (0.5, 6.0)


@dataclass(frozen=True)
class SinusoidParams:
    start: float        # angle at which the wave begins (radians)
    amplitude: tuple[float, float]  # per-component amplitude (pixels)
    frequency: float    # radians of phase per full sweep
    damping: float      # decay rate per full sweep


@dataclass(frozen=True)
class PerturbationTrajectory:
    eps_r: np.ndarray    # (K, 2) deterministic drift, pixels
    xi_r: np.ndarray     # (K, 2) translation jitter, pixels
    xi_rot: np.ndarray   # (K,)  rotation jitter, degrees
    sinusoids: List[SinusoidParams]
    sigma: tuple[float, float, float]  # drawn jitter stds (r1, r2, rot)
    seed: int

    @property
    def num_angles(self) -> int:
        return self.eps_r.shape[0]

    def motion(self, k: int) -> tuple[float, np.ndarray]:
        """(rotation degrees, translation pixels) applied at angle k."""
        return float(self.xi_rot[k]), self.eps_r[k] + self.xi_r[k]

    def scaled(self, factor: float) -> "PerturbationTrajectory":
        """Trajectory with all motion magnitudes multiplied by factor."""
        return PerturbationTrajectory(
            eps_r=self.eps_r * factor,
            xi_r=self.xi_r * factor,
            xi_rot=self.xi_rot * factor,
            sinusoids=self.sinusoids,
            sigma=self.sigma,
            seed=self.seed,
        )

    def to_dict(self) -> dict:
        return {
            "seed": self.seed,
            "sigma": list(self.sigma),
            "sinusoids": [asdict(s) for s in self.sinusoids],
        }


def sweep_length(g: Geometry) -> float:
    return 2.0 * np.pi if g.kind == FAN else np.pi


def _truncated_normal(rng: np.random.Generator, mean: float, std: float) -> float:
    for _ in range(1000):
        v = rng.normal(mean, std)
        if v >= 0.0:
            return float(v)
    return 0.0


def eval_drift(sinusoids: List[SinusoidParams], angles: np.ndarray,
               sweep: float) -> np.ndarray:
    """Summed damped-sine drift at the given angles, clipped, in pixels."""
    eps = np.zeros((angles.shape[0], 2))
    for p in sinusoids:
        s = (angles - p.start) / sweep
        active = s >= 0.0
        wave = np.where(active, np.exp(-p.damping * s) * np.sin(p.frequency * s), 0.0)
        eps[:, 0] += p.amplitude[0] * wave
        eps[:, 1] += p.amplitude[1] * wave
    return np.clip(eps, -MAX_SHIFT_PX, MAX_SHIFT_PX)


def generate_trajectory(seed: int, g: Geometry) -> PerturbationTrajectory:
    """Deterministic per-angle motion for a seed and geometry."""
    rng = np.random.default_rng(seed)
    sigma = tuple(
        _truncated_normal(rng, SIGMA_MEAN, SIGMA_STD) for _ in range(3)
    )
    n_waves = SINUSOIDS_FAN if g.kind == FAN else SINUSOIDS_PARALLEL
    sweep = sweep_length(g)
    starts = rng.uniform(0.0, sweep, n_waves)
    amps = rng.uniform(*AMPLITUDE_RANGE, (n_waves, 2))
    freqs = rng.uniform(*FREQUENCY_RANGE, n_waves)
    damps = rng.uniform(*DAMPING_RANGE, n_waves)
    sinusoids = [
        SinusoidParams(float(starts[j]), (float(amps[j, 0]), float(amps[j, 1])),
                       float(freqs[j]), float(damps[j]))
        for j in range(n_waves)
    ]
    K = g.num_angles
    xi_r = np.column_stack([
        rng.normal(0.0, sigma[0], K),
        rng.normal(0.0, sigma[1], K),
    ])
    xi_rot = rng.normal(0.0, sigma[2], K)
    eps = eval_drift(sinusoids, np.asarray(g.angles), sweep)
    return PerturbationTrajectory(
        eps_r=eps, xi_r=xi_r, xi_rot=xi_rot, sinusoids=sinusoids,
        sigma=sigma, seed=int(seed),
    )


def zero_trajectory(g: Geometry, seed: int = 0) -> PerturbationTrajectory:
    K = g.num_angles
    return PerturbationTrajectory(
        eps_r=np.zeros((K, 2)), xi_r=np.zeros((K, 2)), xi_rot=np.zeros(K),
        sinusoids=[], sigma=(0.0, 0.0, 0.0), seed=seed,
    )


def warp_image(x: np.ndarray, motion: tuple[float, np.ndarray]) -> np.ndarray:
    """Rigid warp: output(r) = input(R(rot) r + shift * h), zero outside.

    Rotation is in degrees about the image center, the shift in pixels.
    Sampling is bilinear, so the warp is exactly linear in the image values
    and the identity motion reproduces the input bit for bit.
    """
    rot_deg, shift = motion
    shift = np.asarray(shift, dtype=np.float64)
    size = x.shape[0]
    c = (size - 1) / 2.0
    rows, cols = np.meshgrid(np.arange(size), np.arange(size), indexing="ij")
    u = cols - c   # x1 axis in pixel units
    v = rows - c   # x2 axis in pixel units
    th = np.deg2rad(rot_deg)
    ct, st = np.cos(th), np.sin(th)
    su = ct * u - st * v + shift[0]
    sv = st * u + ct * v + shift[1]
    col = su + c
    row = sv + c
    j0 = np.floor(col).astype(np.int64)
    i0 = np.floor(row).astype(np.int64)
    fj = col - j0
    fi = row - i0
    out = np.zeros_like(x, dtype=np.float64)
    for di, dj, wgt in (
        (0, 0, (1 - fi) * (1 - fj)),
        (0, 1, (1 - fi) * fj),
        (1, 0, fi * (1 - fj)),
        (1, 1, fi * fj),
    ):
        ii = i0 + di
        jj = j0 + dj
        valid = (ii >= 0) & (ii < size) & (jj >= 0) & (jj < size)
        vals = np.where(valid, x[np.clip(ii, 0, size - 1), np.clip(jj, 0, size - 1)], 0.0)
        out += wgt * vals
    return out
