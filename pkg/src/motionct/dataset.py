"""Sample simulation: perturbed measurements and inexactness estimates.

A sample couples a phantom x with two sinograms: the clean projection of the
static phantom (the known, inexact scan model) and the perturbed sinogram in
which every angle sees the phantom under that angle's rigid motion (the
hidden true acquisition).  Additive detector noise is off by default, so the
two differ through motion only.  The per-angle inexactness is estimated as
the maximum absolute deviation between the two sinograms over the detector.
"""
from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import dataio
from .geometry import Geometry
from .perturb import PerturbationTrajectory, generate_trajectory, warp_image
from .phantoms import PhantomSpec, generate_phantom
from .projector import project_angle, project_full

SPLIT_FRACTIONS = (0.95, 0.04, 0.01)

_MIX_GAMMA = 0x9E3779B97F4A7C15


def mix_seed(seed: int, index: int) -> int:
    """Fixed 64-bit mix so any sample is reproducible on its own."""
    z = (seed + (index + 1) * _MIX_GAMMA) & 0xFFFFFFFFFFFFFFFF
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & 0xFFFFFFFFFFFFFFFF
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & 0xFFFFFFFFFFFFFFFF
    return z ^ (z >> 31)


def split_counts(total: int) -> tuple[int, int, int]:
    """Default 95/4/1 split; training absorbs the rounding remainder."""
    n_val = round(total * SPLIT_FRACTIONS[1])
    n_test = round(total * SPLIT_FRACTIONS[2])
    return total - n_val - n_test, n_val, n_test


@dataclass(frozen=True)
class DatasetSample:
    sample_id: str
    seed: int
    phantom: np.ndarray         # (S, S) float32
    sino_clean: np.ndarray      # (K, L) float32, static model
    sino_perturbed: np.ndarray  # (K, L) float32, hidden true acquisition
    trajectory: PerturbationTrajectory
    eta_per_angle: np.ndarray   # (K,) float32
    phantom_spec: PhantomSpec


def simulate_perturbed_sinogram(x: np.ndarray, traj: PerturbationTrajectory,
                                g: Geometry) -> np.ndarray:
    """Projects the per-angle warped phantom, one row per scan angle."""
    if traj.num_angles != g.num_angles:
        raise ValueError("trajectory length does not match geometry angles")
    out = np.empty(g.shape)
    for k in range(g.num_angles):
        rot, shift = traj.motion(k)
        if rot == 0.0 and shift[0] == 0.0 and shift[1] == 0.0:
            out[k] = project_angle(x, g, k)
        else:
            out[k] = project_angle(warp_image(x, (rot, shift)), g, k)
    return out


def estimate_eta(y_delta: np.ndarray, y_eta: np.ndarray) -> np.ndarray:
    """Per-angle maximum absolute deviation over all detector positions."""
    if y_delta.shape != y_eta.shape:
        raise ValueError(f"sinogram shape mismatch: {y_delta.shape} vs {y_eta.shape}")
    return np.max(np.abs(np.asarray(y_delta, dtype=np.float64)
                         - np.asarray(y_eta, dtype=np.float64)), axis=1)


def make_sample(sample_seed: int, index: int, g: Geometry,
                noise_std: float = 0.0) -> DatasetSample:
    """Builds one sample; storage precision (float32) is applied here."""
    phantom_seed = mix_seed(sample_seed, 1)
    traj_seed = mix_seed(sample_seed, 2)
    spec, phantom = generate_phantom(phantom_seed, g.image_size)
    traj = generate_trajectory(traj_seed, g)
    sino_clean = project_full(phantom, g)
    sino_pert = simulate_perturbed_sinogram(phantom, traj, g)
    if noise_std > 0.0:
        noise_rng = np.random.default_rng(mix_seed(sample_seed, 3))
        sino_pert = sino_pert + noise_rng.normal(0.0, noise_std, sino_pert.shape)
    phantom32 = phantom.astype(np.float32)
    clean32 = sino_clean.astype(np.float32)
    pert32 = sino_pert.astype(np.float32)
    eta32 = estimate_eta(pert32, clean32).astype(np.float32)
    return DatasetSample(
        sample_id=f"sample_{index:06d}",
        seed=int(sample_seed),
        phantom=phantom32,
        sino_clean=clean32,
        sino_perturbed=pert32,
        trajectory=traj,
        eta_per_angle=eta32,
        phantom_spec=spec,
    )


def worker_count() -> int:
    cap = os.environ.get("MOTIONCT_THREADS")
    if cap:
        return max(1, int(cap))
    return min(8, os.cpu_count() or 1)


def build_dataset(global_seed: int, g: Geometry, n_train: int, n_val: int,
                  n_test: int, out_dir: str,
                  noise_std: float = 0.0) -> dataio.DatasetManifest:
    """Generates the sample tree and manifest; deterministic in the seed."""
    total = n_train + n_val + n_test
    seeds = [mix_seed(global_seed, i) for i in range(total)]
    ids = [f"sample_{i:06d}" for i in range(total)]
    manifest = dataio.DatasetManifest(
        format_version=dataio.FORMAT_VERSION,
        geometry=g,
        global_seed=int(global_seed),
        sample_seeds=seeds,
        splits={
            "train": ids[:n_train],
            "val": ids[n_train:n_train + n_val],
            "test": ids[n_train + n_val:],
        },
    )
    os.makedirs(out_dir, exist_ok=True)

    def _one(i: int) -> None:
        sample = make_sample(seeds[i], i, g, noise_std=noise_std)
        dataio.write_sample(out_dir, sample)

    n_workers = worker_count()
    if n_workers > 1 and total > 1:
        with ThreadPoolExecutor(max_workers=n_workers) as pool:
            list(pool.map(_one, range(total)))
    else:
        for i in range(total):
            _one(i)
    dataio.write_manifest(out_dir, manifest)
    return manifest
