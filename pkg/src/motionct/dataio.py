"""On-disk formats: raw float32 rasters with JSON sidecars.

Raster files (``*.f32``) hold little-endian IEEE-754 float32 values,
row-major, no header; shapes travel in the JSON sidecars.  Sample
directories are written atomically (temp directory, then rename), data files
carry no timestamps, and every read validates length and finiteness.
"""
from __future__ import annotations

import json
import os
import shutil
import tempfile
from dataclasses import dataclass
from typing import Dict, List

import numpy as np

from .geometry import FAN, Geometry, make_geometry
from .perturb import PerturbationTrajectory, SinusoidParams
from .phantoms import PhantomSpec, Shape

FORMAT_VERSION = 1

TRAJECTORY_COLUMNS = ("eps_r1", "eps_r2", "xi_r1", "xi_r2", "xi_rot")


class DataFormatError(RuntimeError):
    """Raised for malformed, truncated, or incompatible files."""


@dataclass(frozen=True)
class DatasetManifest:
    format_version: int
    geometry: Geometry
    global_seed: int
    sample_seeds: List[int]
    splits: Dict[str, List[str]]

    @property
    def counts(self) -> tuple[int, int, int]:
        return (len(self.splits["train"]), len(self.splits["val"]),
                len(self.splits["test"]))

    def all_ids(self) -> List[str]:
        return self.splits["train"] + self.splits["val"] + self.splits["test"]


def write_f32(path: str, arr: np.ndarray) -> None:
    data = np.ascontiguousarray(arr, dtype="<f4")
    with open(path, "wb") as f:
        f.write(data.tobytes())


def read_f32(path: str, shape: tuple[int, ...]) -> np.ndarray:
    expected = int(np.prod(shape)) * 4
    with open(path, "rb") as f:
        raw = f.read()
    if len(raw) != expected:
        raise DataFormatError(
            f"{path}: expected {expected} bytes for shape {shape}, got {len(raw)}"
        )
    arr = np.frombuffer(raw, dtype="<f4").reshape(shape)
    if not np.all(np.isfinite(arr)):
        raise DataFormatError(f"{path}: contains non-finite values")
    return arr.copy()


def _write_json(path: str, obj) -> None:
    with open(path, "w") as f:
        json.dump(obj, f, indent=1, sort_keys=True)
        f.write("\n")


def _geometry_dict(g: Geometry) -> dict:
    source_px = g.source_radius / g.pixel_width if g.kind == FAN else None
    return {
        "kind": g.kind,
        "num_angles": g.num_angles,
        "num_detectors": g.num_detectors,
        "source_radius_px": source_px,
        "image_size": g.image_size,
        "ray_model": g.ray_model,
    }


def _geometry_from_dict(d: dict) -> Geometry:
    return make_geometry(
        d["kind"], d["num_angles"], d["num_detectors"],
        d.get("source_radius_px"), d["image_size"],
        d.get("ray_model", "joseph"),
    )


def write_manifest(root: str, manifest: DatasetManifest) -> None:
    _write_json(os.path.join(root, "manifest.json"), {
        "format_version": manifest.format_version,
        "geometry": _geometry_dict(manifest.geometry),
        "global_seed": manifest.global_seed,
        "sample_seeds": manifest.sample_seeds,
        "splits": manifest.splits,
    })


def read_manifest(root: str) -> DatasetManifest:
    path = os.path.join(root, "manifest.json")
    try:
        with open(path) as f:
            d = json.load(f)
    except (OSError, json.JSONDecodeError) as exc:
        raise DataFormatError(f"{path}: cannot read manifest ({exc})") from exc
    version = d.get("format_version")
    if version != FORMAT_VERSION:
        raise DataFormatError(
            f"{path}: unsupported format version {version!r} "
            f"(this build reads version {FORMAT_VERSION})"
        )
    return DatasetManifest(
        format_version=version,
        geometry=_geometry_from_dict(d["geometry"]),
        global_seed=d["global_seed"],
        sample_seeds=list(d["sample_seeds"]),
        splits={k: list(v) for k, v in d["splits"].items()},
    )


def _shape_from_dict(d: dict) -> Shape:
    return Shape(
        kind=d["kind"], center=tuple(d["center"]),
        half_axes=tuple(d["half_axes"]), rotation=d["rotation"],
        density=d["density"],
    )


def write_sample(root: str, sample) -> None:
    """Writes one sample directory atomically (temp dir, then rename)."""
    final_dir = os.path.join(root, sample.sample_id)
    tmp_dir = tempfile.mkdtemp(prefix=sample.sample_id + ".", dir=root)
    try:
        traj = sample.trajectory
        traj_table = np.column_stack([
            traj.eps_r[:, 0], traj.eps_r[:, 1],
            traj.xi_r[:, 0], traj.xi_r[:, 1], traj.xi_rot,
        ])
        write_f32(os.path.join(tmp_dir, "phantom.f32"), sample.phantom)
        write_f32(os.path.join(tmp_dir, "sino_clean.f32"), sample.sino_clean)
        write_f32(os.path.join(tmp_dir, "sino_perturbed.f32"), sample.sino_perturbed)
        write_f32(os.path.join(tmp_dir, "trajectory.f32"), traj_table)
        write_f32(os.path.join(tmp_dir, "eta.f32"), sample.eta_per_angle)
        _write_json(os.path.join(tmp_dir, "meta.json"), {
            "sample_id": sample.sample_id,
            "seed": sample.seed,
            "phantom": sample.phantom_spec.to_dict(),
            "trajectory": traj.to_dict(),
            "shapes": {
                "phantom": list(sample.phantom.shape),
                "sinogram": list(sample.sino_clean.shape),
            },
        })
        if os.path.isdir(final_dir):
            shutil.rmtree(final_dir)
        os.replace(tmp_dir, final_dir)
    except BaseException:
        shutil.rmtree(tmp_dir, ignore_errors=True)
        raise


def read_sample(root: str, sample_id: str, g: Geometry):
    """Reads a sample directory back; inverse of write_sample."""
    from .dataset import DatasetSample  # local import to avoid a cycle

    d = os.path.join(root, sample_id)
    meta_path = os.path.join(d, "meta.json")
    try:
        with open(meta_path) as f:
            meta = json.load(f)
    except (OSError, json.JSONDecodeError) as exc:
        raise DataFormatError(f"{meta_path}: cannot read metadata ({exc})") from exc
    size = g.image_size
    K, L = g.shape
    phantom = read_f32(os.path.join(d, "phantom.f32"), (size, size))
    clean = read_f32(os.path.join(d, "sino_clean.f32"), (K, L))
    pert = read_f32(os.path.join(d, "sino_perturbed.f32"), (K, L))
    table = read_f32(os.path.join(d, "trajectory.f32"), (K, 5)).astype(np.float64)
    eta = read_f32(os.path.join(d, "eta.f32"), (K,))
    tmeta = meta["trajectory"]
    traj = PerturbationTrajectory(
        eps_r=table[:, 0:2].copy(),
        xi_r=table[:, 2:4].copy(),
        xi_rot=table[:, 4].copy(),
        sinusoids=[
            SinusoidParams(s["start"], tuple(s["amplitude"]), s["frequency"],
                           s["damping"])
            for s in tmeta["sinusoids"]
        ],
        sigma=tuple(tmeta["sigma"]),
        seed=tmeta["seed"],
    )
    pmeta = meta["phantom"]
    spec = PhantomSpec(
        main=_shape_from_dict(pmeta["main"]),
        subshapes=[_shape_from_dict(s) for s in pmeta["subshapes"]],
        seed=pmeta["seed"],
    )
    return DatasetSample(
        sample_id=meta["sample_id"], seed=meta["seed"], phantom=phantom,
        sino_clean=clean, sino_perturbed=pert, trajectory=traj,
        eta_per_angle=eta, phantom_spec=spec,
    )


def write_reconstruction(out_dir: str, sample_id: str, method: str,
                         image: np.ndarray, info: dict) -> None:
    d = os.path.join(out_dir, sample_id)
    os.makedirs(d, exist_ok=True)
    write_f32(os.path.join(d, f"recon_{method}.f32"), image)
    _write_json(os.path.join(d, f"recon_{method}.json"),
                {"shape": list(image.shape), **info})


def read_reconstruction(out_dir: str, sample_id: str, method: str) -> np.ndarray:
    d = os.path.join(out_dir, sample_id)
    path = os.path.join(d, f"recon_{method}.json")
    try:
        with open(path) as f:
            info = json.load(f)
    except (OSError, json.JSONDecodeError) as exc:
        raise DataFormatError(f"{path}: cannot read sidecar ({exc})") from exc
    return read_f32(os.path.join(d, f"recon_{method}.f32"), tuple(info["shape"]))
