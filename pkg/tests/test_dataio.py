import json
import os

import numpy as np
import pytest

from motionct import dataio
from motionct.dataset import make_sample, mix_seed
from motionct.geometry import FAN, PARALLEL, make_geometry

G = make_geometry(PARALLEL, 20, 21, None, 32)


def test_f32_roundtrip(tmp_path):
    rng = np.random.default_rng(0)
    arr = rng.standard_normal((7, 5)).astype(np.float32)
    path = str(tmp_path / "a.f32")
    dataio.write_f32(path, arr)
    back = dataio.read_f32(path, (7, 5))
    assert np.array_equal(back, arr)
    assert os.path.getsize(path) == 7 * 5 * 4


def test_f32_truncated_raises(tmp_path):
    path = str(tmp_path / "b.f32")
    dataio.write_f32(path, np.zeros(10, np.float32))
    with open(path, "r+b") as f:
        f.truncate(17)
    with pytest.raises(dataio.DataFormatError):
        dataio.read_f32(path, (10,))


def test_f32_nan_detection(tmp_path):
    path = str(tmp_path / "c.f32")
    dataio.write_f32(path, np.array([1.0, np.nan, 2.0], np.float32))
    with pytest.raises(dataio.DataFormatError):
        dataio.read_f32(path, (3,))


def test_sample_roundtrip_bit_identical(tmp_path):
    sample = make_sample(mix_seed(7, 0), 0, G)
    dataio.write_sample(str(tmp_path), sample)
    back = dataio.read_sample(str(tmp_path), sample.sample_id, G)
    assert np.array_equal(back.phantom, sample.phantom)
    assert np.array_equal(back.sino_clean, sample.sino_clean)
    assert np.array_equal(back.sino_perturbed, sample.sino_perturbed)
    assert np.array_equal(back.eta_per_angle, sample.eta_per_angle)
    assert back.seed == sample.seed
    assert back.phantom_spec.main.kind == sample.phantom_spec.main.kind
    assert len(back.trajectory.sinusoids) == len(sample.trajectory.sinusoids)
    # trajectory table survives the float32 cast applied on write
    assert np.array_equal(back.trajectory.eps_r,
                          sample.trajectory.eps_r.astype(np.float32))


def test_sample_files_exist(tmp_path):
    sample = make_sample(mix_seed(7, 1), 1, G)
    dataio.write_sample(str(tmp_path), sample)
    d = tmp_path / sample.sample_id
    for name in ("phantom.f32", "sino_clean.f32", "sino_perturbed.f32",
                 "trajectory.f32", "eta.f32", "meta.json"):
        assert (d / name).exists()
    assert os.path.getsize(d / "trajectory.f32") == G.num_angles * 5 * 4
    assert os.path.getsize(d / "eta.f32") == G.num_angles * 4


def test_manifest_roundtrip(tmp_path):
    manifest = dataio.DatasetManifest(
        format_version=dataio.FORMAT_VERSION,
        geometry=G,
        global_seed=42,
        sample_seeds=[1, 2, 3],
        splits={"train": ["sample_000000"], "val": ["sample_000001"],
                "test": ["sample_000002"]},
    )
    dataio.write_manifest(str(tmp_path), manifest)
    back = dataio.read_manifest(str(tmp_path))
    assert back.global_seed == 42
    assert back.counts == (1, 1, 1)
    assert back.geometry.kind == PARALLEL
    assert back.geometry.num_angles == G.num_angles
    assert back.sample_seeds == [1, 2, 3]


def test_manifest_fan_geometry_roundtrip(tmp_path):
    gf = make_geometry(FAN, 10, 31, 7773.4, 32)
    manifest = dataio.DatasetManifest(
        format_version=1, geometry=gf, global_seed=0, sample_seeds=[],
        splits={"train": [], "val": [], "test": []},
    )
    dataio.write_manifest(str(tmp_path), manifest)
    back = dataio.read_manifest(str(tmp_path))
    assert back.geometry.kind == FAN
    assert back.geometry.source_radius == pytest.approx(gf.source_radius)


def test_manifest_unknown_version_rejected(tmp_path):
    dataio.write_manifest(str(tmp_path), dataio.DatasetManifest(
        format_version=1, geometry=G, global_seed=0, sample_seeds=[],
        splits={"train": [], "val": [], "test": []},
    ))
    path = tmp_path / "manifest.json"
    doc = json.loads(path.read_text())
    doc["format_version"] = 99
    path.write_text(json.dumps(doc))
    with pytest.raises(dataio.DataFormatError):
        dataio.read_manifest(str(tmp_path))


def test_reconstruction_roundtrip(tmp_path):
    rng = np.random.default_rng(1)
    img = rng.standard_normal((32, 32)).astype(np.float32)
    dataio.write_reconstruction(str(tmp_path), "sample_000000", "fbp", img,
                                {"runtime_s": 0.1, "sweeps": 0})
    back = dataio.read_reconstruction(str(tmp_path), "sample_000000", "fbp")
    assert np.array_equal(back, img)
