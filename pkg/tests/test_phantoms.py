import numpy as np
import pytest

from motionct.geometry import pixel_centers
from motionct.phantoms import contains, generate_phantom, generate_spec


def test_same_seed_bit_identical():
    _, a = generate_phantom(123, 64)
    _, b = generate_phantom(123, 64)
    assert np.array_equal(a, b)


def test_different_seeds_differ():
    _, a = generate_phantom(1, 64)
    _, b = generate_phantom(2, 64)
    assert not np.array_equal(a, b)


def test_value_range_and_background():
    for seed in range(20):
        _, img = generate_phantom(seed, 64)
        assert img.min() >= 0.0
        assert img.max() <= 1.0
        assert np.count_nonzero(img == 0.0) > 0  # background present
        assert img.max() >= 0.2  # main shape visible


def test_size_validation():
    with pytest.raises(ValueError):
        generate_phantom(0, 8)


def test_subshape_count_distribution():
    counts = np.array([len(generate_spec(seed).subshapes) for seed in range(1000)])
    assert counts.min() >= 0 and counts.max() <= 3
    # all four counts occur over a thousand seeds
    assert set(np.unique(counts)) == {0, 1, 2, 3}


def test_rasterization_matches_innermost_rule():
    # value at each pixel center = density of the last drawn covering shape
    spec, img = generate_phantom(77, 48)
    coords = pixel_centers(48)
    shapes = [spec.main, *spec.subshapes]
    for i in range(48):
        for j in range(48):
            expected = 0.0
            for shape in shapes:
                if contains(shape, coords[j], coords[i]):
                    expected = shape.density
            assert img[i, j] == expected


def test_shapes_inside_domain_and_parent():
    for seed in range(50):
        spec, _ = generate_phantom(seed, 64)
        cx, cy = spec.main.center
        assert abs(cx) + spec.main.bound_radius <= 1.0 + 1e-9
        assert abs(cy) + spec.main.bound_radius <= 1.0 + 1e-9
        # every subshape pixel lies inside the main shape
        coords = pixel_centers(96)
        x1, x2 = np.meshgrid(coords, coords)
        main_mask = contains(spec.main, x1, x2)
        for sub in spec.subshapes:
            sub_mask = contains(sub, x1, x2)
            assert not np.any(sub_mask & ~main_mask)


def test_spec_serialization_roundtrip_fields():
    spec = generate_spec(5)
    d = spec.to_dict()
    assert d["seed"] == 5
    assert d["main"]["kind"] in ("rectangle", "ellipse")
    assert len(d["subshapes"]) == len(spec.subshapes)
