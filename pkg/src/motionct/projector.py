"""Forward projection and adjoints for the static (inexact) scan model.

The projector integrates the piecewise-constant pixel basis exactly along
each ray, so ``adjoint_*`` pairs with the forward operations through the
identical footprint: ``<A* w, x> = w * A x`` holds to rounding error in the
weighted image inner product.
"""
from __future__ import annotations

import numpy as np

from . import _kernels
from .geometry import FAN, Geometry


def _check_image(x: np.ndarray, g: Geometry) -> np.ndarray:
    x = np.ascontiguousarray(x, dtype=np.float64)
    if x.shape != (g.image_size, g.image_size):
        raise ValueError(
            f"image shape {x.shape} does not match geometry size {g.image_size}"
        )
    return x


def ray_footprint(g: Geometry, k: int, l: int) -> tuple[np.ndarray, np.ndarray]:
    """Sparse footprint of ray (k, l): flat pixel indices and chord lengths."""
    if not (0 <= k < g.num_angles and 0 <= l < g.num_detectors):
        raise IndexError(f"ray index ({k}, {l}) out of range for {g.shape}")
    size = g.image_size
    idx = np.empty(2 * size + 8, np.int64)
    wts = np.empty(2 * size + 8, np.float64)
    n = _kernels.trace_ray(
        g.kind == FAN, g.source_radius, g.angles[k],
        g.detector_offsets[l] - g.per_angle_detector_shift[k], size, idx, wts,
        g.is_joseph,
    )
    return idx[:n].copy(), wts[:n].copy()


def project_ray(x: np.ndarray, g: Geometry, k: int, l: int) -> float:
    """Line integral of the image along ray (k, l)."""
    x = _check_image(x, g)
    idx, wts = ray_footprint(g, k, l)
    return float(np.dot(wts, x.ravel()[idx]))


def project_angle(x: np.ndarray, g: Geometry, k: int) -> np.ndarray:
    """All detector readings for angle k."""
    x = _check_image(x, g)
    if not 0 <= k < g.num_angles:
        raise IndexError(f"angle index {k} out of range")
    out = np.empty(g.num_detectors)
    _kernels.project_angle_kernel(
        x.ravel(), g.image_size, g.kind == FAN, g.source_radius, g.angles[k],
        g.detector_offsets, g.per_angle_detector_shift[k], g.is_joseph, out,
    )
    return out


def project_full(x: np.ndarray, g: Geometry) -> np.ndarray:
    """Full sinogram of shape (num_angles, num_detectors)."""
    x = _check_image(x, g)
    out = np.empty(g.shape)
    _kernels.project_full_kernel(
        x.ravel(), g.image_size, g.kind == FAN, g.source_radius, g.angles,
        g.detector_offsets, g.per_angle_detector_shift, g.is_joseph, out,
    )
    return out


def adjoint_ray(w: float, g: Geometry, k: int, l: int) -> np.ndarray:
    """Adjoint of a single-ray reading w.r.t. the weighted image product."""
    out = np.zeros(g.image_size * g.image_size)
    idx, wts = ray_footprint(g, k, l)
    h = g.pixel_width
    out[idx] = w * wts / (h * h)
    return out.reshape(g.image_size, g.image_size)


def adjoint_angle(w: np.ndarray, g: Geometry, k: int) -> np.ndarray:
    """Adjoint of one angle's readings, summed over detectors."""
    w = np.ascontiguousarray(w, dtype=np.float64)
    if w.shape != (g.num_detectors,):
        raise ValueError(f"expected {g.num_detectors} values, got {w.shape}")
    if not 0 <= k < g.num_angles:
        raise IndexError(f"angle index {k} out of range")
    out = np.zeros(g.image_size * g.image_size)
    _kernels.backproject_angle_kernel(
        w, g.image_size, g.kind == FAN, g.source_radius, g.angles[k],
        g.detector_offsets, g.per_angle_detector_shift[k], g.is_joseph, out,
    )
    return out.reshape(g.image_size, g.image_size)
