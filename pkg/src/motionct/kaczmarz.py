"""Relaxed Kaczmarz (ART) iterations shared by the geometry-corrected solver.

Two sweep modes: ``angle`` applies all of one angle's ray projections
simultaneously from the same intermediate image (the stepping used by the
geometry-corrected variant), ``ray`` projects sequentially ray by ray.
``normalized`` divides each ray update by the squared ray norm, which is
what makes a unit relaxation factor stable; switching it off gives the
literal adjoint step.

Within a sweep, angles are visited in a fixed golden-ratio stride
permutation rather than in ascending order: consecutive scan angles give
nearly parallel constraints, and at dense angular sampling an ascending
sweep stalls (tens of dB below the decorrelated order at equal sweep
counts).  The permutation is deterministic and shared by all solvers.
"""
from __future__ import annotations

import math

import numpy as np

from . import _kernels
from .geometry import FAN, Geometry

MODE_ANGLE = "angle"
MODE_RAY = "ray"

_GOLDEN = 0.6180339887498949


def angle_order(num_angles: int) -> np.ndarray:
    """Deterministic decorrelated visiting order for sweep solvers."""
    stride = max(1, round(num_angles * _GOLDEN))
    while math.gcd(stride, num_angles) != 1:
        stride += 1
    return (np.arange(num_angles, dtype=np.int64) * stride) % num_angles


def _buffers(g: Geometry):
    size = g.image_size
    L = g.num_detectors
    idx = np.empty((L, 2 * size + 8), np.int64)
    wts = np.empty((L, 2 * size + 8), np.float64)
    cnt = np.empty(L, np.int64)
    return idx, wts, cnt


def kaczmarz_angle_sweep(x_flat: np.ndarray, y: np.ndarray, g: Geometry,
                         shifts: np.ndarray, omega: float, normalized: bool,
                         buffers=None, order: np.ndarray | None = None) -> None:
    """One in-place sweep of simultaneous per-angle steps."""
    idx, wts, cnt = buffers if buffers is not None else _buffers(g)
    if order is None:
        order = angle_order(g.num_angles)
    is_fan = g.kind == FAN
    y_fp = np.empty(g.num_detectors)
    for k in order:
        _kernels.angle_footprints(g.image_size, is_fan, g.source_radius,
                                  g.angles[k], g.detector_offsets, shifts[k],
                                  g.is_joseph, idx, wts, cnt)
        _kernels.angle_forward(x_flat, idx, wts, cnt, y_fp)
        _kernels.angle_kaczmarz_apply(x_flat, idx, wts, cnt, y_fp - y[k],
                                      omega, normalized, g.image_size)


def kaczmarz_reconstruct(y: np.ndarray, g: Geometry, omega: float = 1.0,
                         sweeps: int = 20, normalized: bool = True,
                         mode: str = MODE_ANGLE) -> np.ndarray:
    if not 0.0 < omega < 2.0:
        raise ValueError("relaxation omega must lie in (0, 2)")
    y = np.ascontiguousarray(y, dtype=np.float64)
    if y.shape != g.shape:
        raise ValueError(f"sinogram shape {y.shape} does not match geometry {g.shape}")
    x = np.zeros(g.image_size * g.image_size)
    shifts = np.asarray(g.per_angle_detector_shift, dtype=np.float64)
    order = angle_order(g.num_angles)
    if mode == MODE_ANGLE:
        buffers = _buffers(g)
        for _ in range(sweeps):
            kaczmarz_angle_sweep(x, y, g, shifts, omega, normalized, buffers,
                                 order)
    elif mode == MODE_RAY:
        for _ in range(sweeps):
            _kernels.kaczmarz_ray_sweep(
                x, g.image_size, g.kind == FAN, g.source_radius, g.angles,
                g.detector_offsets, shifts, y, omega, normalized, order,
                g.is_joseph,
            )
    else:
        raise ValueError(f"unknown sweep mode {mode!r}")
    return x.reshape(g.image_size, g.image_size)
