"""Acquisition geometries and the discrete image-space inner product.

Images are square rasters living on the fixed domain [-1, 1]^2 with pixel
width ``h = 2 / size``.  Pixel ``(i, j)`` (row i, column j) has its center at
``(x1, x2) = (-1 + (j + 0.5) h, -1 + (i + 0.5) h)``; rows index the vertical
axis x2 and columns the horizontal axis x1.

The image space carries the weighted inner product ``<a, b> = h^2 sum(a*b)``,
so norms stay consistent when the raster resolution changes.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

PARALLEL = "parallel"
FAN = "fan"

#: interpolating (Joseph) ray model: smooth two-pixel footprints per grid
#: plane; the sweep solvers need this texture or their stripe projections
#: inject high-frequency noise
JOSEPH = "joseph"
#: exact intersection-length (Siddon) ray model: exact for the
#: piecewise-constant pixel basis, used by the analytic-chord oracles
SIDDON = "siddon"

#: detector margin: beams must cover the circumscribed circle of radius
#: sqrt(2) with 5% headroom.
DETECTOR_MARGIN = 1.05

#: reference acquisition sizes for a 255-pixel image, scaled linearly for
#: other resolutions by default_counts().
REFERENCE_SIZE = 255
REFERENCE_PARALLEL = (567, 363)
REFERENCE_FAN = (133, 723, 7773.4)


@dataclass(frozen=True)
class Geometry:
    """Immutable description of a parallel- or fan-beam acquisition.

    Angles are in radians; detector offsets and the source radius are in
    domain units on [-1, 1]^2.  For fan beams the source circles at radius
    ``source_radius`` and the flat detector sits at the same distance on the
    far side (magnification 2); ``detector_offsets`` are stored pre-divided
    by the magnification, i.e. in object-plane coordinates on the virtual
    detector line through the origin.

    ``per_angle_detector_shift[k]`` shifts the angle-k model along the
    detector axis: a shift of sigma makes the model equal to projecting the
    object translated by ``sigma * (-sin t, cos t)``.
    """

    kind: str
    num_angles: int
    num_detectors: int
    angles: np.ndarray
    detector_offsets: np.ndarray
    image_size: int
    source_radius: float = 0.0
    per_angle_detector_shift: np.ndarray = field(default=None)  # type: ignore[assignment]
    ray_model: str = JOSEPH

    def __post_init__(self):
        if self.kind not in (PARALLEL, FAN):
            raise ValueError(f"unknown geometry kind {self.kind!r}")
        if self.ray_model not in (JOSEPH, SIDDON):
            raise ValueError(f"unknown ray model {self.ray_model!r}")
        angles = np.ascontiguousarray(self.angles, dtype=np.float64)
        offsets = np.ascontiguousarray(self.detector_offsets, dtype=np.float64)
        if angles.shape != (self.num_angles,):
            raise ValueError("angles length does not match num_angles")
        if offsets.shape != (self.num_detectors,):
            raise ValueError("detector_offsets length does not match num_detectors")
        shifts = self.per_angle_detector_shift
        if shifts is None:
            shifts = np.zeros(self.num_angles)
        shifts = np.ascontiguousarray(shifts, dtype=np.float64)
        if shifts.shape != (self.num_angles,):
            raise ValueError("per_angle_detector_shift length does not match num_angles")
        for arr in (angles, offsets, shifts):
            arr.flags.writeable = False
        object.__setattr__(self, "angles", angles)
        object.__setattr__(self, "detector_offsets", offsets)
        object.__setattr__(self, "per_angle_detector_shift", shifts)

    @property
    def pixel_width(self) -> float:
        return 2.0 / self.image_size

    @property
    def detector_spacing(self) -> float:
        """Spacing of the stored (object-plane) detector offsets."""
        if self.num_detectors < 2:
            return 0.0
        return float(self.detector_offsets[1] - self.detector_offsets[0])

    @property
    def magnification(self) -> float:
        return 2.0 if self.kind == FAN else 1.0

    @property
    def shape(self) -> tuple[int, int]:
        """Sinogram shape (K, L)."""
        return (self.num_angles, self.num_detectors)

    @property
    def is_joseph(self) -> bool:
        return self.ray_model == JOSEPH

    def with_detector_shifts(self, shifts: np.ndarray) -> "Geometry":
        """Copy of the geometry with new per-angle detector shifts."""
        return Geometry(
            kind=self.kind,
            num_angles=self.num_angles,
            num_detectors=self.num_detectors,
            angles=self.angles,
            detector_offsets=self.detector_offsets,
            image_size=self.image_size,
            source_radius=self.source_radius,
            per_angle_detector_shift=np.array(shifts, dtype=np.float64),
            ray_model=self.ray_model,
        )

    def with_ray_model(self, ray_model: str) -> "Geometry":
        return Geometry(
            kind=self.kind,
            num_angles=self.num_angles,
            num_detectors=self.num_detectors,
            angles=self.angles,
            detector_offsets=self.detector_offsets,
            image_size=self.image_size,
            source_radius=self.source_radius,
            per_angle_detector_shift=self.per_angle_detector_shift,
            ray_model=self.ray_model if ray_model is None else ray_model,
        )


def _detector_extent(kind: str, source_radius: float) -> float:
    """Half-extent of the detector offsets covering the image circle.

    The covered circle has radius ``DETECTOR_MARGIN * sqrt(2)``.  For fan
    beams the tangent ray from the source to that circle fixes the extreme
    object-plane offset ``rho * D / sqrt(D^2 - rho^2)``.
    """
    rho = DETECTOR_MARGIN * np.sqrt(2.0)
    if kind == PARALLEL:
        return rho
    d2 = source_radius * source_radius - rho * rho
    if d2 <= 0.0:
        raise ValueError(
            f"fan source radius {source_radius:.4f} lies inside the covered "
            f"circle of radius {rho:.4f}"
        )
    return rho * source_radius / np.sqrt(d2)


def make_geometry(
    kind: str,
    num_angles: int,
    num_detectors: int,
    source_radius_px: Optional[float] = None,
    image_size: int = REFERENCE_SIZE,
    ray_model: str = JOSEPH,
) -> Geometry:
    """Build a standard acquisition geometry.

    Parallel angles are uniform on [0, pi), fan angles uniform on [0, 2 pi).
    ``source_radius_px`` is in units of the reconstruction pixel width and
    must place the fan source outside the covered image circle.
    """
    if num_angles < 1 or num_detectors < 1:
        raise ValueError("need at least one angle and one detector")
    h = 2.0 / image_size
    if kind == PARALLEL:
        angles = np.arange(num_angles) * (np.pi / num_angles)
        source_radius = 0.0
    elif kind == FAN:
        if source_radius_px is None:
            raise ValueError("fan geometry requires a source radius")
        angles = np.arange(num_angles) * (2.0 * np.pi / num_angles)
        source_radius = source_radius_px * h
    else:
        raise ValueError(f"unknown geometry kind {kind!r}")
    extent = _detector_extent(kind, source_radius)
    if num_detectors == 1:
        offsets = np.zeros(1)
    else:
        offsets = np.linspace(-extent, extent, num_detectors)
    return Geometry(
        kind=kind,
        num_angles=num_angles,
        num_detectors=num_detectors,
        angles=angles,
        detector_offsets=offsets,
        image_size=image_size,
        source_radius=source_radius,
        ray_model=ray_model,
    )


def default_counts(kind: str, image_size: int) -> tuple[int, int, Optional[float]]:
    """Angle/detector counts for an image size, scaled from the 255 reference.

    Returns ``(num_angles, num_detectors, source_radius_px)``; the source
    radius is None for parallel beams.
    """
    scale = image_size / REFERENCE_SIZE
    if kind == PARALLEL:
        k, l = REFERENCE_PARALLEL
        return max(1, round(k * scale)), max(1, round(l * scale)), None
    if kind == FAN:
        k, l, d = REFERENCE_FAN
        return max(1, round(k * scale)), max(1, round(l * scale)), d
    raise ValueError(f"unknown geometry kind {kind!r}")


def pixel_width(size: int) -> float:
    return 2.0 / size


def pixel_centers(size: int) -> np.ndarray:
    """1-D coordinates of pixel centers along either axis."""
    h = 2.0 / size
    return -1.0 + (np.arange(size) + 0.5) * h


def inner_x(a: np.ndarray, b: np.ndarray) -> float:
    """L2([-1,1]^2) inner product of two same-size square rasters."""
    if a.shape != b.shape or a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"image shape mismatch: {a.shape} vs {b.shape}")
    h = 2.0 / a.shape[0]
    return float(h * h * np.sum(a * b))


def norm_x(a: np.ndarray) -> float:
    return float(np.sqrt(inner_x(a, a)))
