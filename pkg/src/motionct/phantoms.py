"""Random piecewise-constant phantoms built from rectangles and ellipses.

Each phantom has one main shape and up to three subshapes nested inside it;
subshape densities overwrite the parent wherever they cover a pixel center.
Pixel values equal the density of the last shape (in generation order)
containing the pixel center, with background exactly zero.
"""
from __future__ import annotations

from dataclasses import dataclass, field, asdict
from typing import List

import numpy as np

from .geometry import pixel_centers

RECTANGLE = "rectangle"
ELLIPSE = "ellipse"

# declared sampling defaults; the source text fixes only shape kinds, the
# density range and the subshape count
MAIN_HALF_AXES = (0.35, 0.8)
SUB_HALF_AXES = (0.1, 0.45)
DENSITY_RANGE = (0.2, 1.0)
MAX_SUBSHAPES = 3
MAX_BOUND_RADIUS = 0.92


@dataclass(frozen=True)
class Shape:
    kind: str
    center: tuple[float, float]
    half_axes: tuple[float, float]
    rotation: float
    density: float

    @property
    def bound_radius(self) -> float:
        a, b = self.half_axes
        if self.kind == RECTANGLE:
            return float(np.hypot(a, b))
        return float(max(a, b))


@dataclass(frozen=True)
class PhantomSpec:
    main: Shape
    subshapes: List[Shape]
    seed: int

    def to_dict(self) -> dict:
        return {
            "seed": self.seed,
            "main": asdict(self.main),
            "subshapes": [asdict(s) for s in self.subshapes],
        }


def _local_coords(shape: Shape, x1, x2):
    """Coordinates in the shape frame (rotation undone, center removed)."""
    u = x1 - shape.center[0]
    v = x2 - shape.center[1]
    c = np.cos(shape.rotation)
    s = np.sin(shape.rotation)
    return c * u + s * v, -s * u + c * v


def contains(shape: Shape, x1, x2):
    """Pointwise inside test; works on scalars and arrays."""
    u, v = _local_coords(shape, x1, x2)
    a, b = shape.half_axes
    if shape.kind == RECTANGLE:
        return (np.abs(u) <= a) & (np.abs(v) <= b)
    return (u / a) ** 2 + (v / b) ** 2 <= 1.0


def _circle_inside(shape: Shape, cx: float, cy: float, r: float) -> bool:
    """Whether the disk of radius r at (cx, cy) fits inside the shape.

    Exact for rectangles; for ellipses a conservative sufficient bound is
    used (max of the ellipse functional over the disk boundary).
    """
    u, v = _local_coords(shape, cx, cy)
    a, b = shape.half_axes
    if shape.kind == RECTANGLE:
        return abs(u) <= a - r and abs(v) <= b - r
    if min(a, b) <= r:
        return False
    base = (u / a) ** 2 + (v / b) ** 2
    grad = 2.0 * r * np.hypot(u / a**2, v / b**2)
    curv = r * r / min(a, b) ** 2
    return base + grad + curv <= 1.0


def _draw_shape(rng: np.random.Generator, axes_range, density) -> Shape:
    kind = RECTANGLE if rng.random() < 0.5 else ELLIPSE
    a = rng.uniform(*axes_range)
    b = rng.uniform(*axes_range)
    rotation = rng.uniform(0.0, np.pi)
    shape = Shape(kind, (0.0, 0.0), (a, b), rotation, density)
    scale = min(1.0, MAX_BOUND_RADIUS / shape.bound_radius)
    return Shape(kind, (0.0, 0.0), (a * scale, b * scale), rotation, density)


def generate_spec(seed: int) -> PhantomSpec:
    """Deterministic phantom layout for a seed."""
    rng = np.random.default_rng(seed)
    main = _draw_shape(rng, MAIN_HALF_AXES, rng.uniform(*DENSITY_RANGE))
    margin = 1.0 - main.bound_radius
    cx = rng.uniform(-margin, margin)
    cy = rng.uniform(-margin, margin)
    main = Shape(main.kind, (cx, cy), main.half_axes, main.rotation, main.density)

    n_sub = int(rng.integers(0, MAX_SUBSHAPES + 1))
    parent_scale = min(main.half_axes)
    subshapes = []
    for _ in range(n_sub):
        density = rng.uniform(*DENSITY_RANGE)
        a = rng.uniform(*SUB_HALF_AXES) * parent_scale
        b = rng.uniform(*SUB_HALF_AXES) * parent_scale
        rotation = rng.uniform(0.0, np.pi)
        kind = RECTANGLE if rng.random() < 0.5 else ELLIPSE
        r_bound = float(np.hypot(a, b)) if kind == RECTANGLE else float(max(a, b))
        placed = None
        for _ in range(64):
            sx = main.center[0] + rng.uniform(-main.bound_radius, main.bound_radius)
            sy = main.center[1] + rng.uniform(-main.bound_radius, main.bound_radius)
            if _circle_inside(main, sx, sy, r_bound):
                placed = Shape(kind, (sx, sy), (a, b), rotation, density)
                break
        if placed is not None:
            subshapes.append(placed)
    return PhantomSpec(main=main, subshapes=subshapes, seed=int(seed))


def rasterize(spec: PhantomSpec, size: int) -> np.ndarray:
    """Paints shapes onto pixel centers; later shapes win inside overlaps."""
    coords = pixel_centers(size)
    x1, x2 = np.meshgrid(coords, coords)  # x1 varies along columns
    img = np.zeros((size, size))
    for shape in [spec.main, *spec.subshapes]:
        img[contains(shape, x1, x2)] = shape.density
    return img


def generate_phantom(seed: int, size: int) -> tuple[PhantomSpec, np.ndarray]:
    if size < 16:
        raise ValueError("phantom raster must be at least 16 pixels")
    spec = generate_spec(seed)
    return spec, rasterize(spec, size)
