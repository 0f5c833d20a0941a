"""Regularizing sequential subspace optimization over single-ray equations.

Angles are visited in the shared decorrelated sweep order (see
``kaczmarz.angle_order``) with detectors ascending within each angle.  Each
violating ray contributes a search direction (the adjoint of its residual); the
iterate is first projected onto the boundary of that ray's stripe, whose
half-width is |residual| times the angle's inexactness level, then corrected
with the previous ray's direction so it also stays inside the previous
stripe.  Rays whose residual already satisfies the discrepancy bound are
skipped, and the run stops once a sweep skips every ray or the sweep cap is
reached.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .geometry import FAN, Geometry
from .kaczmarz import angle_order

#: absolute residual floor added to the discrepancy bound so exactly
#: consistent data (inexactness and noise level both zero) can terminate at
#: machine scale instead of polishing forever
DEFAULT_ATOL = 1e-6


@dataclass(frozen=True)
class ResesopParams:
    tau: float = 1.1          # discrepancy constant, > 1
    delta: float = 0.0        # additive data noise level
    eta_scale: float = 1.0    # multiplier on the stored per-angle levels
    max_sweeps: int = 20
    atol: float = DEFAULT_ATOL

    def __post_init__(self):
        if self.tau <= 1.0:
            raise ValueError("tau must exceed 1")
        if self.eta_scale <= 0.0:
            raise ValueError("eta_scale must be positive")


@dataclass(frozen=True)
class ResesopResult:
    image: np.ndarray
    sweeps: int
    converged: bool                 # all rays met the bound within the cap
    processed_per_sweep: np.ndarray  # violating-ray count per executed sweep
    # per processed ray, |<u_new, x> - alpha| - xi right after the stripe
    # projection and after the pair correction; filled when recording
    stripe_boundary: np.ndarray | None = None
    stripe_after: np.ndarray | None = None


def _check_inputs(y: np.ndarray, eta_per_angle: np.ndarray, g: Geometry):
    y = np.ascontiguousarray(y, dtype=np.float64)
    if y.shape != g.shape:
        raise ValueError(f"sinogram shape {y.shape} does not match geometry {g.shape}")
    eta = np.ascontiguousarray(eta_per_angle, dtype=np.float64)
    if eta.shape != (g.num_angles,):
        raise ValueError(f"expected {g.num_angles} inexactness levels, got {eta.shape}")
    if np.any(eta < 0.0):
        raise ValueError("inexactness levels must be non-negative")
    return y, eta


def resesop_reconstruct(y_delta: np.ndarray, eta_per_angle: np.ndarray,
                        g: Geometry, p: ResesopParams = ResesopParams(),
                        record_stripes: bool = False) -> ResesopResult:
    """Runs the two-direction sweep solver from a zero initial image.

    With ``record_stripes`` the per-ray stripe-membership defects are stored
    (testing hook); see ``last_stripe_records``.
    """
    y, eta = _check_inputs(y_delta, eta_per_angle, g)
    eta_eff = eta * p.eta_scale
    size = g.image_size
    x = np.zeros(size * size)
    n_rec = y.size * p.max_sweeps if record_stripes else 0
    rec_boundary = np.empty(n_rec)
    rec_after = np.empty(n_rec)
    processed = np.zeros(p.max_sweeps, np.int64)
    sweeps, converged = _kernels.resesop_run(
        x, size, g.kind == FAN, g.source_radius, g.angles, g.detector_offsets,
        y, eta_eff, p.tau, p.delta, p.atol, p.max_sweeps,
        angle_order(g.num_angles), g.is_joseph, rec_boundary, rec_after,
        processed,
    )
    boundary = after = None
    if record_stripes:
        n = int(processed[:sweeps].sum())
        boundary = rec_boundary[:n].copy()
        after = rec_after[:n].copy()
    return ResesopResult(
        image=x.reshape(size, size), sweeps=int(sweeps),
        converged=bool(converged), processed_per_sweep=processed[:sweeps],
        stripe_boundary=boundary, stripe_after=after,
    )


def check_discrepancy(x: np.ndarray, y: np.ndarray, eta_per_angle: np.ndarray,
                      g: Geometry, tau: float, delta: float = 0.0,
                      atol: float = 0.0) -> tuple[bool, np.ndarray]:
    """Evaluates the per-ray discrepancy bound |Ax - y| <= tau (delta + eta).

    Returns (all satisfied, boolean mask of violating rays).
    """
    x = np.ascontiguousarray(x, dtype=np.float64)
    if x.shape != (g.image_size, g.image_size):
        raise ValueError(f"image shape {x.shape} does not match geometry size")
    y, eta = _check_inputs(y, eta_per_angle, g)
    mask = np.empty(g.shape, np.bool_)
    _kernels.discrepancy_mask(
        x.ravel(), g.image_size, g.kind == FAN, g.source_radius, g.angles,
        g.detector_offsets, y, eta, tau, delta + atol / max(tau, 1.0),
        g.is_joseph, mask,
    )
    return bool(not mask.any()), mask
