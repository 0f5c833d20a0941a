"""Kaczmarz reconstruction with interleaved per-angle shift correction.

After each angle's Kaczmarz step, the detector-axis shift that best aligns
the measured projection with the forward projection of the intermediate
image is estimated by FFT cross-correlation on upsampled signals, and the
angle's scan model is moved accordingly.  Shifts accumulate across sweeps
with relaxation ``lam``; the correction is exact for objects whose motion is
a translation orthogonal to the ray direction.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .geometry import FAN, Geometry
from .kaczmarz import _buffers, angle_order

CORR_WEIGHT_CAP = 0.9


@dataclass(frozen=True)
class DremelParams:
    omega: float = 1.0        # Kaczmarz relaxation
    lam: float = 1.0          # shift-update relaxation
    f_sr: int = 2             # upsampling factor for sub-pixel shifts
    max_iters: int = 32       # full sweeps over all angles
    warmup_sweeps: int = 0    # sweeps before the first correction
    normalized: bool = True   # per-ray normalized Kaczmarz steps
    # correlation lags beyond this many detector pixels are ignored; during
    # the first sweeps the forward projection of the half-built image can
    # correlate best at huge spurious lags, and an unbounded search then
    # parks the angle model outside the scan and deadlocks it
    max_shift_px: float = 8.0

    def __post_init__(self):
        if not 0.0 < self.omega < 2.0:
            raise ValueError("omega must lie in (0, 2)")
        if not 0.0 <= self.lam <= 1.0:
            raise ValueError("lam must lie in [0, 1]")
        if self.f_sr < 1 or self.f_sr != int(self.f_sr):
            raise ValueError("f_sr must be a positive integer")
        if self.max_shift_px <= 0.0:
            raise ValueError("max_shift_px must be positive")


@dataclass(frozen=True)
class DremelResult:
    image: np.ndarray
    shifts: np.ndarray            # per-angle detector-axis shifts, domain units
    residual_history: np.ndarray  # RMS sinogram residual after each sweep


def fourier_upsample(v: np.ndarray, factor: int) -> np.ndarray:
    """Sinc (frequency zero-insertion) interpolation to factor * len(v)."""
    n = v.shape[0]
    if factor == 1:
        return np.asarray(v, dtype=np.float64).copy()
    spec = np.fft.fft(v)
    m = n * factor
    out = np.zeros(m, dtype=complex)
    if n % 2 == 0:
        # split the Nyquist bin so the interpolant stays real
        half = n // 2
        out[:half] = spec[:half]
        out[m - half + 1:] = spec[half + 1:]
        out[half] = 0.5 * spec[half]
        out[m - half] = 0.5 * spec[half]
    else:
        half = (n + 1) // 2
        out[:half] = spec[:half]
        out[m - (n - half):] = spec[half:]
    return np.real(np.fft.ifft(out)) * factor


def _lag_weights(n_sr: int) -> np.ndarray:
    """Boost for large lags that the zero-padding biases downward."""
    half = n_sr // 2
    lags = np.abs((np.arange(n_sr) + half) % n_sr - half).astype(np.float64)
    capped = np.minimum(lags, CORR_WEIGHT_CAP * n_sr)
    return n_sr / (n_sr - capped)


def shift_cross_corr(z: np.ndarray, y: np.ndarray, f_sr: int = 2,
                     max_shift: float | None = None) -> float:
    """Sub-pixel detector shift of z relative to y, in detector pixels.

    Pipeline: upsample both signals by f_sr, subtract means, zero-pad to
    double length, circular cross-correlation via FFT, crop back to the
    upsampled length, weight large lags up, and take the arg max mapped to a
    signed lag; ties resolve to the smallest magnitude.  ``max_shift``
    restricts the search to lags within that many original pixels.
    """
    z = np.asarray(z, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if z.shape != y.shape or z.ndim != 1:
        raise ValueError(f"signals must share one length: {z.shape} vs {y.shape}")
    n_sr = z.shape[0] * f_sr
    z_sr = fourier_upsample(z, f_sr)
    y_sr = fourier_upsample(y, f_sr)
    z_sr -= z_sr.mean()
    y_sr -= y_sr.mean()
    if not (np.any(z_sr) and np.any(y_sr)):
        return 0.0
    padded = 2 * n_sr
    zp = np.zeros(padded)
    yp = np.zeros(padded)
    zp[:n_sr] = z_sr
    yp[:n_sr] = y_sr
    corr = np.real(np.fft.ifft(np.conj(np.fft.fft(yp)) * np.fft.fft(zp)))
    half = n_sr // 2
    signed = (np.arange(n_sr) + half) % n_sr - half
    cropped = corr[np.mod(signed, padded)] * _lag_weights(n_sr)
    if max_shift is not None:
        cropped = np.where(np.abs(signed) <= max_shift * f_sr, cropped, -np.inf)
    best = np.max(cropped)
    threshold = best - 1e-12 * max(1.0, abs(best))
    candidates = np.flatnonzero(cropped >= threshold)
    lag = signed[candidates[np.argmin(np.abs(signed[candidates]))]]
    return float(lag) / f_sr


def dremel_reconstruct(y_delta: np.ndarray, g: Geometry,
                       p: DremelParams = DremelParams()) -> DremelResult:
    y = np.ascontiguousarray(y_delta, dtype=np.float64)
    if y.shape != g.shape:
        raise ValueError(f"sinogram shape {y.shape} does not match geometry {g.shape}")
    size = g.image_size
    is_fan = g.kind == FAN
    # physical detector pixel / magnification = object-plane offset spacing
    shift_step = g.detector_spacing
    x = np.zeros(size * size)
    shifts = np.zeros(g.num_angles)
    idx, wts, cnt = _buffers(g)
    y_fp = np.empty(g.num_detectors)
    history = np.empty(p.max_iters)
    order = angle_order(g.num_angles)
    for sweep in range(p.max_iters):
        sq_sum = 0.0
        correct = p.lam > 0.0 and sweep >= p.warmup_sweeps
        for k in order:
            _kernels.angle_footprints(size, is_fan, g.source_radius,
                                      g.angles[k], g.detector_offsets,
                                      shifts[k], g.is_joseph, idx, wts, cnt)
            _kernels.angle_forward(x, idx, wts, cnt, y_fp)
            resid = y_fp - y[k]
            sq_sum += float(np.dot(resid, resid))
            _kernels.angle_kaczmarz_apply(x, idx, wts, cnt, resid, p.omega,
                                          p.normalized, size)
            if correct:
                shifts[k] -= p.lam * shift_step * shift_cross_corr(
                    y_fp, y[k], p.f_sr, p.max_shift_px)
        history[sweep] = np.sqrt(sq_sum / y.size)
    return DremelResult(image=x.reshape(size, size), shifts=shifts,
                        residual_history=history)
