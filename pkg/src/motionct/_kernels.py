"""Numba kernels: Siddon ray tracing and the solver inner loops.

Rays are traced with exact pixel-intersection lengths so the adjoint pairs
exactly with the forward operation through the shared footprint.  All
kernels release the GIL; callers may parallelize over samples with threads.
"""
from __future__ import annotations

import numpy as np
from numba import njit

_BIG = 1e300


@njit(cache=True, nogil=True)
def _ray_origin_dir(is_fan, source_radius, cos_t, sin_t, u):
    """Origin and unit direction of the ray at offset u (object-plane units).

    Parallel: direction (cos t, sin t), offset along (-sin t, cos t).
    Fan: source at R*(cos t, sin t); flat detector at the mirrored point,
    magnification 2, so the physical detector coordinate is 2u.
    """
    if is_fan:
        sx = source_radius * cos_t
        sy = source_radius * sin_t
        px = -source_radius * cos_t - 2.0 * u * sin_t
        py = -source_radius * sin_t + 2.0 * u * cos_t
        dx = px - sx
        dy = py - sy
        norm = np.sqrt(dx * dx + dy * dy)
        return sx, sy, dx / norm, dy / norm
    return -u * sin_t, u * cos_t, cos_t, sin_t


@njit(cache=True, nogil=True)
def _trace(p0x, p0y, dx, dy, size, idx_out, wts_out):
    """Siddon traversal of the pixel grid on [-1, 1]^2.

    Writes flat pixel indices (row-major) and intersection lengths in domain
    units; returns the number of entries.  Buffers must hold 2*size + 8.
    """
    h = 2.0 / size

    t_enter = -_BIG
    t_exit = _BIG
    if abs(dx) > 1e-14:
        ta = (-1.0 - p0x) / dx
        tb = (1.0 - p0x) / dx
        if ta > tb:
            ta, tb = tb, ta
        if ta > t_enter:
            t_enter = ta
        if tb < t_exit:
            t_exit = tb
    elif p0x <= -1.0 or p0x >= 1.0:
        return 0
    if abs(dy) > 1e-14:
        ta = (-1.0 - p0y) / dy
        tb = (1.0 - p0y) / dy
        if ta > tb:
            ta, tb = tb, ta
        if ta > t_enter:
            t_enter = ta
        if tb < t_exit:
            t_exit = tb
    elif p0y <= -1.0 or p0y >= 1.0:
        return 0
    if t_exit - t_enter <= 1e-14:
        return 0

    # cell of the entry point, nudged inward to avoid landing on a boundary
    t_mid = t_enter + 1e-12 * (t_exit - t_enter)
    x = p0x + t_mid * dx
    y = p0y + t_mid * dy
    ix = int(np.floor((x + 1.0) / h))
    iy = int(np.floor((y + 1.0) / h))
    if ix < 0:
        ix = 0
    if ix > size - 1:
        ix = size - 1
    if iy < 0:
        iy = 0
    if iy > size - 1:
        iy = size - 1

    if dx > 1e-14:
        step_x = 1
        dt_x = h / dx
        t_next_x = ((ix + 1) * h - 1.0 - p0x) / dx
    elif dx < -1e-14:
        step_x = -1
        dt_x = -h / dx
        t_next_x = (ix * h - 1.0 - p0x) / dx
    else:
        step_x = 0
        dt_x = _BIG
        t_next_x = _BIG
    if dy > 1e-14:
        step_y = 1
        dt_y = h / dy
        t_next_y = ((iy + 1) * h - 1.0 - p0y) / dy
    elif dy < -1e-14:
        step_y = -1
        dt_y = -h / dy
        t_next_y = (iy * h - 1.0 - p0y) / dy
    else:
        step_y = 0
        dt_y = _BIG
        t_next_y = _BIG

    n = 0
    t_cur = t_enter
    while t_cur < t_exit - 1e-14:
        if t_next_x < t_next_y:
            t_stop = t_next_x
        else:
            t_stop = t_next_y
        if t_stop > t_exit:
            t_stop = t_exit
        seg = t_stop - t_cur
        if seg > 0.0:
            idx_out[n] = iy * size + ix
            wts_out[n] = seg
            n += 1
        t_cur = t_stop
        advanced = False
        if t_next_x <= t_stop + 1e-14:
            ix += step_x
            t_next_x += dt_x
            advanced = True
        if t_next_y <= t_stop + 1e-14:
            iy += step_y
            t_next_y += dt_y
            advanced = True
        if not advanced:
            break
        if ix < 0 or ix >= size or iy < 0 or iy >= size:
            break
    return n


@njit(cache=True, nogil=True)
def _trace_joseph(p0x, p0y, dx, dy, size, idx_out, wts_out):
    """Interpolating (Joseph) footprint: linear interpolation between the
    two pixels straddling the ray at every pixel-center plane of the major
    axis; weight pairs sum to the step length along the ray."""
    h = 2.0 / size
    n = 0
    if abs(dx) >= abs(dy):
        step = h / abs(dx)
        for i in range(size):
            cx = -1.0 + (i + 0.5) * h
            t = (cx - p0x) / dx
            y = p0y + t * dy
            f = (y + 1.0) / h - 0.5
            j0 = int(np.floor(f))
            frac = f - j0
            if 0 <= j0 < size:
                idx_out[n] = j0 * size + i
                wts_out[n] = step * (1.0 - frac)
                n += 1
            if 0 <= j0 + 1 < size:
                idx_out[n] = (j0 + 1) * size + i
                wts_out[n] = step * frac
                n += 1
    else:
        step = h / abs(dy)
        for j in range(size):
            cy = -1.0 + (j + 0.5) * h
            t = (cy - p0y) / dy
            x = p0x + t * dx
            f = (x + 1.0) / h - 0.5
            i0 = int(np.floor(f))
            frac = f - i0
            if 0 <= i0 < size:
                idx_out[n] = j * size + i0
                wts_out[n] = step * (1.0 - frac)
                n += 1
            if 0 <= i0 + 1 < size:
                idx_out[n] = j * size + i0 + 1
                wts_out[n] = step * frac
                n += 1
    return n


@njit(cache=True, nogil=True)
def trace_ray(is_fan, source_radius, theta, u, size, idx_out, wts_out,
              joseph=False):
    p0x, p0y, dx, dy = _ray_origin_dir(
        is_fan, source_radius, np.cos(theta), np.sin(theta), u
    )
    if joseph:
        return _trace_joseph(p0x, p0y, dx, dy, size, idx_out, wts_out)
    return _trace(p0x, p0y, dx, dy, size, idx_out, wts_out)


@njit(cache=True, nogil=True)
def project_angle_kernel(x_flat, size, is_fan, source_radius, theta, offsets,
                         shift, joseph, out_row):
    idx = np.empty(2 * size + 8, np.int64)
    wts = np.empty(2 * size + 8, np.float64)
    for l in range(offsets.shape[0]):
        n = trace_ray(is_fan, source_radius, theta, offsets[l] - shift,
                      size, idx, wts, joseph)
        acc = 0.0
        for m in range(n):
            acc += wts[m] * x_flat[idx[m]]
        out_row[l] = acc


@njit(cache=True, nogil=True)
def project_full_kernel(x_flat, size, is_fan, source_radius, angles, offsets,
                        shifts, joseph, out):
    for k in range(angles.shape[0]):
        project_angle_kernel(x_flat, size, is_fan, source_radius, angles[k],
                             offsets, shifts[k], joseph, out[k])


@njit(cache=True, nogil=True)
def backproject_angle_kernel(w_row, size, is_fan, source_radius, theta,
                             offsets, shift, joseph, out_flat):
    """Adds the X-adjoint of one angle: value w_l * length / h^2 per pixel."""
    h = 2.0 / size
    inv_area = 1.0 / (h * h)
    idx = np.empty(2 * size + 8, np.int64)
    wts = np.empty(2 * size + 8, np.float64)
    for l in range(offsets.shape[0]):
        w = w_row[l]
        if w == 0.0:
            continue
        n = trace_ray(is_fan, source_radius, theta, offsets[l] - shift,
                      size, idx, wts, joseph)
        for m in range(n):
            out_flat[idx[m]] += w * wts[m] * inv_area


@njit(cache=True, nogil=True)
def angle_footprints(size, is_fan, source_radius, theta, offsets, shift,
                     joseph, idx_buf, wts_buf, cnt_buf):
    """Traces all rays of one angle into caller-owned buffers."""
    for l in range(offsets.shape[0]):
        cnt_buf[l] = trace_ray(is_fan, source_radius, theta,
                               offsets[l] - shift, size, idx_buf[l],
                               wts_buf[l], joseph)


@njit(cache=True, nogil=True)
def angle_forward(x_flat, idx_buf, wts_buf, cnt_buf, out_row):
    for l in range(cnt_buf.shape[0]):
        acc = 0.0
        for m in range(cnt_buf[l]):
            acc += wts_buf[l, m] * x_flat[idx_buf[l, m]]
        out_row[l] = acc


@njit(cache=True, nogil=True)
def angle_kaczmarz_apply(x_flat, idx_buf, wts_buf, cnt_buf, resid_row, omega,
                         normalized, size):
    """Simultaneous relaxed per-ray projections for one angle.

    Normalized: x -= omega * w_l / sum(a^2) * a per ray.  Unnormalized: the
    literal adjoint step x -= omega * w_l * a / h^2.
    """
    h = 2.0 / size
    inv_area = 1.0 / (h * h)
    for l in range(cnt_buf.shape[0]):
        w = resid_row[l]
        if w == 0.0:
            continue
        n = cnt_buf[l]
        if normalized:
            suma2 = 0.0
            for m in range(n):
                suma2 += wts_buf[l, m] * wts_buf[l, m]
            if suma2 <= 0.0:
                continue
            c = omega * w / suma2
        else:
            c = omega * w * inv_area
        for m in range(n):
            x_flat[idx_buf[l, m]] -= c * wts_buf[l, m]


@njit(cache=True, nogil=True)
def kaczmarz_ray_sweep(x_flat, size, is_fan, source_radius, angles, offsets,
                       shifts, y, omega, normalized, order, joseph):
    """One sequential sweep of single-ray relaxed projections."""
    h = 2.0 / size
    inv_area = 1.0 / (h * h)
    idx = np.empty(2 * size + 8, np.int64)
    wts = np.empty(2 * size + 8, np.float64)
    for j in range(order.shape[0]):
        k = order[j]
        theta = angles[k]
        for l in range(offsets.shape[0]):
            n = trace_ray(is_fan, source_radius, theta,
                          offsets[l] - shifts[k], size, idx, wts, joseph)
            acc = 0.0
            suma2 = 0.0
            for m in range(n):
                acc += wts[m] * x_flat[idx[m]]
                suma2 += wts[m] * wts[m]
            w = acc - y[k, l]
            if w == 0.0:
                continue
            if normalized:
                if suma2 <= 0.0:
                    continue
                c = omega * w / suma2
            else:
                c = omega * w * inv_area
            for m in range(n):
                x_flat[idx[m]] -= c * wts[m]


@njit(cache=True, nogil=True)
def resesop_run(x_flat, size, is_fan, source_radius, angles, offsets, y,
                eta_eff, tau, delta, atol, max_sweeps, order, joseph,
                rec_boundary, rec_after, processed_per_sweep):
    """Sequential-subspace Kaczmarz over single rays with two directions.

    Per ray: residual w; skip when |w| <= tau*(delta+eta_k) + atol; otherwise
    project onto the stripe boundary along u_new = A* w and correct with the
    previous ray's direction so the iterate stays in both stripes.

    When the recording buffers are non-empty the kernel stores, per processed
    ray, |<u_new, x>| - alpha - xi right after the single-direction step and
    after the pair correction (both should be ~0 and <= 0 respectively).
    Returns (sweeps_run, converged_early).
    """
    h = 2.0 / size
    area = h * h
    npx = size * size
    K = angles.shape[0]
    L = offsets.shape[0]
    idx = np.empty(2 * size + 8, np.int64)
    wts = np.empty(2 * size + 8, np.float64)
    u_old = np.zeros(npx, np.float64)
    u_old_idx = np.empty(2 * size + 8, np.int64)
    u_old_n = 0
    u_old_norm2 = 0.0
    alpha_old = 0.0
    xi_old = 0.0
    have_old = False
    record = rec_boundary.shape[0] > 0
    rec_n = 0

    for sweep in range(max_sweeps):
        all_ok = True
        processed = 0
        for j in range(K):
            k = order[j]
            zeta = delta + eta_eff[k]
            bound = tau * zeta + atol
            theta = angles[k]
            for l in range(L):
                n = trace_ray(is_fan, source_radius, theta, offsets[l],
                              size, idx, wts, joseph)
                ax = 0.0
                suma2 = 0.0
                for m in range(n):
                    ax += wts[m] * x_flat[idx[m]]
                    suma2 += wts[m] * wts[m]
                w = ax - y[k, l]
                if abs(w) <= bound:
                    continue
                all_ok = False
                if suma2 <= 0.0:
                    continue
                processed += 1

                # u_new = A* w has value w*wts/h^2 on the footprint
                u_norm2 = w * w * suma2 / area
                alpha = w * y[k, l]
                xi = zeta * abs(w)
                coef = abs(w) * (abs(w) - zeta) / u_norm2
                for m in range(n):
                    x_flat[idx[m]] -= coef * w * wts[m] / area

                if record and rec_n < rec_boundary.shape[0]:
                    dot_new = 0.0
                    for m in range(n):
                        dot_new += wts[m] * x_flat[idx[m]]
                    rec_boundary[rec_n] = abs(w * dot_new - alpha) - xi

                if have_old:
                    # <u_old, x~> and <u_new, u_old> in the weighted metric
                    dot_old = 0.0
                    for m in range(u_old_n):
                        j = u_old_idx[m]
                        dot_old += u_old[j] * x_flat[j]
                    dot_old *= area
                    cross = 0.0
                    for m in range(n):
                        cross += w * wts[m] / area * u_old[idx[m]]
                    cross *= area
                    den = u_norm2 * u_old_norm2 - cross * cross
                    t = 0.0
                    if den > 1e-300:
                        if dot_old > alpha_old + xi_old:
                            t = (dot_old - (alpha_old + xi_old)) / den
                        elif dot_old < alpha_old - xi_old:
                            t = (dot_old - (alpha_old - xi_old)) / den
                    if t != 0.0:
                        for m in range(n):
                            x_flat[idx[m]] += cross * t * w * wts[m] / area
                        for m in range(u_old_n):
                            j = u_old_idx[m]
                            x_flat[j] -= u_norm2 * t * u_old[j]

                if record and rec_n < rec_after.shape[0]:
                    dot_new = 0.0
                    for m in range(n):
                        dot_new += wts[m] * x_flat[idx[m]]
                    rec_after[rec_n] = abs(w * dot_new - alpha) - xi
                    rec_n += 1

                # save this ray's direction for the next iteration
                for m in range(u_old_n):
                    u_old[u_old_idx[m]] = 0.0
                for m in range(n):
                    u_old[idx[m]] = w * wts[m] / area
                    u_old_idx[m] = idx[m]
                u_old_n = n
                u_old_norm2 = u_norm2
                alpha_old = alpha
                xi_old = xi
                have_old = True
        processed_per_sweep[sweep] = processed
        if all_ok:
            return sweep + 1, True
    return max_sweeps, False


@njit(cache=True, nogil=True)
def discrepancy_mask(x_flat, size, is_fan, source_radius, angles, offsets, y,
                     eta_eff, tau, delta, joseph, out_mask):
    """Marks rays whose residual violates tau * (delta + eta_k)."""
    idx = np.empty(2 * size + 8, np.int64)
    wts = np.empty(2 * size + 8, np.float64)
    for k in range(angles.shape[0]):
        bound = tau * (delta + eta_eff[k])
        for l in range(offsets.shape[0]):
            n = trace_ray(is_fan, source_radius, angles[k], offsets[l],
                          size, idx, wts, joseph)
            ax = 0.0
            for m in range(n):
                ax += wts[m] * x_flat[idx[m]]
            out_mask[k, l] = abs(ax - y[k, l]) > bound
