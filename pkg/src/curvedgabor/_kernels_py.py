"""Pure-numpy implementations of the hot per-pixel kernels.

This module mirrors the call surface of the compiled backend
(`_kernels_cy`). Region walks are marched in lockstep across all processed
pixels; the per-profile frequency estimation falls back to a scalar loop.
The arithmetic is kept step-for-step identical to the compiled kernels so
the two backends agree to float rounding.
"""

from __future__ import annotations

import math

import numpy as np

from ._profiles import estimate_profile

BACKEND_NAME = "python"

# Interpolation mode codes shared with the compiled backend.
GRAY_NEAREST, GRAY_BILINEAR, GRAY_BICUBIC = 0, 1, 2
OF_NEAREST, OF_BILINEAR = 0, 1

_RESULTANT_EPS = 1e-9
_CHUNK = 4096


def _dir_from_doubled(c2, s2):
    # Unit flow vector (cos t, sin t) for t = 0.5*atan2(s2, c2) in [0, pi):
    # half-angle identities keep this branch-free.
    st = np.sqrt(np.maximum(0.0, (1.0 - c2) * 0.5))
    ct = np.sqrt(np.maximum(0.0, (1.0 + c2) * 0.5))
    ct = np.where(s2 < 0.0, -ct, ct)
    return ct, st


def _interp_of(cos2, sin2, valid, xs, ys, mode):
    """Sample the doubled-angle field at decimal coordinates.

    Returns unit (c2, s2, ok); positions with no valid support or a
    cancelling resultant are not ok.
    """
    h, w = valid.shape
    x0 = np.floor(xs)
    y0 = np.floor(ys)
    if mode == OF_NEAREST:
        best_d2 = np.full(xs.shape, np.inf)
        bc = np.zeros(xs.shape)
        bs = np.zeros(xs.shape)
        ok = np.zeros(xs.shape, dtype=bool)
        for dy in (0, 1):
            for dx in (0, 1):
                xx = x0 + dx
                yy = y0 + dy
                xi = xx.astype(np.int64)
                yi = yy.astype(np.int64)
                inb = (xi >= 0) & (xi < w) & (yi >= 0) & (yi < h)
                xc = np.clip(xi, 0, w - 1)
                yc = np.clip(yi, 0, h - 1)
                v = inb & (valid[yc, xc] != 0)
                d2 = (xs - xx) ** 2 + (ys - yy) ** 2
                upd = v & (d2 < best_d2)
                best_d2 = np.where(upd, d2, best_d2)
                bc = np.where(upd, cos2[yc, xc], bc)
                bs = np.where(upd, sin2[yc, xc], bs)
                ok |= upd
        return bc, bs, ok
    fx = xs - x0
    fy = ys - y0
    cacc = np.zeros(xs.shape)
    sacc = np.zeros(xs.shape)
    for dy in (0, 1):
        wy = fy if dy else 1.0 - fy
        for dx in (0, 1):
            wx = fx if dx else 1.0 - fx
            wgt = wx * wy
            xi = (x0 + dx).astype(np.int64)
            yi = (y0 + dy).astype(np.int64)
            inb = (xi >= 0) & (xi < w) & (yi >= 0) & (yi < h)
            xc = np.clip(xi, 0, w - 1)
            yc = np.clip(yi, 0, h - 1)
            wv = np.where(inb & (valid[yc, xc] != 0), wgt, 0.0)
            cacc += wv * cos2[yc, xc]
            sacc += wv * sin2[yc, xc]
    mag = np.sqrt(cacc * cacc + sacc * sacc)
    ok = mag >= _RESULTANT_EPS
    inv = np.where(ok, 1.0 / np.where(ok, mag, 1.0), 0.0)
    return cacc * inv, sacc * inv, ok


def _cr_weights(t):
    t2 = t * t
    t3 = t2 * t
    return (
        0.5 * (-t3 + 2.0 * t2 - t),
        0.5 * (3.0 * t3 - 5.0 * t2 + 2.0),
        0.5 * (-3.0 * t3 + 4.0 * t2 + t),
        0.5 * (t3 - t2),
    )


def _interp_gray(pixels, mask, xs, ys, mode):
    """Gray values at decimal coordinates; a point is not ok when any pixel
    with nonzero weight is out of bounds or masked out."""
    h, w = pixels.shape
    if mode == GRAY_NEAREST:
        xi = np.floor(xs + 0.5).astype(np.int64)
        yi = np.floor(ys + 0.5).astype(np.int64)
        inb = (xi >= 0) & (xi < w) & (yi >= 0) & (yi < h)
        xc = np.clip(xi, 0, w - 1)
        yc = np.clip(yi, 0, h - 1)
        ok = inb & (mask[yc, xc] != 0)
        return np.where(ok, pixels[yc, xc], 0.0), ok
    x0 = np.floor(xs)
    y0 = np.floor(ys)
    if mode == GRAY_BILINEAR:
        fx = xs - x0
        fy = ys - y0
        acc = np.zeros(xs.shape)
        bad = np.zeros(xs.shape, dtype=bool)
        for dy in (0, 1):
            wy = fy if dy else 1.0 - fy
            for dx in (0, 1):
                wx = fx if dx else 1.0 - fx
                wgt = wx * wy
                needed = wgt != 0.0
                xi = (x0 + dx).astype(np.int64)
                yi = (y0 + dy).astype(np.int64)
                inb = (xi >= 0) & (xi < w) & (yi >= 0) & (yi < h)
                xc = np.clip(xi, 0, w - 1)
                yc = np.clip(yi, 0, h - 1)
                good = inb & (mask[yc, xc] != 0)
                bad |= needed & ~good
                acc += np.where(needed & good, wgt * pixels[yc, xc], 0.0)
        ok = ~bad
        return np.where(ok, acc, 0.0), ok
    # bicubic (Catmull-Rom over the 4x4 neighborhood)
    wxs = _cr_weights(xs - x0)
    wys = _cr_weights(ys - y0)
    acc = np.zeros(xs.shape)
    bad = np.zeros(xs.shape, dtype=bool)
    for j in range(4):
        wy = wys[j]
        yi = (y0 + (j - 1)).astype(np.int64)
        for i in range(4):
            wx = wxs[i]
            wgt = wx * wy
            needed = wgt != 0.0
            xi = (x0 + (i - 1)).astype(np.int64)
            inb = (xi >= 0) & (xi < w) & (yi >= 0) & (yi < h)
            xc = np.clip(xi, 0, w - 1)
            yc = np.clip(yi, 0, h - 1)
            good = inb & (mask[yc, xc] != 0)
            bad |= needed & ~good
            acc += np.where(needed & good, wgt * pixels[yc, xc], 0.0)
    ok = ~bad
    return np.where(ok, acc, 0.0), ok


class _Walkers:
    __slots__ = ("px", "py", "c2", "s2", "dx", "dy", "alive")

    def __init__(self, px, py, c2, s2, dx, dy, alive):
        self.px, self.py = px, py
        self.c2, self.s2 = c2, s2
        self.dx, self.dy = dx, dy
        self.alive = alive


def _advance(wk, cos2, sin2, valid, orth, stop_dot, of_mode):
    """One lockstep unit step for all alive walkers.

    Returns the mask of walkers whose new point is present. A walker whose
    orientation jumped past the stop threshold keeps the point but stops
    afterwards; a walker that lost the orientation loses the point too.
    """
    ct, st = _dir_from_doubled(wk.c2, wk.s2)
    if orth:
        bx, by = -st, ct
    else:
        bx, by = ct, st
    flip = bx * wk.dx + by * wk.dy < 0.0
    bx = np.where(flip, -bx, bx)
    by = np.where(flip, -by, by)
    nx = wk.px + bx
    ny = wk.py + by
    nc2, ns2, ok = _interp_of(cos2, sin2, valid, nx, ny, of_mode)
    present = wk.alive & ok
    if stop_dot is None:
        stopped = np.zeros(present.shape, dtype=bool)
    else:
        stopped = present & (nc2 * wk.c2 + ns2 * wk.s2 < stop_dot)
    wk.px = np.where(present, nx, wk.px)
    wk.py = np.where(present, ny, wk.py)
    wk.dx = np.where(present, bx, wk.dx)
    wk.dy = np.where(present, by, wk.dy)
    wk.c2 = np.where(present, nc2, wk.c2)
    wk.s2 = np.where(present, ns2, wk.s2)
    wk.alive = present & ~stopped
    return present


def _midpoints(cos2, sin2, valid, cxs, cys, c0, s0, p, stop_dot, of_mode):
    """Orthogonal midpoint walk for a batch of centers.

    Returns (mx, my, mc2, ms2, mok) with leading axis 2p+1; row p holds the
    centers themselves.
    """
    n = cxs.shape[0]
    nr = 2 * p + 1
    mx = np.zeros((nr, n))
    my = np.zeros((nr, n))
    mc2 = np.zeros((nr, n))
    ms2 = np.zeros((nr, n))
    mok = np.zeros((nr, n), dtype=bool)
    mx[p], my[p] = cxs, cys
    mc2[p], ms2[p] = c0, s0
    mok[p] = True
    ct, st = _dir_from_doubled(c0, s0)
    for side in (1, -1):
        wk = _Walkers(
            cxs.copy(), cys.copy(), c0.copy(), s0.copy(),
            side * -st, side * ct, np.ones(n, dtype=bool),
        )
        for k in range(1, p + 1):
            pr = _advance(wk, cos2, sin2, valid, True, stop_dot, of_mode)
            r = p + side * k
            mx[r] = np.where(pr, wk.px, 0.0)
            my[r] = np.where(pr, wk.py, 0.0)
            mc2[r] = np.where(pr, wk.c2, 0.0)
            ms2[r] = np.where(pr, wk.s2, 0.0)
            mok[r] = pr
    return mx, my, mc2, ms2, mok


def region_walk(cos2, sin2, valid, cx, cy, p, q, stop_dot, of_mode):
    """Trace one (2p+1) x (2q+1) curved-region grid.

    Returns (points_x, points_y, present); absent points are NaN.
    """
    nr, nc = 2 * p + 1, 2 * q + 1
    one_x = np.array([float(cx)])
    one_y = np.array([float(cy)])
    c0, s0, ok = _interp_of(cos2, sin2, valid, one_x, one_y, of_mode)
    if not ok[0]:
        raise ValueError("orientation field is undefined at the region center")
    mx, my, mc2, ms2, mok = _midpoints(cos2, sin2, valid, one_x, one_y, c0, s0, p, stop_dot, of_mode)
    pts_x = np.full((nr, nc), np.nan)
    pts_y = np.full((nr, nc), np.nan)
    present = np.zeros((nr, nc), dtype=np.uint8)
    pts_x[:, q] = np.where(mok[:, 0], mx[:, 0], np.nan)
    pts_y[:, q] = np.where(mok[:, 0], my[:, 0], np.nan)
    present[:, q] = mok[:, 0]
    ct, st = _dir_from_doubled(mc2[:, 0], ms2[:, 0])
    for side in (1, -1):
        wk = _Walkers(
            mx[:, 0].copy(), my[:, 0].copy(), mc2[:, 0].copy(), ms2[:, 0].copy(),
            side * ct, side * st, mok[:, 0].copy(),
        )
        for k in range(1, q + 1):
            pr = _advance(wk, cos2, sin2, valid, False, None, of_mode)
            col = q + side * k
            pts_x[pr, col] = wk.px[pr]
            pts_y[pr, col] = wk.py[pr]
            present[pr, col] = 1
    return pts_x, pts_y, present


def curvature_map(cos2, sin2, valid, process, q, of_mode):
    """Summed orientation change between the center and the two reachable
    ends of the central curve, for every processed pixel (NaN elsewhere)."""
    h, w = valid.shape
    out = np.full((h, w), np.nan)
    ys, xs = np.nonzero(process)
    for a in range(0, xs.size, _CHUNK):
        cxs = xs[a : a + _CHUNK].astype(np.float64)
        cys = ys[a : a + _CHUNK].astype(np.float64)
        c0, s0, ok = _interp_of(cos2, sin2, valid, cxs, cys, of_mode)
        curv = np.zeros(cxs.shape)
        ct, st = _dir_from_doubled(c0, s0)
        for side in (1, -1):
            wk = _Walkers(cxs.copy(), cys.copy(), c0.copy(), s0.copy(),
                          side * ct, side * st, ok.copy())
            lc2, ls2 = c0.copy(), s0.copy()
            for _ in range(q):
                pr = _advance(wk, cos2, sin2, valid, False, None, of_mode)
                lc2 = np.where(pr, wk.c2, lc2)
                ls2 = np.where(pr, wk.s2, ls2)
            dot = np.clip(lc2 * c0 + ls2 * s0, -1.0, 1.0)
            curv += 0.5 * np.arccos(dot)
        block = np.where(ok, curv, np.nan)
        out[ys[a : a + _CHUNK], xs[a : a + _CHUNK]] = block
    return out


def _profile_batch(pixels, gray_mask, cos2, sin2, valid, cxs, cys, p, q,
                   stop_dot, gray_mode, of_mode):
    """Gray-level profiles for a batch of centers.

    Returns (values, counts, center_ok) with values/counts shaped
    (2p+1, n); counts holds how many of the 2q+1 curve points yielded a
    gray value.
    """
    c0, s0, ok = _interp_of(cos2, sin2, valid, cxs, cys, of_mode)
    mx, my, mc2, ms2, mok = _midpoints(cos2, sin2, valid, cxs, cys, c0, s0, p, stop_dot, of_mode)
    mok &= ok[None, :]
    sums = np.zeros(mx.shape)
    counts = np.zeros(mx.shape, dtype=np.int64)
    gv, gok = _interp_gray(pixels, gray_mask, mx, my, gray_mode)
    use = mok & gok
    sums += np.where(use, gv, 0.0)
    counts += use
    ct, st = _dir_from_doubled(mc2, ms2)
    for side in (1, -1):
        wk = _Walkers(mx.copy(), my.copy(), mc2.copy(), ms2.copy(),
                      side * ct, side * st, mok.copy())
        for _ in range(q):
            pr = _advance(wk, cos2, sin2, valid, False, None, of_mode)
            gv, gok = _interp_gray(pixels, gray_mask, wk.px, wk.py, gray_mode)
            use = pr & gok
            sums += np.where(use, gv, 0.0)
            counts += use
    values = sums / np.maximum(counts, 1)
    return values, counts, ok


def rf_map(pixels, gray_mask, cos2, sin2, of_valid, process, p, q, stop_dot,
           gray_mode, of_mode, min_valid_fraction, p_maxmin_threshold,
           max_smoothing, smooth_kernel, freq_min, freq_max):
    """Per-pixel ridge frequency estimation over curved-region profiles.

    Returns (freq, reject, iters); freq is NaN where no estimate was
    accepted, reject carries the rejection codes from `_profiles`.
    """
    h, w = pixels.shape
    freq = np.full((h, w), np.nan)
    reject = np.zeros((h, w), dtype=np.uint8)
    iters = np.full((h, w), -1, dtype=np.int8)
    ys, xs = np.nonzero(process)
    n_pts = 2 * q + 1
    min_count = min_valid_fraction * n_pts
    for a in range(0, xs.size, _CHUNK):
        sl = slice(a, a + _CHUNK)
        cxs = xs[sl].astype(np.float64)
        cys = ys[sl].astype(np.float64)
        values, counts, ok = _profile_batch(
            pixels, gray_mask, cos2, sin2, of_valid, cxs, cys, p, q,
            stop_dot, gray_mode, of_mode)
        pvalid = counts >= min_count
        for i in range(cxs.shape[0]):
            yy, xx = ys[a + i], xs[a + i]
            if not ok[i]:
                reject[yy, xx] = 1
                continue
            f, _, it, code = estimate_profile(
                values[:, i], pvalid[:, i], p_maxmin_threshold,
                max_smoothing, smooth_kernel, freq_min, freq_max)
            reject[yy, xx] = code
            iters[yy, xx] = it
            if code == 0:
                freq[yy, xx] = f
    return freq, reject, iters


def _ellipse_mask(p, q):
    k = np.arange(2 * p + 1)[:, None] - p
    l = np.arange(2 * q + 1)[None, :] - q
    return (l / (q + 0.5)) ** 2 + (k / (p + 0.5)) ** 2 <= 1.0


def curved_gabor_map(pixels, gray_mask, cos2, sin2, of_valid, process, freq,
                     p, q, stop_dot, gray_mode, of_mode, sigma_x, sigma_y,
                     ellipse):
    """Flow-following Gabor response for every processed pixel.

    The window row offset (cross-ridge) carries the cosine and sigma_x, the
    column offset (along-ridge) carries sigma_y. The raw sum is divided by
    the summed absolute weights actually used, so truncated windows keep
    the output scale. Returns (out, presence, unfiltered).
    """
    h, w = pixels.shape
    out = np.full((h, w), np.nan)
    presence = np.zeros((h, w))
    unfiltered = np.zeros((h, w), dtype=np.uint8)
    nr, nc = 2 * p + 1, 2 * q + 1
    krel = np.arange(nr, dtype=np.float64) - p
    gk = np.exp(-0.5 * (krel / sigma_x) ** 2)
    lrel = np.arange(nc, dtype=np.float64) - q
    gl = np.exp(-0.5 * (lrel / sigma_y) ** 2)
    inside = _ellipse_mask(p, q) if ellipse else np.ones((nr, nc), dtype=bool)
    win_size = float(inside.sum())
    ys, xs = np.nonzero(process)
    for a in range(0, xs.size, _CHUNK):
        sl = slice(a, a + _CHUNK)
        cxs = xs[sl].astype(np.float64)
        cys = ys[sl].astype(np.float64)
        f = freq[ys[sl], xs[sl]]
        c0, s0, ok = _interp_of(cos2, sin2, of_valid, cxs, cys, of_mode)
        mx, my, mc2, ms2, mok = _midpoints(cos2, sin2, of_valid, cxs, cys,
                                           c0, s0, p, stop_dot, of_mode)
        mok &= ok[None, :]
        cosrow = np.cos(2.0 * np.pi * krel[:, None] * f[None, :])
        acc = np.zeros(cxs.shape)
        norm = np.zeros(cxs.shape)
        used = np.zeros(cxs.shape, dtype=np.int64)
        center_ok = np.zeros(cxs.shape, dtype=bool)
        # center column
        gv, gok = _interp_gray(pixels, gray_mask, mx, my, gray_mode)
        wgt = (gk * gl[q])[:, None] * cosrow
        use = mok & gok
        acc += np.sum(np.where(use, gv * wgt, 0.0), axis=0)
        norm += np.sum(np.where(use, np.abs(wgt), 0.0), axis=0)
        used += np.sum(use, axis=0)
        center_ok = use[p]
        ct, st = _dir_from_doubled(mc2, ms2)
        for side in (1, -1):
            wk = _Walkers(mx.copy(), my.copy(), mc2.copy(), ms2.copy(),
                          side * ct, side * st, mok.copy())
            for step in range(1, q + 1):
                pr = _advance(wk, cos2, sin2, of_valid, False, None, of_mode)
                col = q + side * step
                gv, gok = _interp_gray(pixels, gray_mask, wk.px, wk.py, gray_mode)
                use = pr & gok & inside[:, col][:, None]
                wgt = (gk * gl[col])[:, None] * cosrow
                acc += np.sum(np.where(use, gv * wgt, 0.0), axis=0)
                norm += np.sum(np.where(use, np.abs(wgt), 0.0), axis=0)
                used += np.sum(use, axis=0)
        good = ok & center_ok & (norm > 0.0)
        val = np.where(good, acc / np.where(good, norm, 1.0),
                       pixels[ys[sl], xs[sl]])
        out[ys[sl], xs[sl]] = val
        presence[ys[sl], xs[sl]] = used / win_size
        unfiltered[ys[sl], xs[sl]] = ~good
    return out, presence, unfiltered


def straight_gabor_map(pixels, gray_mask, theta, process, freq, half_y,
                       half_x, sigma_x, sigma_y):
    """Classic per-pixel rotated Gabor over a straight axis-aligned window.

    The kernel x-axis is taken orthogonal to the local ridge flow so the
    cosine oscillates across the ridges; normalization matches the curved
    filter. Returns (out, presence).
    """
    h, w = pixels.shape
    proc = process != 0
    acc = np.zeros((h, w))
    norm = np.zeros((h, w))
    used = np.zeros((h, w), dtype=np.int64)
    st = np.sin(theta)
    ct = np.cos(theta)
    two_pi_f = 2.0 * np.pi * freq
    sx2 = sigma_x * sigma_x
    sy2 = sigma_y * sigma_y
    ok_src = gray_mask != 0
    for dy in range(-half_y, half_y + 1):
        for dx in range(-half_x, half_x + 1):
            src = np.zeros((h, w))
            oks = np.zeros((h, w), dtype=bool)
            ys0, ys1 = max(0, -dy), min(h, h - dy)
            xs0, xs1 = max(0, -dx), min(w, w - dx)
            if ys0 >= ys1 or xs0 >= xs1:
                continue
            src[ys0:ys1, xs0:xs1] = pixels[ys0 + dy : ys1 + dy, xs0 + dx : xs1 + dx]
            oks[ys0:ys1, xs0:xs1] = ok_src[ys0 + dy : ys1 + dy, xs0 + dx : xs1 + dx]
            xr = -dx * st + dy * ct
            yr = -dx * ct - dy * st
            wgt = np.exp(-0.5 * (xr * xr / sx2 + yr * yr / sy2)) * np.cos(two_pi_f * xr)
            use = proc & oks
            acc += np.where(use, src * wgt, 0.0)
            norm += np.where(use, np.abs(wgt), 0.0)
            used += use
    good = proc & (norm > 0.0)
    out = np.full((h, w), np.nan)
    out[proc] = np.where(good, acc / np.where(good, norm, 1.0), pixels)[proc]
    win = float((2 * half_y + 1) * (2 * half_x + 1))
    presence = np.where(proc, used / win, 0.0)
    return out, presence
