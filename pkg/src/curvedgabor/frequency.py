"""Ridge frequency estimation.

The curved-region estimator averages interpolated gray values along each
curve into a profile, detects its extrema, and takes the reciprocal of the
median inter-extrema distance, guarded by the max/min IED ratio
reliability criterion. A block-based straight-window estimator
("x-signature") ships as the comparison baseline.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from . import backend
from ._profiles import (
    detect_extrema_arrays,
    estimate_profile,
    gaussian_kernel1d,
    ied_list,
)
from .image import GrayImage, InterpolationMethod, Profile1D, interpolate_gray
from .orientation import OrientationField, half_atan2
from .regions import CurvedRegion, RegionConfig, gray_mode_code, of_mode_code

FREQ_MIN = 1.0 / 25.0
FREQ_MAX = 1.0 / 3.0

_EIGHT = np.array([[1.0, 1.0, 1.0], [1.0, 0.0, 1.0], [1.0, 1.0, 1.0]])


class UnprocessableImageError(RuntimeError):
    """No usable frequency estimate anywhere in the foreground."""


class RejectReason(enum.IntEnum):
    NONE = 0
    PROFILE_INVALID = 1
    TOO_FEW_EXTREMA = 2
    PMAXMIN_EXCEEDED = 3
    OUT_OF_RANGE = 4


@dataclass
class RfEstimate:
    freq: float | None
    p_maxmin: float | None
    smoothing_iterations_used: int
    reject_reason: RejectReason


@dataclass
class RidgeFrequencyMap:
    """Per-pixel frequency in cycles/pixel plus a validity mask."""

    freq: np.ndarray
    valid: np.ndarray

    def __post_init__(self):
        self.freq = np.ascontiguousarray(np.asarray(self.freq, dtype=np.float64))
        self.valid = np.ascontiguousarray(np.asarray(self.valid, dtype=bool))
        if self.freq.ndim != 2 or self.freq.shape != self.valid.shape:
            raise ValueError("freq and valid must be matching 2D arrays")

    @property
    def height(self) -> int:
        return self.freq.shape[0]

    @property
    def width(self) -> int:
        return self.freq.shape[1]


def gray_profile(
    region: CurvedRegion,
    img: GrayImage,
    interp: InterpolationMethod = InterpolationMethod.BILINEAR,
    min_valid_fraction: float = 0.5,
) -> Profile1D:
    """One entry per curve: the mean of the curve's interpolatable gray
    values. Entries backed by fewer than min_valid_fraction of the curve's
    2q+1 points are invalid."""
    nr = 2 * region.p + 1
    n_pts = 2 * region.q + 1
    values = np.zeros(nr)
    valid = np.zeros(nr, dtype=bool)
    for r in range(nr):
        acc = 0.0
        cnt = 0
        for c in range(n_pts):
            if not region.present[r, c]:
                continue
            g = interpolate_gray(img, region.points_x[r, c], region.points_y[r, c], interp)
            if g is None:
                continue
            acc += g
            cnt += 1
        if cnt >= min_valid_fraction * n_pts and cnt > 0:
            values[r] = acc / cnt
            valid[r] = True
    return Profile1D(values, valid)


def detect_extrema(profile: Profile1D) -> tuple[list[int], list[int]]:
    """Positions of local minima and maxima; plateaus contribute their
    center index (rounding down) and invalid entries split the profile into
    independently scanned segments. Returns (minima, maxima)."""
    return detect_extrema_arrays(profile.values, profile.valid)


def inter_extrema_distances(minima: list[int], maxima: list[int]) -> list[int]:
    """Successive gaps within the maxima followed by the gaps within the
    minima; min-to-max distances are never formed."""
    return ied_list(minima, maxima)


def estimate_rf(
    profile: Profile1D,
    p_maxmin_threshold: float = 1.5,
    max_smoothing: int = 3,
    kernel_size: int = 7,
    kernel_sigma: float = 1.0,
    freq_min: float = FREQ_MIN,
    freq_max: float = FREQ_MAX,
) -> RfEstimate:
    """Frequency from a profile with up to `max_smoothing` cumulative
    Gaussian smoothing passes.

    Each attempt requires at least two minima and two maxima, a max/min IED
    ratio within the threshold, and a frequency inside [freq_min,
    freq_max]; rejection reports the final attempt's reason (the ratio
    check outranks the range check). Profiles with fewer than 3 valid
    entries are rejected outright as invalid.
    """
    kernel = gaussian_kernel1d(kernel_size, kernel_sigma)
    f, pm, iters, code = estimate_profile(
        profile.values, profile.valid, p_maxmin_threshold, max_smoothing,
        kernel, freq_min, freq_max)
    return RfEstimate(
        None if math.isnan(f) else f,
        None if math.isnan(pm) else pm,
        iters,
        RejectReason(code),
    )


def _fill_invalid(freq: np.ndarray, valid: np.ndarray, fg: np.ndarray) -> np.ndarray:
    """Cover the foreground by iterative 8-neighbor averaging of valid
    values (double-buffered); unreachable pockets fall back to the mean of
    all valid estimates."""
    freq = np.where(valid, freq, 0.0)
    valid = valid.copy()
    while True:
        remaining = fg & ~valid
        if not remaining.any():
            break
        cnt = ndimage.correlate(valid.astype(np.float64), _EIGHT, mode="constant", cval=0.0)
        sums = ndimage.correlate(freq * valid, _EIGHT, mode="constant", cval=0.0)
        newly = remaining & (cnt > 0.0)
        if not newly.any():
            freq[remaining] = freq[valid & fg].mean() if (valid & fg).any() else freq[valid].mean()
            break
        freq[newly] = sums[newly] / cnt[newly]
        valid |= newly
    return freq


def _smooth_masked(freq: np.ndarray, fg: np.ndarray, window: int) -> np.ndarray:
    area = float(window * window)
    fgf = fg.astype(np.float64)
    sums = ndimage.uniform_filter(freq * fgf, size=window, mode="constant", cval=0.0) * area
    cnts = ndimage.uniform_filter(fgf, size=window, mode="constant", cval=0.0) * area
    out = freq.copy()
    out[fg] = sums[fg] / cnts[fg]
    return out


def rf_image(
    img: GrayImage,
    of: OrientationField,
    cfg: RegionConfig,
    smoothing_window: int = 49,
    *,
    interp_gray: InterpolationMethod = InterpolationMethod.BILINEAR,
    interp_of: InterpolationMethod = InterpolationMethod.BILINEAR,
    min_valid_fraction: float = 0.5,
    p_maxmin_threshold: float = 1.5,
    max_smoothing: int = 3,
    kernel_size: int = 7,
    kernel_sigma: float = 1.0,
    diagnostics: dict | None = None,
) -> RidgeFrequencyMap:
    """Pixel-wise curved-region frequency image.

    Estimates every foreground pixel, fills the rejected ones from their
    valid neighbors, then averages over a foreground-masked square window.
    Raises UnprocessableImageError when nothing in the foreground yields an
    estimate.
    """
    fg = of.valid & img.mask
    if not fg.any():
        raise UnprocessableImageError("image has no foreground to estimate")
    c2, s2 = of.doubled()
    kernel = gaussian_kernel1d(kernel_size, kernel_sigma)
    freq, reject, iters = backend.kernels.rf_map(
        img.pixels, img.mask.astype(np.uint8), c2, s2,
        of.valid.astype(np.uint8), fg.astype(np.uint8),
        cfg.p, cfg.q, cfg.stop_dot,
        gray_mode_code(interp_gray), of_mode_code(interp_of),
        float(min_valid_fraction), float(p_maxmin_threshold),
        int(max_smoothing), kernel, FREQ_MIN, FREQ_MAX)
    valid = np.isfinite(freq) & fg
    if diagnostics is not None:
        hist = {reason.name: int(np.count_nonzero(reject[fg] == reason)) for reason in RejectReason}
        diagnostics["rf_rejections"] = hist
        diagnostics["rf_raw_valid"] = int(valid.sum())
        diagnostics["rf_smoothing_iterations_mean"] = (
            float(iters[valid].mean()) if valid.any() else 0.0)
    if not valid.any():
        raise UnprocessableImageError("no valid ridge frequency estimate in the foreground")
    filled = _fill_invalid(freq, valid, fg)
    smoothed = _smooth_masked(filled, fg, smoothing_window)
    out = np.clip(smoothed, FREQ_MIN, FREQ_MAX)
    out[~fg] = 0.0
    return RidgeFrequencyMap(out, fg)


def _block_fill(values: np.ndarray, valid: np.ndarray, target: np.ndarray) -> np.ndarray:
    values = np.where(valid, values, 0.0)
    valid = valid.copy()
    while True:
        remaining = target & ~valid
        if not remaining.any():
            break
        cnt = ndimage.correlate(valid.astype(np.float64), _EIGHT, mode="constant", cval=0.0)
        sums = ndimage.correlate(values * valid, _EIGHT, mode="constant", cval=0.0)
        newly = remaining & (cnt > 0.0)
        if not newly.any():
            values[remaining] = values[valid].mean()
            break
        values[newly] = sums[newly] / cnt[newly]
        valid |= newly
    return values


def rf_image_xsignature(
    img: GrayImage,
    of: OrientationField,
    *,
    block: int = 16,
    window_length: int = 32,
    window_width: int = 16,
    interp: InterpolationMethod = InterpolationMethod.NEAREST,
) -> RidgeFrequencyMap:
    """Block-based baseline: per 16x16 block, a straight window oriented
    with the block's mean flow is averaged across its width into a
    signature whose mean peak spacing gives the frequency. Invalid blocks
    are interpolated from their neighbors and the block values broadcast to
    pixels.

    Gray values are picked from the integer grid (nearest neighbor) by
    default, matching the method this baseline reproduces."""
    fg = of.valid & img.mask
    if not fg.any():
        raise UnprocessableImageError("image has no foreground to estimate")
    h, w = img.pixels.shape
    nby = (h + block - 1) // block
    nbx = (w + block - 1) // block
    bfreq = np.zeros((nby, nbx))
    bvalid = np.zeros((nby, nbx), dtype=bool)
    bfg = np.zeros((nby, nbx), dtype=bool)
    c2, s2 = of.doubled()
    for by in range(nby):
        for bx in range(nbx):
            y0, y1 = by * block, min((by + 1) * block, h)
            x0, x1 = bx * block, min((bx + 1) * block, w)
            sel = fg[y0:y1, x0:x1]
            if not sel.any():
                continue
            bfg[by, bx] = True
            cm = c2[y0:y1, x0:x1][sel].sum()
            sm = s2[y0:y1, x0:x1][sel].sum()
            if math.hypot(cm, sm) < 1e-9:
                continue
            theta = float(half_atan2(sm, cm))
            cx = (x0 + x1 - 1) / 2.0
            cy = (y0 + y1 - 1) / 2.0
            f = _xsig_block_freq(img, cx, cy, theta, window_length, window_width, interp)
            if f is not None:
                bfreq[by, bx] = f
                bvalid[by, bx] = True
    if not bvalid.any():
        raise UnprocessableImageError("x-signature found no valid block anywhere")
    filled = _block_fill(bfreq, bvalid, bfg)
    filled = np.where(bfg, filled, filled[bvalid].mean())
    per_pixel = np.kron(filled, np.ones((block, block)))[:h, :w]
    out = np.clip(per_pixel, FREQ_MIN, FREQ_MAX)
    out[~fg] = 0.0
    return RidgeFrequencyMap(out, fg)


def _xsig_block_freq(img, cx, cy, theta, length, width, interp):
    nx = math.cos(theta + 0.5 * math.pi)
    ny = math.sin(theta + 0.5 * math.pi)
    tx = math.cos(theta)
    ty = math.sin(theta)
    sig = np.zeros(length)
    sig_ok = np.zeros(length, dtype=bool)
    for k in range(length):
        a = k - (length - 1) / 2.0
        acc = 0.0
        cnt = 0
        for m in range(width):
            b = m - (width - 1) / 2.0
            g = interpolate_gray(img, cx + a * nx + b * tx, cy + a * ny + b * ty, interp)
            if g is None:
                continue
            acc += g
            cnt += 1
        if cnt:
            sig[k] = acc / cnt
            sig_ok[k] = True
    _, maxima = detect_extrema_arrays(sig, sig_ok)
    if len(maxima) < 2:
        return None
    mean_dist = (maxima[-1] - maxima[0]) / (len(maxima) - 1)
    f = 1.0 / mean_dist
    if not (FREQ_MIN <= f <= FREQ_MAX):
        return None
    return f
