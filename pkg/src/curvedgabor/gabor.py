"""Gabor kernel and the two contextual filters built on it.

The curved filter maps each curved region to a rectangular array of
interpolated gray values and multiplies it point-wise with an unrotated
kernel: the row offset (cross-ridge direction) carries the cosine and
sigma_x, the column offset (along-ridge direction) carries sigma_y. The
straight filter is the classic rotated-kernel variant over an axis-aligned
window and serves as the comparison baseline.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, replace

import numpy as np

from . import backend
from .frequency import FREQ_MAX, FREQ_MIN, RidgeFrequencyMap
from .image import GrayImage, InterpolationMethod, interpolate_gray, normalize_local
from .orientation import OrientationField
from .regions import CurvedRegion, RegionConfig, build_curved_region, gray_mode_code, of_mode_code

BACKGROUND_GRAY = 255.0

# Pixels whose window kept fewer than this fraction of its entries get
# flagged in the diagnostics.
LOW_PRESENCE = 0.25


class WindowShape(enum.Enum):
    FULL = "full"
    ELLIPSE = "ellipse"


@dataclass
class GaborParams:
    """Filter parameters: Gaussian widths, window shape and geometry.

    p and q are the half-counts of the curved region (or the straight
    window's half-sizes: p rows, q columns); theta applies to the straight
    filter only.
    """

    sigma_x: float = 4.0
    sigma_y: float = 4.0
    window: WindowShape = WindowShape.FULL
    p: int = 16
    q: int = 32
    theta: float | None = None

    def __post_init__(self):
        if self.sigma_x <= 0 or self.sigma_y <= 0:
            raise ValueError("sigma_x and sigma_y must be positive")


# Named parameter sets used throughout the verification experiments.
GABOR_PRESETS: dict[str, GaborParams] = {
    "21x21-ellipse": GaborParams(4.0, 4.0, WindowShape.ELLIPSE, p=10, q=10),
    "33x65-full": GaborParams(4.0, 4.0, WindowShape.FULL, p=16, q=32),
    "33x65-ellipse": GaborParams(4.0, 4.0, WindowShape.ELLIPSE, p=16, q=32),
    "65x65-sigma8": GaborParams(8.0, 8.0, WindowShape.FULL, p=32, q=32),
    "33x65-heavy": GaborParams(16.0, 32.0, WindowShape.FULL, p=16, q=32),
}

# Presets whose published parameter sets used nearest-neighbor gray
# interpolation.
PRESET_GRAY_INTERP: dict[str, InterpolationMethod] = {
    "21x21-ellipse": InterpolationMethod.NEAREST,
    "33x65-full": InterpolationMethod.NEAREST,
    "33x65-ellipse": InterpolationMethod.NEAREST,
}


@dataclass
class InterpolatedPatch:
    """Rectangular array of optional gray values sampled from a region."""

    values: np.ndarray
    present: np.ndarray


def gabor_kernel(x, y, theta: float, f: float, sigma_x: float, sigma_y: float):
    """Even Gabor weight at offset (x, y): a Gaussian envelope times a
    cosine along the rotated x-axis. Works elementwise on arrays."""
    xt = x * np.cos(theta) + y * np.sin(theta)
    yt = -x * np.sin(theta) + y * np.cos(theta)
    env = np.exp(-0.5 * (xt * xt / (sigma_x * sigma_x) + yt * yt / (sigma_y * sigma_y)))
    return env * np.cos(2.0 * np.pi * f * xt)


def sample_patch(
    region: CurvedRegion,
    img: GrayImage,
    interp: InterpolationMethod = InterpolationMethod.BILINEAR,
) -> InterpolatedPatch:
    """Interpolated gray values at the region's points; absent where the
    point is absent or uninterpolatable."""
    nr, nc = region.points_x.shape
    values = np.zeros((nr, nc))
    present = np.zeros((nr, nc), dtype=bool)
    for r in range(nr):
        for c in range(nc):
            if not region.present[r, c]:
                continue
            g = interpolate_gray(img, region.points_x[r, c], region.points_y[r, c], interp)
            if g is None:
                continue
            values[r, c] = g
            present[r, c] = True
    return InterpolatedPatch(values, present)


def _ellipse_mask(p: int, q: int) -> np.ndarray:
    k = np.arange(2 * p + 1)[:, None] - p
    l = np.arange(2 * q + 1)[None, :] - q
    return (l / (q + 0.5)) ** 2 + (k / (p + 0.5)) ** 2 <= 1.0


def filter_pixel(patch: InterpolatedPatch, f: float, params: GaborParams) -> float:
    """Normalized Gabor response of one patch.

    Present entries are multiplied with the unrotated kernel (cosine across
    the rows) and the sum is divided by the summed absolute weights of the
    entries actually used, so truncation never changes the output scale.
    Raises ValueError when the patch center is absent.
    """
    nr, nc = patch.values.shape
    p, q = (nr - 1) // 2, (nc - 1) // 2
    if not patch.present[p, q]:
        raise ValueError("patch center is absent")
    if not (FREQ_MIN <= f <= FREQ_MAX):
        raise ValueError(f"frequency {f} outside the valid range")
    k = np.arange(nr)[:, None] - p
    l = np.arange(nc)[None, :] - q
    weights = gabor_kernel(k, l, 0.0, f, params.sigma_x, params.sigma_y)
    use = patch.present.copy()
    if params.window is WindowShape.ELLIPSE:
        use &= _ellipse_mask(p, q)
    norm = np.abs(weights[use]).sum()
    if norm == 0.0:
        raise ValueError("no usable entries in the patch window")
    return float((patch.values[use] * weights[use]).sum() / norm)


def _check_coverage(fg: np.ndarray, rf: RidgeFrequencyMap):
    if not np.all(rf.valid[fg]):
        raise ValueError("ridge frequency map does not cover the foreground")


def enhance_curved(
    img: GrayImage,
    of: OrientationField,
    rf: RidgeFrequencyMap,
    params: GaborParams,
    cfg: RegionConfig | None = None,
    *,
    interp_gray: InterpolationMethod = InterpolationMethod.BILINEAR,
    interp_of: InterpolationMethod = InterpolationMethod.BILINEAR,
    target_mean: float = 127.5,
    target_std: float = 100.0,
    norm_radius: float = 16.0,
    diagnostics: dict | None = None,
) -> GrayImage:
    """Flow-following Gabor enhancement of every foreground pixel, followed
    by locally adaptive normalization; background is set to white.

    Region geometry comes from `params` (p, q); the core stop threshold
    from `cfg`.
    """
    cfg = cfg or RegionConfig()
    fg = of.valid & img.mask
    _check_coverage(fg, rf)
    c2, s2 = of.doubled()
    out, presence, unfiltered = backend.kernels.curved_gabor_map(
        img.pixels, img.mask.astype(np.uint8), c2, s2,
        of.valid.astype(np.uint8), fg.astype(np.uint8), rf.freq,
        params.p, params.q, cfg.stop_dot,
        gray_mode_code(interp_gray), of_mode_code(interp_of),
        params.sigma_x, params.sigma_y,
        1 if params.window is WindowShape.ELLIPSE else 0)
    if diagnostics is not None:
        diagnostics["unfiltered_pixels"] = int(unfiltered[fg].sum())
        diagnostics["low_presence_pixels"] = int(np.count_nonzero(presence[fg] < LOW_PRESENCE))
    pixels = np.full(img.pixels.shape, BACKGROUND_GRAY)
    pixels[fg] = out[fg]
    filtered = GrayImage(pixels, fg)
    return normalize_local(filtered, target_mean, target_std, norm_radius)


def enhance_straight(
    img: GrayImage,
    of: OrientationField,
    rf: RidgeFrequencyMap,
    params: GaborParams,
    *,
    target_mean: float = 127.5,
    target_std: float = 100.0,
    norm_radius: float = 16.0,
    diagnostics: dict | None = None,
) -> GrayImage:
    """Classic contextual filtering: per-pixel rotated kernel over a
    straight (2p+1) x (2q+1) window, same normalization chain as the
    curved filter."""
    fg = of.valid & img.mask
    _check_coverage(fg, rf)
    out, presence = backend.kernels.straight_gabor_map(
        img.pixels, img.mask.astype(np.uint8), of.theta, fg.astype(np.uint8),
        rf.freq, params.p, params.q, params.sigma_x, params.sigma_y)
    if diagnostics is not None:
        diagnostics["low_presence_pixels"] = int(np.count_nonzero(presence[fg] < LOW_PRESENCE))
    pixels = np.full(img.pixels.shape, BACKGROUND_GRAY)
    pixels[fg] = out[fg]
    filtered = GrayImage(pixels, fg)
    return normalize_local(filtered, target_mean, target_std, norm_radius)
