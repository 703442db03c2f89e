"""Grayscale raster type plus the interpolation / normalization primitives
shared by every stage of the enhancement pipeline.

Pixel values are kept real-valued throughout (nominal range [0, 255]);
quantization to 8 bit happens only when an image file is written.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from ._profiles import gaussian_kernel1d, smooth_once

# Local variances below this (gray^2) are treated as zero; absorbs float
# accumulation error on constant patches.
_VAR_EPS = 1e-6


class InterpolationMethod(enum.Enum):
    NEAREST = "nearest"
    BILINEAR = "bilinear"
    BICUBIC = "bicubic"


@dataclass
class GrayImage:
    """2D grayscale raster with a boolean foreground mask."""

    pixels: np.ndarray
    mask: np.ndarray | None = None

    def __post_init__(self):
        self.pixels = np.ascontiguousarray(np.asarray(self.pixels, dtype=np.float64))
        if self.pixels.ndim != 2 or self.pixels.size == 0:
            raise ValueError("pixels must be a non-empty 2D array")
        if self.mask is None:
            self.mask = np.ones(self.pixels.shape, dtype=bool)
        else:
            self.mask = np.ascontiguousarray(np.asarray(self.mask, dtype=bool))
            if self.mask.shape != self.pixels.shape:
                raise ValueError("mask shape must match pixels shape")

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    def copy(self) -> "GrayImage":
        return GrayImage(self.pixels.copy(), self.mask.copy())

    @classmethod
    def from_uint8(cls, data: np.ndarray, mask: np.ndarray | None = None) -> "GrayImage":
        """Byte value b maps to the real value b exactly."""
        return cls(np.asarray(data, dtype=np.float64), mask)


@dataclass
class Profile1D:
    """1D sequence of gray levels with per-entry validity."""

    values: np.ndarray
    valid: np.ndarray | None = None

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 1 or self.values.size < 1:
            raise ValueError("profile must be a non-empty 1D sequence")
        if self.valid is None:
            self.valid = np.ones(self.values.shape, dtype=bool)
        else:
            self.valid = np.asarray(self.valid, dtype=bool)
            if self.valid.shape != self.values.shape:
                raise ValueError("validity shape must match values shape")

    def __len__(self) -> int:
        return int(self.values.shape[0])


def to_uint8(img: GrayImage, background: float | None = None) -> np.ndarray:
    """Quantize to 8 bit: clamp to [0, 255], round half away from zero.

    `background` optionally overrides masked-out pixels before quantizing.
    """
    px = img.pixels.copy()
    if background is not None:
        px[~img.mask] = background
    px = np.clip(px, 0.0, 255.0)
    return np.floor(px + 0.5).astype(np.uint8)


def _catmull_rom_weights(t: float) -> tuple[float, float, float, float]:
    t2 = t * t
    t3 = t2 * t
    return (
        0.5 * (-t3 + 2.0 * t2 - t),
        0.5 * (3.0 * t3 - 5.0 * t2 + 2.0),
        0.5 * (-3.0 * t3 + 4.0 * t2 + t),
        0.5 * (t3 - t2),
    )


def interpolate_gray(img: GrayImage, x: float, y: float, method: InterpolationMethod) -> float | None:
    """Gray value at the decimal coordinate (x, y), or None.

    Returns None whenever a pixel the method actually needs (nonzero
    weight) is outside the image or masked out; absence is a value, not an
    error. Nearest rounds half toward +inf; bilinear averages the 2x2
    cell; bicubic uses Catmull-Rom weights over the 4x4 neighborhood.
    """
    h, w = img.pixels.shape
    px, mask = img.pixels, img.mask
    if method is InterpolationMethod.NEAREST:
        ix = int(math.floor(x + 0.5))
        iy = int(math.floor(y + 0.5))
        if ix < 0 or ix >= w or iy < 0 or iy >= h or not mask[iy, ix]:
            return None
        return float(px[iy, ix])
    if method is InterpolationMethod.BILINEAR:
        x0 = math.floor(x)
        y0 = math.floor(y)
        fx = x - x0
        fy = y - y0
        acc = 0.0
        for dy in (0, 1):
            wy = fy if dy else 1.0 - fy
            if wy == 0.0:
                continue
            for dx in (0, 1):
                wx = fx if dx else 1.0 - fx
                if wx == 0.0:
                    continue
                xx = int(x0) + dx
                yy = int(y0) + dy
                if xx < 0 or xx >= w or yy < 0 or yy >= h or not mask[yy, xx]:
                    return None
                acc += wx * wy * px[yy, xx]
        return acc
    if method is InterpolationMethod.BICUBIC:
        x0 = math.floor(x)
        y0 = math.floor(y)
        wxs = _catmull_rom_weights(x - x0)
        wys = _catmull_rom_weights(y - y0)
        acc = 0.0
        for j in range(4):
            wy = wys[j]
            if wy == 0.0:
                continue
            yy = int(y0) + j - 1
            for i in range(4):
                wx = wxs[i]
                if wx == 0.0:
                    continue
                xx = int(x0) + i - 1
                if xx < 0 or xx >= w or yy < 0 or yy >= h or not mask[yy, xx]:
                    return None
                acc += wx * wy * px[yy, xx]
        return acc
    raise ValueError(f"unknown interpolation method: {method!r}")


def normalize_global(img: GrayImage, target_mean: float, target_variance: float) -> GrayImage:
    """Shift foreground statistics to the target mean and variance.

    Pixels above the mean move up, pixels below move down, by
    sqrt(target_variance * (I - mean)^2 / variance); background pixels pass
    through unchanged. Zero input variance yields a constant foreground.
    """
    fg = img.mask
    if not fg.any():
        raise ValueError("image has no foreground pixels")
    vals = img.pixels[fg]
    mean = float(vals.mean())
    var = float(vals.var())
    out = img.pixels.copy()
    if var <= _VAR_EPS:
        out[fg] = target_mean
    else:
        scale = math.sqrt(target_variance / var)
        out[fg] = target_mean + scale * (vals - mean)
    return GrayImage(out, img.mask.copy())


def _disk_footprint(radius: float) -> np.ndarray:
    r = int(math.floor(radius))
    dy, dx = np.mgrid[-r : r + 1, -r : r + 1]
    return (dx * dx + dy * dy <= radius * radius).astype(np.float64)


def normalize_local(
    img: GrayImage,
    target_mean: float = 127.5,
    target_std: float = 100.0,
    radius: float = 16.0,
) -> GrayImage:
    """Per-pixel normalization against the statistics of the surrounding
    Euclidean circle of foreground pixels. Zero local deviation maps the
    pixel to the target mean; background passes through."""
    disk = _disk_footprint(radius)
    fg = img.mask.astype(np.float64)
    px = img.pixels * fg
    counts = ndimage.correlate(fg, disk, mode="constant", cval=0.0)
    sums = ndimage.correlate(px, disk, mode="constant", cval=0.0)
    sums2 = ndimage.correlate(px * img.pixels, disk, mode="constant", cval=0.0)
    counts = np.maximum(counts, 1.0)
    mean = sums / counts
    var = np.maximum(sums2 / counts - mean * mean, 0.0)
    out = img.pixels.copy()
    m = img.mask
    flat = var <= _VAR_EPS
    scale = np.where(flat, 0.0, target_std / np.sqrt(np.where(flat, 1.0, var)))
    normalized = target_mean + scale * (img.pixels - mean)
    out[m] = np.where(flat[m], target_mean, normalized[m])
    return GrayImage(out, img.mask.copy())


def smooth_profile(profile: Profile1D, kernel_size: int = 7, sigma: float = 1.0) -> Profile1D:
    """Gaussian smoothing of a profile; at boundaries and around invalid
    entries the kernel is truncated and re-normalized over the valid
    in-range samples, so no synthetic data is injected."""
    kernel = gaussian_kernel1d(kernel_size, sigma)
    out = smooth_once(profile.values, profile.valid, kernel)
    return Profile1D(out, profile.valid.copy())
