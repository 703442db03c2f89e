"""Curved regions: point grids that follow the local ridge flow, and the
curvature estimate derived from their central curves.

A region consists of 2p+1 parallel curves with 2q+1 unit-spaced points
each. Midpoints are placed by walking orthogonally to the flow from the
center (stopping when the orientation jumps past the core threshold);
curves then follow the flow from each midpoint. The walk never consults
gray values, so regions can be reused between frequency estimation and
filtering.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import backend
from .image import GrayImage, InterpolationMethod
from .orientation import OrientationField, angular_difference, orientation_at

_OF_MODE = {InterpolationMethod.NEAREST: 0, InterpolationMethod.BILINEAR: 1}
_GRAY_MODE = {
    InterpolationMethod.NEAREST: 0,
    InterpolationMethod.BILINEAR: 1,
    InterpolationMethod.BICUBIC: 2,
}


def of_mode_code(method: InterpolationMethod) -> int:
    if method not in _OF_MODE:
        raise ValueError("orientation walks support nearest and bilinear only")
    return _OF_MODE[method]


def gray_mode_code(method: InterpolationMethod) -> int:
    return _GRAY_MODE[method]


@dataclass
class RegionConfig:
    p: int = 16
    q: int = 32
    core_stop_threshold_deg: float = 20.0

    def __post_init__(self):
        if self.p < 1 or self.q < 1:
            raise ValueError("p and q must be >= 1")
        if not 0.0 < self.core_stop_threshold_deg < 90.0:
            raise ValueError("core stop threshold must lie in (0, 90) degrees")

    @property
    def stop_dot(self) -> float:
        # Orientation changes beyond the threshold t satisfy
        # cos(2*delta) < cos(2*t) on the unit doubled-angle vectors.
        return math.cos(2.0 * math.radians(self.core_stop_threshold_deg))


@dataclass
class CurvedRegion:
    """(2p+1) x (2q+1) grid of optional decimal coordinates."""

    center: tuple[float, float]
    p: int
    q: int
    points_x: np.ndarray
    points_y: np.ndarray
    present: np.ndarray

    @property
    def midpoints_x(self) -> np.ndarray:
        return self.points_x[:, self.q]

    @property
    def midpoints_y(self) -> np.ndarray:
        return self.points_y[:, self.q]

    def point(self, row: int, col: int) -> tuple[float, float] | None:
        if not self.present[row, col]:
            return None
        return float(self.points_x[row, col]), float(self.points_y[row, col])


@dataclass
class CurvatureEstimate:
    value: float
    partial: bool


def build_curved_region(
    of: OrientationField,
    center: tuple[float, float],
    cfg: RegionConfig,
    interp: InterpolationMethod = InterpolationMethod.BILINEAR,
) -> CurvedRegion:
    """Trace the curved region around `center`; raises ValueError when the
    orientation field is undefined there."""
    c2, s2 = of.doubled()
    px, py, present = backend.kernels.region_walk(
        c2, s2, of.valid.astype(np.uint8), float(center[0]), float(center[1]),
        cfg.p, cfg.q, cfg.stop_dot, of_mode_code(interp))
    return CurvedRegion((float(center[0]), float(center[1])), cfg.p, cfg.q,
                        px, py, present.astype(bool))


def estimate_curvature(
    region: CurvedRegion,
    of: OrientationField,
    interp: InterpolationMethod = InterpolationMethod.BILINEAR,
) -> CurvatureEstimate:
    """Sum of the orientation differences between the central curve's
    center and its two reachable end points; flagged partial when either
    arm was truncated."""
    p, q = region.p, region.q
    row = p
    if not region.present[row, q]:
        raise ValueError("region has no central point")
    theta_c = orientation_at(of, region.points_x[row, q], region.points_y[row, q], interp)
    if theta_c is None:
        raise ValueError("orientation undefined at the region center")
    total = 0.0
    partial = False
    for side, last_col in ((1, 2 * q), (-1, 0)):
        col = q
        for c in range(q + side, last_col + side, side):
            if not region.present[row, c]:
                break
            col = c
        if col != last_col:
            partial = True
        if col == q:
            continue
        theta_e = orientation_at(of, region.points_x[row, col], region.points_y[row, col], interp)
        if theta_e is None:
            partial = True
            continue
        total += angular_difference(theta_c, theta_e)
    return CurvatureEstimate(float(total), partial)


def curvature_map(
    img: GrayImage,
    of: OrientationField,
    cfg: RegionConfig,
    interp: InterpolationMethod = InterpolationMethod.BILINEAR,
) -> np.ndarray:
    """Central-curve curvature for every valid foreground pixel.

    Gray values are never consulted; the image supplies dimensions and the
    foreground mask. Returns a float raster with NaN where undefined.
    """
    if img.pixels.shape != of.theta.shape:
        raise ValueError("image and orientation field dimensions differ")
    c2, s2 = of.doubled()
    process = (of.valid & img.mask).astype(np.uint8)
    return backend.kernels.curvature_map(
        c2, s2, of.valid.astype(np.uint8), process, cfg.q, of_mode_code(interp))
