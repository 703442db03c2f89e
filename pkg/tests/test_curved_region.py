import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from curvedgabor.image import GrayImage, InterpolationMethod
from curvedgabor.orientation import OrientationField
from curvedgabor.regions import (
    RegionConfig,
    build_curved_region,
    curvature_map,
    estimate_curvature,
)
from curvedgabor.synthetic import gen_concentric, gen_parallel

BL = InterpolationMethod.BILINEAR


def _uniform(shape, theta):
    return OrientationField(np.full(shape, theta), np.ones(shape, bool))


class TestBuildRegion:
    def test_uniform_horizontal_field_is_axis_aligned_grid(self):
        of = _uniform((64, 64), 0.0)
        cfg = RegionConfig(p=4, q=6)
        region = build_curved_region(of, (30.0, 30.0), cfg)
        assert region.present.all()
        rows = np.arange(9) - 4
        cols = np.arange(13) - 6
        np.testing.assert_allclose(region.points_x, 30.0 + cols[None, :] + 0 * rows[:, None], atol=1e-9)
        np.testing.assert_allclose(region.points_y, 30.0 + rows[:, None] + 0 * cols[None, :], atol=1e-9)

    def test_unit_steps_along_curves(self):
        pat = gen_concentric(200, 200, 10.0, (99.5, 99.5), 20.0)
        region = build_curved_region(pat.true_of, (99.5, 30.0), RegionConfig(p=8, q=16))
        dx = np.diff(region.points_x, axis=1)
        dy = np.diff(region.points_y, axis=1)
        both = region.present[:, 1:] & region.present[:, :-1]
        steps = np.hypot(dx[both], dy[both])
        np.testing.assert_allclose(steps, 1.0, atol=1e-6)

    def test_central_curve_follows_circle(self):
        cx = cy = 149.5
        pat = gen_concentric(300, 300, 10.0, (cx, cy), 20.0)
        R = 100.0
        region = build_curved_region(pat.true_of, (cx, cy - R), RegionConfig(p=1, q=32))
        row = region.points_x.shape[0] // 2
        assert region.present[row].all()
        radii = np.hypot(region.points_x[row] - cx, region.points_y[row] - cy)
        assert np.abs(radii - R).max() < 0.5

    def test_stop_rule_at_discontinuity_three_steps_up(self):
        # 90-degree orientation jump 3 px above the center: the upward walk
        # keeps the midpoint where the jump is detected and stops there.
        h = w = 21
        cx, cy = 10.0, 10.0
        theta = np.zeros((h, w))
        theta[: int(cy) - 2, :] = math.pi / 2  # rows 0..7 carry the jump
        of = OrientationField(theta, np.ones((h, w), bool))
        # flow horizontal (theta=0) at center: orthogonal walk goes along y.
        # Rows y <= 7 carry pi/2, so the walk up sees the jump at step 3 (y=7).
        cfg = RegionConfig(p=6, q=2, core_stop_threshold_deg=20.0)
        region = build_curved_region(of, (cx, cy), cfg)
        mids = region.present[:, cfg.q]
        # side walking decreasing y fills rows p-1..0
        p = cfg.p
        assert mids[p]
        assert mids[p - 1] and mids[p - 2] and mids[p - 3]
        assert not mids[p - 4] and not mids[: p - 3].any()
        # the other side is unobstructed
        assert mids[p + 1 :].all()

    def test_walk_never_reads_gray(self):
        # Regions depend only on the orientation field.
        of = _uniform((32, 32), 0.3)
        r1 = build_curved_region(of, (16.0, 16.0), RegionConfig(p=3, q=3))
        r2 = build_curved_region(of, (16.0, 16.0), RegionConfig(p=3, q=3))
        np.testing.assert_array_equal(r1.points_x, r2.points_x)

    def test_center_outside_valid_field_raises(self):
        of = OrientationField(np.zeros((8, 8)), np.zeros((8, 8), bool))
        with pytest.raises(ValueError):
            build_curved_region(of, (4.0, 4.0), RegionConfig(p=2, q=2))

    def test_point_reflection_symmetry_uniform_field(self):
        of = _uniform((64, 64), 0.77)
        region = build_curved_region(of, (31.0, 33.0), RegionConfig(p=5, q=7))
        px, py = region.points_x, region.points_y
        np.testing.assert_allclose(px + px[::-1, ::-1], 2 * 31.0, atol=1e-6)
        np.testing.assert_allclose(py + py[::-1, ::-1], 2 * 33.0, atol=1e-6)

    def test_decreasing_threshold_never_adds_points(self):
        pat = gen_concentric(160, 160, 10.0, (79.5, 79.5), 20.0)
        loose = build_curved_region(pat.true_of, (79.5, 30.0),
                                    RegionConfig(p=10, q=10, core_stop_threshold_deg=45.0))
        tight = build_curved_region(pat.true_of, (79.5, 30.0),
                                    RegionConfig(p=10, q=10, core_stop_threshold_deg=5.0))
        assert not (tight.present & ~loose.present).any()

    def test_absent_orientation_terminates_curve_arm(self):
        v = np.ones((32, 32), bool)
        v[:, 20:] = False
        of = OrientationField(np.where(v, 0.0, 0.0), v)
        region = build_curved_region(of, (16.0, 16.0), RegionConfig(p=1, q=8))
        row = 1
        # walking +x dies when interpolation needs column 20
        cols = np.nonzero(region.present[row])[0]
        assert region.points_x[row, cols.max()] < 20.0
        assert not region.present[row, -1]


class TestCurvature:
    def test_uniform_field_zero(self):
        of = _uniform((64, 64), 1.0)
        region = build_curved_region(of, (32.0, 32.0), RegionConfig(p=1, q=10))
        est = estimate_curvature(region, of)
        assert est.value == pytest.approx(0.0, abs=1e-9)
        assert not est.partial

    def test_concentric_matches_arc_angle(self):
        cx = cy = 149.5
        pat = gen_concentric(300, 300, 10.0, (cx, cy), 20.0)
        region = build_curved_region(pat.true_of, (cx, cy - 100.0), RegionConfig(p=1, q=32))
        est = estimate_curvature(region, pat.true_of)
        assert est.value == pytest.approx(0.64, rel=0.05)
        assert not est.partial

    def test_monotone_with_core_distance(self):
        cx = cy = 149.5
        pat = gen_concentric(300, 300, 10.0, (cx, cy), 20.0)
        cfg = RegionConfig(p=1, q=24)
        near = estimate_curvature(build_curved_region(pat.true_of, (cx, cy - 60.0), cfg), pat.true_of)
        far = estimate_curvature(build_curved_region(pat.true_of, (cx, cy - 120.0), cfg), pat.true_of)
        assert near.value > far.value

    def test_partial_flag_on_truncated_arm(self):
        v = np.ones((64, 64), bool)
        v[:, 40:] = False
        of = OrientationField(np.zeros((64, 64)), v)
        region = build_curved_region(of, (32.0, 32.0), RegionConfig(p=1, q=16))
        est = estimate_curvature(region, of)
        assert est.partial

    def test_map_uniform_zero_and_bounded(self):
        pat = gen_parallel(96, 96, 10.0, 0.0)
        curv = curvature_map(pat.image, pat.true_of, RegionConfig(p=1, q=16))
        interior = curv[30:-30, 30:-30]
        assert np.isfinite(interior).all()
        assert np.abs(interior).max() == pytest.approx(0.0, abs=1e-9)
        assert np.nanmax(curv) <= math.pi + 1e-12

    def test_map_decreases_with_radius(self):
        cx = cy = 199.5
        pat = gen_concentric(400, 400, 10.0, (cx, cy), 30.0)
        curv = curvature_map(pat.image, pat.true_of, RegionConfig(p=1, q=32))
        ys, xs = np.mgrid[0:400, 0:400]
        r = np.hypot(xs - cx, ys - cy)
        sel = (r > 60) & (r < 160) & np.isfinite(curv)
        rs = r[sel]
        cs = curv[sel]
        # Spearman via rank correlation
        from scipy import stats

        rho = stats.spearmanr(rs, cs).statistic
        assert rho <= -0.95

    def test_map_invalid_pixels_nan(self):
        v = np.ones((32, 32), bool)
        v[0:4] = False
        of = OrientationField(np.where(v, 0.4, 0.0), v)
        img = GrayImage(np.zeros((32, 32)))
        curv = curvature_map(img, of, RegionConfig(p=1, q=4))
        assert np.isnan(curv[0:4]).all()
        assert np.isfinite(curv[10, 10])
