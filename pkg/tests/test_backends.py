"""Parity between the compiled kernels and the numpy fallback.

Both backends implement the same arithmetic; geometry should agree to
float rounding and all discrete outputs (presence masks, rejection codes)
exactly.
"""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import curvedgabor._kernels_py as kpy
from curvedgabor import backend
from curvedgabor._profiles import gaussian_kernel1d

kcy = pytest.importorskip("curvedgabor._kernels_cy")


def _random_field(seed, h=48, w=48, smooth=True, holes=0.0):
    rng = np.random.default_rng(seed)
    theta = rng.uniform(0, math.pi, (h, w))
    if smooth:
        # slowly varying flow: blend a base angle with a gentle gradient
        ys, xs = np.mgrid[0:h, 0:w]
        theta = np.mod(0.4 + 0.006 * xs + 0.004 * ys + 0.05 * rng.standard_normal((h, w)), math.pi)
    valid = rng.uniform(size=(h, w)) >= holes
    c2 = np.where(valid, np.cos(2 * theta), 0.0)
    s2 = np.where(valid, np.sin(2 * theta), 0.0)
    return (np.ascontiguousarray(c2), np.ascontiguousarray(s2),
            valid.astype(np.uint8))


def _random_image(seed, h=48, w=48, mask_holes=0.0):
    rng = np.random.default_rng(seed + 1000)
    px = rng.uniform(0, 255, (h, w))
    mask = (rng.uniform(size=(h, w)) >= mask_holes).astype(np.uint8)
    return np.ascontiguousarray(px), mask


STOP = math.cos(2 * math.radians(20.0))


class TestRegionWalkParity:
    @settings(max_examples=15, deadline=None)
    @given(st.integers(0, 10_000), st.sampled_from([0, 1]))
    def test_walks_agree(self, seed, of_mode):
        c2, s2, valid = _random_field(seed, holes=0.05)
        cx, cy = 24.0 + (seed % 7) * 0.3, 23.0 + (seed % 5) * 0.4
        try:
            nx, ny, npres = kcy.region_walk(c2, s2, valid, cx, cy, 5, 7, STOP, of_mode)
        except ValueError:
            with pytest.raises(ValueError):
                kpy.region_walk(c2, s2, valid, cx, cy, 5, 7, STOP, of_mode)
            return
        px, py, ppres = kpy.region_walk(c2, s2, valid, cx, cy, 5, 7, STOP, of_mode)
        np.testing.assert_array_equal(npres, ppres.astype(np.uint8))
        sel = npres.astype(bool)
        np.testing.assert_allclose(nx[sel], px[sel], atol=1e-9)
        np.testing.assert_allclose(ny[sel], py[sel], atol=1e-9)


class TestCurvatureParity:
    def test_concentric_field(self):
        from curvedgabor.synthetic import gen_concentric

        pat = gen_concentric(96, 96, 10.0, (47.5, 47.5), 15.0)
        c2, s2 = pat.true_of.doubled()
        valid = pat.true_of.valid.astype(np.uint8)
        a = kcy.curvature_map(c2, s2, valid, valid, 16, 1)
        b = kpy.curvature_map(c2, s2, valid, valid, 16, 1)
        np.testing.assert_array_equal(np.isnan(a), np.isnan(b))
        sel = np.isfinite(a)
        np.testing.assert_allclose(a[sel], b[sel], atol=1e-9)


class TestRfMapParity:
    def test_noisy_ridges(self):
        from curvedgabor.synthetic import gen_parallel

        pat = gen_parallel(72, 72, 9.0, 0.5, noise_sigma=25.0, seed=2)
        c2, s2 = pat.true_of.doubled()
        valid = pat.true_of.valid.astype(np.uint8)
        px = pat.image.pixels
        mask = pat.image.mask.astype(np.uint8)
        kern = gaussian_kernel1d(7, 1.0)
        args = (px, mask, c2, s2, valid, valid, 8, 12, STOP, 1, 1,
                0.5, 1.5, 3, kern, 1 / 25, 1 / 3)
        fa, ra, ia = kcy.rf_map(*args)
        fb, rb, ib = kpy.rf_map(*args)
        np.testing.assert_array_equal(ra, rb)
        np.testing.assert_array_equal(ia, ib)
        np.testing.assert_array_equal(np.isnan(fa), np.isnan(fb))
        sel = np.isfinite(fa)
        np.testing.assert_allclose(fa[sel], fb[sel], atol=1e-12)


class TestGaborMapParity:
    def test_curved_map(self):
        from curvedgabor.synthetic import gen_parallel

        pat = gen_parallel(72, 72, 10.0, 1.0, noise_sigma=10.0, seed=3)
        c2, s2 = pat.true_of.doubled()
        valid = pat.true_of.valid.astype(np.uint8)
        args = (pat.image.pixels, pat.image.mask.astype(np.uint8), c2, s2,
                valid, valid, pat.true_rf.freq, 6, 10, STOP, 1, 1, 4.0, 4.0, 1)
        oa, pa, ua = kcy.curved_gabor_map(*args)
        ob, pb, ub = kpy.curved_gabor_map(*args)
        np.testing.assert_array_equal(ua, ub)
        np.testing.assert_allclose(pa, pb, atol=1e-12)
        sel = np.isfinite(oa)
        np.testing.assert_array_equal(sel, np.isfinite(ob))
        np.testing.assert_allclose(oa[sel], ob[sel], atol=1e-9)

    @pytest.mark.parametrize("sigmas", [(4.0, 4.0), (3.0, 5.0)])
    def test_straight_map(self, sigmas):
        from curvedgabor.synthetic import gen_parallel

        pat = gen_parallel(64, 64, 10.0, 0.9, noise_sigma=15.0, seed=4)
        theta = pat.true_of.theta
        valid = pat.true_of.valid.astype(np.uint8)
        args = (pat.image.pixels, pat.image.mask.astype(np.uint8), theta,
                valid, pat.true_rf.freq, 8, 10, sigmas[0], sigmas[1])
        oa, pa = kcy.straight_gabor_map(*args)
        ob, pb = kpy.straight_gabor_map(*args)
        np.testing.assert_allclose(pa, pb, atol=1e-12)
        sel = np.isfinite(oa)
        np.testing.assert_array_equal(sel, np.isfinite(ob))
        np.testing.assert_allclose(oa[sel], ob[sel], atol=1e-9)


class TestEstimateParity:
    @settings(max_examples=10, deadline=None)
    @given(st.integers(0, 10_000))
    def test_rf_decisions_agree_under_masking(self, seed):
        # Holes in the gray mask and the orientation field drive the
        # segment handling and every rejection path; decisions must be
        # identical across backends.
        c2, s2, valid = _random_field(seed, holes=0.1)
        px, mask = _random_image(seed, mask_holes=0.15)
        kern = gaussian_kernel1d(7, 1.0)
        args = (px, mask, c2, s2, valid, valid, 4, 6, STOP, 1, 1,
                0.5, 1.5, 3, kern, 1 / 25, 1 / 3)
        fa, ra, ia = kcy.rf_map(*args)
        fb, rb, ib = kpy.rf_map(*args)
        np.testing.assert_array_equal(ra, rb)
        np.testing.assert_array_equal(ia, ib)
        np.testing.assert_array_equal(np.isnan(fa), np.isnan(fb))
        sel = np.isfinite(fa)
        np.testing.assert_allclose(fa[sel], fb[sel], atol=1e-12)


class TestSelection:
    def test_active_backend_is_native(self):
        assert backend.kernels.BACKEND_NAME == "native"

    def test_set_backend_roundtrip(self):
        backend.set_backend("python")
        try:
            assert backend.backend_name() == "python"
        finally:
            backend.set_backend("native")
        assert backend.backend_name() == "native"

    def test_unknown_backend_rejected(self):
        with pytest.raises(ValueError):
            backend.set_backend("fortran")
