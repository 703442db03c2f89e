"""Acceptance suite: every criterion at its stated tolerance, one printed
pass line per criterion (run with -s to see them on success).

The heavy fixtures are built once per module and their build time is
charged to the first criterion that needs them.
"""

import math
import time
from dataclasses import replace

import numpy as np
import pytest

from curvedgabor.frequency import rf_image, rf_image_xsignature
from curvedgabor.gabor import GaborParams, WindowShape, enhance_curved, enhance_straight, gabor_kernel
from curvedgabor.image import GrayImage, normalize_global, normalize_local
from curvedgabor.orientation import (
    FusionConfig,
    OrientationField,
    angular_difference,
    estimate_gradient_of,
    fuse_orientation_fields,
    reconstruct_and_extrapolate,
)
from curvedgabor.pipeline import PipelineConfig, enhance
from curvedgabor.regions import RegionConfig, curvature_map
from curvedgabor.synthetic import gen_concentric, gen_parallel, interior_mask, ncc


def _report(name, elapsed, budget):
    print(f"\nACCEPTANCE [{name}] PASS  ({elapsed:.1f}s, budget {budget}s)")


def _estimate_of(img):
    cfg = FusionConfig()
    fine = estimate_gradient_of(img, cfg.smoothing_window)
    coarse = estimate_gradient_of(img, cfg.coarse_window)
    fused = fuse_orientation_fields(fine, coarse, cfg)
    return reconstruct_and_extrapolate(fused, cfg.extrapolation_radius)


class _Cache(dict):
    pass


@pytest.fixture(scope="module")
def cache():
    return _Cache()


@pytest.fixture(scope="module")
def parallel512(cache):
    t0 = time.perf_counter()
    pat = gen_parallel(512, 512, 10.0, math.radians(120.0))  # flow at 30 deg
    work = normalize_global(pat.image, 127.5, 10000.0)
    of = _estimate_of(work)
    rf = rf_image(work, of, RegionConfig())
    curv = curvature_map(work, of, RegionConfig())
    cache["parallel_build_s"] = time.perf_counter() - t0
    return pat, work, of, rf, curv


def test_fig5_arithmetic_exact():
    t0 = time.perf_counter()
    from curvedgabor.frequency import estimate_rf, inter_extrema_distances
    from curvedgabor.image import Profile1D

    ieds = inter_extrema_distances([7, 12, 18], [2, 11, 14, 24])
    assert ieds == [9, 3, 10, 5, 6]
    assert float(np.median(ieds)) == 6.0
    assert max(ieds) / min(ieds) == 10.0 / 3.0

    ieds2 = inter_extrema_distances([], [0, 11, 22, 33])
    assert ieds2 == [11, 11, 11]
    assert float(np.median(ieds2)) == 11.0
    assert max(ieds2) / min(ieds2) == 1.0

    # End to end: a clean period-11 profile estimates to exactly 1/11.
    x = np.arange(45, dtype=float)
    prof = Profile1D(127.5 + 60 * np.cos(2 * np.pi * (x - 2.3) / 11.0))
    est = estimate_rf(prof)
    assert est.freq == 1.0 / 11.0
    assert est.p_maxmin == 1.0
    elapsed = time.perf_counter() - t0
    assert elapsed < 1.0
    _report("fig5-arithmetic", elapsed, 1)


def test_kernel_matches_brute_force():
    t0 = time.perf_counter()
    assert gabor_kernel(0.0, 0.0, 0.7, 0.1, 4.0, 4.0) == 1.0
    rng = np.random.default_rng(99)
    for _ in range(1000):
        x, y = rng.uniform(-20, 20, 2)
        theta = rng.uniform(0, math.pi)
        f = rng.uniform(1 / 25, 1 / 3)
        sx, sy = rng.uniform(0.5, 32, 2)
        xt = x * math.cos(theta) + y * math.sin(theta)
        yt = -x * math.sin(theta) + y * math.cos(theta)
        want = math.exp(-0.5 * (xt * xt / (sx * sx) + yt * yt / (sy * sy)))
        want *= math.cos(2 * math.pi * f * xt)
        assert abs(gabor_kernel(x, y, theta, f, sx, sy) - want) <= 1e-12
        assert gabor_kernel(x, y, theta, f, sx, sy) == gabor_kernel(-x, -y, theta, f, sx, sy)
    elapsed = time.perf_counter() - t0
    assert elapsed < 1.0
    _report("gabor-kernel-eq1-3", elapsed, 1)


def test_parallel_oracle(parallel512, cache):
    t0 = time.perf_counter()
    pat, work, of, rf, curv = parallel512
    interior = interior_mask(pat.image.mask, 40)

    sel = interior & of.valid
    of_err = np.degrees(angular_difference(of.theta[sel], pat.true_of.theta[sel]))
    assert of_err.mean() < 1.0

    sel = interior & rf.valid
    rf_rel = np.abs(rf.freq[sel] - 0.1) / 0.1
    assert rf_rel.max() < 0.02

    csel = interior & np.isfinite(curv)
    assert curv[csel].mean() < 0.02

    elapsed = cache["parallel_build_s"] + (time.perf_counter() - t0)
    assert elapsed < 30.0
    _report("parallel-oracle", elapsed, 30)


def test_concentric_oracle():
    t0 = time.perf_counter()
    center = (255.5, 255.5)
    pat = gen_concentric(512, 512, 10.0, center, 40.0)
    work = normalize_global(pat.image, 127.5, 10000.0)
    of = _estimate_of(work)
    rf_curved = rf_image(work, of, RegionConfig())
    rf_xsig = rf_image_xsignature(work, of)
    curv = curvature_map(work, of, RegionConfig())

    interior = interior_mask(pat.image.mask, 40)
    sel = interior & rf_curved.valid
    rel = np.abs(rf_curved.freq[sel] - 0.1) / 0.1
    assert rel.max() < 0.03

    ys, xs = np.mgrid[0:512, 0:512]
    r = np.hypot(xs - center[0], ys - center[1])
    annulus = (r >= 40.0) & (r <= 120.0) & rf_curved.valid & rf_xsig.valid
    err_curved = np.abs(rf_curved.freq[annulus] - 0.1).mean()
    err_xsig = np.abs(rf_xsig.freq[annulus] - 0.1).mean()
    assert err_xsig > err_curved

    ring = (np.abs(r - 100.0) <= 1.0) & np.isfinite(curv)
    assert curv[ring].mean() == pytest.approx(0.64, abs=0.064)

    elapsed = time.perf_counter() - t0
    assert elapsed < 60.0
    _report("concentric-oracle", elapsed, 60)


def test_denoising_curved_beats_straight():
    t0 = time.perf_counter()
    center = (255.5, 255.5)
    params = GaborParams(4.0, 4.0, WindowShape.FULL, 16, 32)
    wins = 0
    margins = []
    for seed in (1, 2, 3, 4, 5):
        pat = gen_concentric(512, 512, 10.0, center, 40.0, noise_sigma=50.0, seed=seed)
        clean = gen_concentric(512, 512, 10.0, center, 40.0)
        work = normalize_global(pat.image, 127.5, 10000.0)
        of = _estimate_of(work)
        rf = rf_image(work, of, RegionConfig())
        curved = enhance_curved(work, of, rf, params)
        straight = enhance_straight(work, of, rf, params)
        interior = interior_mask(pat.image.mask, 40) & curved.mask & straight.mask
        ncc_curved = ncc(curved.pixels, clean.image.pixels, interior)
        ncc_straight = ncc(straight.pixels, clean.image.pixels, interior)
        margins.append(ncc_curved - ncc_straight)
        if ncc_curved > ncc_straight:
            wins += 1
    assert wins == 5, f"margins: {margins}"
    elapsed = time.perf_counter() - t0
    assert elapsed < 300.0
    _report("denoising-comparison", elapsed, 300)


def test_zero_curvature_equivalence(parallel512, cache):
    t0 = time.perf_counter()
    pat, work, of, rf, _ = parallel512
    params = GaborParams(4.0, 4.0, WindowShape.FULL, 16, 32)
    curved = enhance_curved(work, of, rf, params)
    straight = enhance_straight(work, of, rf, params)
    interior = interior_mask(pat.image.mask, 40) & curved.mask & straight.mask
    diff = np.abs(curved.pixels[interior] - straight.pixels[interior])
    assert diff.mean() < 2.0
    elapsed = cache["parallel_build_s"] + (time.perf_counter() - t0)
    assert elapsed < 120.0
    _report("zero-curvature-equivalence", elapsed, 120)


def test_fusion_contract():
    t0 = time.perf_counter()
    rng = np.random.default_rng(5)
    h = w = 64
    t1 = rng.uniform(0, math.pi, (h, w))
    # differences straddling the 15-degree threshold
    t2 = np.mod(t1 + np.radians(rng.uniform(0, 30, (h, w))), math.pi)
    v1 = rng.uniform(size=(h, w)) > 0.2
    v2 = rng.uniform(size=(h, w)) > 0.2
    of1 = OrientationField(np.where(v1, t1, 0.0), v1)
    of2 = OrientationField(np.where(v2, t2, 0.0), v2)
    fused = fuse_orientation_fields(of1, of2, FusionConfig())
    thr = math.radians(15.0)
    expect = np.zeros((h, w), bool)
    for y in range(h):
        for x in range(w):
            if not (v1[y, x] and v2[y, x]):
                continue
            d = abs(t1[y, x] - t2[y, x])
            d = min(d, math.pi - d)
            expect[y, x] = d < thr
    np.testing.assert_array_equal(fused.valid, expect)

    # single interior gap: filled with the neighbor average exactly
    v = np.ones((5, 5), bool)
    v[2, 2] = False
    of = OrientationField(np.where(v, math.radians(45.0), 0.0), v)
    out = reconstruct_and_extrapolate(of, 0)
    assert out.valid.all()
    assert out.theta[2, 2] == math.radians(45.0)
    elapsed = time.perf_counter() - t0
    assert elapsed < 1.0
    _report("fusion-contract", elapsed, 1)


def test_local_normalization():
    t0 = time.perf_counter()
    pat = gen_parallel(512, 512, 10.0, math.radians(120.0))
    xs = np.arange(512, dtype=float)
    graded = GrayImage(pat.image.pixels + 40.0 * (xs[None, :] / 512.0 - 0.5))
    out = normalize_local(graded, 127.5, 100.0, 16.0)
    # Independent disk-mean check via FFT convolution.
    from scipy.signal import fftconvolve

    r = 16
    dy, dx = np.mgrid[-r : r + 1, -r : r + 1]
    disk = (dx * dx + dy * dy <= r * r).astype(float)
    sums = fftconvolve(out.pixels, disk, mode="same")
    counts = fftconvolve(np.ones_like(out.pixels), disk, mode="same")
    means = sums / counts
    interior = interior_mask(np.ones((512, 512), bool), 40)
    assert np.abs(means[interior] - 127.5).max() <= 2.0
    elapsed = time.perf_counter() - t0
    assert elapsed < 30.0
    _report("local-normalization", elapsed, 30)


def test_determinism_bit_identical():
    t0 = time.perf_counter()
    pat = gen_parallel(288, 288, 10.0, math.radians(60.0), noise_sigma=30.0, seed=123)
    cfg = PipelineConfig()
    a = enhance(pat.image, cfg)
    b = enhance(pat.image, cfg)
    assert np.array_equal(a.enhanced.pixels, b.enhanced.pixels)
    assert np.array_equal(a.enhanced.mask, b.enhanced.mask)
    assert np.array_equal(a.of.theta, b.of.theta)
    assert np.array_equal(a.of.valid, b.of.valid)
    assert np.array_equal(a.rf.freq, b.rf.freq)
    sel = np.isfinite(a.curvature)
    assert np.array_equal(sel, np.isfinite(b.curvature))
    assert np.array_equal(a.curvature[sel], b.curvature[sel])
    elapsed = time.perf_counter() - t0
    _report("determinism", elapsed, 0)
