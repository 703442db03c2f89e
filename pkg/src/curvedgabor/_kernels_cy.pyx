# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled implementations of the hot per-pixel kernels.

Mirrors the call surface and arithmetic of `_kernels_py`; see that module
for the semantics. Pixels are processed in parallel (OpenMP) but every
output cell is a pure function of the inputs, so results are bit-identical
regardless of the thread count.
"""

import numpy as np

cimport numpy as cnp
from cython.parallel import prange, threadid
cimport openmp
from libc.math cimport NAN, acos, cos, exp, fabs, floor, sin, sqrt

cnp.import_array()

BACKEND_NAME = "native"

GRAY_NEAREST, GRAY_BILINEAR, GRAY_BICUBIC = 0, 1, 2
OF_NEAREST, OF_BILINEAR = 0, 1

cdef double RESULTANT_EPS = 1e-9
cdef double TWO_PI = 6.283185307179586476925287


cdef struct WalkState:
    double px
    double py
    double c2
    double s2
    double dx
    double dy
    bint alive


cdef inline bint _interp_of(const double* cs, const unsigned char* valid,
                            Py_ssize_t h, Py_ssize_t w,
                            double x, double y, int mode, bint safe,
                            double* oc, double* os) noexcept nogil:
    # cs interleaves (cos 2t, sin 2t) row-major, zero-filled where invalid,
    # so the bilinear path needs no per-tap validity check; `safe`
    # additionally skips the bounds checks for walks that cannot leave the
    # interior.
    cdef double x0 = floor(x)
    cdef double y0 = floor(y)
    cdef double fx = x - x0
    cdef double fy = y - y0
    cdef double cacc = 0.0
    cdef double sacc = 0.0
    cdef double best_d2 = 1e300
    cdef double d2, ex, ey, wx, wy, wgt, mag, inv
    cdef Py_ssize_t xi, yi
    cdef int dx, dy
    cdef bint found = False
    if mode == 0:
        for dy in range(2):
            for dx in range(2):
                xi = <Py_ssize_t>x0 + dx
                yi = <Py_ssize_t>y0 + dy
                if not safe:
                    if xi < 0 or xi >= w or yi < 0 or yi >= h:
                        continue
                if not valid[yi * w + xi]:
                    continue
                ex = x - (x0 + dx)
                ey = y - (y0 + dy)
                d2 = ex * ex + ey * ey
                if d2 < best_d2:
                    best_d2 = d2
                    cacc = cs[(yi * w + xi) * 2]
                    sacc = cs[(yi * w + xi) * 2 + 1]
                    found = True
        if not found:
            return False
        oc[0] = cacc
        os[0] = sacc
        return True
    cdef const double* row
    if safe:
        xi = <Py_ssize_t>x0
        yi = <Py_ssize_t>y0
        wx = 1.0 - fx
        wy = 1.0 - fy
        row = cs + (yi * w + xi) * 2
        cacc = (wx * wy) * row[0] + (fx * wy) * row[2]
        sacc = (wx * wy) * row[1] + (fx * wy) * row[3]
        row = row + 2 * w
        cacc = cacc + (wx * fy) * row[0] + (fx * fy) * row[2]
        sacc = sacc + (wx * fy) * row[1] + (fx * fy) * row[3]
    else:
        for dy in range(2):
            wy = fy if dy else 1.0 - fy
            for dx in range(2):
                wx = fx if dx else 1.0 - fx
                wgt = wx * wy
                if wgt == 0.0:
                    continue
                xi = <Py_ssize_t>x0 + dx
                yi = <Py_ssize_t>y0 + dy
                if xi < 0 or xi >= w or yi < 0 or yi >= h:
                    continue
                cacc += wgt * cs[(yi * w + xi) * 2]
                sacc += wgt * cs[(yi * w + xi) * 2 + 1]
    mag = sqrt(cacc * cacc + sacc * sacc)
    if mag < RESULTANT_EPS:
        return False
    inv = 1.0 / mag
    oc[0] = cacc * inv
    os[0] = sacc * inv
    return True


cdef inline void _cr_weights(double t, double* w) noexcept nogil:
    cdef double t2 = t * t
    cdef double t3 = t2 * t
    w[0] = 0.5 * (-t3 + 2.0 * t2 - t)
    w[1] = 0.5 * (3.0 * t3 - 5.0 * t2 + 2.0)
    w[2] = 0.5 * (-3.0 * t3 + 4.0 * t2 + t)
    w[3] = 0.5 * (t3 - t2)


cdef inline bint _interp_gray(const double* px, const unsigned char* mask,
                              Py_ssize_t h, Py_ssize_t w,
                              double x, double y, int mode, bint safe,
                              double* out) noexcept nogil:
    # `safe` skips the bounds checks only; masked pixels still make the
    # sample absent.
    cdef double x0, y0, fx, fy, acc, wx, wy
    cdef double wxs[4]
    cdef double wys[4]
    cdef Py_ssize_t xi, yi
    cdef int i, j, dx, dy
    if mode == 0:
        xi = <Py_ssize_t>floor(x + 0.5)
        yi = <Py_ssize_t>floor(y + 0.5)
        if not safe:
            if xi < 0 or xi >= w or yi < 0 or yi >= h:
                return False
        if not mask[yi * w + xi]:
            return False
        out[0] = px[yi * w + xi]
        return True
    x0 = floor(x)
    y0 = floor(y)
    fx = x - x0
    fy = y - y0
    acc = 0.0
    if mode == 1:
        for dy in range(2):
            wy = fy if dy else 1.0 - fy
            if wy == 0.0:
                continue
            for dx in range(2):
                wx = fx if dx else 1.0 - fx
                if wx == 0.0:
                    continue
                xi = <Py_ssize_t>x0 + dx
                yi = <Py_ssize_t>y0 + dy
                if not safe:
                    if xi < 0 or xi >= w or yi < 0 or yi >= h:
                        return False
                if not mask[yi * w + xi]:
                    return False
                acc += (wx * wy) * px[yi * w + xi]
        out[0] = acc
        return True
    _cr_weights(fx, wxs)
    _cr_weights(fy, wys)
    for j in range(4):
        if wys[j] == 0.0:
            continue
        yi = <Py_ssize_t>y0 + j - 1
        for i in range(4):
            if wxs[i] == 0.0:
                continue
            xi = <Py_ssize_t>x0 + i - 1
            if not safe:
                if xi < 0 or xi >= w or yi < 0 or yi >= h:
                    return False
            if not mask[yi * w + xi]:
                return False
            acc += (wxs[i] * wys[j]) * px[yi * w + xi]
    out[0] = acc
    return True


cdef inline void _dir_from_doubled(double c2, double s2, double* ct, double* st) noexcept nogil:
    cdef double a = (1.0 - c2) * 0.5
    cdef double b = (1.0 + c2) * 0.5
    if a < 0.0:
        a = 0.0
    if b < 0.0:
        b = 0.0
    st[0] = sqrt(a)
    ct[0] = -sqrt(b) if s2 < 0.0 else sqrt(b)


cdef inline bint _step(const double* cs, const unsigned char* valid,
                       Py_ssize_t h, Py_ssize_t w, WalkState* wk,
                       bint orth, double stop_dot, bint use_stop,
                       int of_mode, bint safe) noexcept nogil:
    """Advance one walker by a unit step; returns 1 when the new point is
    present. An orientation jump past the stop threshold keeps the point
    but halts the walker; a lost orientation halts it without a point."""
    cdef double ct, st, bx, by, nx, ny, nc2, ns2
    cdef bint stop_now
    if not wk.alive:
        return False
    _dir_from_doubled(wk.c2, wk.s2, &ct, &st)
    if orth:
        bx = -st
        by = ct
    else:
        bx = ct
        by = st
    if bx * wk.dx + by * wk.dy < 0.0:
        bx = -bx
        by = -by
    nx = wk.px + bx
    ny = wk.py + by
    if not _interp_of(cs, valid, h, w, nx, ny, of_mode, safe, &nc2, &ns2):
        wk.alive = False
        return False
    stop_now = use_stop and (nc2 * wk.c2 + ns2 * wk.s2 < stop_dot)
    wk.px = nx
    wk.py = ny
    wk.dx = bx
    wk.dy = by
    wk.c2 = nc2
    wk.s2 = ns2
    if stop_now:
        wk.alive = False
    return True


cdef inline bint _is_safe(Py_ssize_t x, Py_ssize_t y, Py_ssize_t h, Py_ssize_t w,
                          int reach) noexcept nogil:
    # Walks from (x, y) stay within `reach` - margin covers interpolation
    # neighborhoods of every supported method.
    cdef Py_ssize_t m = reach + 4
    return x >= m and y >= m and x < w - m and y < h - m


cdef int _walk_region(const double* cs, const unsigned char* valid,
                      Py_ssize_t h, Py_ssize_t w,
                      double cx, double cy, int p, int q,
                      double stop_dot, int of_mode, bint safe,
                      double* pts_x, double* pts_y, unsigned char* present,
                      double* mid_c2, double* mid_s2) noexcept nogil:
    """Fill row-major (2p+1) x (2q+1) region buffers; returns -1 when the
    orientation is undefined at the center."""
    cdef int nr = 2 * p + 1
    cdef int nc = 2 * q + 1
    cdef Py_ssize_t i, base
    cdef double c0, s0, ct, st
    cdef WalkState wk
    cdef int side, k, r, c
    for i in range(<Py_ssize_t>nr * nc):
        pts_x[i] = NAN
        pts_y[i] = NAN
        present[i] = 0
    if not _interp_of(cs, valid, h, w, cx, cy, of_mode, safe, &c0, &s0):
        return -1
    base = <Py_ssize_t>p * nc + q
    pts_x[base] = cx
    pts_y[base] = cy
    present[base] = 1
    mid_c2[p] = c0
    mid_s2[p] = s0
    _dir_from_doubled(c0, s0, &ct, &st)
    for side in range(-1, 2, 2):
        wk.px = cx
        wk.py = cy
        wk.c2 = c0
        wk.s2 = s0
        wk.dx = side * -st
        wk.dy = side * ct
        wk.alive = True
        for k in range(1, p + 1):
            if not _step(cs, valid, h, w, &wk, True, stop_dot, True, of_mode, safe):
                break
            r = p + side * k
            base = <Py_ssize_t>r * nc + q
            pts_x[base] = wk.px
            pts_y[base] = wk.py
            present[base] = 1
            mid_c2[r] = wk.c2
            mid_s2[r] = wk.s2
    for r in range(nr):
        base = <Py_ssize_t>r * nc + q
        if not present[base]:
            continue
        _dir_from_doubled(mid_c2[r], mid_s2[r], &ct, &st)
        for side in range(-1, 2, 2):
            wk.px = pts_x[base]
            wk.py = pts_y[base]
            wk.c2 = mid_c2[r]
            wk.s2 = mid_s2[r]
            wk.dx = side * ct
            wk.dy = side * st
            wk.alive = True
            for k in range(1, q + 1):
                if not _step(cs, valid, h, w, &wk, False, 0.0, False, of_mode, safe):
                    break
                c = q + side * k
                pts_x[<Py_ssize_t>r * nc + c] = wk.px
                pts_y[<Py_ssize_t>r * nc + c] = wk.py
                present[<Py_ssize_t>r * nc + c] = 1
    return 0


def _interleave(cos2, sin2):
    cs = np.empty(cos2.shape + (2,), dtype=np.float64)
    cs[:, :, 0] = cos2
    cs[:, :, 1] = sin2
    return cs


def region_walk(double[:, ::1] cos2, double[:, ::1] sin2,
                unsigned char[:, ::1] valid, double cx, double cy,
                int p, int q, double stop_dot, int of_mode):
    """Trace one (2p+1) x (2q+1) curved-region grid; absent points are NaN."""
    cdef int nr = 2 * p + 1
    cdef int nc = 2 * q + 1
    pts_x = np.empty((nr, nc), dtype=np.float64)
    pts_y = np.empty((nr, nc), dtype=np.float64)
    present = np.zeros((nr, nc), dtype=np.uint8)
    mid_c2 = np.zeros(nr, dtype=np.float64)
    mid_s2 = np.zeros(nr, dtype=np.float64)
    cdef double[:, :, ::1] cs = _interleave(np.asarray(cos2), np.asarray(sin2))
    cdef double[:, ::1] mx = pts_x
    cdef double[:, ::1] my = pts_y
    cdef unsigned char[:, ::1] mp = present
    cdef double[::1] mc = mid_c2
    cdef double[::1] ms = mid_s2
    cdef int rc = _walk_region(&cs[0, 0, 0], &valid[0, 0],
                               valid.shape[0], valid.shape[1],
                               cx, cy, p, q, stop_dot,
                               of_mode, False, &mx[0, 0], &my[0, 0], &mp[0, 0],
                               &mc[0], &ms[0])
    if rc < 0:
        raise ValueError("orientation field is undefined at the region center")
    return pts_x, pts_y, present


cdef double _curvature_pixel(const double* cs, const unsigned char* valid,
                             Py_ssize_t h, Py_ssize_t w,
                             double x, double y, int q, int of_mode,
                             bint safe) noexcept nogil:
    cdef double c0, s0, ct, st, lc2, ls2, dot, curv
    cdef WalkState wk
    cdef int side, k
    if not _interp_of(cs, valid, h, w, x, y, of_mode, safe, &c0, &s0):
        return NAN
    curv = 0.0
    _dir_from_doubled(c0, s0, &ct, &st)
    for side in range(-1, 2, 2):
        wk.px = x
        wk.py = y
        wk.c2 = c0
        wk.s2 = s0
        wk.dx = side * ct
        wk.dy = side * st
        wk.alive = True
        lc2 = c0
        ls2 = s0
        for k in range(q):
            if not _step(cs, valid, h, w, &wk, False, 0.0, False, of_mode, safe):
                break
            lc2 = wk.c2
            ls2 = wk.s2
        dot = lc2 * c0 + ls2 * s0
        if dot > 1.0:
            dot = 1.0
        elif dot < -1.0:
            dot = -1.0
        curv += 0.5 * acos(dot)
    return curv


def curvature_map(double[:, ::1] cos2, double[:, ::1] sin2,
                  unsigned char[:, ::1] valid, unsigned char[:, ::1] process,
                  int q, int of_mode):
    """Summed orientation change between the center and the two reachable
    ends of the central curve; NaN where not processed."""
    cdef Py_ssize_t h = valid.shape[0]
    cdef Py_ssize_t w = valid.shape[1]
    out_arr = np.full((h, w), np.nan)
    cdef double[:, ::1] out = out_arr
    cdef double[:, :, ::1] cs = _interleave(np.asarray(cos2), np.asarray(sin2))
    cdef const double* csp = &cs[0, 0, 0]
    cdef const unsigned char* vp = &valid[0, 0]
    cdef Py_ssize_t x, y
    for y in prange(h, nogil=True, schedule="static"):
        for x in range(w):
            if not process[y, x]:
                continue
            out[y, x] = _curvature_pixel(csp, vp, h, w, <double>x, <double>y, q,
                                         of_mode, _is_safe(x, y, h, w, q))
    return out_arr


cdef void _smooth_once_c(const double* vals, const unsigned char* pv, int n,
                         const double[::1] kernel, double* out) noexcept nogil:
    cdef int half = <int>kernel.shape[0] // 2
    cdef int i, k, j
    cdef double acc, norm, wgt
    for i in range(n):
        if not pv[i]:
            out[i] = vals[i]
            continue
        acc = 0.0
        norm = 0.0
        for k in range(-half, half + 1):
            j = i + k
            if j < 0 or j >= n or not pv[j]:
                continue
            wgt = kernel[k + half]
            acc += wgt * vals[j]
            norm += wgt
        out[i] = acc / norm


cdef void _scan_segment_c(const double* vals, int s, int e,
                          int* minima, int* maxima,
                          int* nmin, int* nmax) noexcept nogil:
    cdef int run_start, run_end, i
    cdef double prev_v = 0.0
    cdef double v
    cdef bint has_prev = False
    if e - s + 1 < 3:
        return
    run_start = s
    run_end = s
    for i in range(s + 1, e + 1):
        if vals[i] == vals[run_start]:
            run_end = i
            continue
        if has_prev:
            v = vals[run_start]
            if v > prev_v and v > vals[i]:
                maxima[nmax[0]] = (run_start + run_end) // 2
                nmax[0] += 1
            elif v < prev_v and v < vals[i]:
                minima[nmin[0]] = (run_start + run_end) // 2
                nmin[0] += 1
        prev_v = vals[run_start]
        has_prev = True
        run_start = i
        run_end = i


cdef void _detect_c(const double* vals, const unsigned char* pv, int n,
                    int* minima, int* maxima, int* nmin, int* nmax) noexcept nogil:
    cdef int i = 0
    cdef int j
    nmin[0] = 0
    nmax[0] = 0
    while i < n:
        if not pv[i]:
            i += 1
            continue
        j = i
        while j + 1 < n and pv[j + 1]:
            j += 1
        _scan_segment_c(vals, i, j, minima, maxima, nmin, nmax)
        i = j + 1


cdef double _median_int(int* xs, int n) noexcept nogil:
    cdef int i, j, key
    for i in range(1, n):
        key = xs[i]
        j = i - 1
        while j >= 0 and xs[j] > key:
            xs[j + 1] = xs[j]
            j -= 1
        xs[j + 1] = key
    if n % 2:
        return <double>xs[n // 2]
    return 0.5 * (xs[n // 2 - 1] + xs[n // 2])


cdef int _estimate_c(double* vals, const unsigned char* pv, int n,
                     double thr, int max_smooth, const double[::1] kernel,
                     double fmin, double fmax, double* work, int* ibuf,
                     double* out_freq, signed char* out_iters) noexcept nogil:
    """Profile frequency estimate; returns the rejection code (0 accepted)."""
    cdef int nvalid = 0
    cdef int i, s, nmin, nmax, nied, lo, hi
    cdef int reason = 2
    cdef double med, pm, f
    cdef double* cur = vals
    cdef double* alt = work
    cdef double* tmp
    cdef int* minima = ibuf
    cdef int* maxima
    cdef int* ieds
    maxima = ibuf + n
    ieds = ibuf + 2 * n
    for i in range(n):
        if pv[i]:
            nvalid += 1
    if nvalid < 3:
        out_iters[0] = 0
        return 1
    for s in range(max_smooth + 1):
        if s:
            _smooth_once_c(cur, pv, n, kernel, alt)
            tmp = cur
            cur = alt
            alt = tmp
        _detect_c(cur, pv, n, minima, maxima, &nmin, &nmax)
        if nmin < 2 or nmax < 2:
            reason = 2
            continue
        nied = 0
        for i in range(nmax - 1):
            ieds[nied] = maxima[i + 1] - maxima[i]
            nied += 1
        for i in range(nmin - 1):
            ieds[nied] = minima[i + 1] - minima[i]
            nied += 1
        lo = ieds[0]
        hi = ieds[0]
        for i in range(1, nied):
            if ieds[i] < lo:
                lo = ieds[i]
            if ieds[i] > hi:
                hi = ieds[i]
        pm = (<double>hi) / (<double>lo)
        if pm > thr:
            reason = 3
            continue
        med = _median_int(ieds, nied)
        f = 1.0 / med
        if not (fmin <= f <= fmax):
            reason = 4
            continue
        out_freq[0] = f
        out_iters[0] = <signed char>s
        return 0
    out_iters[0] = <signed char>max_smooth
    return reason


cdef int _rf_pixel(const double* pixels, const unsigned char* gray_mask,
                   const double* cs, const unsigned char* of_valid,
                   Py_ssize_t h, Py_ssize_t w,
                   Py_ssize_t x, Py_ssize_t y, int p, int q, double stop_dot,
                   int gray_mode, int of_mode, bint safe, double min_count,
                   double thr, int max_smooth, const double[::1] kernel,
                   double fmin, double fmax,
                   double* bx, double* by, unsigned char* bp,
                   double* bmc, double* bms, double* prof,
                   unsigned char* pok, double* work, int* ibuf,
                   double* out_freq, signed char* out_iters) noexcept nogil:
    cdef int nr = 2 * p + 1
    cdef int nc = 2 * q + 1
    cdef int r, c, cnt
    cdef Py_ssize_t base
    cdef double acc, g
    if _walk_region(cs, of_valid, h, w, <double>x, <double>y, p, q,
                    stop_dot, of_mode, safe, bx, by, bp, bmc, bms) < 0:
        out_iters[0] = -1
        return 1
    for r in range(nr):
        acc = 0.0
        cnt = 0
        base = <Py_ssize_t>r * nc
        for c in range(nc):
            if not bp[base + c]:
                continue
            if not _interp_gray(pixels, gray_mask, h, w, bx[base + c], by[base + c],
                                gray_mode, safe, &g):
                continue
            acc += g
            cnt += 1
        prof[r] = acc / cnt if cnt else 0.0
        pok[r] = cnt >= min_count
    out_iters[0] = -1
    return _estimate_c(prof, pok, nr, thr, max_smooth, kernel, fmin, fmax,
                       work, ibuf, out_freq, out_iters)


def rf_map(double[:, ::1] pixels, unsigned char[:, ::1] gray_mask,
           double[:, ::1] cos2, double[:, ::1] sin2,
           unsigned char[:, ::1] of_valid, unsigned char[:, ::1] process,
           int p, int q, double stop_dot, int gray_mode, int of_mode,
           double min_valid_fraction, double p_maxmin_threshold,
           int max_smoothing, double[::1] smooth_kernel,
           double fmin, double fmax):
    """Per-pixel curved-region ridge frequency estimation.

    Returns (freq, reject, iters); freq is NaN where rejected.
    """
    cdef Py_ssize_t h = pixels.shape[0]
    cdef Py_ssize_t w = pixels.shape[1]
    cdef int nr = 2 * p + 1
    cdef int nc = 2 * q + 1
    freq_arr = np.full((h, w), np.nan)
    reject_arr = np.zeros((h, w), dtype=np.uint8)
    iters_arr = np.full((h, w), -1, dtype=np.int8)
    cdef double[:, ::1] freq = freq_arr
    cdef unsigned char[:, ::1] reject = reject_arr
    cdef signed char[:, ::1] iters = iters_arr
    cdef int nt = openmp.omp_get_max_threads()
    bx_all = np.empty((nt, nr * nc), dtype=np.float64)
    by_all = np.empty((nt, nr * nc), dtype=np.float64)
    bp_all = np.empty((nt, nr * nc), dtype=np.uint8)
    bmc_all = np.zeros((nt, nr), dtype=np.float64)
    bms_all = np.zeros((nt, nr), dtype=np.float64)
    prof_all = np.zeros((nt, nr), dtype=np.float64)
    pok_all = np.zeros((nt, nr), dtype=np.uint8)
    work_all = np.zeros((nt, nr), dtype=np.float64)
    ibuf_all = np.zeros((nt, 3 * nr), dtype=np.intc)
    cdef double[:, ::1] bx = bx_all
    cdef double[:, ::1] by = by_all
    cdef unsigned char[:, ::1] bp = bp_all
    cdef double[:, ::1] bmc = bmc_all
    cdef double[:, ::1] bms = bms_all
    cdef double[:, ::1] prof = prof_all
    cdef unsigned char[:, ::1] pok = pok_all
    cdef double[:, ::1] work = work_all
    cdef int[:, ::1] ibuf = ibuf_all
    cdef double[:, :, ::1] cs = _interleave(np.asarray(cos2), np.asarray(sin2))
    cdef const double* csp = &cs[0, 0, 0]
    cdef const unsigned char* vp = &of_valid[0, 0]
    cdef const double* pxp = &pixels[0, 0]
    cdef const unsigned char* gmp = &gray_mask[0, 0]
    cdef double min_count = min_valid_fraction * nc
    cdef int reach = p + q
    cdef Py_ssize_t x, y
    cdef int code, tid
    cdef double fout
    cdef signed char itout
    for y in prange(h, nogil=True, schedule="static"):
        tid = threadid()
        for x in range(w):
            if not process[y, x]:
                continue
            fout = NAN
            itout = -1
            code = _rf_pixel(pxp, gmp, csp, vp, h, w, x, y,
                             p, q, stop_dot, gray_mode, of_mode,
                             _is_safe(x, y, h, w, reach), min_count,
                             p_maxmin_threshold, max_smoothing, smooth_kernel,
                             fmin, fmax, &bx[tid, 0], &by[tid, 0], &bp[tid, 0],
                             &bmc[tid, 0], &bms[tid, 0], &prof[tid, 0],
                             &pok[tid, 0], &work[tid, 0], &ibuf[tid, 0],
                             &fout, &itout)
            reject[y, x] = <unsigned char>code
            iters[y, x] = itout
            if code == 0:
                freq[y, x] = fout
    return freq_arr, reject_arr, iters_arr


cdef void _cgabor_pixel(const double* pixels, const unsigned char* gray_mask,
                        const double* cs, const unsigned char* of_valid,
                        Py_ssize_t h, Py_ssize_t w,
                        Py_ssize_t x, Py_ssize_t y, double f,
                        int p, int q, double stop_dot, int gray_mode, int of_mode,
                        bint safe, const double* gk, const double* gl,
                        const unsigned char* inside, double win_size,
                        double* bx, double* by, unsigned char* bp,
                        double* bmc, double* bms, double* cosrow,
                        double* out, double* presence, unsigned char* unfiltered) noexcept nogil:
    cdef int nr = 2 * p + 1
    cdef int nc = 2 * q + 1
    cdef int r, c, used
    cdef Py_ssize_t base
    cdef double acc, norm, g, wgt
    cdef bint center_ok, good
    if _walk_region(cs, of_valid, h, w, <double>x, <double>y, p, q,
                    stop_dot, of_mode, safe, bx, by, bp, bmc, bms) < 0:
        out[0] = pixels[y * w + x]
        presence[0] = 0.0
        unfiltered[0] = 1
        return
    for r in range(nr):
        cosrow[r] = cos(TWO_PI * f * (r - p))
    acc = 0.0
    norm = 0.0
    used = 0
    center_ok = False
    for r in range(nr):
        base = <Py_ssize_t>r * nc
        for c in range(nc):
            if not bp[base + c] or not inside[base + c]:
                continue
            if not _interp_gray(pixels, gray_mask, h, w, bx[base + c], by[base + c],
                                gray_mode, safe, &g):
                continue
            wgt = gk[r] * gl[c] * cosrow[r]
            acc += g * wgt
            norm += fabs(wgt)
            used += 1
            if r == p and c == q:
                center_ok = True
    good = center_ok and norm > 0.0
    out[0] = acc / norm if good else pixels[y * w + x]
    presence[0] = used / win_size
    unfiltered[0] = not good


def curved_gabor_map(double[:, ::1] pixels, unsigned char[:, ::1] gray_mask,
                     double[:, ::1] cos2, double[:, ::1] sin2,
                     unsigned char[:, ::1] of_valid, unsigned char[:, ::1] process,
                     double[:, ::1] freq, int p, int q, double stop_dot,
                     int gray_mode, int of_mode, double sigma_x, double sigma_y,
                     int ellipse):
    """Flow-following Gabor response per processed pixel.

    Returns (out, presence, unfiltered); see the fallback module for the
    normalization and axis conventions.
    """
    cdef Py_ssize_t h = pixels.shape[0]
    cdef Py_ssize_t w = pixels.shape[1]
    cdef int nr = 2 * p + 1
    cdef int nc = 2 * q + 1
    out_arr = np.full((h, w), np.nan)
    presence_arr = np.zeros((h, w))
    unfiltered_arr = np.zeros((h, w), dtype=np.uint8)
    cdef double[:, ::1] out = out_arr
    cdef double[:, ::1] presence = presence_arr
    cdef unsigned char[:, ::1] unf = unfiltered_arr
    gk_arr = np.empty(nr, dtype=np.float64)
    gl_arr = np.empty(nc, dtype=np.float64)
    ins_arr = np.ones((nr, nc), dtype=np.uint8)
    cdef double[::1] gk = gk_arr
    cdef double[::1] gl = gl_arr
    cdef unsigned char[:, ::1] inside = ins_arr
    cdef int r, c
    cdef double kr, lr, win_size
    for r in range(nr):
        kr = r - p
        gk[r] = exp(-0.5 * (kr / sigma_x) * (kr / sigma_x))
    for c in range(nc):
        lr = c - q
        gl[c] = exp(-0.5 * (lr / sigma_y) * (lr / sigma_y))
    if ellipse:
        for r in range(nr):
            for c in range(nc):
                kr = (r - p) / (p + 0.5)
                lr = (c - q) / (q + 0.5)
                inside[r, c] = lr * lr + kr * kr <= 1.0
    win_size = 0.0
    for r in range(nr):
        for c in range(nc):
            if inside[r, c]:
                win_size += 1.0
    cdef int nt = openmp.omp_get_max_threads()
    bx_all = np.empty((nt, nr * nc), dtype=np.float64)
    by_all = np.empty((nt, nr * nc), dtype=np.float64)
    bp_all = np.empty((nt, nr * nc), dtype=np.uint8)
    bmc_all = np.zeros((nt, nr), dtype=np.float64)
    bms_all = np.zeros((nt, nr), dtype=np.float64)
    cr_all = np.zeros((nt, nr), dtype=np.float64)
    cdef double[:, ::1] bx = bx_all
    cdef double[:, ::1] by = by_all
    cdef unsigned char[:, ::1] bp = bp_all
    cdef double[:, ::1] bmc = bmc_all
    cdef double[:, ::1] bms = bms_all
    cdef double[:, ::1] crow = cr_all
    cdef double[:, :, ::1] cs = _interleave(np.asarray(cos2), np.asarray(sin2))
    cdef const double* csp = &cs[0, 0, 0]
    cdef const unsigned char* vp = &of_valid[0, 0]
    cdef const double* pxp = &pixels[0, 0]
    cdef const unsigned char* gmp = &gray_mask[0, 0]
    cdef const double* gkp = &gk[0]
    cdef const double* glp = &gl[0]
    cdef const unsigned char* insp = &inside[0, 0]
    cdef int reach = p + q
    cdef Py_ssize_t x, y
    cdef int tid
    cdef double oval, pval
    cdef unsigned char uval
    for y in prange(h, nogil=True, schedule="static"):
        tid = threadid()
        for x in range(w):
            if not process[y, x]:
                continue
            oval = NAN
            pval = 0.0
            uval = 0
            _cgabor_pixel(pxp, gmp, csp, vp, h, w, x, y,
                          freq[y, x], p, q, stop_dot, gray_mode, of_mode,
                          _is_safe(x, y, h, w, reach), gkp, glp, insp, win_size,
                          &bx[tid, 0], &by[tid, 0], &bp[tid, 0],
                          &bmc[tid, 0], &bms[tid, 0], &crow[tid, 0],
                          &oval, &pval, &uval)
            out[y, x] = oval
            presence[y, x] = pval
            unf[y, x] = uval
    return out_arr, presence_arr, unfiltered_arr


cdef void _sgabor_pixel(const double[:, ::1] pixels, const unsigned char[:, ::1] gray_mask,
                        Py_ssize_t x, Py_ssize_t y, double th, double f,
                        int half_y, int half_x, double sx2, double sy2,
                        bint isotropic, const double[::1] gxt, const double[::1] gyt,
                        double* ca, double* sa, double* cb, double* sb,
                        double* out, double* presence) noexcept nogil:
    cdef Py_ssize_t h = pixels.shape[0]
    cdef Py_ssize_t w = pixels.shape[1]
    cdef double st = sin(th)
    cdef double ct = cos(th)
    cdef double acc = 0.0
    cdef double norm = 0.0
    cdef int used = 0
    cdef int dx, dy
    cdef Py_ssize_t xx, yy
    cdef double a, b, wgt, xr, yr
    if isotropic:
        # cos(a*dx + b*dy) from per-axis tables; the envelope is
        # rotation-invariant so it separates in image coordinates.
        a = -TWO_PI * f * st
        b = TWO_PI * f * ct
        for dx in range(-half_x, half_x + 1):
            ca[dx + half_x] = cos(a * dx)
            sa[dx + half_x] = sin(a * dx)
        for dy in range(-half_y, half_y + 1):
            cb[dy + half_y] = cos(b * dy)
            sb[dy + half_y] = sin(b * dy)
        for dy in range(-half_y, half_y + 1):
            yy = y + dy
            if yy < 0 or yy >= h:
                continue
            for dx in range(-half_x, half_x + 1):
                xx = x + dx
                if xx < 0 or xx >= w or not gray_mask[yy, xx]:
                    continue
                wgt = gxt[dx + half_x] * gyt[dy + half_y] * (
                    ca[dx + half_x] * cb[dy + half_y]
                    - sa[dx + half_x] * sb[dy + half_y])
                acc += pixels[yy, xx] * wgt
                norm += fabs(wgt)
                used += 1
    else:
        for dy in range(-half_y, half_y + 1):
            yy = y + dy
            if yy < 0 or yy >= h:
                continue
            for dx in range(-half_x, half_x + 1):
                xx = x + dx
                if xx < 0 or xx >= w or not gray_mask[yy, xx]:
                    continue
                xr = -dx * st + dy * ct
                yr = -dx * ct - dy * st
                wgt = exp(-0.5 * (xr * xr / sx2 + yr * yr / sy2)) * cos(TWO_PI * f * xr)
                acc += pixels[yy, xx] * wgt
                norm += fabs(wgt)
                used += 1
    if norm > 0.0:
        out[0] = acc / norm
    else:
        out[0] = pixels[y, x]
    presence[0] = used / (<double>(2 * half_y + 1) * (2 * half_x + 1))


def straight_gabor_map(double[:, ::1] pixels, unsigned char[:, ::1] gray_mask,
                       double[:, ::1] theta, unsigned char[:, ::1] process,
                       double[:, ::1] freq, int half_y, int half_x,
                       double sigma_x, double sigma_y):
    """Classic per-pixel rotated Gabor over a straight axis-aligned window;
    kernel x-axis orthogonal to the local flow. Returns (out, presence)."""
    cdef Py_ssize_t h = pixels.shape[0]
    cdef Py_ssize_t w = pixels.shape[1]
    out_arr = np.full((h, w), np.nan)
    presence_arr = np.zeros((h, w))
    cdef double[:, ::1] out = out_arr
    cdef double[:, ::1] presence = presence_arr
    cdef int wy = 2 * half_y + 1
    cdef int wx = 2 * half_x + 1
    cdef bint isotropic = sigma_x == sigma_y
    gx_arr = np.zeros(wx, dtype=np.float64)
    gy_arr = np.zeros(wy, dtype=np.float64)
    cdef double[::1] gxt = gx_arr
    cdef double[::1] gyt = gy_arr
    cdef int dx, dy
    cdef double sg2 = sigma_x * sigma_x
    if isotropic:
        for dx in range(-half_x, half_x + 1):
            gxt[dx + half_x] = exp(-0.5 * dx * dx / sg2)
        for dy in range(-half_y, half_y + 1):
            gyt[dy + half_y] = exp(-0.5 * dy * dy / sg2)
    cdef int nt = openmp.omp_get_max_threads()
    ca_all = np.zeros((nt, wx), dtype=np.float64)
    sa_all = np.zeros((nt, wx), dtype=np.float64)
    cb_all = np.zeros((nt, wy), dtype=np.float64)
    sb_all = np.zeros((nt, wy), dtype=np.float64)
    cdef double[:, ::1] ca = ca_all
    cdef double[:, ::1] sa = sa_all
    cdef double[:, ::1] cb = cb_all
    cdef double[:, ::1] sb = sb_all
    cdef double sx2 = sigma_x * sigma_x
    cdef double sy2 = sigma_y * sigma_y
    cdef Py_ssize_t x, y
    cdef int tid
    cdef double oval, pval
    for y in prange(h, nogil=True, schedule="static"):
        tid = threadid()
        for x in range(w):
            if not process[y, x]:
                continue
            oval = NAN
            pval = 0.0
            _sgabor_pixel(pixels, gray_mask, x, y, theta[y, x], freq[y, x],
                          half_y, half_x, sx2, sy2, isotropic, gxt, gyt,
                          &ca[tid, 0], &sa[tid, 0], &cb[tid, 0], &sb[tid, 0],
                          &oval, &pval)
            out[y, x] = oval
            presence[y, x] = pval
    return out_arr, presence_arr
