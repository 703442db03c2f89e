"""Scalar profile machinery shared by the public API and the kernel backends.

Everything in here operates on plain numpy arrays and python scalars so it
can be imported without pulling in the rest of the package (the compiled
backend mirrors these semantics in C; parity is enforced by tests).
"""

from __future__ import annotations

import math

import numpy as np

# Rejection codes shared with the kernel backends.
REJECT_NONE = 0
REJECT_PROFILE_INVALID = 1
REJECT_TOO_FEW_EXTREMA = 2
REJECT_PMAXMIN_EXCEEDED = 3
REJECT_OUT_OF_RANGE = 4


def gaussian_kernel1d(size: int, sigma: float) -> np.ndarray:
    """Normalized 1D Gaussian, `size` taps centered on zero."""
    if size < 1 or size % 2 == 0:
        raise ValueError("kernel size must be odd and positive")
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    k = np.arange(size, dtype=np.float64) - (size - 1) / 2.0
    w = np.exp(-0.5 * (k / sigma) ** 2)
    return w / w.sum()


def smooth_once(values: np.ndarray, valid: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    """One truncate-and-renormalize smoothing pass.

    Each valid entry becomes the kernel-weighted average of the valid,
    in-range entries under the window; invalid entries pass through.
    """
    n = values.shape[0]
    half = kernel.shape[0] // 2
    out = values.copy()
    for i in range(n):
        if not valid[i]:
            continue
        acc = 0.0
        norm = 0.0
        for k in range(-half, half + 1):
            j = i + k
            if j < 0 or j >= n or not valid[j]:
                continue
            w = kernel[k + half]
            acc += w * values[j]
            norm += w
        out[i] = acc / norm
    return out


def _scan_segment(values, start, end, minima, maxima):
    # Compress runs of exactly equal values; an interior run strictly above
    # (below) both neighbor runs contributes one extremum at its center
    # index, rounding down.
    if end - start + 1 < 3:
        return
    runs = [[start, start]]
    for i in range(start + 1, end + 1):
        if values[i] == values[i - 1]:
            runs[-1][1] = i
        else:
            runs.append([i, i])
    for r in range(1, len(runs) - 1):
        a, b = runs[r]
        v = values[a]
        prev_v = values[runs[r - 1][1]]
        next_v = values[runs[r + 1][0]]
        if v > prev_v and v > next_v:
            maxima.append((a + b) // 2)
        elif v < prev_v and v < next_v:
            minima.append((a + b) // 2)


def detect_extrema_arrays(values: np.ndarray, valid: np.ndarray) -> tuple[list[int], list[int]]:
    """Local minima and maxima positions; invalid entries split the profile
    into segments scanned independently. Returns (minima, maxima)."""
    n = values.shape[0]
    minima: list[int] = []
    maxima: list[int] = []
    i = 0
    while i < n:
        if not valid[i]:
            i += 1
            continue
        j = i
        while j + 1 < n and valid[j + 1]:
            j += 1
        _scan_segment(values, i, j, minima, maxima)
        i = j + 1
    return minima, maxima


def ied_list(minima: list[int], maxima: list[int]) -> list[int]:
    """Successive gaps within the maxima, then within the minima."""
    out = [maxima[i + 1] - maxima[i] for i in range(len(maxima) - 1)]
    out += [minima[i + 1] - minima[i] for i in range(len(minima) - 1)]
    return out


def estimate_profile(
    values: np.ndarray,
    valid: np.ndarray,
    p_maxmin_threshold: float,
    max_smoothing: int,
    kernel: np.ndarray,
    freq_min: float,
    freq_max: float,
) -> tuple[float, float, int, int]:
    """Frequency estimate from a gray-level profile.

    Returns (freq, p_maxmin, smoothing_iterations_used, reject_code); freq
    and p_maxmin are NaN when not available. Smoothing passes are cumulative
    and capped at `max_smoothing`; the reported rejection is the one from
    the final attempt, with the max/min-ratio check taking precedence over
    the frequency-range check within an attempt.
    """
    if int(np.count_nonzero(valid)) < 3:
        return math.nan, math.nan, 0, REJECT_PROFILE_INVALID
    vals = np.asarray(values, dtype=np.float64).copy()
    reason = REJECT_TOO_FEW_EXTREMA
    last_p = math.nan
    for s in range(max_smoothing + 1):
        if s:
            vals = smooth_once(vals, valid, kernel)
        minima, maxima = detect_extrema_arrays(vals, valid)
        if len(minima) < 2 or len(maxima) < 2:
            reason = REJECT_TOO_FEW_EXTREMA
            continue
        ieds = ied_list(minima, maxima)
        med = _median(ieds)
        pm = max(ieds) / min(ieds)
        last_p = pm
        if pm > p_maxmin_threshold:
            reason = REJECT_PMAXMIN_EXCEEDED
            continue
        freq = 1.0 / med
        if not (freq_min <= freq <= freq_max):
            reason = REJECT_OUT_OF_RANGE
            continue
        return freq, pm, s, REJECT_NONE
    return math.nan, last_p, max_smoothing, reason


def _median(xs: list[int]) -> float:
    ys = sorted(xs)
    n = len(ys)
    if n % 2:
        return float(ys[n // 2])
    return 0.5 * (ys[n // 2 - 1] + ys[n // 2])
