#!/usr/bin/env python3
"""Benchmark the compiled kernels against the numpy fallback.

Runs the four hot kernels on a synthetic concentric pattern and prints
per-kernel wall times plus the speedup. Sizes are kept moderate by default
so the fallback finishes promptly.

    python benchmarks/bench_backends.py --size 192 --repeat 3
"""

import argparse
import math
import time

import numpy as np


def _inputs(size):
    from curvedgabor._profiles import gaussian_kernel1d
    from curvedgabor.synthetic import gen_concentric

    pat = gen_concentric(size, size, 10.0, ((size - 1) / 2.0, (size - 1) / 2.0),
                         20.0, noise_sigma=20.0, seed=1)
    c2, s2 = pat.true_of.doubled()
    valid = pat.true_of.valid.astype(np.uint8)
    stop = math.cos(2 * math.radians(20.0))
    kern = gaussian_kernel1d(7, 1.0)
    return {
        "pixels": pat.image.pixels,
        "mask": pat.image.mask.astype(np.uint8),
        "c2": c2,
        "s2": s2,
        "valid": valid,
        "theta": pat.true_of.theta,
        "freq": pat.true_rf.freq,
        "stop": stop,
        "kern": kern,
    }


def _cases(d, p, q):
    return {
        "curvature_map": lambda k: k.curvature_map(
            d["c2"], d["s2"], d["valid"], d["valid"], q, 1),
        "rf_map": lambda k: k.rf_map(
            d["pixels"], d["mask"], d["c2"], d["s2"], d["valid"], d["valid"],
            p, q, d["stop"], 1, 1, 0.5, 1.5, 3, d["kern"], 1 / 25, 1 / 3),
        "curved_gabor_map": lambda k: k.curved_gabor_map(
            d["pixels"], d["mask"], d["c2"], d["s2"], d["valid"], d["valid"],
            d["freq"], p, q, d["stop"], 1, 1, 4.0, 4.0, 0),
        "straight_gabor_map": lambda k: k.straight_gabor_map(
            d["pixels"], d["mask"], d["theta"], d["valid"], d["freq"],
            p, q, 4.0, 4.0),
    }


def _time(fn, repeat):
    best = math.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--size", type=int, default=192)
    ap.add_argument("--p", type=int, default=8)
    ap.add_argument("--q", type=int, default=16)
    ap.add_argument("--repeat", type=int, default=2)
    ap.add_argument("--skip-python", action="store_true",
                    help="time the compiled backend only")
    args = ap.parse_args()

    import curvedgabor._kernels_py as kpy

    try:
        import curvedgabor._kernels_cy as kcy
    except ImportError:
        kcy = None
        print("compiled backend not built; timing the fallback only")

    d = _inputs(args.size)
    cases = _cases(d, args.p, args.q)
    print(f"size {args.size}x{args.size}, region p={args.p} q={args.q}, "
          f"best of {args.repeat}")
    print(f"{'kernel':<22}{'native [s]':>12}{'python [s]':>12}{'speedup':>10}")
    for name, call in cases.items():
        t_nat = _time(lambda: call(kcy), args.repeat) if kcy else float("nan")
        t_py = float("nan") if args.skip_python else _time(lambda: call(kpy), args.repeat)
        speed = t_py / t_nat if kcy and not args.skip_python else float("nan")
        print(f"{name:<22}{t_nat:>12.3f}{t_py:>12.3f}{speed:>10.1f}")


if __name__ == "__main__":
    main()
