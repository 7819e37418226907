"""Benchmark the numba kernels against the pure-numpy fallback.

Runs every hot kernel on representative shapes and prints per-call times
for both builds plus the speedup. The first numba call compiles (cached
afterwards), so each kernel is warmed before timing.

Usage: python benchmarks/bench_kernels.py [--repeats N]
"""

import argparse
import time

import numpy as np

from pyrflow.kernels import numba_impl, numpy_impl


def make_cases(rng):
    img = rng.standard_normal((64, 96, 128)).astype(np.float32)  # unused filler
    cases = []

    x = rng.standard_normal((32, 64, 96)).astype(np.float32)
    ker = rng.standard_normal((48, 32, 3, 3)).astype(np.float32)
    bias = rng.standard_normal(48).astype(np.float32)
    cases.append(("conv2d 32->48 3x3 @64x96", "conv2d", (x, ker, bias, 1, 1)))

    xs = rng.uniform(-1, 96, 20000)
    ys = rng.uniform(-1, 64, 20000)
    fmap = rng.standard_normal((16, 64, 96)).astype(np.float32)
    cases.append(("bilinear_sample 20k pts x16ch", "bilinear_sample", (fmap, xs, ys)))

    vol = rng.standard_normal((384, 48, 64)).astype(np.float32)
    cases.append(("avg_pool2 384x48x64", "avg_pool2", (vol,)))

    level = rng.standard_normal((768, 32, 48)).astype(np.float32)
    cx = rng.uniform(0, 48, (16, 48))
    cy = rng.uniform(0, 32, (16, 48))
    cases.append(("lookup_level r=4 @16x48", "lookup_level", (level, cx, cy, 4)))

    flow = rng.standard_normal((2, 32, 48)).astype(np.float32)
    logits = rng.standard_normal((144, 32, 48)).astype(np.float32)
    cases.append(("convex_upsample 4x @32x48", "convex_upsample", (flow, logits, 4)))
    return cases


def bench(fn, args, repeats):
    fn(*args)  # warmup (numba compile / numpy cache)
    best = np.inf
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--repeats", type=int, default=5)
    args = parser.parse_args()

    rng = np.random.default_rng(0)
    print(f"{'kernel':<34} {'numba':>10} {'numpy':>10} {'speedup':>8}")
    for label, name, call_args in make_cases(rng):
        t_nb = bench(getattr(numba_impl, name), call_args, args.repeats)
        t_np = bench(getattr(numpy_impl, name), call_args, args.repeats)
        a = getattr(numba_impl, name)(*call_args)
        b = getattr(numpy_impl, name)(*call_args)
        worst = float(np.abs(a.astype(np.float64) - b.astype(np.float64)).max())
        print(
            f"{label:<34} {t_nb * 1e3:>8.2f}ms {t_np * 1e3:>8.2f}ms "
            f"{t_np / t_nb:>7.1f}x   (max diff {worst:.2e})"
        )


if __name__ == "__main__":
    main()
