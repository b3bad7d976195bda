#!/usr/bin/env python3
"""Time the simulator generation loop on the numba and numpy paths.

The two paths produce bitwise-identical trajectories; this script verifies
that on a workload and reports per-generation cost side by side.  Run with
MARKETECO_NUMBA=0 to confirm the package falls back cleanly.
"""

import math
import time

import numpy as np

from marketeco import kernels


def bench(fn, label: str, gens: int = 4096, s: int = 1500, repeat: int = 3) -> float:
    rng = np.random.default_rng(0)
    noise = rng.standard_normal((gens, s))
    x0 = np.abs(rng.standard_normal(s)) * 1e4 + 1.0
    n_total = float(x0.sum())
    sums = np.empty(gens)
    ext = np.zeros((gens, s), dtype=bool)
    spe = np.zeros((gens, s), dtype=bool)
    work = np.empty(s)
    # warm-up covers jit compilation on the numba path
    xw = x0.copy()
    fn(xw, noise[:2], 3.5, math.sqrt(20.0), 1.0, n_total, sums[:2], ext[:2], spe[:2], work)
    best = math.inf
    for _ in range(repeat):
        x = x0.copy()
        ext[:] = False
        spe[:] = False
        t0 = time.perf_counter()
        fn(x, noise, 3.5, math.sqrt(20.0), 1.0, n_total, sums, ext, spe, work)
        best = min(best, time.perf_counter() - t0)
    print(f"{label:>14}: {best / gens * 1e6:8.2f} us/generation  ({gens} gens x {s} species)")
    return best


def main() -> None:
    print(f"active path: {'numba' if kernels.USING_NUMBA else 'numpy'} "
          f"(set MARKETECO_NUMBA=0 to force the fallback)")
    t_active = bench(kernels.sim_block, "active path")
    t_numpy = bench(kernels.sim_block_numpy, "numpy fallback")
    if kernels.USING_NUMBA:
        print(f"{'speedup':>14}: {t_numpy / t_active:8.2f}x")

    # bitwise agreement spot check
    rng = np.random.default_rng(1)
    s, gens = 200, 500
    noise = rng.standard_normal((gens, s))
    x1 = np.abs(rng.standard_normal(s)) * 1e4 + 1.0
    x2 = x1.copy()
    n_total = float(x1.sum())
    sums = np.empty(gens)
    masks = [np.zeros((gens, s), dtype=bool) for _ in range(4)]
    work = np.empty(s)
    kernels.sim_block(x1, noise, 3.5, math.sqrt(20.0), 1.0, n_total, sums, masks[0], masks[1], work)
    kernels.sim_block_numpy(x2, noise, 3.5, math.sqrt(20.0), 1.0, n_total, sums, masks[2], masks[3], work)
    agree = np.array_equal(x1, x2) and np.array_equal(masks[0], masks[2]) and np.array_equal(masks[1], masks[3])
    print(f"{'bitwise agree':>14}: {agree}")


if __name__ == "__main__":
    main()
