"""Hot inner loops of the neutral-community simulator.

The generation loop dominates simulation runtime, so it is compiled with
numba when available.  A pure-numpy fallback implements the identical
arithmetic; set ``MARKETECO_NUMBA=0`` to force it.  Both paths produce
bitwise-identical trajectories (no FMA contraction, same operation order
per species, and a shared quantized total), which `benchmarks/bench_kernels.py`
and the kernel tests rely on.

Renormalizing the community each generation requires the total of all growth
contributions.  A plain running sum is not invariant under permutations of
the species axis (float addition does not associate), which would break the
label-exchange symmetry of the dynamics at the bitwise level.  Instead each
contribution is rounded to an integer multiple of a power-of-two quantum tied
to the largest contribution and summed exactly in int64:

* quantum q = 2**(e-51) where max = m * 2**e, so each scaled term < 2**52
  and 1500 terms stay below 2**63 (no overflow);
* the quantized total differs from the true sum by < n * q / 2, a relative
  error of order 1e-12, far below the 1e-9 conservation tolerance;
* rounding each term independently makes the total a symmetric function of
  the multiset of contributions, hence exactly permutation invariant.
"""

from __future__ import annotations

import math
import os

import numpy as np

__all__ = ["USING_NUMBA", "sim_block", "sim_block_numpy"]


def _numba_enabled() -> bool:
    flag = os.environ.get("MARKETECO_NUMBA", "1").strip().lower()
    if flag in ("0", "false", "off", "no"):
        return False
    try:
        import numba  # noqa: F401
    except ImportError:
        return False
    return True


def _quantized_total_np(work: np.ndarray, wmax: float) -> float:
    _, e = math.frexp(wmax)
    inv_q = math.ldexp(1.0, 52 - e)
    acc = int(np.rint(work * inv_q).astype(np.int64).sum())
    return float(acc) * math.ldexp(1.0, e - 52)


def sim_block_numpy(
    x: np.ndarray,
    noise: np.ndarray,
    rho: float,
    sigma: float,
    b: float,
    n_total: float,
    sums: np.ndarray,
    ext_mask: np.ndarray,
    spec_mask: np.ndarray,
    work: np.ndarray,
) -> int:
    """Advance ``x`` in place by ``noise.shape[0]`` generations (numpy path).

    Per species i with abundance x>0 the growth term is
    g = rho*x + sigma*sqrt(x)*eta.  A species whose growth term drops to or
    below zero dies this generation (extinction event, contribution 0); a
    survivor contributes g + b; an empty slot contributes b alone and is
    logged as a speciation event (it reappears next generation).  New
    abundances are n_total * contribution / total.

    Writes per-generation row sums into ``sums`` and event flags into
    ``ext_mask``/``spec_mask``.  Returns -1, or the in-block generation index
    at which every contribution vanished (caller reports AllZeroDenominator).
    """
    gens, s = noise.shape
    for g in range(gens):
        alive = x > 0.0
        growth = rho * x + sigma * np.sqrt(x) * noise[g]
        np.logical_and(alive, growth <= 0.0, out=ext_mask[g])
        np.logical_not(alive, out=spec_mask[g])
        np.copyto(work, np.where(alive, np.where(growth > 0.0, growth + b, 0.0), b))
        wmax = float(work.max())
        if wmax <= 0.0:
            return g
        total = _quantized_total_np(work, wmax)
        if total <= 0.0:
            return g
        np.multiply(work, n_total / total, out=x)
        sums[g] = float(x.sum())
    return -1


USING_NUMBA = _numba_enabled()

if USING_NUMBA:
    from numba import njit

    @njit(cache=True)
    def _sim_block_nb(x, noise, rho, sigma, b, n_total, sums, ext_mask, spec_mask, work):  # pragma: no cover - exercised via sim_block
        gens, s = noise.shape
        for g in range(gens):
            wmax = 0.0
            for i in range(s):
                xi = x[i]
                if xi > 0.0:
                    growth = rho * xi + sigma * np.sqrt(xi) * noise[g, i]
                    if growth <= 0.0:
                        w = 0.0
                        ext_mask[g, i] = True
                    else:
                        w = growth + b
                else:
                    w = b
                    spec_mask[g, i] = True
                work[i] = w
                if w > wmax:
                    wmax = w
            if wmax <= 0.0:
                return g
            _, e = math.frexp(wmax)
            inv_q = math.ldexp(1.0, 52 - e)
            acc = np.int64(0)
            for i in range(s):
                acc += np.int64(np.rint(work[i] * inv_q))
            total = float(acc) * math.ldexp(1.0, e - 52)
            if total <= 0.0:
                return g
            scale = n_total / total
            rowsum = 0.0
            for i in range(s):
                xv = work[i] * scale
                x[i] = xv
                rowsum += xv
            sums[g] = rowsum
        return -1

    def sim_block(x, noise, rho, sigma, b, n_total, sums, ext_mask, spec_mask, work) -> int:
        return int(_sim_block_nb(x, noise, rho, sigma, b, n_total, sums, ext_mask, spec_mask, work))

    sim_block.__doc__ = sim_block_numpy.__doc__
else:
    sim_block = sim_block_numpy
