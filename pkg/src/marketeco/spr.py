"""Species-population relation: species count versus total capitalization.

Scans a period with windows of 1..10 weeks, collecting one (capitalization,
species count) point per window, then fits the saturating-log form
N(x) = alpha * log(1 + x/alpha) against a power law N = k * x^z.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateRange, EmptyPeriod
from .panel import MarketPanel, Period
from .statcore import LinearFit, linear_fit, minimize_nd

__all__ = ["SprPoint", "SprFits", "scan_windows", "fit_spr"]


@dataclass(frozen=True)
class SprPoint:
    window: Period
    width_weeks: int
    total_cap: float
    n_species: int


def scan_windows(
    panel: MarketPanel,
    period: Period,
    widths: "range | tuple" = range(1, 11),
    overlapping: bool = False,
) -> "list[SprPoint]":
    """One point per window: species active any week, mean weekly total cap.

    Windows are non-overlapping per width by default to limit autocorrelation
    between points; ``overlapping=True`` slides the window one week at a time.
    """
    lo, hi = panel.period_slice(period)
    active = panel.presence()
    weekly_total = np.nansum(panel.cap, axis=1)
    points = []
    for w in widths:
        if w < 1:
            raise ValueError("window width must be >= 1 week")
        step = 1 if overlapping else w
        for start in range(lo, hi - w + 1, step):
            block_active = active[start : start + w]
            n_species = int(block_active.any(axis=0).sum())
            if n_species == 0:
                continue
            cap = float(weekly_total[start : start + w].mean())
            points.append(
                SprPoint(
                    window=Period(panel.weeks[start], panel.weeks[start + w - 1]),
                    width_weeks=w,
                    total_cap=cap,
                    n_species=n_species,
                )
            )
    if not points:
        raise EmptyPeriod(f"no usable windows in {period.start}..{period.end}")
    return points


@dataclass(frozen=True)
class SprFits:
    alpha: float
    log_rmse: float
    log_r_squared: float
    power_k: float
    power_z: float
    power_rmse: float
    power_fit: LinearFit
    z_in_range: bool  # expected scaling exponents fall in [0, 1]
    weak_dependence: bool


def _log_form(x: np.ndarray, alpha: float) -> np.ndarray:
    return alpha * np.log1p(x / alpha)


def fit_spr(points: "list[SprPoint]") -> SprFits:
    """Fit both SPR forms and report their quality side by side.

    The saturating-log amplitude is found by least squares over log(alpha)
    with a simplex search; the power law by ordinary least squares on
    (log x, log N).  Neither form is auto-selected.  ``weak_dependence``
    flags a species count that barely responds to capitalization (tiny
    exponent or a log-form amplitude far above the observed counts).
    """
    if len(points) < 5:
        raise DegenerateRange("need >= 5 windows to fit the SPR")
    x = np.array([p.total_cap for p in points], dtype=np.float64)
    n = np.array([p.n_species for p in points], dtype=np.float64)
    if x.max() <= x.min() * (1.0 + 1e-12):
        raise DegenerateRange("capitalizations span no range")

    def sse(q):
        alpha = math.exp(q[0])
        if not (1e-12 < alpha < 1e18):
            return math.inf
        return float(np.sum((n - _log_form(x, alpha)) ** 2))

    best = None
    for a0 in np.geomspace(max(n.min(), 1.0) * 1e-3, n.max() * 1e6, 24):
        v = sse([math.log(a0)])
        if best is None or v < best[0]:
            best = (v, a0)
    opt = minimize_nd(sse, [math.log(best[1])], tol=1e-10)
    alpha = math.exp(opt[0])
    resid = n - _log_form(x, alpha)
    log_rmse = math.sqrt(float(np.mean(resid**2)))
    sst = float(np.sum((n - n.mean()) ** 2))
    log_r2 = 1.0 - float(np.sum(resid**2)) / sst if sst > 0 else 0.0

    pfit = linear_fit(np.log(x), np.log(n))
    k = math.exp(pfit.intercept)
    z = pfit.slope
    power_pred = k * x**z
    power_rmse = math.sqrt(float(np.mean((n - power_pred) ** 2)))

    weak = abs(z) < 0.05 or alpha > 100.0 * n.max()
    return SprFits(
        alpha=alpha,
        log_rmse=log_rmse,
        log_r_squared=max(0.0, log_r2),
        power_k=k,
        power_z=z,
        power_rmse=power_rmse,
        power_fit=pfit,
        z_in_range=0.0 <= z <= 1.0,
        weak_dependence=weak,
    )
