"""Community-structure evolution: similarity decay and diversity relations.

The similarity index r_S(tau) is the Pearson correlation across assets of
log(cap + 1) between an origin month and a later month, where a month is
exactly 4 panel weeks.  Its decay over time is compared between a linear and
an exponential description; the linear slope doubles as a temporal
beta-diversity measure against species richness (alpha-diversity).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from datetime import date

import numpy as np

from .errors import EmptyPeriod, TooFewLags, ZeroVariance
from .panel import MarketPanel, Period
from .statcore import LinearFit, linear_fit, pearson

__all__ = [
    "WEEKS_PER_MONTH",
    "SimilaritySeries",
    "DecayFits",
    "DiversityPoint",
    "similarity_decay",
    "decay_model_selection",
    "beta_vs_alpha",
    "occurrence_vs_abundance",
]

WEEKS_PER_MONTH = 4  # panel is weekly; a "month" is 4 weeks exactly


@dataclass(frozen=True)
class SimilaritySeries:
    origin: date
    lags_months: np.ndarray
    r_s: np.ndarray
    universe_size: int


def similarity_decay(
    panel: MarketPanel,
    t0: date,
    horizon_months: int,
    universe: str = "union",
) -> SimilaritySeries:
    """r_S against the origin community at monthly lags 0..horizon.

    The species universe is the union of assets active at the origin or at
    any compared month (``universe="fixed"`` restricts to assets active at
    the origin).  Absent assets enter with log(0 + 1) = 0, so extinctions and
    late arrivals pull the correlation down.
    """
    if universe not in ("union", "fixed"):
        raise ValueError(f"unknown universe mode {universe!r}")
    if horizon_months < 1:
        raise ValueError("horizon must be at least one month")
    i0 = panel.week_index(t0)
    idx = [i0 + WEEKS_PER_MONTH * m for m in range(horizon_months + 1)]
    if idx[-1] >= panel.n_weeks:
        raise EmptyPeriod(f"horizon {horizon_months} months runs past the panel end")
    rows = panel.cap[idx]
    present = ~np.isnan(rows)
    members = present[0] if universe == "fixed" else present.any(axis=0)
    if members.sum() < 2:
        raise ZeroVariance("fewer than two assets in the comparison universe")
    s_vectors = np.log1p(np.where(np.isnan(rows), 0.0, rows))[:, members]
    r_s = np.empty(len(idx))
    for m in range(len(idx)):
        r_s[m] = pearson(s_vectors[0], s_vectors[m])
    return SimilaritySeries(
        origin=t0,
        lags_months=np.arange(len(idx), dtype=np.float64),
        r_s=r_s,
        universe_size=int(members.sum()),
    )


@dataclass(frozen=True)
class DecayFits:
    linear: LinearFit
    linear_rmse: float
    exp_amplitude: float
    exp_rate: float
    exp_rmse: float
    winner: str  # "linear" | "exponential", by RMSE in r_S space


def decay_model_selection(series: SimilaritySeries) -> DecayFits:
    """Linear versus exponential description of the r_S decay.

    The exponential is fitted by least squares on log r_S restricted to
    positive values (negative similarities stay in the linear fit only);
    both models are scored by RMSE on the raw r_S values.
    """
    tau = series.lags_months
    rs = series.r_s
    if tau.size < 4:
        raise TooFewLags("need at least 4 lags for decay model selection")
    lin = linear_fit(tau, rs)
    lin_pred = lin.slope * tau + lin.intercept
    lin_rmse = math.sqrt(float(np.mean((lin_pred - rs) ** 2)))
    pos = rs > 0.0
    if pos.sum() < 2:
        raise TooFewLags("fewer than 2 positive similarities for the exponential fit")
    efit = linear_fit(tau[pos], np.log(rs[pos]))
    amp = math.exp(efit.intercept)
    exp_pred = amp * np.exp(efit.slope * tau)
    exp_rmse = math.sqrt(float(np.mean((exp_pred - rs) ** 2)))
    return DecayFits(
        linear=lin,
        linear_rmse=lin_rmse,
        exp_amplitude=amp,
        exp_rate=efit.slope,
        exp_rmse=exp_rmse,
        winner="exponential" if exp_rmse < lin_rmse else "linear",
    )


@dataclass(frozen=True)
class DiversityPoint:
    interval: Period
    richness: int
    beta_slope: float


def beta_vs_alpha(panel: MarketPanel, intervals: "list[Period]") -> "list[DiversityPoint]":
    """Per interval: species richness and the linear r_S decay slope.

    Richness is the count of assets active at least once in the interval;
    the slope comes from the linear fit of the similarity decay starting at
    the interval's first panel week and spanning its length.
    """
    out = []
    for iv in intervals:
        lo, hi = panel.period_slice(iv)
        horizon = (hi - 1 - lo) // WEEKS_PER_MONTH
        if horizon < 4:
            raise TooFewLags(f"interval {iv.start}..{iv.end} spans fewer than 4 months")
        richness = int(panel.presence()[lo:hi].any(axis=0).sum())
        series = similarity_decay(panel, panel.weeks[lo], horizon)
        fits = decay_model_selection(series)
        out.append(DiversityPoint(interval=iv, richness=richness, beta_slope=fits.linear.slope))
    return out


def occurrence_vs_abundance(
    panel: MarketPanel,
    period: Period,
) -> "list[tuple[str, float, float]]":
    """Per asset: fraction of active weeks and mean capitalization when active."""
    lo, hi = panel.period_slice(period)
    block = panel.cap[lo:hi]
    present = ~np.isnan(block)
    weeks_total = hi - lo
    out = []
    for j, asset in enumerate(panel.asset_ids):
        active = int(present[:, j].sum())
        if active == 0:
            continue
        mean_cap = float(np.nanmean(block[:, j]))
        out.append((asset, active / weeks_total, mean_cap))
    if not out:
        raise EmptyPeriod(f"no active assets in {period.start}..{period.end}")
    return out
