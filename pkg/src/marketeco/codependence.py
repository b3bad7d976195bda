"""Dependency structure of weekly log-variations.

Works on the subset of assets active through a whole period, so every
variation series V(t) = ln C(t) - ln C(t-1) is fully synchronized and
pairwise correlations share a common time support.  Significance is read
against percentile bands of shuffled series rather than p-values: shuffling
each series independently destroys both cross- and auto-structure.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .errors import EmptySelection, SeriesTooShort
from .panel import MarketPanel, Period
from .statcore import RandomSource

__all__ = [
    "CorrelationReport",
    "AutocorrelationReport",
    "select_persistent",
    "variation_matrix",
    "correlation_matrix",
    "autocorrelation",
]


def select_persistent(panel: MarketPanel, period: Period) -> "list[str]":
    """Assets present at every week of the period (after gap filling)."""
    lo, hi = panel.period_slice(period)
    mask = panel.presence()[lo:hi].all(axis=0)
    subset = [panel.asset_ids[j] for j in np.flatnonzero(mask)]
    if not subset:
        raise EmptySelection(f"no asset spans {period.start}..{period.end}")
    return subset


def variation_matrix(
    panel: MarketPanel,
    subset: "list[str]",
    period: Period,
) -> "tuple[np.ndarray, np.ndarray]":
    """(assets x weeks-1) log-variations and per-asset total capitalization."""
    lo, hi = panel.period_slice(period)
    cols = [panel.asset_ids.index(a) for a in subset]
    block = panel.cap[lo:hi, cols]
    if np.isnan(block).any():
        raise EmptySelection("subset must be persistent over the period")
    logs = np.log(block)
    v = (logs[1:] - logs[:-1]).T
    total_cap = block.sum(axis=0)
    return v, total_cap


def _null_percentiles(values: np.ndarray, lo: float = 1.0, hi: float = 99.0):
    return float(np.percentile(values, lo)), float(np.percentile(values, hi))


@dataclass
class CorrelationReport:
    """Pairwise correlation structure against its shuffle null."""

    asset_order: "list[str]"  # ascending total capitalization over the period
    total_cap: np.ndarray
    matrix: np.ndarray
    k_top: int
    null_values: np.ndarray
    null_low: float
    null_high: float
    null_mean: float
    null_sem: float

    @property
    def top_block(self) -> np.ndarray:
        return self.matrix[-self.k_top :, -self.k_top :]

    def offdiag(self, block: "np.ndarray | None" = None) -> np.ndarray:
        m = self.matrix if block is None else block
        iu = np.triu_indices(m.shape[0], k=1)
        return m[iu]


def correlation_matrix(
    panel: MarketPanel,
    subset: "list[str]",
    period: Period,
    k_top: int = 25,
    n_null: int = 10,
    seed: int = 0,
) -> CorrelationReport:
    """Correlations of synchronized log-variations, ordered by capitalization.

    Assets fill the matrix from the smallest to the largest total
    capitalization over the period.  The null pools the off-diagonal entries
    of ``n_null`` recomputations after independently shuffling every series;
    constant series are excluded with a warning.
    """
    v, cap = variation_matrix(panel, subset, period)
    keep = v.std(axis=1) > 0.0
    if not keep.all():
        dropped = [a for a, k in zip(subset, keep) if not k]
        warnings.warn(f"excluding constant variation series: {dropped}", stacklevel=2)
        v = v[keep]
        cap = cap[keep]
        subset = [a for a, k in zip(subset, keep) if k]
    if v.shape[0] < 2:
        raise EmptySelection("need at least two non-constant series")
    order = np.argsort(cap, kind="stable")
    v = v[order]
    cap = cap[order]
    assets = [subset[i] for i in order]
    matrix = np.corrcoef(v)
    np.fill_diagonal(matrix, 1.0)
    matrix = 0.5 * (matrix + matrix.T)

    n_assets, n_weeks = v.shape
    iu = np.triu_indices(n_assets, k=1)
    null_parts = []
    for rep in range(n_null):
        shuffled = np.empty_like(v)
        for i in range(n_assets):
            gen = RandomSource(seed, rep * n_assets + i).generator()
            shuffled[i] = v[i, gen.permutation(n_weeks)]
        null_parts.append(np.corrcoef(shuffled)[iu])
    null_values = np.concatenate(null_parts)
    low, high = _null_percentiles(null_values)
    return CorrelationReport(
        asset_order=assets,
        total_cap=cap,
        matrix=matrix,
        k_top=min(k_top, n_assets),
        null_values=null_values,
        null_low=low,
        null_high=high,
        null_mean=float(null_values.mean()),
        null_sem=float(null_values.std() / np.sqrt(null_values.size)),
    )


@dataclass
class AutocorrelationReport:
    asset_order: "list[str]"
    total_cap: np.ndarray
    r_a: np.ndarray
    tau: int
    null_low: float
    null_high: float
    null_values: np.ndarray


def autocorrelation(
    panel: MarketPanel,
    subset: "list[str]",
    period: Period,
    tau: int = 1,
    n_realizations: int = 10,
    seed: int = 0,
) -> AutocorrelationReport:
    """Lag-tau autocorrelation of each variation series versus a shuffle band.

    The band pools autocorrelations of ``n_realizations`` independent
    shuffles of every series and reports its 1/99 percentiles.
    """
    if tau < 1:
        raise ValueError("tau must be >= 1")
    v, cap = variation_matrix(panel, subset, period)
    n_assets, n_weeks = v.shape
    if n_weeks <= tau + 1:
        raise SeriesTooShort(f"series of {n_weeks} steps cannot support lag {tau}")
    order = np.argsort(cap, kind="stable")
    v = v[order]
    cap = cap[order]
    assets = [subset[i] for i in order]

    def lag_corr(rows: np.ndarray) -> np.ndarray:
        a = rows[:, :-tau]
        b = rows[:, tau:]
        am = a - a.mean(axis=1, keepdims=True)
        bm = b - b.mean(axis=1, keepdims=True)
        denom = np.sqrt((am * am).sum(axis=1) * (bm * bm).sum(axis=1))
        with np.errstate(invalid="ignore", divide="ignore"):
            return np.where(denom > 0.0, (am * bm).sum(axis=1) / denom, 0.0)

    r_a = lag_corr(v)
    null_parts = []
    for rep in range(n_realizations):
        shuffled = np.empty_like(v)
        for i in range(n_assets):
            gen = RandomSource(seed, (rep + 1) * 1_000_003 + i).generator()
            shuffled[i] = v[i, gen.permutation(n_weeks)]
        null_parts.append(lag_corr(shuffled))
    null_values = np.concatenate(null_parts)
    low, high = _null_percentiles(null_values)
    return AutocorrelationReport(
        asset_order=assets,
        total_cap=cap,
        r_a=r_a,
        tau=tau,
        null_low=low,
        null_high=high,
        null_values=null_values,
    )
