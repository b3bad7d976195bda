"""Weekly snapshot ingestion: parsing, gap filling, activity rates, regimes.

The universal input is a :class:`MarketPanel`: a weeks-by-assets matrix of
capitalizations on a uniform 7-day grid, with absent entries stored as NaN.
Every stored capitalization is strictly positive; a zero in the raw data
means the asset was not traded that week and is treated as absent.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from datetime import date, timedelta
from typing import Iterable, Sequence

import numpy as np

from .errors import (
    BadOrdering,
    DuplicateKey,
    EmptyPanel,
    EmptyPeriod,
    MalformedRow,
    NonUniformGrid,
)

__all__ = [
    "SnapshotRow",
    "MarketPanel",
    "Period",
    "RateSeries",
    "RegimeSegmentation",
    "DEFAULT_REGIMES",
    "parse_snapshot_csv",
    "load_panel",
    "fill_gaps",
    "activity_and_rates",
    "segment_regimes",
    "panel_to_csv",
    "rates_to_csv",
]

WEEK = timedelta(days=7)


@dataclass(frozen=True)
class SnapshotRow:
    """One (week, asset) observation from a snapshot file."""

    date: date
    asset_id: str
    name: str
    market_cap: float


@dataclass(frozen=True)
class Period:
    """Closed date interval on the weekly grid."""

    start: date
    end: date

    def __post_init__(self):
        if self.end < self.start:
            raise BadOrdering(f"period end {self.end} before start {self.start}")

    def contains(self, day: date) -> bool:
        return self.start <= day <= self.end


@dataclass
class MarketPanel:
    """Rectangular asset-by-week capitalization table.

    ``cap`` is a (weeks x assets) float array with NaN marking absent
    entries.  Weeks are strictly increasing with uniform 7-day spacing.
    """

    weeks: "list[date]"
    asset_ids: "list[str]"
    asset_names: "list[str]"
    cap: np.ndarray

    @property
    def n_weeks(self) -> int:
        return len(self.weeks)

    @property
    def n_assets(self) -> int:
        return len(self.asset_ids)

    def presence(self) -> np.ndarray:
        """Boolean (weeks x assets) activity mask."""
        return ~np.isnan(self.cap)

    def week_index(self, day: date) -> int:
        offset = (day - self.weeks[0]).days
        if offset % 7 != 0 or not (0 <= offset // 7 < self.n_weeks):
            raise EmptyPeriod(f"{day} is not on the panel's weekly grid")
        return offset // 7

    def period_slice(self, period: Period) -> "tuple[int, int]":
        """Half-open week-index range covering the period."""
        if period.end < self.weeks[0] or period.start > self.weeks[-1]:
            raise EmptyPeriod(f"period {period.start}..{period.end} outside the panel")
        start = max(0, math.ceil((period.start - self.weeks[0]).days / 7))
        end = min(self.n_weeks - 1, (period.end - self.weeks[0]).days // 7)
        if end < start:
            raise EmptyPeriod(f"period {period.start}..{period.end} contains no panel week")
        return start, end + 1


# ---------------------------------------------------------------------------
# parsing and loading
# ---------------------------------------------------------------------------

_REQUIRED_COLUMNS = ("date", "asset_id", "name", "market_cap")


def _parse_date(token: str, line_no: int) -> date:
    try:
        return date.fromisoformat(token.strip())
    except ValueError as exc:
        raise MalformedRow(f"row {line_no}: bad date {token!r}") from exc


def _normalize_name(name: str) -> str:
    return " ".join(name.split())


def parse_snapshot_csv(text_or_lines: "str | Iterable[str]") -> "list[SnapshotRow]":
    """Parse comma-separated snapshot rows (header: date,asset_id,name,market_cap).

    Extra columns are ignored; asset symbols are case-folded and names get
    their whitespace collapsed.
    """
    if isinstance(text_or_lines, str):
        lines: Iterable[str] = io.StringIO(text_or_lines)
    else:
        lines = text_or_lines
    reader = csv.reader(lines)
    try:
        header = next(reader)
    except StopIteration:
        raise MalformedRow("empty input: no header row")
    header = [h.strip().lower() for h in header]
    try:
        cols = {name: header.index(name) for name in _REQUIRED_COLUMNS}
    except ValueError as exc:
        raise MalformedRow(f"header must contain {_REQUIRED_COLUMNS}, got {header}") from exc
    rows = []
    for line_no, rec in enumerate(reader, start=2):
        if not rec or all(not c.strip() for c in rec):
            continue
        if len(rec) < len(header):
            raise MalformedRow(f"row {line_no}: expected {len(header)} fields, got {len(rec)}")
        day = _parse_date(rec[cols["date"]], line_no)
        asset = rec[cols["asset_id"]].strip().casefold()
        if not asset:
            raise MalformedRow(f"row {line_no}: empty asset_id")
        try:
            cap = float(rec[cols["market_cap"]])
        except ValueError as exc:
            raise MalformedRow(f"row {line_no}: bad market_cap {rec[cols['market_cap']]!r}") from exc
        if not math.isfinite(cap) or cap < 0.0:
            raise MalformedRow(f"row {line_no}: market_cap must be finite and >= 0, got {cap}")
        rows.append(SnapshotRow(date=day, asset_id=asset, name=_normalize_name(rec[cols["name"]]), market_cap=cap))
    return rows


def load_panel(rows: "Iterable[SnapshotRow]") -> MarketPanel:
    """Assemble snapshot rows into a panel on a uniform weekly grid.

    Duplicate (date, asset_id) pairs are rejected; zero capitalizations are
    stored as absent.  Raises NonUniformGrid when the dates cannot be placed
    on a 7-day grid.
    """
    rows = list(rows)
    if not rows:
        raise EmptyPanel("no snapshot rows")
    dates = sorted({r.date for r in rows})
    first = dates[0]
    for d in dates:
        if (d - first).days % 7 != 0:
            raise NonUniformGrid(f"date {d} is not a whole number of weeks from {first}")
    n_weeks = (dates[-1] - first).days // 7 + 1
    weeks = [first + WEEK * i for i in range(n_weeks)]

    asset_ids: "list[str]" = []
    names: "dict[str, str]" = {}
    index: "dict[str, int]" = {}
    for r in rows:
        if r.asset_id not in index:
            index[r.asset_id] = len(asset_ids)
            asset_ids.append(r.asset_id)
            names[r.asset_id] = r.name
        elif not names[r.asset_id] and r.name:
            names[r.asset_id] = r.name
    order = sorted(range(len(asset_ids)), key=lambda i: asset_ids[i])
    asset_ids = [asset_ids[i] for i in order]
    index = {a: i for i, a in enumerate(asset_ids)}

    cap = np.full((n_weeks, len(asset_ids)), np.nan)
    seen = set()
    for r in rows:
        w = (r.date - first).days // 7
        key = (w, r.asset_id)
        if key in seen:
            raise DuplicateKey(f"duplicate entry for {r.asset_id} on {r.date}")
        seen.add(key)
        if r.market_cap > 0.0:
            cap[w, index[r.asset_id]] = r.market_cap
    return MarketPanel(weeks=weeks, asset_ids=asset_ids, asset_names=[names[a] for a in asset_ids], cap=cap)


# ---------------------------------------------------------------------------
# gap filling
# ---------------------------------------------------------------------------

def fill_gaps(panel: MarketPanel, mode: str = "constant") -> MarketPanel:
    """Fill internal absence runs per asset; leading/trailing runs untouched.

    ``constant`` (default) writes the arithmetic mean of the two bounding
    present values across the whole gap; ``linear`` interpolates between
    them.  Idempotent, never changes a present value, and never produces a
    value outside the bounding pair's range.
    """
    if mode not in ("constant", "linear"):
        raise ValueError(f"unknown fill mode {mode!r}")
    cap = panel.cap.copy()
    n_weeks = panel.n_weeks
    for j in range(panel.n_assets):
        col = cap[:, j]
        present = np.flatnonzero(~np.isnan(col))
        if present.size < 2:
            continue
        for a, b in zip(present[:-1], present[1:]):
            if b - a <= 1:
                continue
            if mode == "constant":
                col[a + 1 : b] = 0.5 * (col[a] + col[b])
            else:
                col[a + 1 : b] = np.interp(np.arange(a + 1, b), [a, b], [col[a], col[b]])
    return MarketPanel(weeks=list(panel.weeks), asset_ids=list(panel.asset_ids),
                       asset_names=list(panel.asset_names), cap=cap)


# ---------------------------------------------------------------------------
# activity and rates
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RateSeries:
    """Weekly activity record with smoothed entry/exit rates."""

    week: date
    n_active: int
    speciation_rate: float
    extinction_rate: float
    total_cap: float


def activity_and_rates(
    panel: MarketPanel,
    smooth_weeks: int = 4,
    denominator: str = "current",
) -> "list[RateSeries]":
    """Weekly speciation/extinction rates and total capitalization.

    An asset is active in a week iff its entry is present.  The speciation
    count at week t is the number of assets active at t but not at t-1; the
    extinction count the reverse.  Rates divide by the active count at t
    (``denominator="previous"`` divides by the count at t-1 instead).  Rates
    and total capitalization are smoothed with a trailing rolling mean of
    ``smooth_weeks``, using the available prefix for the first entries.
    """
    if panel.n_weeks == 0 or panel.n_assets == 0:
        raise EmptyPanel("cannot compute rates on an empty panel")
    if smooth_weeks < 1:
        raise ValueError("smooth_weeks must be >= 1")
    if denominator not in ("current", "previous"):
        raise ValueError(f"unknown denominator {denominator!r}")
    active = panel.presence()
    n_active = active.sum(axis=1)
    spec = np.zeros(panel.n_weeks)
    ext = np.zeros(panel.n_weeks)
    spec[1:] = (active[1:] & ~active[:-1]).sum(axis=1)
    ext[1:] = (~active[1:] & active[:-1]).sum(axis=1)
    denom = n_active.astype(np.float64).copy()
    if denominator == "previous":
        denom[1:] = n_active[:-1]
        denom[0] = n_active[0]
    with np.errstate(invalid="ignore", divide="ignore"):
        spec_rate = np.where(denom > 0, spec / denom, 0.0)
        ext_rate = np.where(denom > 0, ext / denom, 0.0)
    total = np.nansum(panel.cap, axis=1)

    def trail_mean(v: np.ndarray) -> np.ndarray:
        c = np.concatenate([[0.0], np.cumsum(v)])
        out = np.empty_like(v)
        for t in range(v.size):
            lo = max(0, t - smooth_weeks + 1)
            out[t] = (c[t + 1] - c[lo]) / (t + 1 - lo)
        return out

    spec_rate = trail_mean(spec_rate)
    ext_rate = trail_mean(ext_rate)
    total = trail_mean(total)
    return [
        RateSeries(
            week=panel.weeks[t],
            n_active=int(n_active[t]),
            speciation_rate=float(spec_rate[t]),
            extinction_rate=float(ext_rate[t]),
            total_cap=float(total[t]),
        )
        for t in range(panel.n_weeks)
    ]


def event_counts(panel: MarketPanel) -> "tuple[np.ndarray, np.ndarray]":
    """Raw (unsmoothed) per-week speciation and extinction counts."""
    active = panel.presence()
    spec = np.zeros(panel.n_weeks, dtype=np.int64)
    ext = np.zeros(panel.n_weeks, dtype=np.int64)
    spec[1:] = (active[1:] & ~active[:-1]).sum(axis=1)
    ext[1:] = (~active[1:] & active[:-1]).sum(axis=1)
    return spec, ext


# ---------------------------------------------------------------------------
# regimes
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RegimeSegmentation:
    """Boundaries of the radiation / stationary / growth phases."""

    radiation_end: date
    stationary_start: date
    stationary_end: date
    growth_start: date

    def __post_init__(self):
        ok = (
            self.radiation_end <= self.stationary_start
            and self.stationary_start < self.stationary_end
            and self.stationary_end < self.growth_start
        )
        if not ok:
            raise BadOrdering(
                "regime dates must satisfy radiation_end <= stationary_start "
                "< stationary_end < growth_start"
            )

    @property
    def stationary(self) -> Period:
        return Period(self.stationary_start, self.stationary_end)


DEFAULT_REGIMES = RegimeSegmentation(
    radiation_end=date(2014, 6, 1),
    stationary_start=date(2014, 11, 2),
    stationary_end=date(2017, 4, 30),
    growth_start=date(2017, 5, 7),
)


def segment_regimes(
    overrides: "tuple[date, date, date, date] | None" = None,
) -> RegimeSegmentation:
    """Default phase boundaries, optionally overridden by four dates."""
    if overrides is None:
        return DEFAULT_REGIMES
    return RegimeSegmentation(*overrides)


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------

def panel_to_csv(panel: MarketPanel) -> str:
    """Serialize present entries back to the snapshot format (sorted, stable)."""
    out = io.StringIO()
    w = csv.writer(out, lineterminator="\n")
    w.writerow(["date", "asset_id", "name", "market_cap"])
    names = dict(zip(panel.asset_ids, panel.asset_names))
    for t, day in enumerate(panel.weeks):
        row_vals = panel.cap[t]
        for j in np.flatnonzero(~np.isnan(row_vals)):
            aid = panel.asset_ids[j]
            w.writerow([day.isoformat(), aid, names[aid], repr(float(row_vals[j]))])
    return out.getvalue()


def rates_to_csv(rates: Sequence[RateSeries]) -> str:
    out = io.StringIO()
    w = csv.writer(out, lineterminator="\n")
    w.writerow(["week", "n_active", "speciation_rate", "extinction_rate", "total_cap"])
    for r in rates:
        w.writerow([r.week.isoformat(), r.n_active, repr(r.speciation_rate), repr(r.extinction_rate), repr(r.total_cap)])
    return out.getvalue()
