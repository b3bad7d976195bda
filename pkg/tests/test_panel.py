from datetime import date

import numpy as np
import pytest

from marketeco.errors import (
    BadOrdering,
    DuplicateKey,
    MalformedRow,
    NonUniformGrid,
)
from marketeco.panel import (
    DEFAULT_REGIMES,
    MarketPanel,
    SnapshotRow,
    activity_and_rates,
    event_counts,
    fill_gaps,
    load_panel,
    panel_to_csv,
    parse_snapshot_csv,
    segment_regimes,
)

W0 = date(2015, 1, 4)


def week(k: int) -> date:
    return date.fromordinal(W0.toordinal() + 7 * k)


def rows_from(table: "dict[str, list[float | None]]") -> "list[SnapshotRow]":
    out = []
    for asset, caps in table.items():
        for k, cap in enumerate(caps):
            if cap is not None:
                out.append(SnapshotRow(week(k), asset, asset.upper(), float(cap)))
    return out


class TestParse:
    def test_basic(self):
        text = "date,asset_id,name,market_cap\n2015-01-04,BTC, Bitcoin  Core ,100.5\n"
        rows = parse_snapshot_csv(text)
        assert rows == [SnapshotRow(date(2015, 1, 4), "btc", "Bitcoin Core", 100.5)]

    def test_extra_columns_ignored(self):
        text = "date,asset_id,name,market_cap,price,volume\n2015-01-04,a,A,10,1,2\n"
        assert parse_snapshot_csv(text)[0].market_cap == 10.0

    def test_bad_date_reports_row(self):
        text = "date,asset_id,name,market_cap\n2015-01-04,a,A,1\nnot-a-date,b,B,2\n"
        with pytest.raises(MalformedRow, match="row 3"):
            parse_snapshot_csv(text)

    def test_bad_number_reports_row(self):
        text = "date,asset_id,name,market_cap\n2015-01-04,a,A,ten\n"
        with pytest.raises(MalformedRow, match="row 2"):
            parse_snapshot_csv(text)

    def test_negative_cap_rejected(self):
        text = "date,asset_id,name,market_cap\n2015-01-04,a,A,-5\n"
        with pytest.raises(MalformedRow):
            parse_snapshot_csv(text)


class TestLoadPanel:
    def test_complete_panel(self):
        panel = load_panel(rows_from({"a": [1, 2, 3], "b": [4, 5, 6]}))
        assert panel.n_weeks == 3 and panel.n_assets == 2
        assert not np.isnan(panel.cap).any()

    def test_internal_absence(self):
        panel = load_panel(rows_from({"a": [1, None, 3], "b": [4, 5, 6]}))
        absent = np.argwhere(np.isnan(panel.cap))
        assert absent.tolist() == [[1, 0]]

    def test_zero_cap_is_absent(self):
        panel = load_panel(rows_from({"a": [1, 0, 3]}))
        assert np.isnan(panel.cap[1, 0])

    def test_duplicate_rejected(self):
        rows = rows_from({"a": [1, 2]})
        rows.append(SnapshotRow(week(0), "a", "A", 9.0))
        with pytest.raises(DuplicateKey):
            load_panel(rows)

    def test_casefold_collision_is_duplicate(self):
        rows = [
            SnapshotRow(week(0), "btc", "x", 1.0),
            SnapshotRow(week(0), "btc", "y", 2.0),
        ]
        with pytest.raises(DuplicateKey):
            load_panel(rows)

    def test_non_uniform_grid(self):
        rows = rows_from({"a": [1, 2]})
        rows.append(SnapshotRow(date(2015, 1, 6), "b", "B", 1.0))
        with pytest.raises(NonUniformGrid):
            load_panel(rows)

    def test_round_trip_fixed_point(self):
        panel = load_panel(rows_from({"a": [1, None, 3], "b": [4, 5, None]}))
        text = panel_to_csv(panel)
        again = load_panel(parse_snapshot_csv(text))
        assert again.weeks == panel.weeks
        assert again.asset_ids == panel.asset_ids
        assert np.array_equal(again.cap, panel.cap, equal_nan=True)
        assert panel_to_csv(again) == text


class TestFillGaps:
    def test_single_gap_mean(self):
        panel = load_panel(rows_from({"a": [100, None, 300]}))
        filled = fill_gaps(panel)
        assert filled.cap[:, 0].tolist() == [100.0, 200.0, 300.0]

    def test_leading_trailing_untouched(self):
        panel = load_panel(rows_from({"a": [None, 50, None], "b": [1, 1, 1]}))
        filled = fill_gaps(panel)
        col = filled.cap[:, 0]
        assert np.isnan(col[0]) and col[1] == 50.0 and np.isnan(col[2])

    def test_long_gap_constant(self):
        panel = load_panel(rows_from({"a": [10, None, None, 30]}))
        filled = fill_gaps(panel)
        assert filled.cap[:, 0].tolist() == [10.0, 20.0, 20.0, 30.0]

    def test_linear_mode(self):
        panel = load_panel(rows_from({"a": [10, None, None, 40]}))
        filled = fill_gaps(panel, mode="linear")
        assert filled.cap[:, 0].tolist() == [10.0, 20.0, 30.0, 40.0]

    def test_idempotent(self):
        panel = load_panel(rows_from({"a": [10, None, None, 30], "b": [None, 2, None, 4]}))
        once = fill_gaps(panel)
        twice = fill_gaps(once)
        assert np.array_equal(once.cap, twice.cap, equal_nan=True)

    def test_never_changes_present_and_stays_in_bounds(self):
        rng = np.random.default_rng(0)
        caps = rng.random((12, 6)) * 100 + 1
        mask = rng.random((12, 6)) < 0.35
        cap = np.where(mask, np.nan, caps)
        panel = MarketPanel(
            weeks=[week(k) for k in range(12)],
            asset_ids=[f"a{j}" for j in range(6)],
            asset_names=[f"a{j}" for j in range(6)],
            cap=cap.copy(),
        )
        filled = fill_gaps(panel)
        present = ~np.isnan(cap)
        assert np.array_equal(filled.cap[present], cap[present])
        for j in range(6):
            col, orig = filled.cap[:, j], cap[:, j]
            new = ~np.isnan(col) & ~present[:, j]
            idx = np.flatnonzero(present[:, j])
            for t in np.flatnonzero(new):
                left = idx[idx < t].max()
                right = idx[idx > t].min()
                lo, hi = sorted((orig[left], orig[right]))
                assert lo <= col[t] <= hi


class TestRates:
    def test_constant_panel_zero_rates(self):
        panel = load_panel(rows_from({"a": [1, 1, 1], "b": [2, 2, 2]}))
        rates = activity_and_rates(panel, smooth_weeks=1)
        assert all(r.speciation_rate == 0.0 and r.extinction_rate == 0.0 for r in rates)

    def test_entry_rate(self):
        panel = load_panel(rows_from({"a": [1, 1], "b": [None, 2]}))
        rates = activity_and_rates(panel, smooth_weeks=1)
        assert rates[1].speciation_rate == pytest.approx(0.5)
        assert rates[1].extinction_rate == 0.0

    def test_exit_rate(self):
        panel = load_panel(rows_from({"a": [1, None], "b": [2, 2]}))
        rates = activity_and_rates(panel, smooth_weeks=1)
        assert rates[1].extinction_rate == pytest.approx(1.0)
        assert rates[1].speciation_rate == 0.0

    def test_previous_denominator(self):
        panel = load_panel(rows_from({"a": [1, 1], "b": [None, 2]}))
        rates = activity_and_rates(panel, smooth_weeks=1, denominator="previous")
        assert rates[1].speciation_rate == pytest.approx(1.0)

    def test_event_balance_property(self):
        rng = np.random.default_rng(3)
        table = {f"a{j}": [float(v) if v > 0.4 else None for v in rng.random(15)] for j in range(9)}
        # ensure at least one present entry per asset
        for key in table:
            if all(v is None for v in table[key]):
                table[key][0] = 1.0
        panel = load_panel(rows_from(table))
        spec, ext = event_counts(panel)
        n_active = panel.presence().sum(axis=1)
        assert np.array_equal((spec - ext)[1:], np.diff(n_active))

    def test_smoothing_is_trailing_mean(self):
        panel = load_panel(rows_from({"a": [1, 1, 1, 1], "b": [None, 2, None, 2]}))
        raw = activity_and_rates(panel, smooth_weeks=1)
        smooth = activity_and_rates(panel, smooth_weeks=2)
        expected = 0.5 * (raw[2].speciation_rate + raw[1].speciation_rate)
        assert smooth[2].speciation_rate == pytest.approx(expected)


class TestRegimes:
    def test_defaults(self):
        seg = segment_regimes()
        assert seg == DEFAULT_REGIMES
        assert seg.radiation_end == date(2014, 6, 1)
        assert seg.stationary_start == date(2014, 11, 2)
        assert seg.stationary_end == date(2017, 4, 30)
        assert seg.growth_start == date(2017, 5, 7)

    def test_override_identity(self):
        seg = segment_regimes(
            (date(2014, 6, 1), date(2014, 11, 2), date(2017, 4, 30), date(2017, 5, 7))
        )
        assert seg == DEFAULT_REGIMES

    def test_bad_ordering(self):
        with pytest.raises(BadOrdering):
            segment_regimes(
                (date(2014, 6, 1), date(2017, 4, 30), date(2014, 11, 2), date(2017, 5, 7))
            )
