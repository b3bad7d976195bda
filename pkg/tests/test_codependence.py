import numpy as np
import pytest

from conftest import panel_from, week
from marketeco.codependence import (
    autocorrelation,
    correlation_matrix,
    select_persistent,
    variation_matrix,
)
from marketeco.errors import EmptySelection
from marketeco.panel import MarketPanel, Period


def noise_panel(n_assets: int, n_weeks: int, seed: int) -> MarketPanel:
    # geometric random walks: the log-variations are then white noise
    rng = np.random.default_rng(seed)
    steps = rng.standard_normal((n_weeks, n_assets)) * 0.3
    steps[0] = 0.0
    caps = np.exp(np.cumsum(steps, axis=0) + 8.0)
    return panel_from({f"a{j:04d}": caps[:, j].tolist() for j in range(n_assets)})


class TestSelectPersistent:
    def test_spanning_subset(self):
        panel = panel_from(
            {
                "a": [1, 1, 1, 1],
                "b": [1, None, 1, 1],
                "c": [2, 2, 2, 2],
                "d": [None, 1, 1, 1],
                "e": [1, 1, 1, None],
            }
        )
        assert select_persistent(panel, Period(week(0), week(3))) == ["a", "c"]

    def test_single_week_period(self):
        panel = panel_from({"a": [1, None], "b": [2, 2]})
        assert select_persistent(panel, Period(week(0), week(0))) == ["a", "b"]

    def test_empty_selection(self):
        panel = panel_from({"a": [1, None], "b": [None, 2]})
        with pytest.raises(EmptySelection):
            select_persistent(panel, Period(week(0), week(1)))


class TestCorrelationMatrix:
    def test_identical_series_correlate_fully(self):
        base = [10.0, 12.0, 11.0, 14.0, 13.0, 16.0]
        panel = panel_from({"a": base, "b": [2.0 * v for v in base], "c": [50.0, 40.0, 45.0, 35.0, 42.0, 30.0]})
        rep = correlation_matrix(panel, ["a", "b", "c"], Period(week(0), week(5)), n_null=2)
        i, j = rep.asset_order.index("a"), rep.asset_order.index("b")
        assert rep.matrix[i, j] == pytest.approx(1.0, abs=1e-12)

    def test_matrix_symmetric_unit_diagonal(self):
        panel = noise_panel(12, 30, 0)
        subset = select_persistent(panel, Period(week(0), week(29)))
        rep = correlation_matrix(panel, subset, Period(week(0), week(29)), n_null=3)
        assert np.array_equal(rep.matrix, rep.matrix.T)
        assert np.all(np.diag(rep.matrix) == 1.0)
        assert np.max(np.abs(rep.matrix)) <= 1.0 + 1e-12

    def test_order_is_ascending_capitalization(self):
        panel = noise_panel(10, 20, 1)
        subset = select_persistent(panel, Period(week(0), week(19)))
        rep = correlation_matrix(panel, subset, Period(week(0), week(19)), n_null=2)
        assert np.all(np.diff(rep.total_cap) >= 0.0)

    def test_scale_invariance_per_asset(self):
        base = noise_panel(6, 25, 2)
        scaled_caps = base.cap.copy()
        scaled_caps[:, 2] *= 1234.5
        scaled = MarketPanel(
            weeks=list(base.weeks),
            asset_ids=list(base.asset_ids),
            asset_names=list(base.asset_names),
            cap=scaled_caps,
        )
        period = Period(week(0), week(24))
        subset = select_persistent(base, period)
        r1 = correlation_matrix(base, subset, period, n_null=1)
        r2 = correlation_matrix(scaled, subset, period, n_null=1)
        # scaling one asset shifts its ordering position but not any pairwise value
        m1 = {frozenset((a, b)): r1.matrix[i, j]
              for i, a in enumerate(r1.asset_order) for j, b in enumerate(r1.asset_order) if i != j}
        for i, a in enumerate(r2.asset_order):
            for j, b in enumerate(r2.asset_order):
                if i != j:
                    assert r2.matrix[i, j] == pytest.approx(m1[frozenset((a, b))], abs=1e-9)

    def test_subset_order_does_not_change_values(self):
        panel = noise_panel(8, 25, 3)
        period = Period(week(0), week(24))
        subset = select_persistent(panel, period)
        r1 = correlation_matrix(panel, subset, period, n_null=1)
        r2 = correlation_matrix(panel, list(reversed(subset)), period, n_null=1)
        assert r1.asset_order == r2.asset_order
        assert np.allclose(r1.matrix, r2.matrix, atol=1e-14)

    def test_null_band_and_mean(self):
        panel = noise_panel(30, 80, 4)
        subset = select_persistent(panel, Period(week(0), week(79)))
        rep = correlation_matrix(panel, subset, Period(week(0), week(79)), n_null=5, seed=9)
        assert rep.null_low < 0.0 < rep.null_high
        assert abs(rep.null_mean) <= 3.0 * rep.null_sem

    def test_deterministic_given_seed(self):
        panel = noise_panel(10, 30, 5)
        subset = select_persistent(panel, Period(week(0), week(29)))
        r1 = correlation_matrix(panel, subset, Period(week(0), week(29)), n_null=3, seed=11)
        r2 = correlation_matrix(panel, subset, Period(week(0), week(29)), n_null=3, seed=11)
        assert np.array_equal(r1.null_values, r2.null_values)


class TestAutocorrelation:
    def test_alternating_series(self):
        steps = [1.0, -1.0] * 10
        caps = list(np.exp(np.cumsum([0.0] + steps) + 8.0))
        panel = panel_from({"a": caps, "b": list(np.exp(np.linspace(8, 9, len(caps))))})
        rep = autocorrelation(panel, ["a", "b"], Period(week(0), week(len(caps) - 1)), tau=1, n_realizations=2)
        i = rep.asset_order.index("a")
        assert rep.r_a[i] == pytest.approx(-1.0, abs=1e-10)

    def test_white_noise_inside_band(self):
        panel = noise_panel(40, 100, 6)
        subset = select_persistent(panel, Period(week(0), week(99)))
        rep = autocorrelation(panel, subset, Period(week(0), week(99)), tau=1, n_realizations=10, seed=3)
        inside = np.mean((rep.r_a >= rep.null_low) & (rep.r_a <= rep.null_high))
        assert inside >= 0.9

    def test_variation_matrix_shape(self):
        panel = noise_panel(5, 12, 7)
        v, cap = variation_matrix(panel, panel.asset_ids, Period(week(0), week(11)))
        assert v.shape == (5, 11)
        assert cap.shape == (5,)
