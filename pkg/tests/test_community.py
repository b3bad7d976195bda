import math

import numpy as np
import pytest

from conftest import panel_from, week
from marketeco.community import (
    SimilaritySeries,
    beta_vs_alpha,
    decay_model_selection,
    occurrence_vs_abundance,
    similarity_decay,
)
from marketeco.errors import TooFewLags
from marketeco.panel import Period


def series_from(rs):
    rs = np.asarray(rs, dtype=np.float64)
    return SimilaritySeries(
        origin=week(0),
        lags_months=np.arange(rs.size, dtype=np.float64),
        r_s=rs,
        universe_size=10,
    )


class TestSimilarityDecay:
    def test_lag_zero_is_one(self):
        rng = np.random.default_rng(0)
        panel = panel_from({f"a{j}": list(10 + rng.random(9) * 50) for j in range(6)})
        series = similarity_decay(panel, week(0), 2)
        assert series.r_s[0] == 1.0

    def test_exact_log_affine_map_gives_unit_correlation(self):
        # later caps built so log(C+1) doubles exactly
        caps0 = np.array([3.0, 9.0, 30.0, 90.0])
        caps4 = (caps0 + 1.0) ** 2 - 1.0
        table = {
            f"a{j}": [caps0[j], None, None, None, caps4[j]] for j in range(4)
        }
        for j in range(4):
            table[f"a{j}"][1:4] = [caps0[j]] * 3
        panel = panel_from(table)
        series = similarity_decay(panel, week(0), 1)
        assert series.r_s[1] == pytest.approx(1.0, abs=1e-12)

    def test_hand_computed_with_extinction(self):
        caps0 = [10.0, 20.0, 40.0, 80.0]
        caps4 = [12.0, 15.0, None, 90.0]
        table = {f"a{j}": [caps0[j], caps0[j], caps0[j], caps0[j], caps4[j]] for j in range(4)}
        panel = panel_from(table)
        series = similarity_decay(panel, week(0), 1)
        s0 = [math.log(c + 1.0) for c in caps0]
        s1 = [math.log((c if c is not None else 0.0) + 1.0) for c in caps4]
        m0 = sum(s0) / 4.0
        m1 = sum(s1) / 4.0
        num = sum((a - m0) * (b - m1) for a, b in zip(s0, s1))
        den = math.sqrt(sum((a - m0) ** 2 for a in s0) * sum((b - m1) ** 2 for b in s1))
        assert series.r_s[1] == pytest.approx(num / den, abs=1e-12)

    def test_union_universe_includes_late_arrivals(self):
        table = {
            "a": [1.0] * 9,
            "b": [2.0] * 9,
            "c": [None, None, None, None, 5.0, 5.0, 5.0, 5.0, 5.0],
        }
        panel = panel_from(table)
        union = similarity_decay(panel, week(0), 2, universe="union")
        fixed = similarity_decay(panel, week(0), 2, universe="fixed")
        assert union.universe_size == 3
        assert fixed.universe_size == 2

    def test_permutation_invariance(self):
        rng = np.random.default_rng(1)
        caps = {f"a{j}": list(10 + rng.random(9) * 50) for j in range(5)}
        p1 = panel_from(caps)
        p2 = panel_from(dict(reversed(list(caps.items()))))
        s1 = similarity_decay(p1, week(0), 2)
        s2 = similarity_decay(p2, week(0), 2)
        assert np.allclose(s1.r_s, s2.r_s, atol=1e-14)


class TestDecayModelSelection:
    def test_exact_linear(self):
        tau = np.arange(9.0)
        fits = decay_model_selection(series_from(1.0 - 0.05 * tau))
        assert fits.winner == "linear"
        assert fits.linear.slope == pytest.approx(-0.05, abs=1e-12)
        assert fits.linear.r_squared == pytest.approx(1.0, abs=1e-12)

    def test_exact_exponential(self):
        tau = np.arange(9.0)
        fits = decay_model_selection(series_from(np.exp(-0.3 * tau)))
        assert fits.winner == "exponential"
        assert fits.exp_rate == pytest.approx(-0.3, abs=1e-6)

    def test_negative_values_kept_linear_only(self):
        rs = np.array([1.0, 0.6, 0.2, -0.1, -0.3])
        fits = decay_model_selection(series_from(rs))
        assert fits.linear.n == 5

    def test_too_few_lags(self):
        with pytest.raises(TooFewLags):
            decay_model_selection(series_from([1.0, 0.5, 0.2]))


class TestBetaVsAlpha:
    def _long_panel(self, churn: float, n_assets: int, seed: int):
        rng = np.random.default_rng(seed)
        weeks = 60
        table = {}
        for j in range(n_assets):
            caps = []
            alive = True
            for w in range(weeks):
                if rng.random() < churn:
                    alive = not alive
                caps.append(float(10 + 100 * rng.random()) if alive else None)
            if all(c is None for c in caps):
                caps[0] = 10.0
            table[f"a{j:03d}"] = caps
        return panel_from(table)

    def test_identical_intervals_identical_points(self):
        panel = self._long_panel(0.02, 20, 3)
        iv = Period(week(0), week(51))
        p1, p2 = beta_vs_alpha(panel, [iv, iv])
        assert p1.richness == p2.richness
        assert p1.beta_slope == p2.beta_slope

    def test_faster_churn_steeper_slope(self):
        calm = self._long_panel(0.003, 30, 4)
        churny = self._long_panel(0.12, 60, 5)
        iv = Period(week(0), week(51))
        p_calm = beta_vs_alpha(calm, [iv])[0]
        p_churny = beta_vs_alpha(churny, [iv])[0]
        assert p_churny.richness > p_calm.richness
        assert p_churny.beta_slope < p_calm.beta_slope


class TestOccurrence:
    def test_always_active(self):
        panel = panel_from({"a": [1.0] * 6, "b": [2.0, None, 2.0, None, 2.0, None]})
        rows = occurrence_vs_abundance(panel, Period(week(0), week(5)))
        by_asset = {a: (occ, cap) for a, occ, cap in rows}
        assert by_asset["a"][0] == 1.0
        assert by_asset["b"][0] == 0.5
        assert by_asset["b"][1] == pytest.approx(2.0)

    def test_half_active_constant_cap(self):
        panel = panel_from({"a": [1e4, 1e4, None, None], "b": [1.0] * 4})
        rows = occurrence_vs_abundance(panel, Period(week(0), week(3)))
        by_asset = {a: (occ, cap) for a, occ, cap in rows}
        assert by_asset["a"] == (0.5, 1e4)

    def test_bounds(self):
        rng = np.random.default_rng(6)
        table = {f"a{j}": [float(v) if v > 0.3 else None for v in rng.random(10)] for j in range(8)}
        for key in table:
            if all(v is None for v in table[key]):
                table[key][0] = 1.0
        panel = panel_from(table)
        rows = occurrence_vs_abundance(panel, Period(week(0), week(9)))
        for _, occ, cap in rows:
            assert 0.0 < occ <= 1.0
            assert cap > 0.0
