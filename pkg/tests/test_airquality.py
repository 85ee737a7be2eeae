import datetime as dt

import numpy as np
import pandas as pd
import pytest

from jumpmix.airquality import (
    ConfigError, PipelineConfig, PollutantBreakpoints, aqi, aqi_category, conditional_stats,
    indicator_features, load_breakpoints, load_holidays, load_pipeline_config,
    partial_correlation, rolling_correlation, rolling_mean, run_pipeline, sub_index,
    synthetic_airquality,
)
from jumpmix.dataset import Feature, MixedSeries


class TestRolling:
    def test_mean(self):
        assert np.all(rolling_mean(np.full(10, 3.0)) == 3.0)
        assert rolling_mean(np.arange(1, 8.0))[6] == 4

    def test_mean_skips_missing(self):
        x = np.arange(1, 8.0)
        x[2] = np.nan
        assert rolling_mean(x)[6] == pytest.approx(np.mean([1, 2, 4, 5, 6, 7]))

    def test_correlation_signs(self, rng):
        x = rng.normal(size=20)
        assert np.allclose(rolling_correlation(x, 2 * x + 1)[6:], 1)
        assert np.allclose(rolling_correlation(x, -x)[6:], -1)

    def test_correlation_pearson(self):
        x = np.array([1.0, 3, 2, 5, 4, 7, 6])
        y = np.array([2.0, 1, 4, 3, 6, 5, 8])
        mx, my = x.mean(), y.mean()
        r = np.sum((x - mx) * (y - my)) / np.sqrt(np.sum((x - mx) ** 2) * np.sum((y - my) ** 2))
        assert rolling_correlation(x, y)[6] == pytest.approx(r, abs=1e-14)

    def test_correlation_undefined(self):
        out = rolling_correlation(np.ones(7), np.arange(7.0))
        assert np.all(np.isnan(out))


class TestIndicators:
    def series(self):
        dates = pd.to_datetime(["2021-12-24", "2021-12-25", "2021-12-27"]).to_numpy()
        vals = np.array([[0.7, 0.0], [0.71, 0.2], [np.nan, np.nan]])
        return MixedSeries((Feature("WS"), Feature("RF")), vals, dates)

    def test_thresholds_and_calendar(self):
        out = indicator_features(self.series(), holidays=load_holidays())
        f = out.to_frame()
        assert f["Windy"].tolist()[:2] == ["No", "Yes"]
        assert f["Rainy"].tolist()[:2] == ["No", "Yes"]
        assert pd.isna(f["Windy"].iloc[2])
        assert f["Weekend"].tolist() == ["No", "Yes", "No"]
        assert f["Holiday"].tolist() == ["No", "Yes", "No"]
        assert f["Month"].tolist() == ["12"] * 3

    def test_holiday_file(self, tmp_path):
        p = tmp_path / "h.txt"
        p.write_text("# comment\n2021-12-27\n")
        assert load_holidays(p) == {dt.date(2021, 12, 27)}
        with pytest.raises(ConfigError):
            load_holidays(tmp_path / "none.txt")


class TestAqi:
    def test_endpoints_and_midpoint(self):
        bp = load_breakpoints()
        for segs in bp.segments.values():
            for c_lo, c_hi, i_lo, i_hi in segs:
                assert sub_index(c_lo, segs)[0] == i_lo
                assert sub_index(c_hi, segs)[0] == i_hi
                assert sub_index((c_lo + c_hi) / 2, segs)[0] == pytest.approx((i_lo + i_hi) / 2)

    def test_overall_is_max(self):
        bp = load_breakpoints()
        res = aqi({"pm25": 40.0, "o3": 10.0, "no2": np.nan}, bp)
        assert set(res.per_pollutant) == {"pm25", "o3"}
        assert res.overall == max(res.per_pollutant.values())
        assert res.category == aqi_category(res.overall)

    def test_clamp(self):
        segs = ((0.0, 10.0, 0.0, 50.0),)
        assert sub_index(25.0, segs) == (50.0, True)
        with pytest.raises(ValueError):
            sub_index(-1.0, segs)

    def test_categories(self):
        assert aqi_category(50) == "Good"
        assert aqi_category(50.5) == "Moderate"
        assert aqi_category(1000) == "Unhealthy"

    @pytest.mark.parametrize("segs", [
        ((0, 10, 0, 50), (12, 20, 51, 100)),
        ((0, 10, 0, 50), (10, 20, 60, 100)),
        ((0, 10, 50, 50),),
    ])
    def test_bad_breakpoints(self, segs):
        with pytest.raises(ConfigError):
            PollutantBreakpoints({"x": segs})

    def test_breakpoint_file(self, tmp_path):
        p = tmp_path / "b.csv"
        p.write_text("# pollutant, c_low, c_high, i_low, i_high\nx, 0, 10, 0, 50\nx, 10, 20, 50, 100\n")
        assert load_breakpoints(p).segments["x"][1] == (10.0, 20.0, 50.0, 100.0)
        with pytest.raises(ConfigError, match="none.csv"):
            load_breakpoints(tmp_path / "none.csv")


class TestConditional:
    def test_single_state(self, rng):
        v = rng.normal(size=(50, 3))
        s = MixedSeries(tuple(Feature(c) for c in ("a", "b", "c")), v)
        rep = conditional_stats(s, np.zeros(50, int), order_column=None)
        assert np.allclose(rep.means_modes.iloc[:, 0].astype(float), v.mean(axis=0))
        assert rep.visits.iloc[0] == 100.0

    def test_independent_columns(self, rng):
        v = rng.normal(size=(20000, 2))
        s = MixedSeries((Feature("a"), Feature("b")), v)
        rep = conditional_stats(s, np.zeros(20000, int), order_column=None)
        assert abs(rep.correlations[0].loc["a", "b"]) < 0.03

    def test_partial_by_hand(self):
        r12, r13, r23 = 0.5, 0.3, 0.4
        corr = np.array([[1, r12, r13], [r12, 1, r23], [r13, r23, 1]])
        z = np.random.default_rng(0).standard_normal((50, 3))
        z -= z.mean(axis=0)
        # whiten, then color, so the sample correlation equals corr exactly
        z = z @ np.linalg.inv(np.linalg.cholesky(np.cov(z, rowvar=False))).T
        z = z @ np.linalg.cholesky(corr).T
        hand = (r12 - r13 * r23) / np.sqrt((1 - r13 ** 2) * (1 - r23 ** 2))
        assert partial_correlation(z)[0, 1] == pytest.approx(hand, abs=1e-12)

    def test_labels_follow_order_column(self):
        v = np.array([[30.0], [31.0], [10.0], [11.0]])
        s = MixedSeries((Feature("PM2.5"),), v)
        rep = conditional_stats(s, np.array([0, 0, 1, 1]), labels=("Low", "High"))
        assert rep.labels == {1: "Low", 0: "High"}


class TestPipeline:
    def test_config_file(self, tmp_path):
        (tmp_path / "bp.csv").write_text("pm25, 0, 1000, 0, 500\n")
        p = tmp_path / "c.ini"
        p.write_text("[pipeline]\nn_states = 3\nlambda_grid = 0:0.2:0.1\nbreakpoints = bp.csv\n"
                     "holidays = none\nseed = 4\n\n[aqi_columns]\nPM2.5 = pm25\n\n"
                     "[categories]\nLow = 100\nHigh = inf\n")
        cfg = load_pipeline_config(p)
        assert cfg.n_states == 3 and cfg.lambda_grid == (0.0, 0.1, 0.2)
        assert cfg.breakpoints == str(tmp_path / "bp.csv") and cfg.holidays == "none"
        assert cfg.aqi_columns == {"PM2.5": "pm25"}
        assert cfg.categories == ((100.0, "Low"), (float("inf"), "High"))

    def test_synthetic_run(self, tmp_path):
        frame, truth = synthetic_airquality(T=200, seed=1)
        csv = tmp_path / "d.csv"
        frame.to_csv(csv, index=False)
        cfg = PipelineConfig(lambda_grid=(0.0, 0.3, 0.6), n_init=3, seed=2)
        rep = run_pipeline(csv, cfg, tmp_path / "out")
        assert rep.meta["K"] == 4 and rep.meta["lambda"] in (0.0, 0.3, 0.6)
        assert len(rep.daily) == 200
        for name in ("report.txt", "daily.csv", "gic.csv", "state_correlations.csv", "report.json"):
            assert (tmp_path / "out" / name).exists()
        assert rep.meta["regime_jumps"] < rep.meta["aqi_category_jumps"]

    def test_constant_input(self, tmp_path):
        frame, _ = synthetic_airquality(T=60, seed=0, constant=True)
        csv = tmp_path / "c.csv"
        frame.to_csv(csv, index=False)
        rep = run_pipeline(csv, PipelineConfig(lambda_grid=(0.0, 0.5), n_init=2, seed=0))
        assert "RF_ma7" in rep.meta["features"]
        assert all(c.startswith("corr7") for c in rep.meta["dropped_features"])
        assert rep.to_text()

    def test_missing_breakpoints(self, tmp_path):
        frame, _ = synthetic_airquality(T=30, seed=0)
        csv = tmp_path / "d.csv"
        frame.to_csv(csv, index=False)
        with pytest.raises(ConfigError, match="nope.csv"):
            run_pipeline(csv, PipelineConfig(breakpoints=str(tmp_path / "nope.csv")))
