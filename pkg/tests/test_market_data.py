from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from emdtrade.market_data import (
    CandleFormatError,
    DecisionLabel,
    ReturnSeries,
    label_decisions,
    label_frequencies,
    load_candles,
    log_returns,
    quantile_thresholds,
    write_candles,
)
from tests.conftest import make_series


class TestLoadCandles:
    def test_well_formed_file(self, candle_file):
        series = load_candles(str(candle_file), market_id="abc")
        assert len(series) == 3
        assert series.market_id == "abc"
        assert series.timestamps.tolist() == [1600000000, 1600003600, 1600007200]
        assert series.closes.tolist() == [100.5, 101.5, 102.0]

    def test_duplicate_timestamp_rejected(self, tmp_path):
        path = tmp_path / "dup.csv"
        path.write_text(
            "timestamp,open,high,low,close,volume\n"
            "1600000000,100,101,99,100,1\n"
            "1600000000,100,101,99,100,1\n"
        )
        with pytest.raises(CandleFormatError, match="not greater than previous"):
            load_candles(str(path))

    def test_zero_close_names_row(self, tmp_path):
        path = tmp_path / "zero.csv"
        path.write_text(
            "timestamp,open,high,low,close,volume\n"
            "1600000000,100,101,99,100,1\n"
            "1600003600,100,101,0,0,1\n"
        )
        with pytest.raises(CandleFormatError, match="line 3"):
            load_candles(str(path))

    def test_bad_header(self, tmp_path):
        path = tmp_path / "hdr.csv"
        path.write_text("time,open,high,low,close,volume\n1,2,3,1,2,1\n")
        with pytest.raises(CandleFormatError, match="bad header"):
            load_candles(str(path))

    def test_wrong_field_count(self, tmp_path):
        path = tmp_path / "fields.csv"
        path.write_text("timestamp,open,high,low,close,volume\n1600000000,100,101,99,100\n")
        with pytest.raises(CandleFormatError, match="line 2"):
            load_candles(str(path))

    def test_non_numeric_field(self, tmp_path):
        path = tmp_path / "nan.csv"
        path.write_text("timestamp,open,high,low,close,volume\n1600000000,abc,101,99,100,1\n")
        with pytest.raises(CandleFormatError, match="line 2"):
            load_candles(str(path))

    def test_low_above_body_rejected(self, tmp_path):
        path = tmp_path / "ohlc.csv"
        path.write_text(
            "timestamp,open,high,low,close,volume\n"
            "1600000000,100,101,99,100,1\n"
            "1600003600,100,101,100.5,100.2,1\n"
        )
        with pytest.raises(CandleFormatError, match="line 3"):
            load_candles(str(path))

    def test_too_few_rows(self, tmp_path):
        path = tmp_path / "one.csv"
        path.write_text("timestamp,open,high,low,close,volume\n1600000000,100,101,99,100,1\n")
        with pytest.raises(CandleFormatError, match="at least 2"):
            load_candles(str(path))

    def test_missing_file(self, tmp_path):
        with pytest.raises(CandleFormatError, match="cannot read"):
            load_candles(str(tmp_path / "missing.csv"))

    def test_write_read_roundtrip(self, tmp_path):
        series = make_series([100.0, 101.5, 99.25, 103.0])
        path = tmp_path / "rt.csv"
        write_candles(series, str(path))
        loaded = load_candles(str(path))
        np.testing.assert_array_equal(loaded.closes, series.closes)
        np.testing.assert_array_equal(loaded.timestamps, series.timestamps)


class TestLogReturns:
    def test_identical_prices(self):
        series = make_series([100.0, 100.0])
        assert log_returns(series).returns.tolist() == [0.0]

    def test_up_move(self):
        series = make_series([100.0, 110.0])
        assert log_returns(series).returns[0] == pytest.approx(0.0953102, abs=1e-6)

    def test_down_move(self):
        series = make_series([100.0, 90.0])
        assert log_returns(series).returns[0] == pytest.approx(-0.1053605, abs=1e-6)

    def test_length(self, walk_series):
        assert len(log_returns(walk_series)) == len(walk_series) - 1

    def test_cumsum_round_trip(self, walk_series):
        returns = log_returns(walk_series).returns
        recon = walk_series.closes[0] * np.exp(np.cumsum(returns))
        np.testing.assert_allclose(recon, walk_series.closes[1:], rtol=1e-12)


class TestQuantileThresholds:
    def test_hand_interpolation(self):
        # h = (n-1)p = 4 * 0.035 = 0.14 -> -2 + 0.14 * 1; upper mirrors at p = 0.965
        lower, upper = quantile_thresholds(np.array([-2.0, -1.0, 0.0, 1.0, 2.0]), q=0.035)
        assert lower == pytest.approx(-1.86, abs=1e-12)
        assert upper == pytest.approx(1.86, abs=1e-12)

    def test_symmetric_data(self):
        rng = np.random.default_rng(0)
        x = rng.standard_normal(501)
        sym = np.concatenate([x, -x])
        lower, upper = quantile_thresholds(sym, q=0.035)
        assert lower == pytest.approx(-upper, abs=1e-12)

    def test_constant_data(self):
        lower, upper = quantile_thresholds(np.array([5.0, 5.0, 5.0]), q=0.2)
        assert (lower, upper) == (5.0, 5.0)

    def test_empty_rejected(self):
        with pytest.raises(ValueError, match="empty"):
            quantile_thresholds(np.array([]))

    @pytest.mark.parametrize("q", [0.0, 0.5, -0.1, 0.9])
    def test_bad_fraction_rejected(self, q):
        with pytest.raises(ValueError, match="quantile fraction"):
            quantile_thresholds(np.array([1.0, 2.0]), q=q)


class TestLabelDecisions:
    def _label_one(self, value, lower, upper):
        labeled = label_decisions(ReturnSeries(returns=np.array([value])), lower, upper)
        return DecisionLabel(int(labeled.labels[0]))

    def test_interior_is_hold(self):
        assert self._label_one(0.0, -0.01, 0.01) is DecisionLabel.HOLD

    def test_below_lower_is_sell(self):
        assert self._label_one(-0.02, -0.01, 0.01) is DecisionLabel.SELL

    def test_boundary_is_hold(self):
        assert self._label_one(0.01, -0.01, 0.01) is DecisionLabel.HOLD
        assert self._label_one(-0.01, -0.01, 0.01) is DecisionLabel.HOLD

    def test_crossed_thresholds_rejected(self):
        with pytest.raises(ValueError, match="exceeds"):
            label_decisions(ReturnSeries(returns=np.array([0.0])), 0.02, -0.02)

    @settings(max_examples=50, deadline=None)
    @given(st.lists(st.floats(-1, 1, allow_nan=False), min_size=1, max_size=80), st.data())
    def test_counts_match_brute_force(self, values, data):
        returns = np.array(values)
        lower = data.draw(st.floats(-0.5, 0.5))
        upper = data.draw(st.floats(lower, 1.0))
        labeled = label_decisions(ReturnSeries(returns=returns), lower, upper)
        assert np.sum(labeled.labels == DecisionLabel.SELL) == sum(1 for v in values if v < lower)
        assert np.sum(labeled.labels == DecisionLabel.BUY) == sum(1 for v in values if v > upper)

    @pytest.mark.parametrize("seed", [0, 1, 2, 3, 4])
    def test_class_fraction_band(self, seed):
        # tie-free continuous returns at q = 0.035
        rng = np.random.default_rng(seed)
        returns = rng.standard_normal(1000) * 0.01
        q = 0.035
        lower, upper = quantile_thresholds(returns, q)
        labeled = label_decisions(ReturnSeries(returns=returns), lower, upper)
        n = len(returns)
        for cls in (DecisionLabel.SELL, DecisionLabel.BUY):
            frac = np.sum(labeled.labels == cls) / n
            assert q - 2 / n <= frac <= q + 2 / n

    @pytest.mark.parametrize(
        "transform",
        [lambda x: 2.0 * x + 1.0, np.arctan, lambda x: x**3, lambda x: np.expm1(x)],
    )
    def test_strictly_increasing_transform_invariance(self, transform):
        rng = np.random.default_rng(3)
        returns = rng.standard_normal(500) * 0.02
        lower, upper = quantile_thresholds(returns)
        base = label_decisions(ReturnSeries(returns=returns), lower, upper)
        mapped = label_decisions(
            ReturnSeries(returns=transform(returns)), float(transform(np.array(lower))), float(transform(np.array(upper)))
        )
        np.testing.assert_array_equal(base.labels, mapped.labels)


class TestSeriesValidation:
    def test_valid_series_passes(self, walk_series):
        walk_series.validate()

    def test_negative_volume_rejected(self, walk_series):
        walk_series.volumes[3] = -1.0
        with pytest.raises(CandleFormatError, match="row 4"):
            walk_series.validate()

    def test_gap_count(self):
        series = make_series([100.0, 101.0, 102.0, 101.0])
        assert series.gap_count() == 0
        series.timestamps[3] += 7200  # one skipped hour
        assert series.gap_count() == 1

    def test_label_frequencies_sum_to_one(self, walk_labeled):
        freqs = label_frequencies(walk_labeled.labels)
        assert math.isclose(sum(freqs.values()), 1.0)
