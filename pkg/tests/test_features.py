from __future__ import annotations

import numpy as np
import pytest

from emdtrade.features import (
    FEATURE_NAMES,
    extract_features,
    column_stats,
    fit_window_linear_model,
    peak_statistics,
    standardize,
    write_feature_matrix,
)
from emdtrade.market_data import (
    DecisionLabel,
    LabeledSeries,
    ReturnSeries,
    label_decisions,
    log_returns,
    quantile_thresholds,
)
from tests.conftest import make_series


def labeled_from(series, q=0.035):
    returns = log_returns(series)
    lower, upper = quantile_thresholds(returns, q)
    return label_decisions(returns, lower, upper)


class TestWindowLinearModel:
    def test_constant(self):
        assert fit_window_linear_model(np.array([5.0, 5.0, 5.0])) == (5.0, 0.0)

    def test_exact_fit(self):
        assert fit_window_linear_model(np.array([1.0, 3.0, 5.0])) == (1.0, 2.0)

    def test_matches_normal_equations_oracle(self):
        rng = np.random.default_rng(42)
        for _ in range(20):
            window = rng.normal(100, 5, 15)
            intercept, slope = fit_window_linear_model(window)
            design = np.column_stack([np.ones(15), np.arange(15.0)])
            coef, *_ = np.linalg.lstsq(design, window, rcond=None)
            assert intercept == pytest.approx(coef[0], abs=1e-9)
            assert slope == pytest.approx(coef[1], abs=1e-9)

    def test_too_short_rejected(self):
        with pytest.raises(ValueError):
            fit_window_linear_model(np.array([1.0]))


class TestPeakStatistics:
    def test_strictly_increasing_has_no_peaks(self):
        assert peak_statistics(np.arange(10.0)) == (0.0, 0.0)

    def test_single_peak(self):
        assert peak_statistics(np.array([0.0, 1.0, 0.0])) == (-2.0, 1.0)

    def test_two_peaks(self):
        # curvatures -4 and -8, magnitudes 2 and 4
        assert peak_statistics(np.array([0.0, 2.0, 0.0, 4.0, 0.0])) == (-6.0, 3.0)

    def test_plateau_is_not_a_peak(self):
        assert peak_statistics(np.array([0.0, 1.0, 1.0, 0.0])) == (0.0, 0.0)

    def test_curvature_nonpositive_at_peaks(self):
        rng = np.random.default_rng(9)
        for _ in range(50):
            window = rng.standard_normal(15)
            curv, _ = peak_statistics(window)
            assert curv <= 0.0

    def test_too_short_rejected(self):
        with pytest.raises(ValueError):
            peak_statistics(np.array([1.0, 2.0]))


class TestExtractFeatures:
    def test_row_count_20_candles(self):
        series = make_series(100.0 + np.sin(np.arange(20.0)))
        labeled = labeled_from(series)
        matrix = extract_features(labeled, series, window_length=15)
        # brute-force enumeration of usable window ends
        n_labels = len(labeled.labels)
        expected_ends = [t for t in range(n_labels) if t >= 14]
        assert matrix.window_ends.tolist() == expected_ends == [14, 15, 16, 17, 18]
        assert len(matrix) == 5

    def test_targets_align_to_window_end(self, walk_series):
        labeled = labeled_from(walk_series)
        matrix = extract_features(labeled, walk_series, window_length=15)
        for i, t in enumerate(matrix.window_ends):
            assert matrix.targets[i] == labeled.labels[t]

    def test_constant_closes(self):
        series = make_series(np.full(30, 42.0))
        labeled = labeled_from(series)
        matrix = extract_features(labeled, series, window_length=15)
        names = list(FEATURE_NAMES)
        assert np.all(matrix.X[:, names.index("lm_intercept")] == 42.0)
        assert np.all(matrix.X[:, names.index("lm_slope")] == 0.0)
        assert np.all(matrix.X[:, names.index("peak_curv")] == 0.0)
        assert np.all(matrix.X[:, names.index("peak_mag")] == 0.0)
        assert np.all(matrix.X[:, names.index("close")] == 42.0)

    def test_exact_linear_window(self):
        closes = 3.0 + 2.0 * np.arange(16.0)
        series = make_series(closes)
        labeled = labeled_from(series)
        matrix = extract_features(labeled, series, window_length=15)
        names = list(FEATURE_NAMES)
        assert matrix.X[0, names.index("lm_intercept")] == pytest.approx(3.0, abs=1e-9)
        assert matrix.X[0, names.index("lm_slope")] == pytest.approx(2.0, abs=1e-9)

    def test_proportions_match_brute_force(self, walk_series):
        labeled = labeled_from(walk_series, q=0.2)  # plenty of buy/sell labels
        w = 15
        matrix = extract_features(labeled, walk_series, window_length=w)
        names = list(FEATURE_NAMES)
        for i, t in enumerate(matrix.window_ends):
            recent = labeled.labels[max(0, t - w) : t]
            assert matrix.X[i, names.index("buy_prop")] == np.sum(recent == DecisionLabel.BUY) / w
            assert matrix.X[i, names.index("sell_prop")] == np.sum(recent == DecisionLabel.SELL) / w
            assert matrix.X[i, 0] + matrix.X[i, 1] <= 1.0

    def test_window_end_label_variant(self, walk_series):
        labeled = labeled_from(walk_series, q=0.2)
        w = 15
        matrix = extract_features(labeled, walk_series, window_length=w, include_window_end_label=True)
        names = list(FEATURE_NAMES)
        for i, t in enumerate(matrix.window_ends):
            recent = labeled.labels[t - w + 1 : t + 1]
            assert matrix.X[i, names.index("buy_prop")] == np.sum(recent == DecisionLabel.BUY) / w

    def test_est_pct_change_is_last_window_return(self, walk_series):
        labeled = labeled_from(walk_series)
        matrix = extract_features(labeled, walk_series, window_length=15)
        names = list(FEATURE_NAMES)
        for i, t in enumerate(matrix.window_ends):
            assert matrix.X[i, names.index("est_pct_change")] == labeled.returns.returns[t - 1]

    def test_constant_shift_of_closes(self, walk_series):
        # shifting every close by c moves intercept/close/peak_mag by c and
        # leaves slope/curvature/proportions untouched
        labeled = labeled_from(walk_series)
        base = extract_features(labeled, walk_series, window_length=15)
        shifted_series = make_series(walk_series.closes + 250.0)
        shifted = extract_features(labeled, shifted_series, window_length=15)
        names = list(FEATURE_NAMES)
        for col in ("buy_prop", "sell_prop", "lm_slope", "peak_curv"):
            np.testing.assert_allclose(shifted.X[:, names.index(col)], base.X[:, names.index(col)], atol=1e-9)
        for col in ("close", "lm_intercept"):
            np.testing.assert_allclose(
                shifted.X[:, names.index(col)], base.X[:, names.index(col)] + 250.0, atol=1e-8
            )
        # peak magnitude shifts by c only where peaks exist (both are 0 otherwise)
        mag = names.index("peak_mag")
        has_peak = base.X[:, mag] != 0.0
        np.testing.assert_allclose(shifted.X[has_peak, mag], base.X[has_peak, mag] + 250.0, atol=1e-8)

    def test_future_poisoning_leaves_past_rows_unchanged(self, walk_series):
        labeled = labeled_from(walk_series)
        base = extract_features(labeled, walk_series, window_length=15)
        cutoff = int(base.window_ends[len(base) // 2])

        poisoned_closes = walk_series.closes.copy()
        poisoned_closes[cutoff + 1 :] = np.nan
        poisoned_series = make_series(walk_series.closes)
        poisoned_series.closes = poisoned_closes
        poisoned_returns = labeled.returns.returns.copy()
        poisoned_returns[cutoff + 1 :] = np.nan
        poisoned_labels = labeled.labels.copy()
        poisoned_labels[cutoff + 1 :] = 2
        poisoned = LabeledSeries(
            returns=ReturnSeries(returns=poisoned_returns),
            labels=poisoned_labels,
            lower_threshold=labeled.lower_threshold,
            upper_threshold=labeled.upper_threshold,
        )
        out = extract_features(poisoned, poisoned_series, window_length=15)
        keep = base.window_ends <= cutoff
        np.testing.assert_array_equal(out.X[keep], base.X[keep])
        np.testing.assert_array_equal(out.targets[keep], base.targets[keep])

    def test_insufficient_data_rejected(self):
        series = make_series(100.0 + np.arange(10.0))
        labeled = labeled_from(series)
        with pytest.raises(ValueError, match="insufficient data"):
            extract_features(labeled, series, window_length=15)

    def test_window_too_small_rejected(self, walk_series):
        labeled = labeled_from(walk_series)
        with pytest.raises(ValueError, match="window length"):
            extract_features(labeled, walk_series, window_length=2)


class TestStandardization:
    def test_zero_spread_column_keeps_unit_scale(self):
        X = np.array([[1.0, 5.0], [2.0, 5.0], [3.0, 5.0]])
        mean, std = column_stats(X)
        Z = standardize(X, mean, std)
        assert std[1] == 1.0
        np.testing.assert_allclose(Z[:, 1], 0.0)
        np.testing.assert_allclose(Z[:, 0].mean(), 0.0, atol=1e-12)

    def test_write_matrix_format(self, tmp_path, walk_series):
        labeled = labeled_from(walk_series)
        matrix = extract_features(labeled, walk_series, window_length=15)
        path = tmp_path / "features.csv"
        write_feature_matrix(matrix, str(path))
        lines = path.read_text().splitlines()
        assert lines[0] == "t," + ",".join(FEATURE_NAMES) + ",target"
        assert len(lines) == len(matrix) + 1
        first = lines[1].split(",")
        assert first[0] == str(int(matrix.window_ends[0]))
        assert first[-1] == str(int(matrix.targets[0]))
