"""Rolling-window feature extraction aligned to next-hour decision targets."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .market_data import CandleSeries, LabeledSeries

FEATURE_NAMES = (
    "buy_prop",
    "sell_prop",
    "close",
    "lm_intercept",
    "lm_slope",
    "peak_curv",
    "peak_mag",
    "est_pct_change",
)

FEATURE_CONVENTIONS = {
    "buy_prop/sell_prop": "label fractions over the w labels ending one step before the window end",
    "close": "close price at the window end",
    "lm_intercept/lm_slope": "OLS of window closes against local index 0..w-1",
    "peak_curv/peak_mag": "means of second difference / height over strict interior peaks, (0, 0) when none",
    "est_pct_change": "last realized log return inside the window",
}


@dataclass(frozen=True)
class FeatureVector:
    """The 8 per-window features."""

    buy_proportion: float
    sell_proportion: float
    close_price: float
    lm_intercept: float
    lm_slope: float
    peaks_avg_curvature: float
    peaks_avg_magnitude: float
    est_pct_change: float

    def as_array(self) -> np.ndarray:
        return np.array(
            [
                self.buy_proportion,
                self.sell_proportion,
                self.close_price,
                self.lm_intercept,
                self.lm_slope,
                self.peaks_avg_curvature,
                self.peaks_avg_magnitude,
                self.est_pct_change,
            ],
            dtype=float,
        )


@dataclass
class FeatureMatrix:
    """Feature rows ordered by window end, each aligned to its next-hour target label."""

    market_id: str
    window_length: int
    window_ends: np.ndarray
    X: np.ndarray
    targets: np.ndarray

    def __len__(self) -> int:
        return len(self.window_ends)

    def row(self, i: int) -> FeatureVector:
        v = self.X[i]
        return FeatureVector(*(float(x) for x in v))


def fit_window_linear_model(window: np.ndarray) -> tuple[float, float]:
    """Ordinary least squares of the window values against k = 0..w-1."""
    y = np.asarray(window, dtype=float)
    w = len(y)
    if w < 2:
        raise ValueError("linear model needs a window of at least 2 values")
    k = np.arange(w, dtype=float)
    k_mean = k.mean()
    y_mean = y.mean()
    denom = np.sum((k - k_mean) ** 2)
    slope = float(np.sum((k - k_mean) * (y - y_mean)) / denom)
    intercept = float(y_mean - slope * k_mean)
    return intercept, slope


def peak_statistics(window: np.ndarray) -> tuple[float, float]:
    """Mean curvature and mean height over strict interior peaks.

    A peak is an interior index k with y[k-1] < y[k] > y[k+1]; plateau ties are
    not peaks. Curvature is the second difference y[k-1] - 2*y[k] + y[k+1].
    Returns (0, 0) when the window has no peaks.
    """
    y = np.asarray(window, dtype=float)
    if len(y) < 3:
        raise ValueError("peak statistics need a window of at least 3 values")
    interior = np.arange(1, len(y) - 1)
    is_peak = (y[interior] > y[interior - 1]) & (y[interior] > y[interior + 1])
    peaks = interior[is_peak]
    if len(peaks) == 0:
        return 0.0, 0.0
    curvature = y[peaks - 1] - 2.0 * y[peaks] + y[peaks + 1]
    return float(curvature.mean()), float(y[peaks].mean())


def extract_features(
    labeled: LabeledSeries,
    candles: CandleSeries,
    window_length: int = 15,
    include_window_end_label: bool = False,
) -> FeatureMatrix:
    """Slide a window over the close series and emit one feature row per window end.

    Row t covers closes at indices t-w+1 .. t and is paired with target label(t),
    which encodes the close move from t to t+1. Label proportions count the w
    labels at t-w .. t-1 (clipped to the available range for the first row) so
    the target label itself never feeds its own features; the
    ``include_window_end_label`` variant shifts that range to t-w+1 .. t.
    """
    closes = np.asarray(candles.closes, dtype=float)
    labels = np.asarray(labeled.labels)
    returns = np.asarray(labeled.returns.returns, dtype=float)
    return _extract_from_arrays(
        closes,
        labels,
        returns,
        window_length,
        include_window_end_label,
        market_id=candles.market_id,
    )


def _extract_from_arrays(
    closes: np.ndarray,
    labels: np.ndarray,
    returns: np.ndarray,
    window_length: int,
    include_window_end_label: bool = False,
    market_id: str = "",
) -> FeatureMatrix:
    w = int(window_length)
    if w < 3:
        raise ValueError(f"window length must be >= 3, got {w}")
    n_labels = len(labels)
    if len(closes) < w + 1 or n_labels < w:
        raise ValueError(
            f"insufficient data: need at least {w + 1} candles for one window, got {len(closes)}"
        )

    from .market_data import DecisionLabel

    ends = np.arange(w - 1, n_labels, dtype=np.int64)
    X = np.empty((len(ends), len(FEATURE_NAMES)), dtype=float)
    for i, t in enumerate(ends):
        window = closes[t - w + 1 : t + 1]
        if include_window_end_label:
            recent = labels[t - w + 1 : t + 1]
        else:
            recent = labels[max(0, t - w) : t]
        buy_prop = float(np.sum(recent == int(DecisionLabel.BUY))) / w
        sell_prop = float(np.sum(recent == int(DecisionLabel.SELL))) / w
        intercept, slope = fit_window_linear_model(window)
        curv, mag = peak_statistics(window)
        X[i] = (buy_prop, sell_prop, closes[t], intercept, slope, curv, mag, returns[t - 1])
    return FeatureMatrix(
        market_id=market_id,
        window_length=w,
        window_ends=ends,
        X=X,
        targets=labels[ends].astype(np.int64),
    )


def column_stats(X: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Per-column mean and standard deviation; zero spread maps to std 1."""
    X = np.asarray(X, dtype=float)
    mean = X.mean(axis=0)
    std = X.std(axis=0)
    std = np.where(std > 0.0, std, 1.0)
    return mean, std


def standardize(X: np.ndarray, mean: np.ndarray, std: np.ndarray) -> np.ndarray:
    """Apply a previously fitted z-score map."""
    return (np.asarray(X, dtype=float) - mean) / std


def write_feature_matrix(matrix: FeatureMatrix, path: str) -> None:
    """Serialize rows as delimited text for audit and cross-run diffing."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("t," + ",".join(FEATURE_NAMES) + ",target\n")
        for i in range(len(matrix)):
            cells = ",".join(repr(float(x)) for x in matrix.X[i])
            fh.write(f"{int(matrix.window_ends[i])},{cells},{int(matrix.targets[i])}\n")
