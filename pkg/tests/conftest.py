from __future__ import annotations

import numpy as np
import pytest

from emdtrade.market_data import CandleSeries, label_decisions, log_returns, quantile_thresholds


def make_series(closes, market_id="test") -> CandleSeries:
    closes = np.asarray(closes, dtype=float)
    n = len(closes)
    opens = np.concatenate([[closes[0]], closes[:-1]])
    return CandleSeries(
        market_id=market_id,
        timestamps=1_600_000_000 + 3600 * np.arange(n, dtype=np.int64),
        opens=opens,
        highs=np.maximum(opens, closes) * 1.001,
        lows=np.minimum(opens, closes) * 0.999,
        closes=closes,
        volumes=np.full(n, 10.0),
    )


def random_walk_series(seed: int, n: int, sigma: float = 0.01) -> CandleSeries:
    rng = np.random.default_rng(seed)
    closes = 100.0 * np.exp(np.cumsum(rng.standard_normal(n) * sigma))
    return make_series(closes, market_id=f"rw{seed}")


@pytest.fixture
def walk_series() -> CandleSeries:
    return random_walk_series(seed=7, n=400)


@pytest.fixture
def walk_labeled(walk_series):
    returns = log_returns(walk_series)
    lower, upper = quantile_thresholds(returns)
    return label_decisions(returns, lower, upper)


@pytest.fixture
def candle_file(tmp_path):
    path = tmp_path / "candles.csv"
    path.write_text(
        "timestamp,open,high,low,close,volume\n"
        "1600000000,100.0,101.0,99.0,100.5,10.0\n"
        "1600003600,100.5,102.0,100.0,101.5,12.0\n"
        "1600007200,101.5,103.0,101.0,102.0,8.0\n"
    )
    return path
