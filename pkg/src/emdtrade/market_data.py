"""Candle loading, log returns, and quantile-threshold decision labels."""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

CANDLE_HEADER = ("timestamp", "open", "high", "low", "close", "volume")


class CandleFormatError(ValueError):
    """A candle file (or in-memory series) violates the expected schema."""


class DecisionLabel(enum.IntEnum):
    """Trading decision alphabet with stable serialization codes."""

    SELL = 0
    HOLD = 1
    BUY = 2


@dataclass(frozen=True)
class Candle:
    """One OHLCV record at a fixed timestamp (epoch seconds, UTC)."""

    timestamp: int
    open: float
    high: float
    low: float
    close: float
    volume: float

    def check(self) -> None:
        prices = (self.open, self.high, self.low, self.close)
        if not all(np.isfinite(p) and p > 0 for p in prices):
            raise CandleFormatError("prices must be finite and strictly positive")
        body_lo, body_hi = min(self.open, self.close), max(self.open, self.close)
        if not (self.low <= body_lo and body_hi <= self.high):
            raise CandleFormatError("requires low <= min(open, close) <= max(open, close) <= high")
        if not (np.isfinite(self.volume) and self.volume >= 0):
            raise CandleFormatError("volume must be finite and non-negative")


@dataclass
class CandleSeries:
    """Time-ordered hourly candles for one market, stored as parallel arrays."""

    market_id: str
    timestamps: np.ndarray
    opens: np.ndarray
    highs: np.ndarray
    lows: np.ndarray
    closes: np.ndarray
    volumes: np.ndarray

    def __len__(self) -> int:
        return len(self.timestamps)

    def validate(self) -> None:
        n = len(self.timestamps)
        if n < 2:
            raise CandleFormatError("a candle series needs at least 2 candles")
        for arr in (self.opens, self.highs, self.lows, self.closes, self.volumes):
            if len(arr) != n:
                raise CandleFormatError("column lengths disagree")
        if np.any(np.diff(self.timestamps) <= 0):
            bad = int(np.nonzero(np.diff(self.timestamps) <= 0)[0][0]) + 1
            raise CandleFormatError(f"timestamps not strictly increasing at row {bad + 1}")
        for i in range(n):
            try:
                self.candle(i).check()
            except CandleFormatError as exc:
                raise CandleFormatError(f"row {i + 1}: {exc}") from None

    def candle(self, i: int) -> Candle:
        return Candle(
            timestamp=int(self.timestamps[i]),
            open=float(self.opens[i]),
            high=float(self.highs[i]),
            low=float(self.lows[i]),
            close=float(self.closes[i]),
            volume=float(self.volumes[i]),
        )

    def head(self, n: int) -> "CandleSeries":
        """First ``n`` candles as a new series."""
        return CandleSeries(
            market_id=self.market_id,
            timestamps=self.timestamps[:n].copy(),
            opens=self.opens[:n].copy(),
            highs=self.highs[:n].copy(),
            lows=self.lows[:n].copy(),
            closes=self.closes[:n].copy(),
            volumes=self.volumes[:n].copy(),
        )

    def gap_count(self) -> int:
        """Number of inter-candle steps longer than the median step.

        Gaps are permitted (returns are computed between consecutive stored
        candles regardless of wall-clock distance); this count is surfaced in
        run metadata so gappy inputs are visible.
        """
        diffs = np.diff(self.timestamps)
        if len(diffs) == 0:
            return 0
        return int(np.sum(diffs > np.median(diffs)))


@dataclass
class ReturnSeries:
    """Log returns between consecutive closes; returns[k] spans candle k -> k+1."""

    returns: np.ndarray
    aligned_index: int = 0

    def __len__(self) -> int:
        return len(self.returns)


@dataclass
class LabeledSeries:
    """Returns plus Sell/Hold/Buy codes from quantile thresholds."""

    returns: ReturnSeries
    labels: np.ndarray
    lower_threshold: float
    upper_threshold: float


def load_candles(path: str, market_id: str | None = None) -> CandleSeries:
    """Parse a delimited candle file into a validated :class:`CandleSeries`.

    Expected schema: UTF-8 text, header row ``timestamp,open,high,low,close,volume``,
    one candle per line, integer epoch-second timestamps, ``.`` decimal separator.
    Rows are validated in file order; no silent reordering is applied.
    """
    try:
        with open(path, "r", encoding="utf-8") as fh:
            lines = fh.read().splitlines()
    except OSError as exc:
        raise CandleFormatError(f"cannot read candle file {path!r}: {exc}") from exc
    if not lines:
        raise CandleFormatError(f"{path}: empty file")
    header = tuple(col.strip() for col in lines[0].split(","))
    if header != CANDLE_HEADER:
        raise CandleFormatError(f"{path}: bad header {header!r}, expected {','.join(CANDLE_HEADER)}")

    rows = []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        parts = line.split(",")
        if len(parts) != 6:
            raise CandleFormatError(f"{path}: line {lineno}: expected 6 fields, got {len(parts)}")
        try:
            candle = Candle(
                timestamp=int(parts[0]),
                open=float(parts[1]),
                high=float(parts[2]),
                low=float(parts[3]),
                close=float(parts[4]),
                volume=float(parts[5]),
            )
            candle.check()
        except (ValueError, CandleFormatError) as exc:
            raise CandleFormatError(f"{path}: line {lineno}: {exc}") from None
        rows.append(candle)

    if len(rows) < 2:
        raise CandleFormatError(f"{path}: need at least 2 candles, got {len(rows)}")
    timestamps = np.array([c.timestamp for c in rows], dtype=np.int64)
    increasing = np.diff(timestamps) > 0
    if not np.all(increasing):
        bad = int(np.nonzero(~increasing)[0][0])
        raise CandleFormatError(
            f"{path}: line {bad + 3}: timestamp {timestamps[bad + 1]} not greater than previous {timestamps[bad]}"
        )
    series = CandleSeries(
        market_id=market_id if market_id is not None else str(path),
        timestamps=timestamps,
        opens=np.array([c.open for c in rows], dtype=float),
        highs=np.array([c.high for c in rows], dtype=float),
        lows=np.array([c.low for c in rows], dtype=float),
        closes=np.array([c.close for c in rows], dtype=float),
        volumes=np.array([c.volume for c in rows], dtype=float),
    )
    return series


def write_candles(series: CandleSeries, path: str) -> None:
    """Write a candle series in the same schema :func:`load_candles` reads."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(",".join(CANDLE_HEADER) + "\n")
        for i in range(len(series)):
            fh.write(
                f"{int(series.timestamps[i])},{float(series.opens[i])!r},{float(series.highs[i])!r},"
                f"{float(series.lows[i])!r},{float(series.closes[i])!r},{float(series.volumes[i])!r}\n"
            )


def log_returns(series: CandleSeries) -> ReturnSeries:
    """Log return of consecutive closes: returns[t] = ln(close(t+1) / close(t))."""
    closes = np.asarray(series.closes, dtype=float)
    if len(closes) < 2:
        raise ValueError("need at least 2 candles to compute returns")
    return ReturnSeries(returns=np.log(closes[1:] / closes[:-1]), aligned_index=0)


def quantile_thresholds(returns: ReturnSeries | np.ndarray, q: float = 0.035) -> tuple[float, float]:
    """Empirical lower/upper thresholds at quantiles q and 1 - q.

    Uses the linear-interpolation quantile rule: on sorted data,
    h = (n - 1) * p and value = x[floor(h)] + (h - floor(h)) * (x[floor(h) + 1] - x[floor(h)]).
    """
    values = returns.returns if isinstance(returns, ReturnSeries) else np.asarray(returns, dtype=float)
    if len(values) == 0:
        raise ValueError("empty return series")
    if not 0.0 < q < 0.5:
        raise ValueError(f"quantile fraction must be in (0, 0.5), got {q}")
    lower = float(np.quantile(values, q))
    upper = float(np.quantile(values, 1.0 - q))
    return lower, upper


def label_decisions(returns: ReturnSeries, lower: float, upper: float) -> LabeledSeries:
    """Assign Sell iff return < lower, Buy iff return > upper, Hold otherwise.

    Comparisons are strict on both sides, so boundary equality maps to Hold.
    """
    if lower > upper:
        raise ValueError(f"lower threshold {lower} exceeds upper threshold {upper}")
    values = returns.returns
    labels = np.full(len(values), int(DecisionLabel.HOLD), dtype=np.int64)
    labels[values < lower] = int(DecisionLabel.SELL)
    labels[values > upper] = int(DecisionLabel.BUY)
    return LabeledSeries(returns=returns, labels=labels, lower_threshold=float(lower), upper_threshold=float(upper))


def label_frequencies(labels: np.ndarray) -> dict[str, float]:
    """Fraction of each decision class, for run metadata."""
    n = max(len(labels), 1)
    counts = np.bincount(labels, minlength=3)
    return {
        "sell": float(counts[int(DecisionLabel.SELL)]) / n,
        "hold": float(counts[int(DecisionLabel.HOLD)]) / n,
        "buy": float(counts[int(DecisionLabel.BUY)]) / n,
    }
