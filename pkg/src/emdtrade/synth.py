"""Synthetic hourly markets with a plantable, feature-visible drift pattern.

The generator emits a geometric random walk whose log returns are Gaussian
noise plus scheduled two-step "bursts" of alternating sign. The first step of
a burst is unpredictable from the candle history; every later step of the same
burst is announced by the previous step, so a learner that reads the realized
change inside its window can call the move. That makes the achievable edge
explicit: see :func:`planted_bayes_apc`.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .market_data import CandleSeries


@dataclass(frozen=True)
class SynthSpec:
    """Parameters of the planted-burst random walk.

    With ``burst_amplitude = 0`` (signal-to-noise 0) returns are i.i.d. noise
    and decision labels carry no learnable structure; with ``noise_sigma = 0``
    the walk is exactly the planted bursts.
    """

    length: int
    seed: int = 0
    market_id: str = "synthetic"
    start_price: float = 100.0
    noise_sigma: float = 0.004
    burst_amplitude: float = 0.05
    burst_period: int = 40
    burst_len: int = 2
    burst_offset: int = 25
    start_timestamp: int = 1_600_000_000

    def __post_init__(self) -> None:
        if self.length < 200:
            raise ValueError(f"length must be >= 200, got {self.length}")
        if self.start_price <= 0:
            raise ValueError("start_price must be positive")
        if self.noise_sigma < 0 or self.burst_amplitude < 0:
            raise ValueError("noise_sigma and burst_amplitude must be >= 0")
        if self.burst_period < self.burst_len + 1 or self.burst_len < 1 or self.burst_offset < 0:
            raise ValueError("burst schedule must satisfy period > len >= 1 and offset >= 0")

    @property
    def signal_to_noise(self) -> float:
        if self.noise_sigma == 0.0:
            return float("inf") if self.burst_amplitude > 0 else 0.0
        return self.burst_amplitude / self.noise_sigma


def planted_drift(spec: SynthSpec, n_returns: int) -> np.ndarray:
    """Deterministic drift term of each return: +/- amplitude inside bursts, else 0.

    Burst k starts at return index offset + k * period and runs for burst_len
    steps with sign (+1 for even k, -1 for odd k).
    """
    drift = np.zeros(n_returns)
    k = 0
    while True:
        start = spec.burst_offset + k * spec.burst_period
        if start + spec.burst_len > n_returns:
            break
        sign = 1.0 if k % 2 == 0 else -1.0
        drift[start : start + spec.burst_len] += sign * spec.burst_amplitude
        k += 1
    return drift


def predictable_steps(spec: SynthSpec, n_returns: int) -> np.ndarray:
    """Return indices whose move is announced by the preceding step of the same burst."""
    steps = []
    k = 0
    while True:
        start = spec.burst_offset + k * spec.burst_period
        if start + spec.burst_len > n_returns:
            break
        steps.extend(range(start + 1, start + spec.burst_len))
        k += 1
    return np.array(steps, dtype=np.int64)


def planted_bayes_apc(spec: SynthSpec, first_return: int, last_return: int) -> float:
    """Expected APC of the best possible policy over return indices [first, last].

    Only burst steps after the first of their burst are predictable from the
    history; each contributes the burst amplitude in expectation. All other
    steps have conditionally symmetric returns, so their best expected profit
    is 0 (hold).
    """
    steps = predictable_steps(spec, last_return + 1)
    in_range = steps[(steps >= first_return) & (steps <= last_return)]
    return float(len(in_range)) * spec.burst_amplitude


def synth_market(spec: SynthSpec, seed: int | None = None) -> CandleSeries:
    """Generate a validated candle series from the spec (optionally reseeded)."""
    if seed is not None:
        spec = replace(spec, seed=seed)
    rng = np.random.default_rng(spec.seed)
    n_returns = spec.length - 1
    returns = planted_drift(spec, n_returns)
    if spec.noise_sigma > 0.0:
        returns = returns + rng.standard_normal(n_returns) * spec.noise_sigma
    else:
        rng.standard_normal(n_returns)  # keep the draw sequence stable across sigma settings

    closes = spec.start_price * np.exp(np.concatenate([[0.0], np.cumsum(returns)]))
    opens = np.concatenate([[spec.start_price], closes[:-1]])
    body_hi = np.maximum(opens, closes)
    body_lo = np.minimum(opens, closes)
    wick = rng.uniform(0.0, 0.001, size=(2, spec.length))
    highs = body_hi * (1.0 + wick[0])
    lows = body_lo * (1.0 - wick[1])
    volumes = np.exp(rng.normal(0.0, 0.5, size=spec.length)) * 100.0

    series = CandleSeries(
        market_id=spec.market_id,
        timestamps=spec.start_timestamp + 3600 * np.arange(spec.length, dtype=np.int64),
        opens=opens,
        highs=highs,
        lows=lows,
        closes=closes,
        volumes=volumes,
    )
    series.validate()
    return series
