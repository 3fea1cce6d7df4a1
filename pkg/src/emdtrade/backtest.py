"""Accumulated-percentage-change scoring, temporal splits, and random baseline bands."""

from __future__ import annotations

from dataclasses import dataclass
from math import ceil

import numpy as np

from .learners import random_policy
from .market_data import DecisionLabel


@dataclass(frozen=True)
class BacktestResult:
    """APC plus the per-step profit trail and predicted-decision counts."""

    apc: float
    per_step_pnl: np.ndarray
    n_trades: tuple[int, int, int]
    split: tuple[float, float] | None = None


@dataclass(frozen=True)
class BaselineBand:
    """Mean and 2.5/97.5 percentiles of APC over seeded random policies."""

    mean: float
    p2_5: float
    p97_5: float
    replicates: int


def profit(log_return: float, decision: int, transaction_cost: float = 0.0) -> float:
    """Per-step profit: Buy earns the return, Sell earns its negation, Hold earns 0.

    A non-zero transaction cost is deducted from every non-Hold decision.
    """
    if decision == int(DecisionLabel.BUY):
        return log_return - transaction_cost
    if decision == int(DecisionLabel.SELL):
        return -log_return - transaction_cost
    return 0.0


def apc(
    decisions: np.ndarray,
    next_returns: np.ndarray,
    transaction_cost: float = 0.0,
    split: tuple[float, float] | None = None,
) -> BacktestResult:
    """Sum of per-step profits, pairing each decision with the next realized return."""
    decisions = np.asarray(decisions, dtype=np.int64)
    next_returns = np.asarray(next_returns, dtype=float)
    if len(decisions) != len(next_returns):
        raise ValueError(f"length mismatch: {len(decisions)} decisions vs {len(next_returns)} returns")
    pnl = np.where(
        decisions == int(DecisionLabel.BUY),
        next_returns,
        np.where(decisions == int(DecisionLabel.SELL), -next_returns, 0.0),
    )
    if transaction_cost != 0.0:
        pnl = pnl - transaction_cost * (decisions != int(DecisionLabel.HOLD))
    counts = np.bincount(decisions, minlength=3)
    return BacktestResult(
        apc=float(pnl.sum()),
        per_step_pnl=pnl,
        n_trades=(int(counts[0]), int(counts[1]), int(counts[2])),
        split=split,
    )


def temporal_split(n: int, test_fraction: float) -> tuple[np.ndarray, np.ndarray]:
    """Last ceil(n * f) rows are the test set; everything earlier trains.

    No shuffling: every train index precedes every test index.
    """
    if n < 5:
        raise ValueError(f"need at least 5 rows to split, got {n}")
    if not 0.0 < test_fraction < 1.0:
        raise ValueError(f"test fraction must be in (0, 1), got {test_fraction}")
    n_test = ceil(n * test_fraction)
    if n_test >= n:
        raise ValueError(f"test fraction {test_fraction} leaves no training rows for n={n}")
    return np.arange(n - n_test), np.arange(n - n_test, n)


def baseline_band(
    next_returns: np.ndarray, replicates: int = 1000, seed: int = 0, transaction_cost: float = 0.0
) -> BaselineBand:
    """APC distribution of seeded uniform-random policies on the given returns.

    Replicate i draws its policy from seed + i, so serial and parallel
    evaluation orders agree exactly. Percentiles use the same
    linear-interpolation rule as the quantile thresholds.
    """
    next_returns = np.asarray(next_returns, dtype=float)
    if len(next_returns) == 0:
        raise ValueError("empty return series")
    if replicates < 100:
        raise ValueError(f"need at least 100 replicates, got {replicates}")
    scores = np.empty(replicates)
    for i in range(replicates):
        decisions = random_policy(len(next_returns), seed + i)
        scores[i] = apc(decisions, next_returns, transaction_cost).apc
    p2_5, p97_5 = np.quantile(scores, [0.025, 0.975])
    if not p2_5 <= p97_5:
        raise AssertionError("percentile ordering violated")
    return BaselineBand(mean=float(scores.mean()), p2_5=float(p2_5), p97_5=float(p97_5), replicates=replicates)
