"""Empirical mode decomposition by envelope sifting, plus stochasticity components.

A signal is split into intrinsic mode functions (IMFs) ordered fast to slow:
each sifting pass subtracts the mean of the cubic-spline envelopes through the
local maxima and minima until the normalized squared change between passes
drops below a threshold. The IMFs are then grouped by adaptive cutoff indices
into cumulative high/medium/low stochasticity sums and a residual trend.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.interpolate import CubicSpline


@dataclass(frozen=True)
class EmdConfig:
    """Sifting controls: stop threshold, iteration caps, and boundary padding."""

    sd_stop: float = 0.3
    max_sift_iters: int = 50
    max_imfs: int = 12
    boundary_pad_extrema: int = 2

    def __post_init__(self) -> None:
        if not self.sd_stop > 0:
            raise ValueError("sd_stop must be positive")
        if self.max_sift_iters < 1 or self.max_imfs < 1:
            raise ValueError("iteration caps must be >= 1")
        if self.boundary_pad_extrema < 0:
            raise ValueError("boundary_pad_extrema must be >= 0")


@dataclass(frozen=True)
class Imf:
    """One intrinsic mode function; index 1 is the fastest-oscillating mode."""

    values: np.ndarray
    index: int


@dataclass(frozen=True)
class Decomposition:
    """Ordered IMFs plus the final residual for one source series."""

    imfs: tuple[Imf, ...]
    residual: np.ndarray
    source_id: str = ""

    @property
    def n_imfs(self) -> int:
        return len(self.imfs)

    def reconstruct(self) -> np.ndarray:
        total = self.residual.copy()
        for imf in self.imfs:
            total += imf.values
        return total


@dataclass(frozen=True)
class ComponentSet:
    """Cumulative stochasticity sums and the residual trend.

    high/medium/low are nested: medium = high + the IMFs between the first and
    second cutoff, and low extends medium the same way, so low + trend gives
    back the input.
    """

    high: np.ndarray
    medium: np.ndarray
    low: np.ndarray
    trend: np.ndarray
    cutoffs: tuple[int, int, int]


def local_extrema(signal: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Indices of strict interior maxima and minima (plateaus excluded)."""
    y = np.asarray(signal, dtype=float)
    if len(y) < 3:
        empty = np.array([], dtype=np.int64)
        return empty, empty
    interior = np.arange(1, len(y) - 1)
    maxima = interior[(y[interior] > y[interior - 1]) & (y[interior] > y[interior + 1])]
    minima = interior[(y[interior] < y[interior - 1]) & (y[interior] < y[interior + 1])]
    return maxima, minima


def count_interior_extrema(signal: np.ndarray) -> int:
    maxima, minima = local_extrema(signal)
    return len(maxima) + len(minima)


def count_zero_crossings(signal: np.ndarray) -> int:
    """Sign changes along the series, skipping exactly-zero samples."""
    signs = np.sign(np.asarray(signal, dtype=float))
    signs = signs[signs != 0]
    if len(signs) < 2:
        return 0
    return int(np.sum(signs[:-1] != signs[1:]))


def imf_extrema_crossing_gap(signal: np.ndarray, margin: float = 0.05) -> int:
    """|#extrema - #zero-crossings| on the interior slice excluding end margins."""
    y = np.asarray(signal, dtype=float)
    skip = int(len(y) * margin)
    core = y[skip : len(y) - skip] if skip > 0 else y
    return abs(count_interior_extrema(core) - count_zero_crossings(core))


def _envelope(signal: np.ndarray, extrema: np.ndarray, pad: int) -> np.ndarray:
    """Natural cubic spline through the extrema, mirrored across both ends."""
    n = len(signal)
    xs = extrema.astype(float)
    ys = signal[extrema]
    k = min(pad, len(extrema))
    if k > 0:
        left_x = -xs[:k][::-1]
        left_y = ys[:k][::-1]
        right_x = 2.0 * (n - 1) - xs[-k:][::-1]
        right_y = ys[-k:][::-1]
        xs = np.concatenate([left_x, xs, right_x])
        ys = np.concatenate([left_y, ys, right_y])
    spline = CubicSpline(xs, ys, bc_type="natural")
    return spline(np.arange(n, dtype=float))


def mean_envelope(signal: np.ndarray, boundary_pad_extrema: int = 2) -> np.ndarray | None:
    """Pointwise mean of the upper and lower spline envelopes.

    Returns None (the insufficient-extrema outcome) when the signal has fewer
    than 2 interior maxima or fewer than 2 interior minima.
    """
    y = np.asarray(signal, dtype=float)
    maxima, minima = local_extrema(y)
    if len(maxima) < 2 or len(minima) < 2:
        return None
    upper = _envelope(y, maxima, boundary_pad_extrema)
    lower = _envelope(y, minima, boundary_pad_extrema)
    return 0.5 * (upper + lower)


def sift_one_imf(signal: np.ndarray, cfg: EmdConfig = EmdConfig()) -> tuple[np.ndarray, np.ndarray] | None:
    """Extract one IMF from the signal, or None when the signal is a residual.

    Repeats h <- h - mean_envelope(h) until the normalized squared change
    SD = sum_t (h_prev(t) - h(t))^2 / h_prev(t)^2 falls to cfg.sd_stop or the
    iteration cap is hit; terms with h_prev(t) = 0 contribute 0. Returns the
    final h and the proto-residual signal - h. A signal whose envelopes cannot
    be built (fewer than 2 interior extrema, or fewer than 2 maxima or minima)
    cannot be refined: if it already oscillates like a well-formed mode
    (extrema and zero-crossing counts within 1) it is kept whole as the IMF,
    otherwise it is reported as residual rather than half-sifted into a junk
    mode. If the envelopes degrade mid-sift, the current h is kept as the IMF.
    """
    x = np.asarray(signal, dtype=float)
    if not np.all(np.isfinite(x)):
        raise ValueError("signal contains non-finite values")
    if count_interior_extrema(x) < 2:
        return None
    h = x.copy()
    for iteration in range(cfg.max_sift_iters):
        envelope = mean_envelope(h, cfg.boundary_pad_extrema)
        if envelope is None:
            if iteration == 0 and imf_extrema_crossing_gap(x) > 1:
                return None
            break
        h_next = h - envelope
        nonzero = h != 0.0
        sd = float(np.sum((h[nonzero] - h_next[nonzero]) ** 2 / h[nonzero] ** 2))
        h = h_next
        if sd <= cfg.sd_stop:
            break
    return h, x - h


def decompose(signal: np.ndarray, cfg: EmdConfig = EmdConfig(), source_id: str = "") -> Decomposition:
    """Peel IMFs off the running residual until it can no longer be sifted.

    Stops when the residual has < 2 interior extrema, when its envelopes can no
    longer be built, or at cfg.max_imfs. The sum of all IMFs plus the residual
    reconstructs the input up to accumulated rounding.
    """
    x = np.asarray(signal, dtype=float)
    if x.ndim != 1:
        raise ValueError("signal must be one-dimensional")
    if len(x) < 8:
        raise ValueError(f"signal too short to decompose: {len(x)} < 8")
    if not np.all(np.isfinite(x)):
        raise ValueError("signal contains non-finite values")

    residual = x.copy()
    imfs: list[Imf] = []
    while len(imfs) < cfg.max_imfs and count_interior_extrema(residual) >= 2:
        sifted = sift_one_imf(residual, cfg)
        if sifted is None:
            break
        values, residual = sifted
        imfs.append(Imf(values=values, index=len(imfs) + 1))
    return Decomposition(imfs=tuple(imfs), residual=residual, source_id=source_id)


def component_cutoffs(n_imfs: int) -> tuple[int, int, int]:
    """Adaptive cutoff indices (r1, r2, r3) for a decomposition with n_imfs >= 1."""
    if n_imfs < 1:
        raise ValueError("cutoffs are defined for at least one IMF")
    return max(1, n_imfs - 6), max(1, n_imfs - 4), max(1, n_imfs - 2)


def assemble_components(d: Decomposition, trend_includes_residual: bool = True) -> ComponentSet:
    """Group IMFs into cumulative high/medium/low sums and the trend remainder.

    high sums IMFs 1..r1, medium extends it through r2, low through r3, and the
    trend takes IMFs past r3 plus (by default) the residual, so low + trend
    reconstructs the input. With no IMFs at all the whole signal is trend.
    """
    n = len(d.residual)
    total = d.n_imfs
    if total == 0:
        zeros = np.zeros(n)
        trend = d.residual.copy() if trend_includes_residual else np.zeros(n)
        return ComponentSet(high=zeros, medium=zeros.copy(), low=zeros.copy(), trend=trend, cutoffs=(0, 0, 0))
    r1, r2, r3 = component_cutoffs(total)
    stack = np.stack([imf.values for imf in d.imfs])
    high = stack[:r1].sum(axis=0)
    medium = high + stack[r1:r2].sum(axis=0)
    low = medium + stack[r2:r3].sum(axis=0)
    trend = stack[r3:].sum(axis=0)
    if trend_includes_residual:
        trend = trend + d.residual
    return ComponentSet(high=high, medium=medium, low=low, trend=trend, cutoffs=(r1, r2, r3))


def write_decomposition(d: Decomposition, path: str) -> None:
    """Serialize as delimited text: t, input, imf_1..imf_J, residual."""
    reconstructed = d.reconstruct()
    header = ["t", "input"] + [f"imf_{imf.index}" for imf in d.imfs] + ["residual"]
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(",".join(header) + "\n")
        for t in range(len(d.residual)):
            cells = [str(t), repr(float(reconstructed[t]))]
            cells += [repr(float(imf.values[t])) for imf in d.imfs]
            cells.append(repr(float(d.residual[t])))
            fh.write(",".join(cells) + "\n")
