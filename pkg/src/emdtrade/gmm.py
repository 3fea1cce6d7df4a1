"""Full-covariance Gaussian mixtures fit by EM, with BIC model selection."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import solve_triangular
from scipy.special import logsumexp

log = logging.getLogger(__name__)


class DegenerateFitError(RuntimeError):
    """Every EM restart collapsed (singular covariance or vanishing weight)."""


@dataclass(frozen=True)
class GmmConfig:
    """EM controls; min_cluster_size of None resolves to max(50, 5 * d)."""

    g_range: tuple[int, int] = (1, 4)
    tol: float = 1e-6
    max_iters: int = 500
    restarts: int = 10
    ridge: float = 1e-6
    seed: int = 0
    min_cluster_size: int | None = None

    def __post_init__(self) -> None:
        lo, hi = self.g_range
        if lo < 1 or hi < lo:
            raise ValueError(f"bad component range {self.g_range}")
        if self.tol <= 0 or self.max_iters < 1 or self.restarts < 1 or self.ridge <= 0:
            raise ValueError("tol, max_iters, restarts, and ridge must be positive")
        if self.min_cluster_size is not None and self.min_cluster_size < 1:
            raise ValueError("min_cluster_size must be >= 1")

    def resolved_min_cluster_size(self, n_features: int) -> int:
        if self.min_cluster_size is not None:
            return self.min_cluster_size
        return max(50, 5 * n_features)


@dataclass
class GmmModel:
    """A fitted mixture: weights, means, full covariances, and fit diagnostics."""

    weights: np.ndarray
    means: np.ndarray
    covariances: np.ndarray
    log_likelihood: float
    n_params: int
    converged: bool
    iterations: int
    ll_history: tuple[float, ...] = ()
    restart_ll_histories: tuple[tuple[float, ...], ...] = field(default=(), repr=False)

    @property
    def n_components(self) -> int:
        return len(self.weights)

    @property
    def n_features(self) -> int:
        return self.means.shape[1]


@dataclass
class ClusterAssignment:
    """Hard labels plus the posterior responsibility matrix behind them."""

    hard_labels: np.ndarray
    responsibilities: np.ndarray
    cluster_sizes: np.ndarray
    skipped: tuple[int, ...] = ()


def n_mixture_params(g: int, d: int) -> int:
    """Free parameters of a full-covariance mixture: weights + means + covariances."""
    return (g - 1) + g * d + g * d * (d + 1) // 2


def _regularize(cov: np.ndarray, ridge: float) -> np.ndarray:
    d = cov.shape[0]
    scale = float(np.trace(cov)) / d
    if scale <= 0.0:
        scale = 1.0
    return cov + (ridge * scale) * np.eye(d)


def _log_gaussian(X: np.ndarray, mean: np.ndarray, cov: np.ndarray) -> np.ndarray:
    """Log density of N(mean, cov) at each row, via Cholesky."""
    d = X.shape[1]
    chol = np.linalg.cholesky(cov)
    solved = solve_triangular(chol, (X - mean).T, lower=True)
    maha = np.sum(solved**2, axis=0)
    log_det = 2.0 * float(np.sum(np.log(np.diag(chol))))
    return -0.5 * (d * math.log(2.0 * math.pi) + log_det + maha)


def _e_step(
    X: np.ndarray, weights: np.ndarray, means: np.ndarray, covs: np.ndarray
) -> tuple[np.ndarray, float]:
    """Log responsibilities (max-subtracted for stability) and total log-likelihood."""
    g = len(weights)
    log_prob = np.empty((len(X), g))
    for k in range(g):
        log_prob[:, k] = _log_gaussian(X, means[k], covs[k]) + math.log(weights[k])
    norm = logsumexp(log_prob, axis=1, keepdims=True)
    return log_prob - norm, float(norm.sum())


def _seed_means(X: np.ndarray, g: int, rng: np.random.Generator) -> np.ndarray:
    """Distance-weighted (k-means++-style) mean seeding."""
    n = len(X)
    chosen = [int(rng.integers(n))]
    for _ in range(1, g):
        centers = X[chosen]
        d2 = np.min(((X[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2), axis=1)
        total = float(d2.sum())
        if total <= 0.0:
            chosen.append(int(rng.integers(n)))
        else:
            chosen.append(int(rng.choice(n, p=d2 / total)))
    return X[chosen].copy()


def _run_em(X: np.ndarray, g: int, cfg: GmmConfig, rng: np.random.Generator):
    """One EM run; returns (weights, means, covs, ll, converged, iters, history) or None if degenerate."""
    n, d = X.shape
    means = _seed_means(X, g, rng)
    centered = X - X.mean(axis=0)
    pooled = _regularize((centered.T @ centered) / n, cfg.ridge)
    covs = np.repeat(pooled[None, :, :], g, axis=0)
    weights = np.full(g, 1.0 / g)

    history: list[float] = []
    prev_ll: float | None = None
    converged = False
    iterations = 0
    ll = -math.inf
    for iterations in range(1, cfg.max_iters + 1):
        try:
            log_resp, ll = _e_step(X, weights, means, covs)
        except np.linalg.LinAlgError:
            return None
        history.append(ll)
        if prev_ll is not None and abs(ll - prev_ll) <= cfg.tol:
            converged = True
            break
        prev_ll = ll

        resp = np.exp(log_resp)
        nk = resp.sum(axis=0)
        weights = nk / n
        if np.any(weights < 1.0 / (10.0 * n)):
            return None
        means = (resp.T @ X) / nk[:, None]
        for k in range(g):
            diff = X - means[k]
            scatter = (resp[:, k] * diff.T) @ diff / nk[k]
            covs[k] = _regularize(scatter, cfg.ridge)

    if not converged:
        try:
            _, ll = _e_step(X, weights, means, covs)
        except np.linalg.LinAlgError:
            return None
        history.append(ll)
    return weights, means, covs, ll, converged, iterations, tuple(history)


def fit_gmm(X: np.ndarray, g: int, cfg: GmmConfig = GmmConfig()) -> GmmModel:
    """Fit a g-component mixture, keeping the best of cfg.restarts EM runs.

    Restarts are seeded from (cfg.seed, g, restart index) so identical inputs
    give bitwise-identical models. Restarts whose smallest component weight
    falls below 1/(10n), or whose covariance loses positive definiteness, are
    discarded as degenerate.
    """
    X = np.asarray(X, dtype=float)
    if X.ndim != 2:
        raise ValueError("X must be a 2-D row matrix")
    n, d = X.shape
    if g < 1:
        raise ValueError("need at least one component")
    if n < g:
        raise ValueError(f"cannot fit {g} components to {n} rows")
    if not np.all(np.isfinite(X)):
        raise ValueError("X contains non-finite values")

    best = None
    histories: list[tuple[float, ...]] = []
    for restart in range(cfg.restarts):
        rng = np.random.default_rng([cfg.seed, g, restart])
        result = _run_em(X, g, cfg, rng)
        if result is None:
            histories.append(())
            continue
        histories.append(result[6])
        if best is None or result[3] > best[3]:
            best = result
    if best is None:
        raise DegenerateFitError(f"all {cfg.restarts} restarts degenerate for G={g}")

    weights, means, covs, ll, converged, iterations, history = best
    return GmmModel(
        weights=weights,
        means=means,
        covariances=covs,
        log_likelihood=ll,
        n_params=n_mixture_params(g, d),
        converged=converged,
        iterations=iterations,
        ll_history=history,
        restart_ll_histories=tuple(histories),
    )


def bic(model: GmmModel, n: int) -> float:
    """Bayesian Information Criterion: -2 * log-likelihood + p * ln(n); lower is better."""
    return -2.0 * model.log_likelihood + model.n_params * math.log(n)


def select_g_bic(X: np.ndarray, cfg: GmmConfig = GmmConfig()) -> tuple[GmmModel, dict[int, float]]:
    """Fit each component count in cfg.g_range and keep the BIC minimizer.

    Ties go to the smaller G. A component count whose fit fails is skipped
    (and logged) as long as at least one count succeeds.
    """
    X = np.asarray(X, dtype=float)
    n = len(X)
    lo, hi = cfg.g_range
    if hi > n:
        raise ValueError(f"component range {cfg.g_range} exceeds row count {n}")
    bic_by_g: dict[int, float] = {}
    best_model: GmmModel | None = None
    best_bic = math.inf
    for g in range(lo, hi + 1):
        try:
            model = fit_gmm(X, g, cfg)
        except (ValueError, DegenerateFitError) as exc:
            log.warning("GMM fit failed for G=%d: %s", g, exc)
            continue
        value = bic(model, n)
        bic_by_g[g] = value
        if value < best_bic:
            best_bic = value
            best_model = model
    if best_model is None:
        raise DegenerateFitError("no component count produced a usable fit")
    return best_model, bic_by_g


def assign_clusters(
    model: GmmModel, X: np.ndarray, min_cluster_size: int | None = None
) -> ClusterAssignment:
    """Posterior responsibilities and argmax hard labels for each row.

    Ties in the posterior go to the lowest component index. Clusters smaller
    than min_cluster_size (default max(50, 5 * d)) are flagged as skipped so
    downstream training can leave them out.
    """
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[1] != model.n_features:
        raise ValueError(f"dimension mismatch: model has d={model.n_features}, rows have {X.shape}")
    log_resp, _ = _e_step(X, model.weights, model.means, model.covariances)
    resp = np.exp(log_resp)
    hard = np.argmax(resp, axis=1).astype(np.int64)
    sizes = np.bincount(hard, minlength=model.n_components)
    threshold = min_cluster_size if min_cluster_size is not None else max(50, 5 * model.n_features)
    skipped = tuple(int(k) for k in range(model.n_components) if sizes[k] < threshold)
    return ClusterAssignment(hard_labels=hard, responsibilities=resp, cluster_sizes=sizes, skipped=skipped)


def format_cluster_report(row_ids: np.ndarray, assignment: ClusterAssignment) -> str:
    """Delimited text: row_t, hard_label, resp_0..resp_{G-1}."""
    g = assignment.responsibilities.shape[1]
    lines = ["row_t,hard_label," + ",".join(f"resp_{k}" for k in range(g))]
    for i in range(len(row_ids)):
        resp = ",".join(repr(float(r)) for r in assignment.responsibilities[i])
        lines.append(f"{int(row_ids[i])},{int(assignment.hard_labels[i])},{resp}")
    return "\n".join(lines) + "\n"


def format_model_summary(model: GmmModel, bic_by_g: dict[int, float]) -> str:
    """Human-readable weights, means, covariance diagonals, and the BIC table."""
    lines = [
        f"components: {model.n_components}",
        f"log_likelihood: {model.log_likelihood!r}",
        f"converged: {str(model.converged).lower()} after {model.iterations} iterations",
        "bic_by_g: " + ", ".join(f"G={g}: {value!r}" for g, value in sorted(bic_by_g.items())),
    ]
    for k in range(model.n_components):
        lines.append(f"component {k}:")
        lines.append(f"  weight: {float(model.weights[k])!r}")
        lines.append("  mean: " + ", ".join(repr(float(v)) for v in model.means[k]))
        lines.append("  cov_diag: " + ", ".join(repr(float(v)) for v in np.diag(model.covariances[k])))
    return "\n".join(lines) + "\n"
