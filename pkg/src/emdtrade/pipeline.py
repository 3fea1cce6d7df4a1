"""Experiment grid orchestration: label, cluster, decompose, train, score, report.

A run walks (market x partition x source x learner x test fraction). Every
grid cell owns a seed derived by hashing its coordinates with the global seed,
so any subset of cells — serial, parallel, or via ``--only`` — reproduces the
full run's numbers exactly. Cells that cannot run are reported as skipped rows
with a reason rather than silently dropped.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from . import __version__
from .backtest import apc, baseline_band, temporal_split
from .config import ExperimentConfig, MarketEntry, config_echo
from .emd import EmdConfig, assemble_components, decompose
from .features import FEATURE_CONVENTIONS, FeatureMatrix, column_stats, extract_features, standardize
from .gmm import assign_clusters, format_cluster_report, format_model_summary, select_g_bic
from .learners import LearnerSpec, predict, train
from .market_data import (
    CandleSeries,
    LabeledSeries,
    label_decisions,
    label_frequencies,
    load_candles,
    log_returns,
    quantile_thresholds,
)

log = logging.getLogger(__name__)

SOURCES = ("raw", "high", "medium", "low", "trend")
COMPONENT_SOURCES = ("high", "medium", "low", "trend")

REPORT_COLUMNS = (
    "market_id",
    "cluster",
    "source",
    "learner",
    "test_fraction",
    "apc",
    "baseline_mean",
    "baseline_p2_5",
    "baseline_p97_5",
    "beats_p97_5",
    "n_train",
    "n_test",
    "conf_sell_sell",
    "conf_sell_hold",
    "conf_sell_buy",
    "conf_hold_sell",
    "conf_hold_hold",
    "conf_hold_buy",
    "conf_buy_sell",
    "conf_buy_hold",
    "conf_buy_buy",
    "skip_reason",
)


def derive_seed(*parts) -> int:
    """Stable 64-bit seed from the given coordinates (independent of hash randomization)."""
    text = "\x1f".join(str(p) for p in parts)
    digest = hashlib.sha256(text.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big")


@dataclass
class ReportRow:
    """One grid cell's outcome; a populated skip_reason marks a cell that did not run."""

    market_id: str
    cluster: str
    source: str
    learner: str
    test_fraction: float
    apc: float | None = None
    baseline_mean: float | None = None
    baseline_p2_5: float | None = None
    baseline_p97_5: float | None = None
    beats_p97_5: bool | None = None
    n_train: int | None = None
    n_test: int | None = None
    confusion: tuple[int, ...] | None = None
    skip_reason: str | None = None

    def csv_cells(self) -> list[str]:
        cells = [
            self.market_id,
            self.cluster,
            self.source,
            self.learner,
            repr(float(self.test_fraction)),
        ]
        for value in (self.apc, self.baseline_mean, self.baseline_p2_5, self.baseline_p97_5):
            cells.append("" if value is None else repr(float(value)))
        cells.append("" if self.beats_p97_5 is None else str(self.beats_p97_5).lower())
        cells.append("" if self.n_train is None else str(self.n_train))
        cells.append("" if self.n_test is None else str(self.n_test))
        if self.confusion is None:
            cells.extend([""] * 9)
        else:
            cells.extend(str(c) for c in self.confusion)
        cells.append(self.skip_reason or "")
        return cells


@dataclass
class ExperimentReport:
    rows: list[ReportRow]
    metadata: dict
    cluster_reports: dict[str, str]
    model_summaries: dict[str, str]


@dataclass
class _CellTask:
    """Everything one grid cell needs, picklable for process pools."""

    order: tuple
    market_id: str
    cluster: str
    source: str
    learner: LearnerSpec
    test_fraction: float
    cell_seed: int
    X_train: np.ndarray
    y_train: np.ndarray
    X_test: np.ndarray
    y_test: np.ndarray
    test_returns: np.ndarray
    band: tuple[float, float, float]
    transaction_cost: float


def _evaluate_cell(task: _CellTask) -> ReportRow:
    base = ReportRow(
        market_id=task.market_id,
        cluster=task.cluster,
        source=task.source,
        learner=task.learner.kind.value,
        test_fraction=task.test_fraction,
    )
    try:
        mean, std = column_stats(task.X_train)
        model = train(
            replace(task.learner, seed=task.cell_seed),
            standardize(task.X_train, mean, std),
            task.y_train,
        )
        decisions = predict(model, standardize(task.X_test, mean, std))
        result = apc(
            decisions,
            task.test_returns,
            task.transaction_cost,
            split=(1.0 - task.test_fraction, task.test_fraction),
        )
        confusion = np.zeros((3, 3), dtype=np.int64)
        np.add.at(confusion, (task.y_test, decisions), 1)
        band_mean, p2_5, p97_5 = task.band
        base.apc = result.apc
        base.baseline_mean = band_mean
        base.baseline_p2_5 = p2_5
        base.baseline_p97_5 = p97_5
        base.beats_p97_5 = result.apc > p97_5
        base.n_train = len(task.y_train)
        base.n_test = len(task.y_test)
        base.confusion = tuple(int(c) for c in confusion.ravel())
    except Exception as exc:  # recorded, never silently dropped
        log.warning("cell %s failed: %s", (task.market_id, task.cluster, task.source), exc)
        base.skip_reason = f"cell failed: {exc}"
    return base


def _load_market(entry: MarketEntry) -> CandleSeries:
    series = load_candles(entry.path, market_id=entry.market_id)
    if entry.max_candles is not None:
        if entry.max_candles < 2:
            raise ValueError(f"market {entry.market_id}: max_candles must be >= 2")
        series = series.head(min(entry.max_candles, len(series)))
    return series


def _labels_and_features(
    series: CandleSeries,
    cfg: ExperimentConfig,
    threshold_returns: np.ndarray | None = None,
) -> tuple[LabeledSeries, FeatureMatrix, tuple[float, float]]:
    """Label the return series and extract feature rows.

    When threshold_returns is given (causal mode) the quantile thresholds are
    estimated from that prefix only; labels still cover the full series.
    """
    returns = log_returns(series)
    basis = returns.returns if threshold_returns is None else threshold_returns
    lower, upper = quantile_thresholds(basis, cfg.quantile)
    labeled = label_decisions(returns, lower, upper)
    matrix = extract_features(labeled, series, cfg.window, cfg.include_window_end_label)
    return labeled, matrix, (lower, upper)


def _component_matrices(
    part_X: np.ndarray, emd_cfg: EmdConfig, trend_includes_residual: bool
) -> dict[str, np.ndarray]:
    """Stochasticity components per feature column, using row rank as the sample index."""
    n, d = part_X.shape
    out = {name: np.empty((n, d)) for name in COMPONENT_SOURCES}
    for j in range(d):
        comp = assemble_components(decompose(part_X[:, j], emd_cfg), trend_includes_residual)
        out["high"][:, j] = comp.high
        out["medium"][:, j] = comp.medium
        out["low"][:, j] = comp.low
        out["trend"][:, j] = comp.trend
    return out


def _causal_component_matrices(
    part_X: np.ndarray, split_at: int, emd_cfg: EmdConfig, trend_includes_residual: bool
) -> dict[str, np.ndarray]:
    """Train rows from a train-only decomposition; each test row from the prefix ending at it."""
    n, d = part_X.shape
    out = {name: np.empty((n, d)) for name in COMPONENT_SOURCES}
    for j in range(d):
        comp = assemble_components(decompose(part_X[:split_at, j], emd_cfg), trend_includes_residual)
        out["high"][:split_at, j] = comp.high
        out["medium"][:split_at, j] = comp.medium
        out["low"][:split_at, j] = comp.low
        out["trend"][:split_at, j] = comp.trend
        for r in range(split_at, n):
            step = assemble_components(decompose(part_X[: r + 1, j], emd_cfg), trend_includes_residual)
            out["high"][r, j] = step.high[-1]
            out["medium"][r, j] = step.medium[-1]
            out["low"][r, j] = step.low[-1]
            out["trend"][r, j] = step.trend[-1]
    return out


def _partition_rows(
    matrix: FeatureMatrix,
    cfg: ExperimentConfig,
    market_id: str,
    train_rows: np.ndarray | None = None,
) -> tuple[list[tuple[str, np.ndarray, str | None]], dict | None, str | None, str | None]:
    """Split feature rows into evaluation partitions.

    Returns (partitions, gmm_metadata, cluster_report_text, model_summary_text)
    where each partition is (label, row indices, skip reason). Without GMM the
    single partition is ("all", every row, None). With causal GMM train_rows
    restricts both standardization statistics and the EM fit.
    """
    if not cfg.gmm_enabled:
        return [("all", np.arange(len(matrix)), None)], None, None, None

    fit_rows = train_rows if train_rows is not None else np.arange(len(matrix))
    mean, std = column_stats(matrix.X[fit_rows])
    Z = standardize(matrix.X, mean, std)
    gmm_cfg = replace(cfg.gmm, seed=derive_seed(cfg.seed, market_id, "gmm"))
    model, bic_by_g = select_g_bic(Z[fit_rows], gmm_cfg)
    min_size = gmm_cfg.resolved_min_cluster_size(matrix.X.shape[1])
    assignment = assign_clusters(model, Z, min_size)

    partitions = []
    for g in range(model.n_components):
        rows = np.nonzero(assignment.hard_labels == g)[0]
        reason = None
        if g in assignment.skipped:
            reason = f"cluster size {len(rows)} below min {min_size}"
        partitions.append((str(g), rows, reason))
    meta = {
        "selected_g": model.n_components,
        "bic_by_g": {str(g): float(v) for g, v in bic_by_g.items()},
        "cluster_sizes": [int(s) for s in assignment.cluster_sizes],
        "skipped_clusters": list(assignment.skipped),
        "converged": model.converged,
    }
    report_text = format_cluster_report(matrix.window_ends, assignment)
    summary_text = format_model_summary(model, bic_by_g)
    return partitions, meta, report_text, summary_text


def _filter_match(only: dict[str, str] | None, **coords) -> bool:
    if not only:
        return True
    for key, value in only.items():
        if key in coords and coords[key] != value:
            return False
    return True


def run_experiment(
    cfg: ExperimentConfig, only: dict[str, str] | None = None, jobs: int = 1
) -> ExperimentReport:
    """Run the configured grid and return every cell's outcome plus run metadata."""
    cfg.validate()
    started = time.monotonic()
    causal = cfg.causal_thresholds or cfg.causal_gmm or cfg.causal_emd

    skip_rows: list[tuple[tuple, ReportRow]] = []
    tasks: list[_CellTask] = []
    markets_meta: dict[str, dict] = {}
    cluster_reports: dict[str, str] = {}
    model_summaries: dict[str, str] = {}

    for m_idx, entry in enumerate(cfg.markets):
        if only and "market" in only and only["market"] != entry.market_id:
            continue
        series = _load_market(entry)
        market_meta: dict = {
            "n_candles": len(series),
            "gap_count": series.gap_count(),
        }
        if causal:
            market_meta["thresholds_by_fraction"] = {}
            market_meta["gmm_by_fraction"] = {} if cfg.gmm_enabled else None
            for f_idx, fraction in enumerate(cfg.test_fractions):
                _prepare_market_grid(
                    cfg,
                    entry,
                    series,
                    fraction_subset=[(f_idx, fraction)],
                    m_idx=m_idx,
                    only=only,
                    tasks=tasks,
                    skip_rows=skip_rows,
                    market_meta=market_meta,
                    cluster_reports=cluster_reports,
                    model_summaries=model_summaries,
                )
        else:
            _prepare_market_grid(
                cfg,
                entry,
                series,
                fraction_subset=list(enumerate(cfg.test_fractions)),
                m_idx=m_idx,
                only=only,
                tasks=tasks,
                skip_rows=skip_rows,
                market_meta=market_meta,
                cluster_reports=cluster_reports,
                model_summaries=model_summaries,
            )
        markets_meta[entry.market_id] = market_meta

    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            evaluated = list(pool.map(_evaluate_cell, tasks))
    else:
        evaluated = [_evaluate_cell(task) for task in tasks]

    ordered = sorted(
        [(task.order, row) for task, row in zip(tasks, evaluated)] + skip_rows,
        key=lambda pair: pair[0],
    )
    rows = [row for _, row in ordered]

    metadata = {
        "version": __version__,
        "global_seed": cfg.seed,
        "config": config_echo(cfg),
        "lookahead_flags": {
            "thresholds": "causal (train split only)" if cfg.causal_thresholds else "full-series (LOOK-AHEAD)",
            "gmm": (
                "disabled"
                if not cfg.gmm_enabled
                else ("causal (refit per fraction)" if cfg.causal_gmm else "full-matrix fit (LOOK-AHEAD)")
            ),
            "emd_components": "causal (stepwise extension)" if cfg.causal_emd else "full-series (LOOK-AHEAD)",
        },
        "feature_conventions": dict(FEATURE_CONVENTIONS)
        | {"proportions_include_window_end_label": cfg.include_window_end_label},
        "trend_includes_residual": cfg.trend_includes_residual,
        "markets": markets_meta,
        "n_rows": len(rows),
        "n_skipped": sum(1 for row in rows if row.skip_reason),
        "wall_time_seconds": time.monotonic() - started,
    }
    return ExperimentReport(
        rows=rows,
        metadata=metadata,
        cluster_reports=cluster_reports,
        model_summaries=model_summaries,
    )


def _prepare_market_grid(
    cfg: ExperimentConfig,
    entry: MarketEntry,
    series: CandleSeries,
    fraction_subset: list[tuple[int, float]],
    m_idx: int,
    only: dict[str, str] | None,
    tasks: list[_CellTask],
    skip_rows: list[tuple[tuple, ReportRow]],
    market_meta: dict,
    cluster_reports: dict[str, str],
    model_summaries: dict[str, str],
) -> None:
    """Enumerate one market's cells for the given fractions (one fraction in causal mode)."""
    causal = cfg.causal_thresholds or cfg.causal_gmm or cfg.causal_emd
    returns_full = log_returns(series)
    n_rows_total = len(returns_full.returns) - cfg.window + 1
    if n_rows_total < 1:
        raise ValueError(f"market {entry.market_id}: not enough candles for window {cfg.window}")

    threshold_prefix = None
    fraction_for_prefix = fraction_subset[0][1]
    if cfg.causal_thresholds:
        train_rows_global, _ = temporal_split(n_rows_total, fraction_for_prefix)
        last_train_t = cfg.window - 1 + int(train_rows_global[-1])
        threshold_prefix = returns_full.returns[: last_train_t + 1]

    labeled, matrix, thresholds = _labels_and_features(series, cfg, threshold_prefix)
    if causal:
        market_meta["thresholds_by_fraction"][repr(float(fraction_for_prefix))] = list(thresholds)
    else:
        market_meta["thresholds"] = list(thresholds)
    market_meta["label_frequencies"] = label_frequencies(labeled.labels)
    market_meta["n_feature_rows"] = len(matrix)

    gmm_train_rows = None
    if cfg.causal_gmm and cfg.gmm_enabled:
        gmm_train_rows, _ = temporal_split(len(matrix), fraction_for_prefix)
    partitions, gmm_meta, cluster_text, summary_text = _partition_rows(
        matrix, cfg, entry.market_id, gmm_train_rows
    )
    if gmm_meta is not None:
        if causal:
            market_meta["gmm_by_fraction"][repr(float(fraction_for_prefix))] = gmm_meta
        else:
            market_meta["gmm"] = gmm_meta
    if cluster_text is not None:
        key = entry.market_id if not causal else f"{entry.market_id}_f{fraction_for_prefix}"
        cluster_reports[key] = cluster_text
        model_summaries[key] = summary_text

    next_returns_all = returns_full.returns[matrix.window_ends]

    for cluster_label, part_rows, part_skip in partitions:
        if not _filter_match(only, cluster=cluster_label):
            continue
        c_key = -1 if cluster_label == "all" else int(cluster_label)

        def _skip_cells(reason: str) -> None:
            for s_idx, source in enumerate(SOURCES):
                if not _filter_match(only, source=source):
                    continue
                for l_idx, spec in enumerate(cfg.learners):
                    if not _filter_match(only, learner=spec.kind.value):
                        continue
                    for f_idx, fraction in fraction_subset:
                        skip_rows.append(
                            (
                                (m_idx, c_key, s_idx, l_idx, f_idx),
                                ReportRow(
                                    market_id=entry.market_id,
                                    cluster=cluster_label,
                                    source=source,
                                    learner=spec.kind.value,
                                    test_fraction=fraction,
                                    skip_reason=reason,
                                ),
                            )
                        )

        if part_skip is not None:
            _skip_cells(part_skip)
            continue
        n_part = len(part_rows)
        if n_part < 5:
            _skip_cells(f"partition has {n_part} rows, need >= 5 to split")
            continue

        part_X = matrix.X[part_rows]
        part_y = matrix.targets[part_rows]
        part_returns = next_returns_all[part_rows]

        for f_idx, fraction in fraction_subset:
            try:
                train_idx, test_idx = temporal_split(n_part, fraction)
            except ValueError as exc:
                for s_idx, source in enumerate(SOURCES):
                    if not _filter_match(only, source=source):
                        continue
                    for l_idx, spec in enumerate(cfg.learners):
                        if not _filter_match(only, learner=spec.kind.value):
                            continue
                        skip_rows.append(
                            (
                                (m_idx, c_key, s_idx, l_idx, f_idx),
                                ReportRow(
                                    market_id=entry.market_id,
                                    cluster=cluster_label,
                                    source=source,
                                    learner=spec.kind.value,
                                    test_fraction=fraction,
                                    skip_reason=f"split failed: {exc}",
                                ),
                            )
                        )
                continue

            sources: dict[str, np.ndarray] = {"raw": part_X}
            component_error = None
            if len(part_rows) >= 8:
                try:
                    if cfg.causal_emd:
                        components = _causal_component_matrices(
                            part_X, len(train_idx), cfg.emd, cfg.trend_includes_residual
                        )
                    else:
                        components = _component_matrices(part_X, cfg.emd, cfg.trend_includes_residual)
                    sources.update(components)
                except ValueError as exc:
                    component_error = str(exc)
            else:
                component_error = f"partition has {len(part_rows)} rows, need >= 8 to decompose"

            band = baseline_band(
                part_returns[test_idx],
                cfg.baseline_replicates,
                derive_seed(cfg.seed, entry.market_id, cluster_label, fraction, "baseline"),
                cfg.transaction_cost,
            )

            for s_idx, source in enumerate(SOURCES):
                if not _filter_match(only, source=source):
                    continue
                for l_idx, spec in enumerate(cfg.learners):
                    if not _filter_match(only, learner=spec.kind.value):
                        continue
                    order = (m_idx, c_key, s_idx, l_idx, f_idx)
                    if source not in sources:
                        skip_rows.append(
                            (
                                order,
                                ReportRow(
                                    market_id=entry.market_id,
                                    cluster=cluster_label,
                                    source=source,
                                    learner=spec.kind.value,
                                    test_fraction=fraction,
                                    skip_reason=f"components unavailable: {component_error}",
                                ),
                            )
                        )
                        continue
                    X_source = sources[source]
                    tasks.append(
                        _CellTask(
                            order=order,
                            market_id=entry.market_id,
                            cluster=cluster_label,
                            source=source,
                            learner=spec,
                            test_fraction=fraction,
                            cell_seed=derive_seed(
                                cfg.seed, entry.market_id, cluster_label, source, spec.kind.value, fraction
                            ),
                            X_train=X_source[train_idx],
                            y_train=part_y[train_idx],
                            X_test=X_source[test_idx],
                            y_test=part_y[test_idx],
                            test_returns=part_returns[test_idx],
                            band=band_tuple(band),
                            transaction_cost=cfg.transaction_cost,
                        )
                    )


def band_tuple(band) -> tuple[float, float, float]:
    return (band.mean, band.p2_5, band.p97_5)


def emit_report(report: ExperimentReport, out_dir: str) -> list[str]:
    """Write report.csv, report_meta.json, per-market figure data, and GMM summaries.

    Report bodies are deterministic for a fixed config and seed; only the
    wall-time field in the metadata varies between runs.
    """
    os.makedirs(out_dir, exist_ok=True)
    written = []

    report_path = os.path.join(out_dir, "report.csv")
    with open(report_path, "w", encoding="utf-8") as fh:
        fh.write(",".join(REPORT_COLUMNS) + "\n")
        for row in report.rows:
            fh.write(",".join(row.csv_cells()) + "\n")
    written.append(report_path)

    meta_path = os.path.join(out_dir, "report_meta.json")
    with open(meta_path, "w", encoding="utf-8") as fh:
        json.dump(report.metadata, fh, indent=2, sort_keys=True)
        fh.write("\n")
    written.append(meta_path)

    by_market: dict[str, list[ReportRow]] = {}
    for row in report.rows:
        if row.skip_reason is None:
            by_market.setdefault(row.market_id, []).append(row)
    for market_id in report.metadata.get("markets", {}):
        rows = by_market.get(market_id, [])
        groups: dict[tuple[str, str, str], list[ReportRow]] = {}
        for row in rows:
            groups.setdefault((row.cluster, row.source, row.learner), []).append(row)
        figure_path = os.path.join(out_dir, f"figure_{_safe_name(market_id)}.csv")
        with open(figure_path, "w", encoding="utf-8") as fh:
            fh.write("cluster,source,learner,apc,baseline_mean,baseline_p2_5,baseline_p97_5\n")
            for (cluster, source, learner), members in groups.items():
                fh.write(
                    f"{cluster},{source},{learner},"
                    f"{_mean_repr(m.apc for m in members)},"
                    f"{_mean_repr(m.baseline_mean for m in members)},"
                    f"{_mean_repr(m.baseline_p2_5 for m in members)},"
                    f"{_mean_repr(m.baseline_p97_5 for m in members)}\n"
                )
        written.append(figure_path)

    for key, text in report.cluster_reports.items():
        path = os.path.join(out_dir, f"gmm_{_safe_name(key)}_clusters.csv")
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)
        written.append(path)
    for key, text in report.model_summaries.items():
        path = os.path.join(out_dir, f"gmm_{_safe_name(key)}_model.txt")
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)
        written.append(path)
    return written


def _safe_name(name: str) -> str:
    return "".join(ch if ch.isalnum() or ch in "-_." else "_" for ch in name)


def _mean_repr(values) -> str:
    items = [float(v) for v in values]
    return repr(sum(items) / len(items)) if items else ""
