"""Hourly-candle trading experiments with EMD stochasticity components,
GMM regime filtering, ensemble classifiers, and APC scoring."""

__version__ = "0.1.0"

from .backtest import BacktestResult, BaselineBand, apc, baseline_band, profit, temporal_split
from .config import ConfigError, ExperimentConfig, MarketEntry, load_experiment_config
from .emd import (
    ComponentSet,
    Decomposition,
    EmdConfig,
    Imf,
    assemble_components,
    component_cutoffs,
    decompose,
    mean_envelope,
    sift_one_imf,
)
from .features import FeatureMatrix, FeatureVector, extract_features, fit_window_linear_model, peak_statistics
from .gmm import ClusterAssignment, GmmConfig, GmmModel, assign_clusters, fit_gmm, select_g_bic
from .learners import LearnerKind, LearnerSpec, TrainedModel, predict, random_policy, train
from .market_data import (
    Candle,
    CandleFormatError,
    CandleSeries,
    DecisionLabel,
    LabeledSeries,
    ReturnSeries,
    label_decisions,
    load_candles,
    log_returns,
    quantile_thresholds,
)
from .pipeline import ExperimentReport, ReportRow, derive_seed, emit_report, run_experiment
from .synth import SynthSpec, planted_bayes_apc, synth_market

__all__ = [
    "__version__",
    "BacktestResult",
    "BaselineBand",
    "Candle",
    "CandleFormatError",
    "CandleSeries",
    "ClusterAssignment",
    "ComponentSet",
    "ConfigError",
    "Decomposition",
    "DecisionLabel",
    "EmdConfig",
    "ExperimentConfig",
    "ExperimentReport",
    "FeatureMatrix",
    "FeatureVector",
    "GmmConfig",
    "GmmModel",
    "Imf",
    "LabeledSeries",
    "LearnerKind",
    "LearnerSpec",
    "MarketEntry",
    "ReportRow",
    "ReturnSeries",
    "SynthSpec",
    "TrainedModel",
    "apc",
    "assemble_components",
    "assign_clusters",
    "baseline_band",
    "component_cutoffs",
    "decompose",
    "derive_seed",
    "emit_report",
    "extract_features",
    "fit_gmm",
    "fit_window_linear_model",
    "label_decisions",
    "load_candles",
    "load_experiment_config",
    "log_returns",
    "mean_envelope",
    "peak_statistics",
    "planted_bayes_apc",
    "predict",
    "profit",
    "quantile_thresholds",
    "random_policy",
    "run_experiment",
    "select_g_bic",
    "sift_one_imf",
    "synth_market",
    "temporal_split",
    "train",
]
