"""Flat dotted-key experiment configuration.

The on-disk format is deliberately simple: one ``key = value`` pair per line,
``#`` starts a comment, and every key must be known — a typoed key is a hard
error rather than a silently ignored setting.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .emd import EmdConfig
from .gmm import GmmConfig
from .learners import DEFAULT_HYPERPARAMETERS, LearnerKind, LearnerSpec


class ConfigError(ValueError):
    """Bad experiment configuration (unknown key, bad value, missing section)."""


@dataclass(frozen=True)
class MarketEntry:
    market_id: str
    path: str
    max_candles: int | None = None


@dataclass
class ExperimentConfig:
    """Everything a full experiment run needs, echoed into report metadata."""

    markets: list[MarketEntry]
    learners: list[LearnerSpec]
    window: int = 15
    quantile: float = 0.035
    test_fractions: tuple[float, ...] = (0.2, 0.3, 0.4)
    baseline_replicates: int = 1000
    seed: int = 0
    gmm_enabled: bool = False
    gmm: GmmConfig = field(default_factory=GmmConfig)
    emd: EmdConfig = field(default_factory=EmdConfig)
    causal_thresholds: bool = False
    causal_gmm: bool = False
    causal_emd: bool = False
    include_window_end_label: bool = False
    trend_includes_residual: bool = True
    transaction_cost: float = 0.0

    def validate(self) -> None:
        if not self.markets:
            raise ConfigError("no markets configured")
        if not self.learners:
            raise ConfigError("no learners configured")
        if self.window < 3:
            raise ConfigError(f"window must be >= 3, got {self.window}")
        if not 0.0 < self.quantile < 0.5:
            raise ConfigError(f"quantile must be in (0, 0.5), got {self.quantile}")
        if not self.test_fractions:
            raise ConfigError("no test fractions configured")
        for f in self.test_fractions:
            if not 0.0 < f < 1.0:
                raise ConfigError(f"test fraction must be in (0, 1), got {f}")
        if self.baseline_replicates < 100:
            raise ConfigError("baseline_replicates must be >= 100")
        if self.transaction_cost < 0.0:
            raise ConfigError("transaction_cost must be >= 0")
        seen = set()
        for market in self.markets:
            if market.market_id in seen:
                raise ConfigError(f"duplicate market id {market.market_id!r}")
            seen.add(market.market_id)


_SCALAR_KEYS = {
    "seed": int,
    "window": int,
    "quantile": float,
    "baseline_replicates": int,
    "transaction_cost": float,
    "causal_thresholds": bool,
    "causal_gmm": bool,
    "causal_emd": bool,
    "include_window_end_label": bool,
    "trend_includes_residual": bool,
    "gmm.enabled": bool,
    "gmm.g_min": int,
    "gmm.g_max": int,
    "gmm.tol": float,
    "gmm.max_iters": int,
    "gmm.restarts": int,
    "gmm.ridge": float,
    "gmm.min_cluster_size": int,
    "emd.sd_stop": float,
    "emd.max_sift_iters": int,
    "emd.max_imfs": int,
    "emd.boundary_pad_extrema": int,
}

_LIST_KEYS = {"test_fractions", "learners"}


def _parse_bool(raw: str, key: str) -> bool:
    lowered = raw.strip().lower()
    if lowered in ("true", "yes", "1", "on"):
        return True
    if lowered in ("false", "no", "0", "off"):
        return False
    raise ConfigError(f"{key}: expected a boolean, got {raw!r}")


def _parse_scalar(raw: str, kind: type, key: str):
    if kind is bool:
        return _parse_bool(raw, key)
    try:
        return kind(raw.strip())
    except ValueError:
        raise ConfigError(f"{key}: expected {kind.__name__}, got {raw!r}") from None


def parse_key_values(text: str, source: str = "<config>") -> dict[str, str]:
    """Raw key/value pairs from dotted-key text; duplicate keys are errors."""
    pairs: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ConfigError(f"{source}: line {lineno}: expected 'key = value'")
        key, value = stripped.split("=", 1)
        key = key.strip()
        if not key:
            raise ConfigError(f"{source}: line {lineno}: empty key")
        if key in pairs:
            raise ConfigError(f"{source}: line {lineno}: duplicate key {key!r}")
        pairs[key] = value.strip()
    return pairs


def _learner_kind(name: str) -> LearnerKind:
    try:
        return LearnerKind(name.strip())
    except ValueError:
        valid = ", ".join(k.value for k in LearnerKind)
        raise ConfigError(f"unknown learner {name!r} (valid: {valid})") from None


def build_experiment_config(pairs: dict[str, str]) -> ExperimentConfig:
    """Typed :class:`ExperimentConfig` from parsed pairs; unknown keys are hard errors."""
    markets: dict[str, dict] = {}
    learner_params: dict[LearnerKind, dict[str, float]] = {}
    scalars: dict[str, object] = {}
    lists: dict[str, list[str]] = {}

    for key, raw in pairs.items():
        if key in _SCALAR_KEYS:
            scalars[key] = _parse_scalar(raw, _SCALAR_KEYS[key], key)
        elif key in _LIST_KEYS:
            lists[key] = [part.strip() for part in raw.split(",") if part.strip()]
        elif key.startswith("market."):
            rest = key[len("market.") :]
            if rest.endswith(".max_candles"):
                market_id = rest[: -len(".max_candles")]
                if not market_id:
                    raise ConfigError(f"unknown config key {key!r}")
                markets.setdefault(market_id, {})["max_candles"] = _parse_scalar(raw, int, key)
            elif "." not in rest and rest:
                markets.setdefault(rest, {})["path"] = raw
            else:
                raise ConfigError(f"unknown config key {key!r}")
        elif key.startswith("learner."):
            parts = key.split(".")
            if len(parts) != 3:
                raise ConfigError(f"unknown config key {key!r}")
            kind = _learner_kind(parts[1])
            param = parts[2]
            if param not in DEFAULT_HYPERPARAMETERS[kind]:
                raise ConfigError(f"unknown hyperparameter {param!r} for learner {kind.value}")
            learner_params.setdefault(kind, {})[param] = float(raw)
        else:
            raise ConfigError(f"unknown config key {key!r}")

    market_entries = []
    for market_id, entry in markets.items():
        if "path" not in entry:
            raise ConfigError(f"market {market_id!r} has options but no path (set market.{market_id} = <file>)")
        market_entries.append(
            MarketEntry(market_id=market_id, path=entry["path"], max_candles=entry.get("max_candles"))
        )

    learner_names = lists.get("learners", [])
    learner_specs = []
    for name in learner_names:
        kind = _learner_kind(name)
        spec = LearnerSpec(kind=kind, seed=0, hyperparameters=dict(learner_params.get(kind, {})))
        try:
            spec.resolved()
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        learner_specs.append(spec)
    for kind in learner_params:
        if kind not in {spec.kind for spec in learner_specs}:
            raise ConfigError(f"hyperparameters set for unselected learner {kind.value!r}")

    fractions = []
    for raw in lists.get("test_fractions", []):
        fractions.append(_parse_scalar(raw, float, "test_fractions"))

    try:
        gmm_cfg = GmmConfig(
            g_range=(int(scalars.get("gmm.g_min", 1)), int(scalars.get("gmm.g_max", 4))),
            tol=float(scalars.get("gmm.tol", 1e-6)),
            max_iters=int(scalars.get("gmm.max_iters", 500)),
            restarts=int(scalars.get("gmm.restarts", 10)),
            ridge=float(scalars.get("gmm.ridge", 1e-6)),
            seed=int(scalars.get("seed", 0)),
            min_cluster_size=scalars.get("gmm.min_cluster_size"),
        )
        emd_cfg = EmdConfig(
            sd_stop=float(scalars.get("emd.sd_stop", 0.3)),
            max_sift_iters=int(scalars.get("emd.max_sift_iters", 50)),
            max_imfs=int(scalars.get("emd.max_imfs", 12)),
            boundary_pad_extrema=int(scalars.get("emd.boundary_pad_extrema", 2)),
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from None

    cfg = ExperimentConfig(
        markets=market_entries,
        learners=learner_specs,
        window=int(scalars.get("window", 15)),
        quantile=float(scalars.get("quantile", 0.035)),
        test_fractions=tuple(fractions) if fractions else (0.2, 0.3, 0.4),
        baseline_replicates=int(scalars.get("baseline_replicates", 1000)),
        seed=int(scalars.get("seed", 0)),
        gmm_enabled=bool(scalars.get("gmm.enabled", False)),
        gmm=gmm_cfg,
        emd=emd_cfg,
        causal_thresholds=bool(scalars.get("causal_thresholds", False)),
        causal_gmm=bool(scalars.get("causal_gmm", False)),
        causal_emd=bool(scalars.get("causal_emd", False)),
        include_window_end_label=bool(scalars.get("include_window_end_label", False)),
        trend_includes_residual=bool(scalars.get("trend_includes_residual", True)),
        transaction_cost=float(scalars.get("transaction_cost", 0.0)),
    )
    cfg.validate()
    return cfg


def load_experiment_config(path: str) -> ExperimentConfig:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path!r}: {exc}") from exc
    return build_experiment_config(parse_key_values(text, source=str(path)))


def config_echo(cfg: ExperimentConfig) -> dict:
    """JSON-serializable echo of every setting, for report metadata."""
    return {
        "markets": [
            {"id": m.market_id, "path": m.path, "max_candles": m.max_candles} for m in cfg.markets
        ],
        "learners": [
            {"kind": spec.kind.value, "hyperparameters": spec.resolved()} for spec in cfg.learners
        ],
        "window": cfg.window,
        "quantile": cfg.quantile,
        "test_fractions": list(cfg.test_fractions),
        "baseline_replicates": cfg.baseline_replicates,
        "seed": cfg.seed,
        "gmm_enabled": cfg.gmm_enabled,
        "gmm": {
            "g_range": list(cfg.gmm.g_range),
            "tol": cfg.gmm.tol,
            "max_iters": cfg.gmm.max_iters,
            "restarts": cfg.gmm.restarts,
            "ridge": cfg.gmm.ridge,
            "min_cluster_size": cfg.gmm.min_cluster_size,
        },
        "emd": {
            "sd_stop": cfg.emd.sd_stop,
            "max_sift_iters": cfg.emd.max_sift_iters,
            "max_imfs": cfg.emd.max_imfs,
            "boundary_pad_extrema": cfg.emd.boundary_pad_extrema,
        },
        "causal_thresholds": cfg.causal_thresholds,
        "causal_gmm": cfg.causal_gmm,
        "causal_emd": cfg.causal_emd,
        "include_window_end_label": cfg.include_window_end_label,
        "trend_includes_residual": cfg.trend_includes_residual,
        "transaction_cost": cfg.transaction_cost,
    }
