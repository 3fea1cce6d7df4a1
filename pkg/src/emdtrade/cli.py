"""Command-line entry points: run the experiment grid, generate synthetic
markets, or decompose a single series.

Exit codes: 0 on success, 2 on configuration errors, 3 on input errors.
The EMDTRADE_LOG_LEVEL environment variable controls log verbosity only.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys

from .config import ConfigError, load_experiment_config, parse_key_values
from .emd import EmdConfig, decompose, write_decomposition
from .market_data import CandleFormatError, write_candles
from .pipeline import emit_report, run_experiment
from .synth import SynthSpec, synth_market

log = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_INPUT = 3

_SYNTH_KEYS = {
    "length": int,
    "seed": int,
    "market_id": str,
    "start_price": float,
    "noise_sigma": float,
    "burst_amplitude": float,
    "burst_period": int,
    "burst_len": int,
    "burst_offset": int,
    "start_timestamp": int,
}


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="emdtrade", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run the configured experiment grid")
    run.add_argument("--config", required=True, help="experiment config file (dotted keys)")
    run.add_argument("--out", required=True, help="output directory for reports")
    run.add_argument("--jobs", type=int, default=1, help="parallel workers for grid cells")
    run.add_argument(
        "--only",
        default=None,
        help="restrict the grid, e.g. market=gme,cluster=1,source=high,learner=random_forest",
    )

    synth = sub.add_parser("synth", help="generate a synthetic candle file")
    synth.add_argument("--spec", required=True, help="synthetic market spec file (dotted keys)")
    synth.add_argument("--out", required=True, help="candle file to write")

    dec = sub.add_parser("decompose", help="decompose one column of a delimited file")
    dec.add_argument("--input", required=True, help="delimited text file with a header row")
    dec.add_argument("--column", required=True, help="name of the column to decompose")
    dec.add_argument("--out", required=True, help="decomposition file to write")
    return parser


def _parse_only(raw: str | None) -> dict[str, str] | None:
    if raw is None:
        return None
    allowed = {"market", "cluster", "source", "learner"}
    out: dict[str, str] = {}
    for part in raw.split(","):
        part = part.strip()
        if not part:
            continue
        if "=" not in part:
            raise ConfigError(f"--only expects key=value pairs, got {part!r}")
        key, value = part.split("=", 1)
        key = key.strip()
        if key not in allowed:
            raise ConfigError(f"--only key must be one of {sorted(allowed)}, got {key!r}")
        out[key] = value.strip()
    return out or None


def _cmd_run(args: argparse.Namespace) -> int:
    cfg = load_experiment_config(args.config)
    only = _parse_only(args.only)
    report = run_experiment(cfg, only=only, jobs=max(1, args.jobs))
    written = emit_report(report, args.out)
    ran = sum(1 for row in report.rows if row.skip_reason is None)
    skipped = len(report.rows) - ran
    print(f"grid cells: {ran} evaluated, {skipped} skipped")
    for path in written:
        print(f"wrote {path}")
    return EXIT_OK


def _cmd_synth(args: argparse.Namespace) -> int:
    try:
        with open(args.spec, "r", encoding="utf-8") as fh:
            pairs = parse_key_values(fh.read(), source=args.spec)
    except OSError as exc:
        raise ConfigError(f"cannot read spec {args.spec!r}: {exc}") from exc
    kwargs = {}
    for key, raw in pairs.items():
        if key not in _SYNTH_KEYS:
            raise ConfigError(f"unknown synth spec key {key!r}")
        kind = _SYNTH_KEYS[key]
        try:
            kwargs[key] = kind(raw)
        except ValueError:
            raise ConfigError(f"{key}: expected {kind.__name__}, got {raw!r}") from None
    if "length" not in kwargs:
        raise ConfigError("synth spec must set length")
    try:
        spec = SynthSpec(**kwargs)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    series = synth_market(spec)
    write_candles(series, args.out)
    print(f"wrote {len(series)} candles to {args.out}")
    return EXIT_OK


def _cmd_decompose(args: argparse.Namespace) -> int:
    try:
        with open(args.input, "r", encoding="utf-8") as fh:
            lines = fh.read().splitlines()
    except OSError as exc:
        raise CandleFormatError(f"cannot read {args.input!r}: {exc}") from exc
    if not lines:
        raise CandleFormatError(f"{args.input}: empty file")
    header = [col.strip() for col in lines[0].split(",")]
    if args.column not in header:
        raise CandleFormatError(f"{args.input}: no column named {args.column!r} in {header}")
    idx = header.index(args.column)
    values = []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        parts = line.split(",")
        if len(parts) != len(header):
            raise CandleFormatError(f"{args.input}: line {lineno}: expected {len(header)} fields")
        try:
            values.append(float(parts[idx]))
        except ValueError:
            raise CandleFormatError(f"{args.input}: line {lineno}: non-numeric value {parts[idx]!r}") from None
    result = decompose(values, EmdConfig(), source_id=args.column)
    write_decomposition(result, args.out)
    print(f"wrote {result.n_imfs} IMFs + residual to {args.out}")
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(
        level=os.environ.get("EMDTRADE_LOG_LEVEL", "WARNING").upper(),
        format="%(levelname)s %(name)s: %(message)s",
    )
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "run":
            return _cmd_run(args)
        if args.command == "synth":
            return _cmd_synth(args)
        return _cmd_decompose(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (CandleFormatError, FileNotFoundError) as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except ValueError as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
