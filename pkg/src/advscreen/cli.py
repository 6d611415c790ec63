"""Command-line front end: ``advscreen {sweep,optimize,evaluate} --config run.toml``."""

from __future__ import annotations

import argparse
import csv
import logging
import sys
from dataclasses import asdict, replace
from pathlib import Path

from .config import RunConfig, load_config
from .cpbis import StageError, screen_series
from .evaluate import compare_modes
from .sweep import SUPERIMPOSED, cache_name, cached_distribution, superimpose, write_series_csv
from .types import ConfigError

log = logging.getLogger("advscreen")

EXIT_STAGE = 1
EXIT_CONFIG = 2


def _series_dir(out: Path) -> Path:
    return out / "series"


def _sweep(cfg: RunConfig, out: Path):
    series_dir = _series_dir(out)
    series = []
    for mode in cfg.catalog:
        try:
            s = cached_distribution(
                mode, cfg.grid, cfg.advertiser, cfg.seed, series_dir, cfg.horizon_ms, cfg.workers
            )
        except (ValueError, ArithmeticError) as exc:
            raise StageError(1, "build_distribution", exc) from exc
        series.append(s)
    try:
        mixed = superimpose(series, [m.market_share for m in cfg.catalog])
    except ValueError as exc:
        raise StageError(2, "superimpose", exc) from exc
    write_series_csv(mixed, series_dir / cache_name(SUPERIMPOSED, cfg.grid.quantile_p, cfg.seed))
    return series, mixed


def cmd_sweep(cfg: RunConfig, out: Path) -> int:
    series, mixed = _sweep(cfg, out)
    for s in [*series, mixed]:
        print(f"{s.label}: {len(s)} points, {len(s.gaps)} gaps")
    print(f"series written to {_series_dir(out)}")
    return 0


def _write_rows(path: Path, header: list[str], rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def cmd_optimize(cfg: RunConfig, out: Path, emit_stages: bool = False) -> int:
    series, _ = _sweep(cfg, out)
    report = screen_series(
        series,
        [m.market_share for m in cfg.catalog],
        cfg.constraint,
        config_echo=_echo(cfg),
        reference_pair=cfg.reference_pair,
    )
    (out / "cpbis_report.json").write_text(report.to_json())
    summary = report.summary()
    (out / "cpbis_summary.txt").write_text(summary + "\n")
    print(summary)
    if emit_stages:
        stages = out / "stages"
        stages.mkdir(exist_ok=True)
        pts = lambda ps: [[repr(p.interval_a), repr(p.latency_l)] for p in ps]  # noqa: E731
        _write_rows(stages / "troughs.csv", ["interval_ms", "latency_ms"], pts(report.troughs))
        _write_rows(stages / "pruned.csv", ["interval_ms", "latency_ms"], pts(report.pruned))
        _write_rows(
            stages / "pairs.csv",
            ["a_left_ms", "a_right_ms", "delta", "weighted_latency_ms", "slope", "intercept"],
            [
                [repr(p.a_left.interval_a), repr(p.a_right.interval_a), repr(p.delta),
                 repr(p.weighted_latency), repr(p.slope_k), repr(p.intercept_b)]
                for p in report.local_pairs
            ],
        )
    return 0


def cmd_evaluate(cfg: RunConfig, out: Path) -> int:
    if not cfg.schedules:
        raise ConfigError(f"{cfg.source}: field 'evaluate.schedules': no schedules configured")
    report = compare_modes(
        cfg.schedules, cfg.catalog, cfg.limit_s, cfg.n_trials, cfg.seed, cfg.advertiser
    )
    (out / "trials.csv").write_text(report.to_csv())
    (out / "trials_summary.json").write_text(report.to_json())
    for s in report.schedules:
        print(
            f"{s}: weighted success {report.weighted_success(s):.4f}, "
            f"weighted mean latency {report.weighted_latency_s(s):.3f} s"
        )
    return 0


def _echo(cfg: RunConfig) -> dict:
    return {
        "scan_modes": [asdict(m) for m in cfg.catalog],
        "grid": asdict(cfg.grid),
        "constraint": asdict(cfg.constraint),
        "advertiser": asdict(cfg.advertiser),
        "seed": cfg.seed,
        "horizon_ms": cfg.horizon_ms,
    }


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="advscreen",
        description="BLE discovery-latency sweeps and two-interval advertising selection",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_ in [
        ("sweep", "simulate interval -> latency series per scan mode"),
        ("optimize", "sweep, then select the two-interval schedule"),
        ("evaluate", "time-limited trials of configured schedules"),
    ]:
        p = sub.add_parser(name, help=help_)
        p.add_argument("--config", required=True, type=Path)
        p.add_argument("--out", type=Path, default=None, help="output directory")
        p.add_argument("--seed", type=int, default=None, help="override the config seed (u64)")
        p.add_argument("-v", "--verbose", action="store_true")
        if name == "optimize":
            p.add_argument("--emit-stages", action="store_true", help="write per-stage CSVs")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        cfg = load_config(args.config)
        if args.seed is not None:
            if not 0 <= args.seed < 2**64:
                raise ConfigError("--seed must be an unsigned 64-bit integer")
            cfg = replace(cfg, seed=args.seed)
        out = args.out or cfg.output_dir or Path("out")
        out.mkdir(parents=True, exist_ok=True)
        if args.command == "sweep":
            return cmd_sweep(cfg, out)
        if args.command == "optimize":
            return cmd_optimize(cfg, out, args.emit_stages)
        return cmd_evaluate(cfg, out)
    except (ConfigError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except StageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_STAGE


if __name__ == "__main__":
    sys.exit(main())
