"""Interval sweeps: per-scan-mode interval -> worst-case latency series.

Each grid point gets its own seed derived from the master seed and the
interval, so a point's value does not depend on the rest of the grid and the
same interval sees the same random stream under every scan mode.
"""

from __future__ import annotations

import csv
import json
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .ndp_sim import (
    DEFAULT_HORIZON_MS,
    QuantileUnreachable,
    SimScenario,
    derive_seed,
    estimate_cdf,
    quantile,
)
from .types import (
    SHARE_TOL,
    AdvertiserConfig,
    ConfigError,
    DistributionPoint,
    DistributionSeries,
    ScanMode,
    ms_to_us,
)

log = logging.getLogger(__name__)

SUPERIMPOSED = "superimposed"


class EmptyDistribution(ValueError):
    pass


class GridMismatch(ValueError):
    pass


@dataclass(frozen=True)
class SweepGrid:
    a_start_ms: float
    a_end_ms: float
    a_step_ms: float = 5.0
    n_runs: int = 1000
    quantile_p: float = 0.9

    def __post_init__(self) -> None:
        start, end, step = (ms_to_us(v, "grid") for v in (self.a_start_ms, self.a_end_ms, self.a_step_ms))
        if start <= 0:
            raise ConfigError("a_start must be positive")
        if step <= 0:
            raise ConfigError("a_step must be positive")
        if start >= end:
            raise ConfigError("a_start must be below a_end")
        if (end - start) < 2 * step:
            raise ConfigError("grid needs at least three points")
        if self.n_runs < 1:
            raise ConfigError("n_runs must be >= 1")
        if not 0.0 < self.quantile_p < 1.0:
            raise ConfigError("quantile_p must lie in (0, 1)")

    def intervals_us(self) -> list[int]:
        start, end, step = (ms_to_us(v) for v in (self.a_start_ms, self.a_end_ms, self.a_step_ms))
        return list(range(start, end + 1, step))

    def intervals_ms(self) -> list[float]:
        return [us / 1000.0 for us in self.intervals_us()]


def _point(args) -> float | None:
    mode, adv, grid, seed, horizon_ms, a_us = args
    scenario = SimScenario(
        scan_mode=mode,
        advertiser=adv.with_interval(a_us / 1000.0),
        horizon_ms=horizon_ms,
        rng_seed=derive_seed(seed, a_us),
    )
    try:
        return quantile(estimate_cdf(scenario, grid.n_runs), grid.quantile_p)
    except QuantileUnreachable:
        return None


def build_distribution(
    mode: ScanMode,
    grid: SweepGrid,
    advertiser: AdvertiserConfig,
    seed: int,
    horizon_ms: float = DEFAULT_HORIZON_MS,
    workers: int = 1,
) -> DistributionSeries:
    """Simulate every grid interval under ``mode`` and record its P-quantile.

    Points whose quantile is unreachable (too many timeouts) become gaps.
    """
    jobs = [(mode, advertiser, grid, seed, horizon_ms, a) for a in grid.intervals_us()]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            values = list(pool.map(_point, jobs, chunksize=16))
    else:
        values = [_point(job) for job in jobs]

    points, gaps = [], []
    for (*_, a_us), latency in zip(jobs, values):
        if latency is None:
            gaps.append(a_us / 1000.0)
        else:
            points.append(DistributionPoint(a_us / 1000.0, latency))
    if not points:
        raise EmptyDistribution(f"empty distribution for {mode.name}: every grid point timed out")
    if gaps:
        log.info("%s: %d grid points excluded as gaps", mode.name, len(gaps))
    return DistributionSeries(tuple(points), label=mode.name, gaps=tuple(gaps))


def superimpose(series_list: Sequence[DistributionSeries], shares: Sequence[float]) -> DistributionSeries:
    """Market-share weighted mixture of per-mode series, point by point."""
    if not series_list or len(series_list) != len(shares):
        raise ConfigError("need one share per series")
    if abs(sum(shares) - 1.0) > SHARE_TOL:
        raise ConfigError(f"shares sum to {sum(shares)!r}, expected 1")
    grid = series_list[0].grid
    for s in series_list[1:]:
        if s.grid != grid:
            raise GridMismatch(f"grid mismatch between {series_list[0].label!r} and {s.label!r}")

    lookups = [dict(zip(s.intervals, s.latencies)) for s in series_list]
    points, gaps = [], []
    for a in grid:
        if all(a in lk for lk in lookups):
            points.append(DistributionPoint(a, sum(w * lk[a] for w, lk in zip(shares, lookups))))
        else:
            gaps.append(a)
    if not points:
        raise EmptyDistribution("superimposed series has no common points")
    return DistributionSeries(tuple(points), label=SUPERIMPOSED, gaps=tuple(gaps))


# --- on-disk cache -----------------------------------------------------------

def cache_name(label: str, p: float, seed: int) -> str:
    return f"{label}_p{p!r}_seed{seed}.csv"


def write_series_csv(series: DistributionSeries, path: Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["interval_ms", "latency_ms"])
        for pt in series.points:
            w.writerow([repr(float(pt.interval_a)), repr(float(pt.latency_l))])


def read_series_csv(path: Path, label: str, gaps: Sequence[float] = ()) -> DistributionSeries:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    pts = [DistributionPoint(float(r["interval_ms"]), float(r["latency_ms"])) for r in rows]
    return DistributionSeries(tuple(pts), label=label, gaps=tuple(gaps))


def _cache_meta(mode, grid, advertiser, seed, horizon_ms) -> dict:
    key = {
        "scan_mode": [mode.scan_interval_ms, mode.scan_window_ms],
        "grid": asdict(grid),
        "advertiser": asdict(advertiser),
        "seed": seed,
        "horizon_ms": horizon_ms,
    }
    return json.loads(json.dumps(key))  # tuples -> lists, as stored on disk


def cached_distribution(
    mode: ScanMode,
    grid: SweepGrid,
    advertiser: AdvertiserConfig,
    seed: int,
    cache_dir: Path,
    horizon_ms: float = DEFAULT_HORIZON_MS,
    workers: int = 1,
) -> DistributionSeries:
    """``build_distribution`` backed by a CSV file plus a JSON sidecar.

    The sidecar records everything that determines the series; a file is
    reused only when that record matches exactly.
    """
    cache_dir = Path(cache_dir)
    cache_dir.mkdir(parents=True, exist_ok=True)
    csv_path = cache_dir / cache_name(mode.name, grid.quantile_p, seed)
    meta_path = csv_path.with_suffix(".meta.json")
    meta = _cache_meta(mode, grid, advertiser, seed, horizon_ms)
    if csv_path.exists() and meta_path.exists():
        stored = json.loads(meta_path.read_text())
        if stored.get("key") == meta:
            log.info("cache hit: %s", csv_path.name)
            return read_series_csv(csv_path, mode.name, stored.get("gaps", []))
    series = build_distribution(mode, grid, advertiser, seed, horizon_ms, workers)
    write_series_csv(series, csv_path)
    meta_path.write_text(json.dumps({"key": meta, "gaps": list(series.gaps)}, indent=2) + "\n")
    return series


# --- envelope analysis -------------------------------------------------------

@dataclass(frozen=True)
class EnvelopeFit:
    slope: float
    intercept: float
    edge: tuple[float, float]
    centre: float


def lower_hull(points: Sequence[tuple[float, float]]) -> list[tuple[float, float]]:
    """Lower convex hull (monotone chain), left to right."""
    hull: list[tuple[float, float]] = []
    for p in sorted(points):
        while len(hull) >= 2:
            (x0, y0), (x1, y1) = hull[-2], hull[-1]
            if (x1 - x0) * (p[1] - y0) - (y1 - y0) * (p[0] - x0) <= 0:
                hull.pop()
            else:
                break
        hull.append(p)
    return hull


def lower_envelope(series: DistributionSeries, a_from: float = 0.0) -> EnvelopeFit:
    """Line supporting the series from below at the centroid of the fitted range.

    Among lines lying on or under every point with interval >= ``a_from``,
    this is the one with the largest mean height over those points: the lower
    hull edge spanning their mean interval.
    """
    pts = [(p.interval_a, p.latency_l) for p in series.points if p.interval_a >= a_from]
    if len(pts) < 2:
        raise ValueError("need at least two points to fit an envelope")
    centre = float(np.mean([x for x, _ in pts]))
    hull = lower_hull(pts)
    for (x0, y0), (x1, y1) in zip(hull, hull[1:]):
        if x0 <= centre <= x1:
            k = (y1 - y0) / (x1 - x0)
            return EnvelopeFit(slope=k, intercept=y0 - k * x0, edge=(x0, x1), centre=centre)
    raise AssertionError("centroid outside hull span")  # unreachable for >= 2 points
