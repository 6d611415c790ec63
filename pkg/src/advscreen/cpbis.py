"""Two-interval screening: pick (A_left, A_right, delta) under an A_min budget.

Pipeline over a market-share weighted latency series:

1. per-mode sweeps            4. drop non-increasing troughs
2. superimpose by share       5. split at A_min
3. keep trough points         6. best left partner per right point (max slope),
                                 then the pair whose line is flattest

Every pair is run at the proportion that puts the equivalent interval exactly
on A_min, where its weighted latency equals the pair's line evaluated at A_min.
Slopes and that value are compared with exact rationals built from the float
grid values, so near-collinear candidates are ordered correctly.
"""

from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Any, Sequence

from .ndp_sim import DEFAULT_HORIZON_MS
from .sweep import SweepGrid, build_distribution, cached_distribution, superimpose
from .types import (
    AdvertiserConfig,
    ConstraintConfig,
    DistributionPoint,
    DistributionSeries,
    ScanMode,
    validate_catalog,
)

log = logging.getLogger(__name__)

DEFAULT_BLOCK_PERIOD_S = 40


class NoTroughs(ValueError):
    pass


class PartitionError(ValueError):
    pass


class LeftSideEmpty(PartitionError):
    pass


class RightSideEmpty(PartitionError):
    pass


class StageError(RuntimeError):
    """A pipeline stage failed; ``stage`` is its 1-based position."""

    def __init__(self, stage: int, name: str, cause: Exception):
        self.stage, self.name, self.cause = stage, name, cause
        super().__init__(f"stage {stage} ({name}) failed: {cause}")


@dataclass(frozen=True)
class CandidatePair:
    a_left: DistributionPoint
    a_right: DistributionPoint
    slope_k: float
    intercept_b: float
    delta: float
    weighted_latency: float
    a_min: float

    def as_dict(self) -> dict[str, float]:
        return {
            "a_left_ms": self.a_left.interval_a,
            "latency_left_ms": self.a_left.latency_l,
            "a_right_ms": self.a_right.interval_a,
            "latency_right_ms": self.a_right.latency_l,
            "delta": self.delta,
            "weighted_latency_ms": self.weighted_latency,
            "slope": self.slope_k,
            "intercept": self.intercept_b,
        }


@dataclass(frozen=True)
class PartitionedCandidates:
    b_left: tuple[DistributionPoint, ...]
    b_right: tuple[DistributionPoint, ...]


def _q(x: float) -> Fraction:
    return Fraction(x)


def exact_slope(left: DistributionPoint, right: DistributionPoint) -> Fraction:
    return (_q(right.latency_l) - _q(left.latency_l)) / (_q(right.interval_a) - _q(left.interval_a))


def exact_weighted_latency(left: DistributionPoint, right: DistributionPoint, a_min: float) -> Fraction:
    """Line through the two points evaluated at ``a_min``."""
    return _q(right.latency_l) - exact_slope(left, right) * (_q(right.interval_a) - _q(a_min))


def make_pair(left: DistributionPoint, right: DistributionPoint, a_min: float) -> CandidatePair:
    if not left.interval_a < a_min <= right.interval_a:
        raise ValueError(f"pair ({left.interval_a}, {right.interval_a}) does not straddle {a_min}")
    k = exact_slope(left, right)
    a_l, a_r = _q(left.interval_a), _q(right.interval_a)
    delta = (a_r - _q(a_min)) / (a_r - a_l)
    wl = delta * _q(left.latency_l) + (1 - delta) * _q(right.latency_l)
    return CandidatePair(
        a_left=left,
        a_right=right,
        slope_k=float(k),
        intercept_b=float(_q(right.latency_l) - k * a_r),
        delta=float(delta),
        weighted_latency=float(wl),
        a_min=a_min,
    )


def weighted_latency(l1l: float, l2l: float, l1r: float, l2r: float, w1: float, w2: float, c: float) -> float:
    """Two-mode, two-interval weighted latency with time share ``c`` on the left interval."""
    return c * (w1 * l1l + w2 * l2l) + (1 - c) * (w1 * l1r + w2 * l2r)


def find_troughs(series: DistributionSeries) -> list[DistributionPoint]:
    """Interior local minima of latency; a flat bottom yields its rightmost point."""
    pts = series.points
    if len(pts) < 3:
        raise NoTroughs(f"series {series.label!r} has fewer than three points")
    # collapse runs of equal latency: (first index, last index, value)
    runs: list[tuple[int, int, float]] = []
    for i, p in enumerate(pts):
        if runs and runs[-1][2] == p.latency_l:
            runs[-1] = (runs[-1][0], i, p.latency_l)
        else:
            runs.append((i, i, p.latency_l))
    troughs = [
        pts[last]
        for (_, _, prev), (first, last, val), (_, _, nxt) in zip(runs, runs[1:], runs[2:])
        if prev > val < nxt
    ]
    if not troughs:
        raise NoTroughs(f"no troughs in series {series.label!r}")
    return troughs


def prune_non_increasing(troughs: Sequence[DistributionPoint]) -> list[DistributionPoint]:
    """Right-to-left sweep dropping any point slower than its surviving right neighbour."""
    kept: list[DistributionPoint] = []
    for p in reversed(troughs):
        if not kept or p.latency_l <= kept[-1].latency_l:
            kept.append(p)
    kept.reverse()
    return kept


def partition(pruned: Sequence[DistributionPoint], a_min: float) -> PartitionedCandidates:
    if not pruned:
        raise PartitionError("no candidates to partition")
    left = tuple(p for p in pruned if p.interval_a < a_min)
    right = tuple(p for p in pruned if p.interval_a >= a_min)
    if not left:
        raise LeftSideEmpty(f"left side empty: no candidate below a_min={a_min}")
    if not right:
        raise RightSideEmpty(f"right side empty: no candidate at or above a_min={a_min}")
    return PartitionedCandidates(left, right)


def best_left_for(right: DistributionPoint, b_left: Sequence[DistributionPoint], a_min: float) -> CandidatePair:
    """Partner for ``right`` with the steepest connecting line (ties: larger interval)."""
    if not b_left:
        raise LeftSideEmpty("left side empty")
    best = max(b_left, key=lambda p: (exact_slope(p, right), p.interval_a))
    return make_pair(best, right, a_min)


def local_optimum_pairs(parts: PartitionedCandidates, a_min: float) -> list[CandidatePair]:
    return [best_left_for(r, parts.b_left, a_min) for r in parts.b_right]


def select_optimal_pair(parts: PartitionedCandidates, a_min: float) -> CandidatePair:
    """Flattest line among the per-right-point optima.

    Ties fall to the smaller weighted latency, then the smaller right interval.
    """
    pairs = local_optimum_pairs(parts, a_min)
    if not pairs:
        raise RightSideEmpty("right side empty")
    return min(
        pairs,
        key=lambda c: (
            exact_slope(c.a_left, c.a_right),
            exact_weighted_latency(c.a_left, c.a_right, a_min),
            c.a_right.interval_a,
        ),
    )


def block_schedule(pair: CandidatePair, period_s: int = DEFAULT_BLOCK_PERIOD_S) -> dict[str, Any]:
    """Round the proportion to whole seconds of a block period."""
    left_s = round(pair.delta * period_s)
    blocks = [
        {"interval_ms": pair.a_left.interval_a, "duration_s": left_s},
        {"interval_ms": pair.a_right.interval_a, "duration_s": period_s - left_s},
    ]
    blocks = [b for b in blocks if b["duration_s"] > 0]
    text = " / ".join(f"{_num(b['interval_ms'])}ms for {b['duration_s']}s" for b in blocks)
    return {"period_s": period_s, "blocks": blocks, "text": text}


def _num(x: float) -> str:
    return str(int(x)) if float(x).is_integer() else repr(x)


def _pts(points: Sequence[DistributionPoint]) -> list[dict[str, float]]:
    return [{"interval_ms": p.interval_a, "latency_ms": p.latency_l} for p in points]


@dataclass
class CpbisReport:
    optimal_pair: CandidatePair | None
    series_labels: list[str]
    troughs: list[DistributionPoint]
    pruned: list[DistributionPoint]
    local_pairs: list[CandidatePair]
    config_echo: dict[str, Any] = field(default_factory=dict)
    fallback_single: DistributionPoint | None = None
    single_interval_alternative: DistributionPoint | None = None
    reference_pair: dict[str, Any] | None = None
    warnings: list[str] = field(default_factory=list)
    period_s: int = DEFAULT_BLOCK_PERIOD_S

    def to_dict(self) -> dict[str, Any]:
        out: dict[str, Any] = {
            "optimal_pair": self.optimal_pair.as_dict() if self.optimal_pair else None,
        }
        if self.optimal_pair:
            out["block_schedule"] = block_schedule(self.optimal_pair, self.period_s)
        if self.fallback_single:
            out["fallback_single_interval"] = {
                "interval_ms": self.fallback_single.interval_a,
                "latency_ms": self.fallback_single.latency_l,
            }
        if self.single_interval_alternative:
            out["single_interval_alternative"] = {
                "interval_ms": self.single_interval_alternative.interval_a,
                "latency_ms": self.single_interval_alternative.latency_l,
            }
        out["reference_pair"] = self.reference_pair
        out["warnings"] = self.warnings
        out["stages"] = {
            "series": self.series_labels,
            "troughs": _pts(self.troughs),
            "pruned": _pts(self.pruned),
            "local_optimum_pairs": [p.as_dict() for p in self.local_pairs],
        }
        out["config_echo"] = self.config_echo
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"

    def summary(self) -> str:
        lines = []
        if self.optimal_pair:
            p = self.optimal_pair
            lines.append(
                f"optimal pair: {_num(p.a_left.interval_a)} ms / {_num(p.a_right.interval_a)} ms, "
                f"delta = {p.delta:.4f}, weighted latency = {p.weighted_latency:.3f} ms"
            )
            lines.append(f"block schedule: {block_schedule(p, self.period_s)['text']}")
        if self.fallback_single:
            lines.append(
                f"single-interval fallback: {_num(self.fallback_single.interval_a)} ms "
                f"({self.fallback_single.latency_l:.3f} ms)"
            )
        if self.single_interval_alternative:
            alt = self.single_interval_alternative
            lines.append(f"single-interval alternative at a_min: {alt.latency_l:.3f} ms")
        if self.reference_pair:
            ref = self.reference_pair
            lines.append(
                "reference pair: "
                + ", ".join(f"{k} = {v}" for k, v in ref.items())
            )
        lines.append(
            f"troughs: {len(self.troughs)}, after pruning: {len(self.pruned)}, "
            f"local pairs: {len(self.local_pairs)}"
        )
        lines.extend(f"warning: {w}" for w in self.warnings)
        return "\n".join(lines)


def screen_series(
    series_list: Sequence[DistributionSeries],
    shares: Sequence[float],
    constraint: ConstraintConfig,
    config_echo: dict[str, Any] | None = None,
    reference_pair: dict[str, Any] | None = None,
) -> CpbisReport:
    """Stages 2-6 on already swept series."""
    a_min = constraint.a_min_ms
    mixed = _stage(2, "superimpose", superimpose, series_list, shares)
    troughs = _stage(3, "find_troughs", find_troughs, mixed)
    pruned = _stage(4, "prune_non_increasing", prune_non_increasing, troughs)
    report = CpbisReport(
        optimal_pair=None,
        series_labels=[s.label for s in series_list] + [mixed.label],
        troughs=troughs,
        pruned=pruned,
        local_pairs=[],
        config_echo=config_echo or {},
        reference_pair=reference_pair,
    )
    try:
        parts = partition(pruned, a_min)
    except PartitionError as exc:
        # one-sided grid: fall back to the best single interval that meets the budget
        feasible = [p for p in mixed.points if p.interval_a >= a_min]
        if not feasible:
            raise StageError(5, "partition", exc) from exc
        report.fallback_single = min(feasible, key=lambda p: (p.latency_l, p.interval_a))
        report.warnings.append(f"two-interval selection infeasible ({exc}); single interval reported")
        log.warning(report.warnings[-1])
        return report

    report.local_pairs = _stage(6, "select_optimal_pair", local_optimum_pairs, parts, a_min)
    report.optimal_pair = _stage(6, "select_optimal_pair", select_optimal_pair, parts, a_min)
    at_min = [p for p in parts.b_right if p.interval_a == a_min]
    if at_min:
        report.single_interval_alternative = at_min[0]
    return report


def _stage(n: int, name: str, fn, *args):
    try:
        return fn(*args)
    except StageError:
        raise
    except (ValueError, ArithmeticError) as exc:
        raise StageError(n, name, exc) from exc


def run_cpbis(
    catalog: Sequence[ScanMode],
    grid: SweepGrid,
    constraint: ConstraintConfig,
    advertiser: AdvertiserConfig,
    seed: int,
    horizon_ms: float = DEFAULT_HORIZON_MS,
    cache_dir: Path | None = None,
    workers: int = 1,
    reference_pair: dict[str, Any] | None = None,
) -> CpbisReport:
    """Full pipeline from scan-mode catalog to the selected interval pair."""
    catalog = validate_catalog(catalog)
    if grid.quantile_p != constraint.quantile_p:
        raise StageError(1, "build_distribution", ValueError("grid and constraint disagree on P"))
    series = []
    for mode in catalog:
        if cache_dir is None:
            s = _stage(1, "build_distribution", build_distribution, mode, grid, advertiser, seed, horizon_ms, workers)
        else:
            s = _stage(
                1, "build_distribution", cached_distribution,
                mode, grid, advertiser, seed, cache_dir, horizon_ms, workers,
            )
        series.append(s)
    echo = {
        "scan_modes": [asdict(m) for m in catalog],
        "grid": asdict(grid),
        "constraint": asdict(constraint),
        "advertiser": asdict(advertiser),
        "seed": seed,
        "horizon_ms": horizon_ms,
    }
    return screen_series(series, [m.market_share for m in catalog], constraint, echo, reference_pair)
