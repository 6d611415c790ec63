"""Time-limited discovery trials for broadcast schedules across scan modes.

Mirrors a bench protocol: the scanner switches on at a random moment of the
advertiser's schedule and has ``limit_s`` seconds to hear a PDU.  Mean
latency is taken over successful trials only.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .ndp_sim import SimScenario, derive_seed, derive_subseeds, discovery_latencies_us
from .types import AdvertiserConfig, ConfigError, ScanMode, validate_catalog

DEFAULT_TRIALS = 1000
DEFAULT_LIMIT_S = 40.0


@dataclass(frozen=True)
class BroadcastSchedule:
    """Up to two (interval ms, block duration s) blocks repeated cyclically."""

    blocks: tuple[tuple[float, float], ...]
    name: str = ""

    def __post_init__(self) -> None:
        blocks = tuple((float(a), float(d)) for a, d in self.blocks)
        object.__setattr__(self, "blocks", blocks)
        if not 1 <= len(blocks) <= 2:
            raise ConfigError("a schedule has one or two blocks")
        if any(d <= 0 for _, d in blocks):
            raise ConfigError("block durations must be positive")
        if not self.name:
            object.__setattr__(
                self, "name", "+".join(f"{a:g}ms/{d:g}s" for a, d in blocks)
            )

    @property
    def period_s(self) -> float:
        return sum(d for _, d in self.blocks)

    def advertiser(self, template: AdvertiserConfig) -> AdvertiserConfig:
        period = self.period_s
        return AdvertiserConfig(
            intervals_ms=tuple(a for a, _ in self.blocks),
            proportions=tuple(d / period for _, d in self.blocks),
            adv_delay_max_ms=template.adv_delay_max_ms,
            pdu_duration_us=template.pdu_duration_us,
            channels=template.channels,
            channel_gap_us=template.channel_gap_us,
            block_period_ms=period * 1000.0,
        )


@dataclass(frozen=True)
class TrialCell:
    schedule: str
    scan_mode: str
    n: int
    successes: int
    mean_latency_s: float
    latency_std_s: float

    @property
    def success_rate(self) -> float:
        return self.successes / self.n


def run_trials(
    schedule: BroadcastSchedule,
    mode: ScanMode,
    limit_s: float = DEFAULT_LIMIT_S,
    n: int = DEFAULT_TRIALS,
    seed: int = 0,
    template: AdvertiserConfig | None = None,
) -> TrialCell:
    if n < 1:
        raise ConfigError("n must be >= 1")
    adv = schedule.advertiser(template or AdvertiserConfig((1000.0,)))
    limit_us = round(limit_s * 1e6)
    # horizon must clear the longest interval even for tiny limits
    horizon_ms = max(limit_us / 1000.0, max(adv.intervals_ms) + 1.0)
    scenario = SimScenario(mode, adv, horizon_ms=horizon_ms, rng_seed=seed)
    lat = discovery_latencies_us(scenario, derive_subseeds(seed, np.arange(n)))
    ok = (lat >= 0) & (lat <= limit_us)
    hits = lat[ok] / 1e6
    return TrialCell(
        schedule=schedule.name,
        scan_mode=mode.name,
        n=n,
        successes=int(ok.sum()),
        mean_latency_s=float(hits.mean()) if hits.size else math.nan,
        latency_std_s=float(hits.std(ddof=1)) if hits.size > 1 else math.nan,
    )


@dataclass
class TrialReport:
    cells: list[TrialCell]
    shares: dict[str, float]
    limit_s: float
    seed: int
    schedules: list[str] = field(default_factory=list)

    def cell(self, schedule: str, mode: str) -> TrialCell:
        for c in self.cells:
            if c.schedule == schedule and c.scan_mode == mode:
                return c
        raise KeyError((schedule, mode))

    def weighted_success(self, schedule: str) -> float:
        return sum(w * self.cell(schedule, m).success_rate for m, w in self.shares.items())

    def weighted_latency_s(self, schedule: str) -> float:
        return sum(w * self.cell(schedule, m).mean_latency_s for m, w in self.shares.items())

    def weighted_success_se(self, schedule: str) -> float:
        """Binomial standard error of the weighted success rate."""
        var = 0.0
        for m, w in self.shares.items():
            c = self.cell(schedule, m)
            p = c.success_rate
            var += w * w * p * (1 - p) / c.n
        return math.sqrt(var)

    def weighted_latency_se(self, schedule: str) -> float:
        var = 0.0
        for m, w in self.shares.items():
            c = self.cell(schedule, m)
            if c.successes > 1:
                var += w * w * c.latency_std_s ** 2 / c.successes
        return math.sqrt(var)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["schedule", "scan_mode", "success_rate", "mean_latency_s", "n"])
        for c in self.cells:
            w.writerow([c.schedule, c.scan_mode, repr(c.success_rate), repr(c.mean_latency_s), c.n])
        return buf.getvalue()

    def to_json(self) -> str:
        summary = {
            "limit_s": self.limit_s,
            "seed": self.seed,
            "shares": self.shares,
            "schedules": {
                s: {
                    "weighted_success_rate": self.weighted_success(s),
                    "weighted_success_se": self.weighted_success_se(s),
                    "weighted_mean_latency_s": _finite(self.weighted_latency_s(s)),
                    "weighted_latency_se": self.weighted_latency_se(s),
                }
                for s in self.schedules
            },
            "cells": [
                {
                    "schedule": c.schedule,
                    "scan_mode": c.scan_mode,
                    "success_rate": c.success_rate,
                    "mean_latency_s": _finite(c.mean_latency_s),
                    "n": c.n,
                }
                for c in self.cells
            ],
        }
        return json.dumps(summary, indent=2) + "\n"


def _finite(x: float) -> float | None:
    return None if math.isnan(x) else x


def compare_modes(
    schedules: Sequence[BroadcastSchedule],
    catalog: Sequence[ScanMode],
    limit_s: float = DEFAULT_LIMIT_S,
    n: int = DEFAULT_TRIALS,
    seed: int = 0,
    template: AdvertiserConfig | None = None,
) -> TrialReport:
    """Every schedule against every scan mode, with share-weighted rows."""
    catalog = validate_catalog(catalog)
    names = [s.name for s in schedules]
    if len(set(names)) != len(names):
        raise ConfigError(f"duplicate schedule names: {names}")
    cells = [
        # one seed per scan mode: schedules are compared on common random numbers
        run_trials(s, m, limit_s, n, derive_seed(seed, i), template)
        for s in schedules
        for i, m in enumerate(catalog)
    ]
    return TrialReport(
        cells=cells,
        shares={m.name: m.market_share for m in catalog},
        limit_s=limit_s,
        seed=seed,
        schedules=names,
    )
