"""Discrete-event model of one BLE neighbor-discovery process.

The scanner listens for W at the start of every scan interval T, stepping
through the advertising channels one interval at a time.  The advertiser
sends one PDU per channel per event, events spaced by the current interval
plus a random advDelay.  A run ends when a PDU lies entirely inside a window
on the channel the scanner is tuned to.

Randomness is counter based: every run owns a 64-bit sub-seed and its k-th
draw is ``splitmix64(subseed + (k + 1) * gamma)``.  A run's result therefore
depends only on ``(scenario, subseed)``, whatever batch it is simulated in.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from .types import AdvertiserConfig, ConfigError, ScanMode, ms_to_us

_GAMMA = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_MASK64 = (1 << 64) - 1

# draw slots within one run's stream
_DRAW_SCAN_PHASE = 0
_DRAW_ADV_OFFSET = 1
_DRAW_FIRST_DELAY = 2

DEFAULT_HORIZON_MS = 300_000


class QuantileUnreachable(ValueError):
    """Too many timeouts for the requested quantile."""


def _mix(z: np.ndarray) -> np.ndarray:
    with np.errstate(over="ignore"):
        z = (z ^ (z >> np.uint64(30))) * _M1
        z = (z ^ (z >> np.uint64(27))) * _M2
        return z ^ (z >> np.uint64(31))


def _draw(subseeds: np.ndarray, slot: np.ndarray | int) -> np.ndarray:
    with np.errstate(over="ignore"):
        state = subseeds + (np.asarray(slot, dtype=np.uint64) + np.uint64(1)) * _GAMMA
        return _mix(state)


def _uniform_int(subseeds: np.ndarray, slot, upper) -> np.ndarray:
    """Integers uniform on [0, upper) from the given draw slot."""
    u = (_draw(subseeds, slot) >> np.uint64(11)).astype(np.float64) * (2.0 ** -53)
    return np.floor(u * np.asarray(upper, dtype=np.float64)).astype(np.int64)


def derive_subseeds(seed: int, positions) -> np.ndarray:
    """Sub-seeds for the given run positions under a master seed."""
    pos = np.atleast_1d(np.asarray(positions, dtype=np.uint64))
    base = _mix(np.array([seed & _MASK64], dtype=np.uint64))
    with np.errstate(over="ignore"):
        return _mix(base + (pos + np.uint64(1)) * _GAMMA)


def derive_seed(seed: int, *keys: int) -> int:
    """Deterministic child seed from a master seed and integer keys."""
    s = seed & _MASK64
    for k in keys:
        s = int(derive_subseeds(s, [k & _MASK64])[0])
    return s


@dataclass(frozen=True)
class SimScenario:
    scan_mode: ScanMode
    advertiser: AdvertiserConfig
    horizon_ms: float = DEFAULT_HORIZON_MS
    rng_seed: int = 0

    def __post_init__(self) -> None:
        if self.horizon_ms <= max(self.advertiser.intervals_ms):
            raise ConfigError("horizon must exceed the longest broadcast interval")
        ms_to_us(self.horizon_ms, "horizon")
        if not 0 <= self.rng_seed <= _MASK64:
            raise ConfigError("rng_seed must be an unsigned 64-bit integer")


def discovery_latencies_us(scenario: SimScenario, subseeds: np.ndarray) -> np.ndarray:
    """Vectorised kernel: one latency (µs) per sub-seed, -1 for a timeout."""
    subseeds = np.asarray(subseeds, dtype=np.uint64)
    n = subseeds.size
    adv = scenario.advertiser
    n_ch = adv.channels
    T = scenario.scan_mode.interval_us
    W = scenario.scan_mode.window_us
    pdu = adv.pdu_duration_us
    hop = pdu + adv.channel_gap_us
    horizon = ms_to_us(scenario.horizon_ms)
    delay_span = ms_to_us(adv.adv_delay_max_ms) + 1
    continuous = W == T and n_ch == 1

    blocks = adv.blocks_us()
    block_interval = np.array([b[0] for b in blocks], dtype=np.int64)
    block_end = np.cumsum([b[1] for b in blocks]).astype(np.int64)
    period = int(block_end[-1])

    out = np.full(n, -1, dtype=np.int64)
    idx = np.arange(n)
    seeds = subseeds.copy()
    psi = _uniform_int(seeds, _DRAW_SCAN_PHASE, n_ch * T)
    offset = _uniform_int(seeds, _DRAW_ADV_OFFSET, period)
    # schedule time 0 happened `offset` µs before the scanner came into range
    event = -offset
    k = np.zeros(n, dtype=np.uint64)

    while idx.size:
        found = np.zeros(idx.size, dtype=bool)
        latency = np.zeros(idx.size, dtype=np.int64)
        for ch in range(n_ch):
            start = event + ch * hop
            if continuous:
                ok = start >= 0
            else:
                j = (start - psi) // T
                win_start = psi + j * T
                ok = (start >= 0) & (start + pdu <= win_start + W) & (j % n_ch == ch)
            new = ok & ~found
            latency[new] = start[new] + pdu
            found |= ok
        hit = found & (latency <= horizon)
        out[idx[hit]] = latency[hit]

        if len(blocks) == 1:
            step = block_interval[0]
        else:
            tau = (event + offset) % period
            step = block_interval[np.searchsorted(block_end, tau, side="right")]
        delay = _uniform_int(seeds, k + np.uint64(_DRAW_FIRST_DELAY), delay_span)
        event = event + step + delay
        k = k + np.uint64(1)

        keep = ~found & (event + pdu <= horizon)
        idx, seeds, psi, offset, event, k = (
            idx[keep], seeds[keep], psi[keep], offset[keep], event[keep], k[keep]
        )
    return out


def simulate_one(scenario: SimScenario, subseed: int) -> float | None:
    """Latency in ms of the run owning ``subseed``; ``None`` on timeout."""
    lat = discovery_latencies_us(scenario, np.array([subseed], dtype=np.uint64))[0]
    return None if lat < 0 else int(lat) / 1000.0


@dataclass(frozen=True)
class LatencyCdf:
    """Empirical latency distribution; timeouts are counted, not stored."""

    latencies_us: np.ndarray = field(repr=False)
    timeouts: int = 0

    def __post_init__(self) -> None:
        arr = np.sort(np.asarray(self.latencies_us, dtype=np.int64))
        arr.flags.writeable = False
        object.__setattr__(self, "latencies_us", arr)
        if self.timeouts < 0:
            raise ConfigError("negative timeout count")

    @property
    def total(self) -> int:
        return int(self.latencies_us.size) + self.timeouts

    @property
    def sorted_latencies(self) -> np.ndarray:
        return self.latencies_us / 1000.0

    def __call__(self, latency_ms: float) -> float:
        """Fraction of all runs (timeouts included) discovered within ``latency_ms``."""
        if self.total == 0:
            return 0.0
        us = math.floor(latency_ms * 1000 + 1e-9)
        return int(np.searchsorted(self.latencies_us, us, side="right")) / self.total

    def steps(self) -> tuple[np.ndarray, np.ndarray]:
        """Distinct latencies (ms) and the CDF value reached at each."""
        vals, counts = np.unique(self.latencies_us, return_counts=True)
        return vals / 1000.0, np.cumsum(counts) / self.total


def estimate_cdf(scenario: SimScenario, n_runs: int) -> LatencyCdf:
    if n_runs < 1:
        raise ConfigError("n_runs must be >= 1")
    lat = discovery_latencies_us(scenario, derive_subseeds(scenario.rng_seed, np.arange(n_runs)))
    ok = lat >= 0
    return LatencyCdf(lat[ok], timeouts=int(n_runs - ok.sum()))


def _exact_fraction(p: float) -> Fraction:
    # repr keeps 0.9 as 9/10 rather than its binary expansion
    return Fraction(repr(float(p)))


def quantile_rank(p: float, total: int) -> int:
    """1-based rank of the lower empirical p-quantile among ``total`` samples."""
    return max(1, math.ceil(_exact_fraction(p) * total))


def quantile(cdf: LatencyCdf, p: float) -> float:
    """Smallest latency whose empirical CDF reaches ``p`` (ms)."""
    if not 0.0 < p < 1.0:
        raise ConfigError(f"p must lie in (0, 1), got {p!r}")
    rank = quantile_rank(p, cdf.total)
    if rank > cdf.latencies_us.size:
        raise QuantileUnreachable(
            f"quantile unreachable: {cdf.timeouts} of {cdf.total} runs timed out, p={p}"
        )
    return int(cdf.latencies_us[rank - 1]) / 1000.0


def cdf_from_samples(samples_ms: Sequence[float], timeouts: int = 0) -> LatencyCdf:
    """Build a CDF from explicit latencies in ms (mostly for tests and tooling)."""
    us = [ms_to_us(s, "latency") for s in samples_ms]
    return LatencyCdf(np.array(us, dtype=np.int64), timeouts=timeouts)
