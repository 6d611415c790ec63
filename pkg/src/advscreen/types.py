"""Domain vocabulary shared by the simulator, the sweep and the screening pipeline.

Durations in configs are milliseconds; the simulator works in integer
microseconds.  ``ms_to_us`` is the only place where that conversion happens.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from decimal import Decimal, InvalidOperation
from typing import Iterable, Sequence

SHARE_TOL = 1e-9


class ConfigError(ValueError):
    """A value violates one of the domain invariants."""


def ms_to_us(value: float | int | str, name: str = "duration") -> int:
    """Convert a millisecond value to whole microseconds, refusing sub-µs input."""
    try:
        us = Decimal(str(value)) * 1000
    except InvalidOperation:
        raise ConfigError(f"{name}: not a number: {value!r}") from None
    if us != us.to_integral_value():
        raise ConfigError(f"{name}: {value} ms is not a whole number of microseconds")
    return int(us)


def _positive(value: float, name: str) -> None:
    if not value > 0:
        raise ConfigError(f"{name} must be positive, got {value!r}")


@dataclass(frozen=True)
class ScanMode:
    """Scanner duty cycle: listen for ``scan_window_ms`` at the start of every ``scan_interval_ms``."""

    scan_interval_ms: float
    scan_window_ms: float
    market_share: float = 1.0
    name: str = ""

    def __post_init__(self) -> None:
        _positive(self.scan_interval_ms, "scan interval")
        _positive(self.scan_window_ms, "scan window")
        if self.scan_window_ms > self.scan_interval_ms:
            raise ConfigError(
                f"window exceeds interval: W={self.scan_window_ms} ms > T={self.scan_interval_ms} ms"
            )
        if not 0.0 <= self.market_share <= 1.0:
            raise ConfigError(f"market share must lie in [0, 1], got {self.market_share!r}")
        # validate convertibility once, up front
        ms_to_us(self.scan_interval_ms, "scan interval")
        ms_to_us(self.scan_window_ms, "scan window")
        if not self.name:
            object.__setattr__(
                self, "name", f"T{_fmt_ms(self.scan_interval_ms)}_W{_fmt_ms(self.scan_window_ms)}"
            )

    @property
    def interval_us(self) -> int:
        return ms_to_us(self.scan_interval_ms)

    @property
    def window_us(self) -> int:
        return ms_to_us(self.scan_window_ms)


def _fmt_ms(value: float) -> str:
    d = Decimal(str(value)).normalize()
    return format(d, "f")


def validate_catalog(modes: Iterable[ScanMode | Sequence]) -> tuple[ScanMode, ...]:
    """Build and check a scan-mode catalog.

    Entries may be ``ScanMode`` instances or ``(T, W, share)`` tuples.  Shares
    must already sum to one; nothing is renormalised.
    """
    catalog = []
    for entry in modes:
        catalog.append(entry if isinstance(entry, ScanMode) else ScanMode(*entry))
    if not catalog:
        raise ConfigError("scan-mode catalog is empty")
    total = sum(m.market_share for m in catalog)
    if abs(total - 1.0) > SHARE_TOL:
        raise ConfigError(f"market shares sum to {total!r}, expected 1")
    names = [m.name for m in catalog]
    if len(set(names)) != len(names):
        raise ConfigError(f"duplicate scan-mode names: {names}")
    return tuple(catalog)


@dataclass(frozen=True)
class AdvertiserConfig:
    """Advertising plan.

    With more than one interval the advertiser alternates in time blocks: the
    i-th interval is used for ``proportions[i] * block_period_ms``.
    """

    intervals_ms: tuple[float, ...]
    proportions: tuple[float, ...] = (1.0,)
    adv_delay_max_ms: float = 10.0
    pdu_duration_us: int = 376
    channels: int = 3
    channel_gap_us: int = 400
    block_period_ms: float = 40_000.0

    def __post_init__(self) -> None:
        object.__setattr__(self, "intervals_ms", tuple(self.intervals_ms))
        object.__setattr__(self, "proportions", tuple(self.proportions))
        if not self.intervals_ms:
            raise ConfigError("advertiser needs at least one interval")
        if len(self.proportions) != len(self.intervals_ms):
            raise ConfigError("intervals and proportions differ in length")
        if any(not 0.0 <= c <= 1.0 for c in self.proportions):
            raise ConfigError(f"proportions must lie in [0, 1]: {self.proportions}")
        if abs(sum(self.proportions) - 1.0) > SHARE_TOL:
            raise ConfigError(f"proportions sum to {sum(self.proportions)!r}, expected 1")
        if self.adv_delay_max_ms < 0:
            raise ConfigError("adv_delay_max must be >= 0")
        if int(self.pdu_duration_us) != self.pdu_duration_us or self.pdu_duration_us <= 0:
            raise ConfigError("pdu_duration must be a positive whole number of microseconds")
        if int(self.channels) != self.channels or not 1 <= self.channels <= 3:
            raise ConfigError("channels must be 1, 2 or 3")
        if int(self.channel_gap_us) != self.channel_gap_us or self.channel_gap_us < 0:
            raise ConfigError("channel gap must be a non-negative whole number of microseconds")
        _positive(self.block_period_ms, "block period")
        for a in self.intervals_ms:
            _positive(a, "broadcast interval")
            if ms_to_us(a, "broadcast interval") < self.pdu_duration_us:
                raise ConfigError(f"broadcast interval {a} ms is shorter than one PDU")
        ms_to_us(self.adv_delay_max_ms, "adv_delay_max")
        ms_to_us(self.block_period_ms, "block period")

    def with_interval(self, interval_ms: float) -> "AdvertiserConfig":
        """Single-interval copy sharing every radio setting."""
        return AdvertiserConfig(
            intervals_ms=(interval_ms,),
            proportions=(1.0,),
            adv_delay_max_ms=self.adv_delay_max_ms,
            pdu_duration_us=self.pdu_duration_us,
            channels=self.channels,
            channel_gap_us=self.channel_gap_us,
            block_period_ms=self.block_period_ms,
        )

    def blocks_us(self) -> list[tuple[int, int]]:
        """(interval, block length) pairs in µs; zero-share blocks dropped.

        A single interval is one block one interval long, so the schedule
        phase is just the advertiser's phase within its interval.
        """
        live = [(a, c) for a, c in zip(self.intervals_ms, self.proportions) if c > 0]
        if len(live) == 1:
            a_us = ms_to_us(live[0][0])
            return [(a_us, a_us)]
        period = ms_to_us(self.block_period_ms)
        return [(ms_to_us(a), int(round(c * period))) for a, c in live]


@dataclass(frozen=True)
class ConstraintConfig:
    """Power constraint (minimum equivalent interval) and the worst-case quantile."""

    a_min_ms: float
    quantile_p: float = 0.9

    def __post_init__(self) -> None:
        _positive(self.a_min_ms, "a_min")
        if not 0.0 < self.quantile_p < 1.0:
            raise ConfigError(f"quantile P must lie in (0, 1), got {self.quantile_p!r}")


@dataclass(frozen=True, order=True)
class DistributionPoint:
    interval_a: float
    latency_l: float

    def __post_init__(self) -> None:
        _positive(self.interval_a, "interval")
        _positive(self.latency_l, "latency")


@dataclass(frozen=True)
class DistributionSeries:
    """Broadcast interval -> worst-case latency, strictly ascending in interval.

    ``gaps`` lists grid intervals that were simulated but produced no usable
    quantile; they are part of the grid but carry no point.
    """

    points: tuple[DistributionPoint, ...]
    label: str
    gaps: tuple[float, ...] = field(default=())

    def __post_init__(self) -> None:
        object.__setattr__(self, "points", tuple(self.points))
        object.__setattr__(self, "gaps", tuple(self.gaps))
        a = [p.interval_a for p in self.points]
        if any(x >= y for x, y in zip(a, a[1:])):
            raise ConfigError(f"series {self.label!r}: intervals not strictly increasing")
        if set(a) & set(self.gaps):
            raise ConfigError(f"series {self.label!r}: interval listed both as point and gap")

    @property
    def intervals(self) -> list[float]:
        return [p.interval_a for p in self.points]

    @property
    def latencies(self) -> list[float]:
        return [p.latency_l for p in self.points]

    @property
    def grid(self) -> tuple[float, ...]:
        """Full simulated grid, points and gaps together."""
        return tuple(sorted(set(self.intervals) | set(self.gaps)))

    def __len__(self) -> int:
        return len(self.points)
