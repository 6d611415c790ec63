"""TOML run configuration.

Durations are milliseconds except schedule block lengths (seconds) and the
PDU timing fields (microseconds).  Errors name the offending field and, when
it can be located, the line it sits on.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import tomli

from .evaluate import DEFAULT_LIMIT_S, DEFAULT_TRIALS, BroadcastSchedule
from .ndp_sim import DEFAULT_HORIZON_MS
from .sweep import SweepGrid
from .types import AdvertiserConfig, ConfigError, ConstraintConfig, ScanMode, validate_catalog

_MISSING = object()


@dataclass(frozen=True)
class RunConfig:
    catalog: tuple[ScanMode, ...]
    grid: SweepGrid
    constraint: ConstraintConfig
    advertiser: AdvertiserConfig
    seed: int = 0
    horizon_ms: float = DEFAULT_HORIZON_MS
    workers: int = 1
    output_dir: Path | None = None
    limit_s: float = DEFAULT_LIMIT_S
    n_trials: int = DEFAULT_TRIALS
    schedules: tuple[BroadcastSchedule, ...] = ()
    reference_pair: dict[str, Any] | None = None
    source: str = field(default="<config>", compare=False)


class _Reader:
    def __init__(self, text: str, source: str):
        self.lines = text.splitlines()
        self.source = source

    def line_of(self, key: str, section: str | None = None) -> int | None:
        start = 0
        if section:
            hdr = re.compile(r"^\s*\[\[?\s*" + re.escape(section) + r"\s*\]\]?\s*$")
            hits = [i for i, ln in enumerate(self.lines) if hdr.match(ln)]
            if not hits:
                return None
            start = hits[0]
        pat = re.compile(r"^\s*" + re.escape(key) + r"\s*=")
        for i in range(start, len(self.lines)):
            if pat.match(self.lines[i]):
                return i + 1
        return None

    def fail(self, dotted: str, msg: str) -> ConfigError:
        section, _, key = dotted.rpartition(".")
        line = self.line_of(key, section or None)
        where = f"{self.source}:{line}" if line else self.source
        return ConfigError(f"{where}: field '{dotted}': {msg}")

    def get(self, table: dict, section: str, key: str, kind, default=_MISSING):
        dotted = f"{section}.{key}" if section else key
        if key not in table:
            if default is _MISSING:
                raise self.fail(dotted, "missing required field")
            return default
        value = table[key]
        if isinstance(value, bool) or not isinstance(value, kind):
            raise self.fail(dotted, f"expected {_kind_name(kind)}, got {value!r}")
        return value


def _kind_name(kind) -> str:
    if isinstance(kind, tuple):
        return " or ".join(k.__name__ for k in kind)
    return kind.__name__


_NUM = (int, float)


def parse_config(text: str, source: str = "<config>") -> RunConfig:
    try:
        raw = tomli.loads(text)
    except tomli.TOMLDecodeError as exc:
        raise ConfigError(f"{source}: {exc}") from None
    r = _Reader(text, source)

    modes_raw = raw.get("scan_modes")
    if not isinstance(modes_raw, list) or not modes_raw:
        raise ConfigError(f"{source}: field 'scan_modes': at least one [[scan_modes]] table required")
    modes = []
    for i, m in enumerate(modes_raw):
        try:
            modes.append(
                ScanMode(
                    scan_interval_ms=r.get(m, "scan_modes", "scan_interval_ms", _NUM),
                    scan_window_ms=r.get(m, "scan_modes", "scan_window_ms", _NUM),
                    market_share=r.get(m, "scan_modes", "market_share", _NUM),
                    name=r.get(m, "scan_modes", "name", str, ""),
                )
            )
        except ConfigError as exc:
            if str(exc).startswith(source):
                raise
            raise ConfigError(f"{source}: scan_modes[{i}]: {exc}") from None
    catalog = _wrap(r, "scan_modes", validate_catalog, modes)

    sw = _table(r, raw, "sweep")
    con = _table(r, raw, "constraint")
    adv = raw.get("advertiser", {})
    p = r.get(con, "constraint", "quantile_p", _NUM, 0.9)
    constraint = _wrap(
        r, "constraint.a_min_ms", ConstraintConfig, r.get(con, "constraint", "a_min_ms", _NUM), p
    )
    grid = _wrap(
        r, "sweep", SweepGrid,
        r.get(sw, "sweep", "a_start_ms", _NUM),
        r.get(sw, "sweep", "a_end_ms", _NUM),
        r.get(sw, "sweep", "a_step_ms", _NUM, 5),
        r.get(sw, "sweep", "n_runs", int, 1000),
        p,
    )
    advertiser = _wrap(
        r, "advertiser", AdvertiserConfig,
        (1000.0,),
        (1.0,),
        r.get(adv, "advertiser", "adv_delay_max_ms", _NUM, 10.0),
        r.get(adv, "advertiser", "pdu_duration_us", int, 376),
        r.get(adv, "advertiser", "channels", int, 3),
        r.get(adv, "advertiser", "channel_gap_us", int, 400),
    )
    horizon = r.get(sw, "sweep", "horizon_ms", _NUM, DEFAULT_HORIZON_MS)
    if horizon <= 0:
        raise r.fail("sweep.horizon_ms", "must be positive")

    ev = raw.get("evaluate", {})
    schedules = []
    for i, s in enumerate(ev.get("schedules", [])):
        blocks = r.get(s, "evaluate.schedules", "blocks", list)
        try:
            schedules.append(
                BroadcastSchedule(tuple(tuple(b) for b in blocks), r.get(s, "evaluate.schedules", "name", str, ""))
            )
        except (ConfigError, TypeError, ValueError) as exc:
            raise r.fail("evaluate.schedules.blocks", f"schedule {i}: {exc}") from None

    out = raw.get("output_dir")
    return RunConfig(
        catalog=catalog,
        grid=grid,
        constraint=constraint,
        advertiser=advertiser,
        seed=r.get(raw, "", "seed", int, 0),
        horizon_ms=horizon,
        workers=r.get(sw, "sweep", "workers", int, 1),
        output_dir=Path(out) if out else None,
        limit_s=r.get(ev, "evaluate", "limit_s", _NUM, DEFAULT_LIMIT_S),
        n_trials=r.get(ev, "evaluate", "n_trials", int, DEFAULT_TRIALS),
        schedules=tuple(schedules),
        reference_pair=raw.get("reference"),
        source=source,
    )


def _table(r: _Reader, raw: dict, name: str) -> dict:
    t = raw.get(name, {})
    if not isinstance(t, dict):
        raise ConfigError(f"{r.source}: field '{name}': expected a [{name}] table")
    return t


def _wrap(r: _Reader, dotted: str, fn, *args):
    try:
        return fn(*args)
    except ConfigError as exc:
        if str(exc).startswith(r.source):
            raise
        raise r.fail(dotted, str(exc)) from None


def load_config(path: str | Path) -> RunConfig:
    path = Path(path)
    return parse_config(path.read_text(encoding="utf-8"), str(path))
