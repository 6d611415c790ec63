import csv

import pytest
from hypothesis import given, strategies as st

from advscreen import sweep as sweep_mod
from advscreen.ndp_sim import SimScenario, derive_seed, derive_subseeds, simulate_one
from advscreen.sweep import (
    EmptyDistribution,
    GridMismatch,
    SweepGrid,
    build_distribution,
    cache_name,
    cached_distribution,
    lower_envelope,
    lower_hull,
    read_series_csv,
    superimpose,
)
from advscreen.types import AdvertiserConfig, ConfigError, DistributionPoint, DistributionSeries, ScanMode

ADV = AdvertiserConfig((1000,))


def series(label, pairs, gaps=()):
    return DistributionSeries(tuple(DistributionPoint(a, l) for a, l in pairs), label, gaps)


def test_grid_validation():
    assert SweepGrid(500, 8000, 5).intervals_ms()[:3] == [500.0, 505.0, 510.0]
    assert len(SweepGrid(500, 8000, 5).intervals_us()) == 1501
    with pytest.raises(ConfigError):
        SweepGrid(500, 505, 5)
    with pytest.raises(ConfigError):
        SweepGrid(800, 500, 5)


def test_three_point_grid_single_run_equals_its_sample():
    mode = ScanMode(4096, 1024)
    grid = SweepGrid(1000, 1010, 5, n_runs=1)
    s = build_distribution(mode, grid, ADV, seed=5)
    assert len(s) == 3
    for pt in s.points:
        a_us = round(pt.interval_a * 1000)
        scn = SimScenario(mode, ADV.with_interval(pt.interval_a), rng_seed=derive_seed(5, a_us))
        assert pt.latency_l == simulate_one(scn, int(derive_subseeds(scn.rng_seed, [0])[0]))


def test_build_distribution_deterministic():
    grid = SweepGrid(1000, 2000, 100, n_runs=200)
    a = build_distribution(ScanMode(5120, 512), grid, ADV, seed=2)
    b = build_distribution(ScanMode(5120, 512), grid, ADV, seed=2)
    assert a == b


def test_workers_do_not_change_result():
    grid = SweepGrid(1000, 1400, 100, n_runs=100)
    serial = build_distribution(ScanMode(5120, 512), grid, ADV, seed=2)
    parallel = build_distribution(ScanMode(5120, 512), grid, ADV, seed=2, workers=2)
    assert serial == parallel


def test_all_gaps_is_empty_distribution():
    # 1 ms windows every 5 s and a horizon barely above the interval
    grid = SweepGrid(1000, 1010, 5, n_runs=50)
    with pytest.raises(EmptyDistribution):
        build_distribution(ScanMode(5000, 1), grid, ADV, seed=1, horizon_ms=1100)


def test_superimpose_identity_and_arithmetic():
    s1 = series("a", [(1, 10.0), (2, 12.0)])
    s2 = series("b", [(1, 20.0), (2, 4.0)])
    assert superimpose([s1], [1.0]).points == s1.points
    mixed = superimpose([s1, s2], [0.5, 0.5])
    assert mixed.label == "superimposed"
    assert mixed.latencies == [15.0, 8.0]
    assert superimpose([s1, s2], [1.0, 0.0]).points == s1.points


def test_superimpose_gaps_excluded():
    s1 = series("a", [(1, 10.0), (3, 12.0)], gaps=(2,))
    s2 = series("b", [(1, 20.0), (2, 4.0), (3, 5.0)])
    mixed = superimpose([s1, s2], [0.5, 0.5])
    assert mixed.intervals == [1, 3]
    assert mixed.gaps == (2,)


def test_superimpose_grid_mismatch():
    with pytest.raises(GridMismatch, match="grid mismatch"):
        superimpose([series("a", [(1, 1.0)]), series("b", [(2, 1.0)])], [0.5, 0.5])


def test_superimpose_shares_checked():
    with pytest.raises(ConfigError):
        superimpose([series("a", [(1, 1.0)]), series("b", [(1, 1.0)])], [0.5, 0.6])


@given(
    st.lists(st.tuples(st.floats(1, 1e5), st.floats(1, 1e5), st.floats(1, 1e5)), min_size=1, max_size=20),
    st.floats(0, 1),
    st.floats(0, 1),
)
def test_mixture_within_component_range(rows, u, v):
    w = sorted([u, v])
    shares = [w[0], w[1] - w[0], 1 - w[1]]
    comps = [series(str(i), [(a + 1, r[i]) for a, r in enumerate(rows)]) for i in range(3)]
    mixed = superimpose(comps, shares)
    assert len(mixed.points) <= len(comps[0].points)
    for a, r in enumerate(rows):
        lat = mixed.points[a].latency_l
        assert min(r) - 1e-9 * max(r) <= lat <= max(r) + 1e-9 * max(r)


def test_mixture_equals_recomputation_from_cached_series(tmp_path):
    grid = SweepGrid(3000, 3200, 10, n_runs=300)
    modes = [ScanMode(4096, 1024, 0.5), ScanMode(5120, 512, 0.5)]
    built = [cached_distribution(m, grid, ADV, 9, tmp_path) for m in modes]
    mixed = superimpose(built, [0.5, 0.5])
    stored = []
    for m in modes:
        with open(tmp_path / cache_name(m.name, 0.9, 9)) as fh:
            stored.append({float(r["interval_ms"]): float(r["latency_ms"]) for r in csv.DictReader(fh)})
    for pt in mixed.points:
        assert pt.latency_l == 0.5 * stored[0][pt.interval_a] + 0.5 * stored[1][pt.interval_a]


def test_cache_hit_skips_simulation(tmp_path, monkeypatch):
    grid = SweepGrid(2000, 2100, 50, n_runs=100)
    mode = ScanMode(4096, 1024)
    first = cached_distribution(mode, grid, ADV, 1, tmp_path)
    before = (tmp_path / cache_name(mode.name, 0.9, 1)).read_bytes()

    def boom(*a, **k):
        raise AssertionError("resimulated")

    monkeypatch.setattr(sweep_mod, "build_distribution", boom)
    again = cached_distribution(mode, grid, ADV, 1, tmp_path)
    assert again == first
    assert (tmp_path / cache_name(mode.name, 0.9, 1)).read_bytes() == before
    # a different grid under the same file name must not reuse the cache
    with pytest.raises(AssertionError, match="resimulated"):
        cached_distribution(mode, SweepGrid(2000, 2100, 25, n_runs=100), ADV, 1, tmp_path)


def test_csv_round_trip(tmp_path):
    s = series("x", [(500.0, 1234.567), (505.0, 99.001)])
    sweep_mod.write_series_csv(s, tmp_path / "x.csv")
    assert (tmp_path / "x.csv").read_text().splitlines()[0] == "interval_ms,latency_ms"
    assert read_series_csv(tmp_path / "x.csv", "x") == s


def test_lower_hull_and_envelope_on_sawtooth():
    # teeth rise from the line y = 2x; the troughs lie exactly on it
    pts = []
    for a in range(100, 2001, 10):
        pts.append((a, 2 * a + (a % 200) * 3.0))
    s = series("saw", pts)
    fit = lower_envelope(s)
    assert fit.slope == pytest.approx(2.0)
    assert fit.intercept == pytest.approx(0.0, abs=1e-9)
    hull = lower_hull(pts)
    assert all(y == 2 * x for x, y in hull[1:-1])
