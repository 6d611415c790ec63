import pytest
from hypothesis import given, strategies as st

from advscreen.types import (
    AdvertiserConfig,
    ConfigError,
    ConstraintConfig,
    DistributionPoint,
    DistributionSeries,
    ScanMode,
    ms_to_us,
    validate_catalog,
)


def test_catalog_two_modes_ok():
    cat = validate_catalog([(4096, 1024, 0.5), (5120, 512, 0.5)])
    assert [m.name for m in cat] == ["T4096_W1024", "T5120_W512"]


def test_catalog_continuous_scan_ok():
    (m,) = validate_catalog([(1000, 1000, 1.0)])
    assert m.window_us == m.interval_us == 1_000_000


def test_catalog_window_exceeds_interval():
    with pytest.raises(ConfigError, match="window exceeds interval"):
        validate_catalog([(1000, 2000, 1.0)])


@pytest.mark.parametrize(
    "modes, msg",
    [
        ([], "empty"),
        ([(1000, 100, 0.5)], "sum"),
        ([(1000, 100, 0.6), (2000, 100, 0.6)], "sum"),
        ([(0, 100, 1.0)], "positive"),
        ([(1000, -1, 1.0)], "positive"),
        ([(1000, 100, 1.0), (1000, 100, 0.0)], "duplicate"),
    ],
)
def test_catalog_rejects(modes, msg):
    with pytest.raises(ConfigError, match=msg):
        validate_catalog(modes)


def test_shares_not_renormalised():
    with pytest.raises(ConfigError):
        validate_catalog([(1000, 100, 0.25), (2000, 100, 0.25)])


def test_ms_to_us_exact():
    assert ms_to_us(4096) == 4_096_000
    assert ms_to_us(0.376) == 376
    with pytest.raises(ConfigError):
        ms_to_us(0.0001)


@given(T=st.integers(1, 10_000), W=st.integers(1, 10_000), share=st.floats(-2, 3))
def test_scan_mode_constructor_fuzz(T, W, share):
    valid = W <= T and 0 <= share <= 1
    if valid:
        m = ScanMode(T, W, share)
        assert 0 < m.scan_window_ms <= m.scan_interval_ms
    else:
        with pytest.raises(ConfigError):
            ScanMode(T, W, share)


@given(
    a=st.integers(-5, 5000),
    pdu=st.integers(-5, 2_000_000),
    ch=st.integers(0, 4),
    c=st.floats(0, 1),
)
def test_advertiser_constructor_fuzz(a, pdu, ch, c):
    valid = a > 0 and pdu > 0 and 1 <= ch <= 3 and a * 1000 >= pdu
    if valid:
        adv = AdvertiserConfig((a, a + 1), (c, 1 - c), pdu_duration_us=pdu, channels=ch)
        assert abs(sum(adv.proportions) - 1) <= 1e-9
    else:
        with pytest.raises(ConfigError):
            AdvertiserConfig((a, a + 1), (c, 1 - c), pdu_duration_us=pdu, channels=ch)


def test_advertiser_proportions_must_sum_to_one():
    with pytest.raises(ConfigError):
        AdvertiserConfig((1000, 2000), (0.5, 0.4))
    with pytest.raises(ConfigError):
        AdvertiserConfig((1000, 2000), (1.0,))


def test_advertiser_blocks():
    assert AdvertiserConfig((4600,)).blocks_us() == [(4_600_000, 4_600_000)]
    two = AdvertiserConfig((1535, 5645), (0.4, 0.6), block_period_ms=40_000)
    assert two.blocks_us() == [(1_535_000, 16_000_000), (5_645_000, 24_000_000)]


@given(p=st.floats(-1, 2))
def test_constraint_p_open_interval(p):
    if 0 < p < 1:
        assert ConstraintConfig(4000, p).quantile_p == p
    else:
        with pytest.raises(ConfigError):
            ConstraintConfig(4000, p)


def test_distribution_point_positive():
    with pytest.raises(ConfigError):
        DistributionPoint(0, 1)
    with pytest.raises(ConfigError):
        DistributionPoint(1, -1)


def test_series_strictly_ascending():
    pts = [DistributionPoint(1, 1), DistributionPoint(1, 2)]
    with pytest.raises(ConfigError):
        DistributionSeries(pts, "x")
    s = DistributionSeries([DistributionPoint(1, 1), DistributionPoint(3, 2)], "x", gaps=(2,))
    assert s.grid == (1, 2, 3)
