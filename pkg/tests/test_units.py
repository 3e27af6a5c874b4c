import pytest

from fogrig import units


@pytest.mark.parametrize("raw, expected", [
    ("100ms", 0.1), ("5s", 5.0), ("20m", 1200.0), ("1h", 3600.0),
    ("1.5m", 90.0), (7, 7.0), (0.25, 0.25), ("42", 42.0),
])
def test_parse_duration(raw, expected):
    assert units.parse_duration(raw) == expected


@pytest.mark.parametrize("raw", ["", "5 parsecs", "m5", None, float("nan"), True])
def test_parse_duration_rejects_garbage(raw):
    with pytest.raises((ValueError, TypeError)):
        units.parse_duration(raw)


def test_rate_formatting_uses_largest_exact_unit():
    assert units.format_rate(1_000_000_000) == "1gbit"
    assert units.format_rate(100_000_000) == "100mbit"
    assert units.format_rate(50_000) == "50kbit"
    assert units.format_rate(1_500) == "1500bit"


def test_ms_and_percent_formatting():
    assert units.format_ms(9.3) == "9.3ms"
    assert units.format_ms(10.0) == "10ms"
    assert units.format_percent(1.0) == "100%"
    assert units.format_percent(0.015) == "1.5%"


def test_byte_conversions():
    assert units.mb_to_bytes(1) == 1024 * 1024
    assert units.mbit_to_bps(100) == 100_000_000
    assert units.pct_to_probability(20) == 0.2
