"""Unit parsing and formatting helpers shared across the package.

Conventions: delays and dispersions are milliseconds, rates are bits per
second, memory and storage are bytes, durations are seconds.
"""

from __future__ import annotations

import math
import re

MIB = 1024 * 1024
MBIT = 1_000_000

_DURATION_RE = re.compile(r"^\s*(\d+(?:\.\d+)?)\s*(ms|s|m|h)?\s*$")
_DURATION_FACTORS = {"ms": 0.001, "s": 1.0, "m": 60.0, "h": 3600.0}


def parse_duration(value: str | int | float) -> float:
    """Parse a duration into seconds.

    Accepts bare numbers (seconds) or strings with a unit suffix:
    ``"100ms"``, ``"5s"``, ``"20m"``, ``"1h"``.
    """
    if isinstance(value, (int, float)):
        if isinstance(value, bool) or not math.isfinite(value):
            raise ValueError(f"invalid duration: {value!r}")
        return float(value)
    match = _DURATION_RE.match(value)
    if not match:
        raise ValueError(f"invalid duration: {value!r}")
    magnitude, unit = match.groups()
    return float(magnitude) * _DURATION_FACTORS[unit or "s"]


def mb_to_bytes(megabytes: float) -> int:
    return int(round(megabytes * MIB))


def mbit_to_bps(megabits: float) -> float:
    return float(megabits) * MBIT


def pct_to_probability(percent: float) -> float:
    return float(percent) / 100.0


def format_ms(value_ms: float) -> str:
    """Compact millisecond rendering used in command scripts: ``9.3ms``."""
    return f"{value_ms:g}ms"


def format_rate(rate_bps: float) -> str:
    """Render a bit rate in the largest exact traffic-control unit."""
    for factor, suffix in ((1_000_000_000, "gbit"), (1_000_000, "mbit"), (1_000, "kbit")):
        if rate_bps >= factor and rate_bps % factor == 0:
            return f"{int(rate_bps // factor)}{suffix}"
    return f"{int(rate_bps)}bit"


def format_percent(probability: float) -> str:
    return f"{probability * 100:g}%"
