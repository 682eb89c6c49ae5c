"""Power unit conversions. Config files and the command language carry dBm;
all internal arithmetic is linear watts."""

from __future__ import annotations

import math


def dbm_to_watts(dbm: float) -> float:
    """-inf dBm maps to exactly 0 W."""
    if dbm == float("-inf"):
        return 0.0
    return 10.0 ** (dbm / 10.0) / 1000.0


def watts_to_dbm(watts: float) -> float:
    if watts < 0:
        raise ValueError(f"negative power: {watts} W")
    if watts == 0.0:
        return float("-inf")
    return 10.0 * math.log10(watts * 1000.0)
