"""Perception side of the loop: tokenized state contexts, KPI aggregates,
and stable digests for trajectory audit trails.

Token streams are plain whitespace-style tokens with section markers; no
model vocabulary is involved. The same state always yields byte-identical
tokens, and any field change of at least one quantization step changes the
stream.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .env import KpiVector, RanState

DIGEST_HEX_CHARS = 16

STATE_OPEN, STATE_CLOSE = "<STATE>", "</STATE>"
SECTIONS = ("CSI", "QUEUES", "CONFIG", "SINR")


@dataclass(frozen=True)
class QuantizationSpec:
    """Decimals and clip ranges per tokenized field class."""

    gain_decimals: int = 2
    queue_decimals: int = 0
    power_dbm_decimals: int = 1
    sinr_db_decimals: int = 1
    gain_clip: tuple[float, float] = (0.0, 100.0)
    queue_clip: tuple[float, float] = (0.0, 1e9)
    power_dbm_clip: tuple[float, float] = (-80.0, 60.0)
    sinr_db_clip: tuple[float, float] = (-60.0, 90.0)

    def __post_init__(self) -> None:
        for name in ("gain", "queue", "power_dbm", "sinr_db"):
            decimals = getattr(self, f"{name}_decimals")
            lo, hi = getattr(self, f"{name}_clip")
            if decimals < 0:
                raise ValueError(f"{name}_decimals must be >= 0")
            if not (math.isfinite(lo) and math.isfinite(hi) and lo < hi):
                raise ValueError(f"{name}_clip must be finite with min < max")

    def quantize(self, value: float, field: str) -> str:
        lo, hi = getattr(self, f"{field}_clip")
        decimals = getattr(self, f"{field}_decimals")
        clipped = min(max(float(value), lo), hi)
        return f"{clipped:.{decimals}f}"

    def step(self, field: str) -> float:
        return 10.0 ** -getattr(self, f"{field}_decimals")


@dataclass(frozen=True)
class StateContext:
    tokens: tuple[str, ...]
    source_tick: int
    digest: str


def digest_tokens(tokens: Sequence[str]) -> str:
    """Stable fixed-width hex digest of a token sequence."""
    h = hashlib.sha256("\x1f".join(tokens).encode("utf-8"))
    return h.hexdigest()[:DIGEST_HEX_CHARS]


def tokenize_state(state: RanState, spec: QuantizationSpec | None = None) -> StateContext:
    """Flatten a state into a framed token stream.

    Gains go row-major in (user, cell) order, queues in (user, flow) order,
    configuration as cell_i=<p>dBm and carrier_j=on|off items, SINR per user
    in dB; every numeric is clipped then rounded per the quantization spec.
    """
    spec = spec or QuantizationSpec()
    tokens: list[str] = [STATE_OPEN, "<CSI>"]
    tokens.extend(spec.quantize(g, "gain") for g in state.channel.gains.ravel())
    tokens.append("</CSI>")

    tokens.append("<QUEUES>")
    tokens.extend(spec.quantize(q, "queue") for q in state.queues.lengths.ravel())
    tokens.append("</QUEUES>")

    tokens.append("<CONFIG>")
    for cell, dbm in state.config.powers_dbm.items():
        tokens.append(f"{cell}={spec.quantize(dbm, 'power_dbm')}dBm")
    for carrier, on in state.config.carriers.items():
        tokens.append(f"{carrier}={'on' if on else 'off'}")
    tokens.append("</CONFIG>")

    tokens.append("<SINR>")
    with np.errstate(divide="ignore"):
        sinr_db = 10.0 * np.log10(state.interference.sinr)
    tokens.extend(spec.quantize(s, "sinr_db") for s in sinr_db)
    tokens.append("</SINR>")

    tokens.append(STATE_CLOSE)
    out = tuple(tokens)
    check_framing(out)  # structural invariant holds on every emission
    return StateContext(tokens=out, source_tick=state.tick, digest=digest_tokens(out))


def check_framing(tokens: Sequence[str]) -> None:
    """Assert the marker-nesting invariant: outer STATE frame, the four
    sections in fixed order, each properly closed, no stray markers."""
    if not tokens or tokens[0] != STATE_OPEN or tokens[-1] != STATE_CLOSE:
        raise ValueError("token stream must start <STATE> and end </STATE>")
    opens = [f"<{s}>" for s in SECTIONS]
    closes = [f"</{s}>" for s in SECTIONS]
    order: list[str] = [t for t in tokens[1:-1] if t in opens or t in closes]
    expected = [m for s in SECTIONS for m in (f"<{s}>", f"</{s}>")]
    if order != expected:
        raise ValueError(f"section markers out of order: {order}")
    depth = 0
    for t in tokens[1:-1]:
        if t in opens:
            if depth != 0:
                raise ValueError(f"nested section marker {t}")
            depth += 1
        elif t in closes:
            depth -= 1
        elif t in (STATE_OPEN, STATE_CLOSE):
            raise ValueError("stray state marker inside frame")
        elif depth != 1:
            raise ValueError(f"token {t!r} outside any section")


def state_digest(state: RanState) -> str:
    """Fixed-width digest over the full state content (tick excluded, like
    state equality)."""
    h = hashlib.sha256()
    h.update(np.ascontiguousarray(state.channel.gains).tobytes())
    for user in sorted(state.channel.matrices or {}):
        h.update(user.encode())
        h.update(np.ascontiguousarray(state.channel.matrices[user]).tobytes())
    h.update(np.ascontiguousarray(state.queues.lengths).tobytes())
    config = {
        "powers_dbm": dict(state.config.powers_dbm),
        "carriers": dict(state.config.carriers),
        "scheduler_weights": dict(state.config.scheduler_weights),
    }
    h.update(json.dumps(config, sort_keys=True).encode())
    h.update(np.ascontiguousarray(state.interference.sinr).tobytes())
    return h.hexdigest()[:DIGEST_HEX_CHARS]


@dataclass(frozen=True)
class KpiSummary:
    """Trailing-window aggregate; count == 0 is the empty sentinel."""

    count: int
    mean: KpiVector | None = None
    minimum: KpiVector | None = None
    maximum: KpiVector | None = None


EMPTY_KPI_SUMMARY = KpiSummary(count=0)


def kpi_summary(history: Sequence[KpiVector], window: int) -> KpiSummary:
    """Mean/min/max per KPI over the trailing window entries; shorter
    histories use everything available."""
    if window < 1:
        raise ValueError("window must be >= 1")
    if not history:
        return EMPTY_KPI_SUMMARY
    tail = history[-window:]
    arr = np.array([k.as_tuple() for k in tail])
    return KpiSummary(
        count=len(tail),
        mean=KpiVector(*(float(x) for x in arr.mean(axis=0))),
        minimum=KpiVector(*(float(x) for x in arr.min(axis=0))),
        maximum=KpiVector(*(float(x) for x in arr.max(axis=0))),
    )
