"""Operator intents: structured goal documents, the permissible-goal check,
and the translation to KPI weight vectors.

The KPI order is fixed globally as [throughput, latency, energy]; every
weight vector in the system is expressed over that order.
"""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass
from typing import Any, Mapping, Sequence

KPI_NAMES = ("throughput", "latency", "energy")

OBJECTIVES = ("maximize_throughput", "minimize_latency", "minimize_energy", "custom_weights")

# Flat allow-list covering objective tags and constraint metrics.
DEFAULT_POLICY = OBJECTIVES + KPI_NAMES

COMPARATORS = ("<=", ">=")

# (alpha, beta, gamma) for minimize_latency: latency dominates by an order
# of magnitude. Configuration, not ground truth; weights_for checks the
# ordering whenever it is overridden.
DEFAULT_LATENCY_WEIGHTS = (0.1, 1.0, 0.1)


class IntentError(Exception):
    """A document failed intent validation; carries the offending field path."""

    def __init__(self, path: str, reason: str):
        self.path = path
        self.reason = reason
        super().__init__(f"{path}: {reason}")


@dataclass(frozen=True)
class WeightVector:
    """Reward weights over [throughput, latency, energy]."""

    w: tuple[float, float, float]

    def __post_init__(self) -> None:
        if len(self.w) != 3:
            raise IntentError("weights", "must have exactly 3 entries")
        if not all(math.isfinite(x) for x in self.w):
            raise IntentError("weights", "entries must be finite")
        if all(x == 0 for x in self.w):
            raise IntentError("weights", "must not be all zero")


@dataclass(frozen=True)
class Constraint:
    metric: str
    comparator: str  # "<=" or ">="
    value: float
    units: str | None = None

    def satisfied_by(self, kpi_value: float) -> bool:
        if self.comparator == "<=":
            return kpi_value <= self.value
        return kpi_value >= self.value


@dataclass(frozen=True)
class IntentScope:
    cells: tuple[str, ...] | None = None
    window: tuple[int, int] | None = None  # (start tick, end tick), inclusive

    def active_at(self, tick: int) -> bool:
        return self.window is None or self.window[0] <= tick <= self.window[1]


@dataclass(frozen=True)
class Intent:
    objective: str
    weights: tuple[float, float, float] | None = None
    constraints: tuple[Constraint, ...] = ()
    scope: IntentScope = IntentScope()


def _parse_constraint(i: int, doc: Any) -> Constraint:
    path = f"constraints[{i}]"
    if not isinstance(doc, dict):
        raise IntentError(path, "must be an object")
    metric = doc.get("metric")
    if metric not in KPI_NAMES:
        raise IntentError(f"{path}.metric", f"must be one of {KPI_NAMES}, got {metric!r}")
    comparator = {"≤": "<=", "≥": ">="}.get(doc.get("comparator"), doc.get("comparator"))
    if comparator not in COMPARATORS:
        raise IntentError(f"{path}.comparator", f"must be one of {COMPARATORS}")
    try:
        value = float(doc["value"])
    except (KeyError, TypeError, ValueError):
        raise IntentError(f"{path}.value", "must be a finite number") from None
    if not math.isfinite(value):
        raise IntentError(f"{path}.value", "must be a finite number")
    units = doc.get("units")
    if units is not None and not isinstance(units, str):
        raise IntentError(f"{path}.units", "must be a string when present")
    return Constraint(metric=metric, comparator=comparator, value=value, units=units)


def _parse_scope(doc: Any) -> IntentScope:
    if not isinstance(doc, dict):
        raise IntentError("scope", "must be an object")
    cells = doc.get("cells")
    if cells is not None:
        if not isinstance(cells, list) or not all(isinstance(c, str) for c in cells):
            raise IntentError("scope.cells", "must be a list of cell ids")
        cells = tuple(cells)
    window = doc.get("window")
    if window is not None:
        if (
            not isinstance(window, (list, tuple))
            or len(window) != 2
            or not all(isinstance(t, int) and t >= 0 for t in window)
            or window[0] > window[1]
        ):
            raise IntentError("scope.window", "must be [start_tick, end_tick] with 0 <= start <= end")
        window = (window[0], window[1])
    return IntentScope(cells=cells, window=window)


def parse_intent(document: str | Mapping[str, Any]) -> Intent:
    """Validate an intent document (JSON text or an already-decoded object)
    against the permissible shapes; raises IntentError naming the bad field."""
    if isinstance(document, str):
        try:
            document = json.loads(document)
        except json.JSONDecodeError as exc:
            raise IntentError("$", f"not valid JSON: {exc}") from exc
    if not isinstance(document, Mapping):
        raise IntentError("$", "intent document must be a JSON object")

    unknown = set(document) - {"objective", "weights", "constraints", "scope"}
    if unknown:
        raise IntentError(sorted(unknown)[0], "unknown field")

    objective = document.get("objective")
    if objective not in OBJECTIVES:
        raise IntentError("objective", f"must be one of {OBJECTIVES}, got {objective!r}")

    weights_doc = document.get("weights")
    weights: tuple[float, float, float] | None = None
    if objective == "custom_weights":
        if weights_doc is None:
            raise IntentError("weights", "required when objective is custom_weights")
        if not isinstance(weights_doc, (list, tuple)) or len(weights_doc) != 3:
            raise IntentError("weights", "must be a 3-vector [throughput, latency, energy]")
        try:
            weights = tuple(float(x) for x in weights_doc)
        except (TypeError, ValueError):
            raise IntentError("weights", "entries must be numbers") from None
        WeightVector(weights)  # reuses the vector invariants
    elif weights_doc is not None:
        raise IntentError("weights", "only allowed when objective is custom_weights")

    constraints_doc = document.get("constraints", [])
    if not isinstance(constraints_doc, list):
        raise IntentError("constraints", "must be a list")
    constraints = tuple(_parse_constraint(i, c) for i, c in enumerate(constraints_doc))

    scope = _parse_scope(document.get("scope", {}))
    return Intent(objective=objective, weights=weights, constraints=constraints, scope=scope)


def weights_for(
    intent: Intent,
    latency_weights: tuple[float, float, float] = DEFAULT_LATENCY_WEIGHTS,
) -> WeightVector:
    """Weight vector for an intent.

    maximize_throughput -> [1, 0, 0]; minimize_energy -> [0, 0, -1];
    minimize_latency -> [alpha, -beta, gamma] with beta >= 10 * max(alpha,
    gamma) enforced on the configured defaults; custom passes through.
    """
    if intent.objective == "maximize_throughput":
        return WeightVector((1.0, 0.0, 0.0))
    if intent.objective == "minimize_energy":
        return WeightVector((0.0, 0.0, -1.0))
    if intent.objective == "minimize_latency":
        alpha, beta, gamma = latency_weights
        if beta < 10.0 * max(alpha, gamma):
            raise IntentError(
                "latency_weights",
                f"latency weight {beta} must dominate: >= 10 * max({alpha}, {gamma})",
            )
        return WeightVector((alpha, -beta, gamma))
    if intent.weights is None:
        raise IntentError("weights", "custom_weights intent carries no weights")
    return WeightVector(intent.weights)


def permitted(intent: Intent, policy: Sequence[str] = DEFAULT_POLICY) -> bool:
    """True iff the objective tag and every constraint metric appear in the
    permissible-goal list and the derived weight vector is legal."""
    if intent.objective not in policy:
        return False
    if any(c.metric not in policy for c in intent.constraints):
        return False
    try:
        weights_for(intent)
    except IntentError:
        return False
    return True


# ── canned-phrase matcher ────────────────────────────────────────────────

_OBJECTIVE_PHRASES = (
    ("minimize_energy", ("energy",), ("reduce", "minimize", "lower", "save", "cut")),
    ("maximize_throughput", ("throughput", "capacity"), ("maximize", "increase", "boost", "improve")),
    ("minimize_latency", ("latency",), ("reduce", "minimize", "lower", "low", "ultra")),
)

_TIME_RE = re.compile(
    r"between\s+(midnight|noon|\d{1,2}\s*(?:am|pm))\s+and\s+(midnight|noon|\d{1,2}\s*(?:am|pm))"
)


def _hour_of(word: str) -> int:
    if word == "midnight":
        return 0
    if word == "noon":
        return 12
    m = re.match(r"(\d{1,2})\s*(am|pm)", word)
    if m is None:
        raise IntentError("$", f"cannot read time {word!r}")
    hour = int(m.group(1)) % 12
    return hour + (12 if m.group(2) == "pm" else 0)


def intent_from_phrase(
    text: str,
    sector_cells: Mapping[str, Sequence[str]] | None = None,
    ticks_per_hour: int = 360_000,
) -> Intent:
    """Keyword-template matcher for a small canned phrase set, e.g.
    "Reduce energy consumption in the downtown sector between midnight and
    6 AM". Deliberately not a language model: unknown phrasings raise."""
    lowered = text.lower()
    objective = None
    for tag, nouns, verbs in _OBJECTIVE_PHRASES:
        if any(n in lowered for n in nouns) and any(v in lowered for v in verbs):
            objective = tag
            break
    if objective is None:
        raise IntentError("$", f"no permissible goal recognized in {text!r}")

    cells = None
    for sector, sector_cell_ids in (sector_cells or {}).items():
        if sector.lower() in lowered:
            cells = tuple(sector_cell_ids)
            break

    window = None
    m = _TIME_RE.search(lowered)
    if m is not None:
        start_h, end_h = _hour_of(m.group(1)), _hour_of(m.group(2))
        if end_h <= start_h:
            end_h += 24
        window = (start_h * ticks_per_hour, end_h * ticks_per_hour)

    return Intent(objective=objective, scope=IntentScope(cells=cells, window=window))
