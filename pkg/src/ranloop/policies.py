"""Decision policies: the pluggable seat between intent and the control
adapter.

Three implementations share one contract. GreedyPolicy solves the
single-step problem argmax_a U(step(s, a)) over a finite candidate grid
that always contains noop, which makes the recorded utility sequence
non-decreasing in config-response mode. LinearPolicy drives powers toward
a target with a fixed gain, realizing a contraction whose rate is
measurable. ExternalPolicy pipes a text-completion service's reply through
framing, parsing, and validation, falling back to noop on any fault.

No command list leaves this module without a passing validator verdict.
"""

from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass
from typing import Callable, Mapping, Protocol, Sequence

from . import adapter, dsl, env
from .dsl import Command, SetCarrier, SetPower, SetSchedulerWeights
from .env import RanState, ScenarioConfig
from .intents import Intent, WeightVector, weights_for
from .telemetry import StateContext
from .units import dbm_to_watts, watts_to_dbm

logger = logging.getLogger(__name__)


class PolicySafetyError(Exception):
    """A policy produced a command list that fails validation. Raised at the
    module boundary so the loop can substitute noop and audit the fault."""

    def __init__(self, verdict: dsl.Verdict):
        self.verdict = verdict
        reasons = "; ".join(f"{r.rule}: {r.message}" for r in verdict.reasons)
        super().__init__(f"policy emitted invalid commands: {reasons}")


class Policy(Protocol):
    name: str

    def decide(
        self, intent: Intent | None, state: RanState, context: StateContext
    ) -> tuple[Command, ...]: ...


@dataclass(frozen=True)
class KpiNormalizer:
    """Per-KPI scales applied before the utility dot product, so weight
    vectors mix units sensibly. An artifact convention, not a modeled law."""

    throughput_scale: float = 1.0
    latency_scale: float = 1.0
    energy_scale: float = 1.0

    @staticmethod
    def identity() -> "KpiNormalizer":
        return KpiNormalizer()

    @staticmethod
    def from_scenario(scenario: ScenarioConfig, latency_scale: float = 1.0) -> "KpiNormalizer":
        # Throughput scale: interference-free rate at per-cell max power.
        p_best = dbm_to_watts(scenario.p_max_cell_dbm)
        total = 0.0
        for k, user in enumerate(scenario.users):
            g = scenario.base_gains[k, scenario.cell_index(scenario.serving_cell[user])]
            total += scenario.bandwidth_hz[k] * math.log2(1.0 + p_best * g / scenario.noise_power_w)
        energy_scale = scenario.p_max_w + scenario.carrier_static_w * len(scenario.carriers)
        return KpiNormalizer(
            throughput_scale=max(total, 1e-9),
            latency_scale=latency_scale,
            energy_scale=max(energy_scale, 1e-9),
        )


def utility(
    state: RanState,
    weights: WeightVector,
    scenario: ScenarioConfig,
    normalizer: KpiNormalizer | None = None,
) -> float:
    """U(s) = w . kpi(s) with per-KPI normalization."""
    n = normalizer or KpiNormalizer.from_scenario(scenario)
    kpi = env.compute_kpis(state, scenario)
    w1, w2, w3 = weights.w
    return (
        w1 * (kpi.throughput / n.throughput_scale)
        + w2 * (kpi.latency / n.latency_scale)
        + w3 * (kpi.energy / n.energy_scale)
    )


def successor(
    state: RanState, commands: Sequence[Command], scenario: ScenarioConfig
) -> RanState:
    """Environment successor through the full guarded pipeline. The caller
    must pass commands that validate under the current scope."""
    decision = adapter.guard(commands, adapter.scope_for(scenario, state))
    if not decision.accepted:
        raise ValueError(f"commands failed validation: {decision.verdict.reasons}")
    messages = adapter.compile_commands(decision, tick=state.tick)
    delta = adapter.apply_messages(messages, state, scenario)
    return env.step(state, delta, scenario)


def reward(
    state: RanState,
    commands: Sequence[Command],
    weights: WeightVector,
    scenario: ScenarioConfig,
    normalizer: KpiNormalizer | None = None,
) -> float:
    """Change in utility from taking the (validated) action in the state."""
    n = normalizer or KpiNormalizer.from_scenario(scenario)
    return utility(successor(state, commands, scenario), weights, scenario, n) - utility(
        state, weights, scenario, n
    )


# ── candidate grid and the greedy single-step optimizer ──────────────────


@dataclass(frozen=True)
class CandidateGrid:
    """Finite action set for the greedy policy. The noop program is always a
    member, whatever else the grid contains."""

    power_levels_dbm: tuple[float, ...] = ()
    weight_step: float | None = None
    include_carrier_toggles: bool = False
    max_candidates: int = 512

    def __post_init__(self) -> None:
        if self.max_candidates < 1:
            raise ValueError("max_candidates must be >= 1")
        if self.weight_step is not None and not (0.0 < self.weight_step <= 1.0):
            raise ValueError("weight_step must be in (0, 1]")


def _weight_simplex(flows: Sequence[str], step: float) -> list[tuple[tuple[str, float], ...]]:
    """All weight vectors over the flows whose entries are multiples of
    step and sum to 1."""
    n_steps = round(1.0 / step)
    if abs(n_steps * step - 1.0) > 1e-9:
        raise ValueError(f"weight_step {step} must divide 1 evenly")
    out = []
    for combo in itertools.product(range(n_steps + 1), repeat=len(flows)):
        if sum(combo) == n_steps:
            out.append(tuple((f, c * step) for f, c in zip(flows, combo)))
    return out


def generate_candidates(
    grid: CandidateGrid, scenario: ScenarioConfig
) -> list[tuple[Command, ...]]:
    """Deterministic candidate enumeration: noop first, then per-cell power
    levels, weight vectors, and carrier toggles, truncated to the grid's
    candidate budget (noop is never truncated away)."""
    candidates: list[tuple[Command, ...]] = [dsl.NOOP_PROGRAM]
    for cell in scenario.cells:
        for level in grid.power_levels_dbm:
            candidates.append((SetPower(entries=((cell, float(level)),)),))
    if grid.weight_step is not None:
        for entries in _weight_simplex(scenario.flows, grid.weight_step):
            candidates.append((SetSchedulerWeights(entries=entries),))
    if grid.include_carrier_toggles:
        for carrier in scenario.carriers:
            for on in (True, False):
                candidates.append((SetCarrier(carrier=carrier, on=on),))
    return candidates[: grid.max_candidates]


def _in_intent_scope(
    commands: Sequence[Command], intent: Intent, scenario: ScenarioConfig
) -> bool:
    """Hard scope filter: commands may only touch cells the intent names
    (directly, via a carrier those cells sit on, or via a served user)."""
    if intent.scope.cells is None:
        return True
    allowed = set(intent.scope.cells)
    for command in commands:
        if isinstance(command, SetPower):
            if any(cell not in allowed for cell, _ in command.entries):
                return False
        elif isinstance(command, SetCarrier):
            cells_on_carrier = {
                c for c in scenario.cells if scenario.cell_carrier[c] == command.carrier
            }
            if not cells_on_carrier <= allowed:
                return False
        elif isinstance(command, dsl.AssignRbs):
            if any(
                scenario.serving_cell.get(user) not in allowed for user, _ in command.entries
            ):
                return False
    return True


def _satisfies_constraints(kpis: env.KpiVector, intent: Intent) -> bool:
    by_name = {"throughput": kpis.throughput, "latency": kpis.latency, "energy": kpis.energy}
    return all(c.satisfied_by(by_name[c.metric]) for c in intent.constraints)


def greedy_decide(
    intent: Intent,
    state: RanState,
    grid: CandidateGrid,
    scenario: ScenarioConfig,
    normalizer: KpiNormalizer | None = None,
) -> tuple[Command, ...]:
    """Pick the candidate maximizing successor utility among the candidates
    that validate and satisfy every intent constraint.

    Ties break toward lower successor energy, then lexicographic canonical
    text, so repeated runs pick identically. If everything is filtered out,
    returns noop.
    """
    if not intent.scope.active_at(state.tick):
        return dsl.NOOP_PROGRAM
    w = weights_for(intent)
    n = normalizer or KpiNormalizer.from_scenario(scenario)
    scope = adapter.scope_for(scenario, state)

    best: tuple[float, float, str] | None = None
    best_commands: tuple[Command, ...] | None = None
    for commands in generate_candidates(grid, scenario):
        if not _in_intent_scope(commands, intent, scenario):
            continue
        decision = adapter.guard(commands, scope)
        if not decision.accepted:
            continue
        messages = adapter.compile_commands(decision, tick=state.tick)
        delta = adapter.apply_messages(messages, state, scenario)
        succ = env.step(state, delta, scenario)
        kpis = env.compute_kpis(succ, scenario)
        if not _satisfies_constraints(kpis, intent):
            continue
        u = utility(succ, w, scenario, n)
        text = dsl.render_program(commands)
        if (
            best is None
            or u > best[0]
            or (u == best[0] and kpis.energy < best[1])
            or (u == best[0] and kpis.energy == best[1] and text < best[2])
        ):
            best = (u, kpis.energy, text)
            best_commands = commands
    return best_commands if best_commands is not None else dsl.NOOP_PROGRAM


@dataclass
class GreedyPolicy:
    """Single-step utility maximizer over a finite grid."""

    scenario: ScenarioConfig
    grid: CandidateGrid
    normalizer: KpiNormalizer | None = None
    name: str = "greedy"

    def decide(
        self, intent: Intent | None, state: RanState, context: StateContext
    ) -> tuple[Command, ...]:
        if intent is None:
            return dsl.NOOP_PROGRAM
        commands = greedy_decide(intent, state, self.grid, self.scenario, self.normalizer)
        return _gate_output(commands, state, self.scenario)


# ── linear contractive policy ────────────────────────────────────────────


@dataclass(frozen=True)
class LinearPolicyParams:
    """Proportional power controller p' = p + gain * (target - p), in linear
    watts, clipped to validator bounds. With a config-response scenario the
    closed loop contracts at rate |1 - gain|; the budget below is what the
    empirical Lipschitz estimate is expected to stay under."""

    gain: float
    target_powers_w: Mapping[str, float]
    contraction_budget: float = 1.0

    def __post_init__(self) -> None:
        if not (0.0 < self.gain < 2.0):
            raise ValueError("gain must sit in (0, 2) for |1 - gain| < 1")


def linear_decide(
    params: LinearPolicyParams, state: RanState, scenario: ScenarioConfig
) -> tuple[Command, ...]:
    entries = []
    for cell in scenario.cells:
        p = state.config.power_watts(cell)
        target = params.target_powers_w.get(cell, 0.0)
        next_w = p + params.gain * (target - p)
        next_dbm = watts_to_dbm(max(next_w, 0.0))
        next_dbm = min(max(next_dbm, scenario.p_min_dbm), scenario.p_max_cell_dbm)
        entries.append((cell, next_dbm))
    return (SetPower(entries=tuple(entries)),)


@dataclass
class LinearPolicy:
    scenario: ScenarioConfig
    params: LinearPolicyParams
    name: str = "linear"

    def decide(
        self, intent: Intent | None, state: RanState, context: StateContext
    ) -> tuple[Command, ...]:
        return _gate_output(linear_decide(self.params, state, self.scenario), state, self.scenario)


# ── external completion adapter ──────────────────────────────────────────


@dataclass(frozen=True)
class CompletionEndpoint:
    """Descriptor for a generic text-completion service."""

    base_url: str
    route: str = "/complete"
    timeout_ms: int = 2000
    max_reply_bytes: int = 64 * 1024


Transport = Callable[[CompletionEndpoint, dict], str]


def _http_transport(endpoint: CompletionEndpoint, body: dict) -> str:
    import httpx

    response = httpx.post(
        endpoint.base_url.rstrip("/") + endpoint.route,
        json=body,
        timeout=endpoint.timeout_ms / 1000.0,
    )
    response.raise_for_status()
    return response.text[: endpoint.max_reply_bytes]


def intent_preamble(intent: Intent | None) -> str:
    if intent is None:
        return "objective: none"
    parts = [f"objective: {intent.objective}"]
    for c in intent.constraints:
        parts.append(f"constraint: {c.metric} {c.comparator} {c.value}")
    return "; ".join(parts)


def external_decide(
    endpoint: CompletionEndpoint,
    intent: Intent | None,
    context: StateContext,
    scope: dsl.ValidationScope,
    flow_order: Sequence[str],
    transport: Transport | None = None,
) -> tuple[Command, ...]:
    """Ask a completion service for an action and run the reply through the
    framing extractor, the parser, and the validator. Any fault on that
    path (transport included) falls back to noop with a logged reason; the
    loop never sees an exception from here."""
    body = {"preamble": intent_preamble(intent), "context": list(context.tokens)}
    try:
        reply = (transport or _http_transport)(endpoint, body)
    except Exception as exc:
        logger.warning("completion transport failed: %s", exc)
        return dsl.NOOP_PROGRAM
    reply = reply[: endpoint.max_reply_bytes]
    try:
        commands = dsl.parse(dsl.extract_action(reply), flow_order=flow_order)
    except (dsl.FramingError, dsl.ParseError) as exc:
        logger.warning("unusable completion reply (%s): %r", exc, reply[:200])
        return dsl.NOOP_PROGRAM
    verdict = dsl.validate(commands, scope)
    if not verdict.accepted:
        logger.warning(
            "completion reply rejected by validator: %s; reply %r",
            [f"{r.rule}: {r.message}" for r in verdict.reasons],
            reply[:200],
        )
        return dsl.NOOP_PROGRAM
    return commands


@dataclass
class ExternalPolicy:
    """Feature-gated plumbing toward an external completion service. Not
    part of acceptance runs."""

    scenario: ScenarioConfig
    endpoint: CompletionEndpoint
    transport: Transport | None = None
    name: str = "external"

    def decide(
        self, intent: Intent | None, state: RanState, context: StateContext
    ) -> tuple[Command, ...]:
        scope = adapter.scope_for(self.scenario, state)
        commands = external_decide(
            self.endpoint, intent, context, scope, self.scenario.flows, self.transport
        )
        return _gate_output(commands, state, self.scenario)


def _gate_output(
    commands: tuple[Command, ...], state: RanState, scenario: ScenarioConfig
) -> tuple[Command, ...]:
    """Module-boundary assertion: nothing leaves a policy without a passing
    verdict."""
    verdict = dsl.validate(commands, adapter.scope_for(scenario, state))
    if not verdict.accepted:
        raise PolicySafetyError(verdict)
    return commands
