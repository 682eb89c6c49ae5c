"""Bridge between decided commands and the simulated control interfaces.

Every command list must pass the guard (a re-run of the allow-list
validator) before it can be compiled into A1/E2/O1 messages; compile
refuses anything that did not. This module is the only path from decisions
into the environment, so configuration mutations are always traceable to a
guarded message.

Message records are artifact-defined schemas serialized into trajectory
logs; no real O-RAN wire encodings are involved.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Any, Mapping, Sequence, Union

from . import dsl
from .dsl import Command, ValidationScope, Verdict
from .env import ConfigDelta, RanState, ScenarioConfig


class GateViolationError(Exception):
    """Commands reached compile without a passing verdict. This is a
    programming error in the caller, never an operator outcome."""


@dataclass(frozen=True)
class A1PolicyMessage:
    """Scheduler policy toward the near-RT side (weights per flow)."""

    policy_id: str
    scope_cells: tuple[str, ...]
    scheduler_weights: tuple[tuple[str, float], ...]
    issue_tick: int

    kind = "a1"


@dataclass(frozen=True)
class E2ControlMessage:
    """Near-real-time control: transmit power or RB assignment."""

    target: str  # cell id for tx_power_dbm, user id for rb_assignment
    parameter: str  # "tx_power_dbm" | "rb_assignment"
    value: Any
    issue_tick: int

    kind = "e2"


@dataclass(frozen=True)
class O1ConfigMessage:
    """Configuration management: carrier activation state."""

    carrier: str
    active: bool
    issue_tick: int

    kind = "o1"


InterfaceMessage = Union[A1PolicyMessage, E2ControlMessage, O1ConfigMessage]


def message_dict(message: InterfaceMessage) -> dict[str, Any]:
    out = asdict(message)
    out["kind"] = message.kind
    return out


@dataclass(frozen=True)
class GuardDecision:
    """A command list together with the verdict the guard produced for it."""

    commands: tuple[Command, ...]
    verdict: Verdict

    @property
    def accepted(self) -> bool:
        return self.verdict.accepted


def scope_for(scenario: ScenarioConfig, state: RanState | None = None) -> ValidationScope:
    """Validation scope for a scenario, with current powers taken from the
    live state (or the scenario's initial powers when no state is given)."""
    powers = dict(state.config.powers_dbm) if state is not None else dict(scenario.initial_powers_dbm)
    return ValidationScope(
        cells=frozenset(scenario.cells),
        users=frozenset(scenario.users),
        flows=frozenset(scenario.flows),
        rbs=frozenset(scenario.rbs),
        carriers=frozenset(scenario.carriers),
        p_min_dbm=scenario.p_min_dbm,
        p_max_cell_dbm=scenario.p_max_cell_dbm,
        p_max_w=scenario.p_max_w,
        current_powers_dbm=powers,
    )


def guard(commands: Sequence[Command], scope: ValidationScope) -> GuardDecision:
    """Re-validate a command list at the execution boundary. Rejection is a
    normal outcome carried in the returned verdict, not an exception."""
    return GuardDecision(commands=tuple(commands), verdict=dsl.validate(commands, scope))


def compile_commands(decision: GuardDecision, tick: int) -> tuple[InterfaceMessage, ...]:
    """Translate guarded commands into interface messages, preserving
    command order: weights -> A1, power and RBs -> E2, carriers -> O1,
    noop -> nothing."""
    if not isinstance(decision, GuardDecision) or not decision.accepted:
        raise GateViolationError("compile called without a passing guard verdict")
    messages: list[InterfaceMessage] = []
    for i, command in enumerate(decision.commands):
        if isinstance(command, dsl.Noop):
            continue
        if isinstance(command, dsl.SetSchedulerWeights):
            messages.append(
                A1PolicyMessage(
                    policy_id=f"a1-{tick}-{i}",
                    scope_cells=(),
                    scheduler_weights=command.entries,
                    issue_tick=tick,
                )
            )
        elif isinstance(command, dsl.SetPower):
            messages.extend(
                E2ControlMessage(target=cell, parameter="tx_power_dbm", value=dbm, issue_tick=tick)
                for cell, dbm in command.entries
            )
        elif isinstance(command, dsl.AssignRbs):
            messages.extend(
                E2ControlMessage(target=user, parameter="rb_assignment", value=list(rbs), issue_tick=tick)
                for user, rbs in command.entries
            )
        elif isinstance(command, dsl.SetCarrier):
            messages.append(
                O1ConfigMessage(carrier=command.carrier, active=command.on, issue_tick=tick)
            )
        else:
            raise GateViolationError(f"unmapped command variant: {command!r}")
    return tuple(messages)


def apply_messages(
    messages: Sequence[InterfaceMessage],
    state: RanState,
    scenario: ScenarioConfig,
) -> ConfigDelta:
    """Fold messages into one configuration delta; later messages override
    earlier ones on the same target.

    RB assignment messages are accepted but produce no configuration
    change: per-user bandwidth is static in this environment, so RB moves
    have no modeled effect.
    """
    powers: dict[str, float] = {}
    carriers: dict[str, bool] = {}
    weights: Mapping[str, float] | None = None
    for message in messages:
        if isinstance(message, E2ControlMessage):
            if message.parameter == "tx_power_dbm":
                powers[message.target] = float(message.value)
        elif isinstance(message, O1ConfigMessage):
            carriers[message.carrier] = message.active
        elif isinstance(message, A1PolicyMessage):
            weights = {f: 0.0 for f in scenario.flows} | dict(message.scheduler_weights)
    return ConfigDelta(powers_dbm=powers, carriers=carriers, scheduler_weights=weights)
