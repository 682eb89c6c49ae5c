"""Closed-loop engine: hierarchical slow/fast timing, trajectory recording,
and the convergence diagnostics (state metric, fixed-point detection,
empirical Lipschitz estimation).

One LoopEngine instance is the single writer of the live state. Decisions
happen only at slow-loop boundaries (every non_rt_period ticks); between
boundaries only the built-in scheduler xApp and the environment act. Every
configuration mutation flows through the adapter's guard, so the trajectory
is a complete audit trail.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Any, Callable, Mapping, Sequence

import numpy as np

from . import adapter, dsl, env
from .dsl import Command
from .env import ConfigDelta, RanState, ScenarioConfig
from .intents import Intent, weights_for
from .policies import KpiNormalizer, Policy, utility
from .telemetry import QuantizationSpec, StateContext, state_digest, tokenize_state
from .units import dbm_to_watts, watts_to_dbm

NEAR_RT = "near-rt"
NON_RT = "non-rt"


class PolicyFaultBudgetExceeded(Exception):
    """The run accumulated more policy faults than the configured budget."""


@dataclass(frozen=True)
class NormSpec:
    """Distance on the state product space: weighted L2 over the normalized
    continuous sections (channel, queues, linear powers, SINR) plus a
    weighted Hamming term over carrier flags. Scheduler weights and the
    tick counter are excluded. All weights and scales must be positive."""

    channel_weight: float = 1.0
    queue_weight: float = 1.0
    power_weight: float = 1.0
    sinr_weight: float = 1.0
    carrier_weight: float = 1.0
    channel_scale: float = 1.0
    queue_scale: float = 1.0
    power_scale: float = 1.0
    sinr_scale: float = 1.0

    def __post_init__(self) -> None:
        for name in (
            "channel_weight", "queue_weight", "power_weight", "sinr_weight",
            "carrier_weight", "channel_scale", "queue_scale", "power_scale", "sinr_scale",
        ):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be > 0")


def state_distance(s1: RanState, s2: RanState, norm: NormSpec | None = None) -> float:
    """Metric over tick-excluded state fields. Raises ValueError when the
    two states do not share a scenario shape."""
    norm = norm or NormSpec()
    if s1.channel.gains.shape != s2.channel.gains.shape:
        raise ValueError("channel shape mismatch")
    if s1.queues.lengths.shape != s2.queues.lengths.shape:
        raise ValueError("queue shape mismatch")
    if set(s1.config.powers_dbm) != set(s2.config.powers_dbm):
        raise ValueError("power map mismatch")
    if set(s1.config.carriers) != set(s2.config.carriers):
        raise ValueError("carrier map mismatch")
    if s1.interference.sinr.shape != s2.interference.sinr.shape:
        raise ValueError("sinr shape mismatch")

    sq = norm.channel_weight * float(
        np.sum(((s1.channel.gains - s2.channel.gains) / norm.channel_scale) ** 2)
    )
    sq += norm.queue_weight * float(
        np.sum(((s1.queues.lengths - s2.queues.lengths) / norm.queue_scale) ** 2)
    )
    for cell in sorted(s1.config.powers_dbm):
        diff = (s1.config.power_watts(cell) - s2.config.power_watts(cell)) / norm.power_scale
        sq += norm.power_weight * diff * diff
    sq += norm.sinr_weight * float(
        np.sum(((s1.interference.sinr - s2.interference.sinr) / norm.sinr_scale) ** 2)
    )
    hamming = sum(
        1 for c in s1.config.carriers if s1.config.carriers[c] != s2.config.carriers[c]
    )
    return math.sqrt(sq) + norm.carrier_weight * hamming


@dataclass(frozen=True)
class LoopConfig:
    """Timing, convergence, and mode settings for one run.

    tick_seconds records the simulated near-RT tick length; the environment
    itself pins 10 ms per tick. non_rt_period counts ticks per slow-loop
    boundary (default 100 ticks = 1 s).
    """

    tick_seconds: float = env.TICK_SECONDS
    non_rt_period: int = 100
    max_ticks: int = 1000
    residual_tolerance: float = 1e-8
    confirmation_periods: int = 3
    norm: NormSpec = NormSpec()
    gate_mode: str = "auto"  # "auto" | "manual"
    fault_budget: int | None = None
    pace_ticks_per_sec: float = 0.0  # 0 = free-running (simulated time only)
    # Batch runs stop once a fixed point is confirmed; the HTTP service
    # keeps ticking so later intents still land.
    stop_on_convergence: bool = True

    def __post_init__(self) -> None:
        if self.non_rt_period < 1:
            raise ValueError("non_rt_period must be >= 1")
        if self.residual_tolerance <= 0:
            raise ValueError("residual_tolerance must be > 0")
        if self.max_ticks < 0:
            raise ValueError("max_ticks must be >= 0")
        if self.confirmation_periods < 1:
            raise ValueError("confirmation_periods must be >= 1")
        if self.tick_seconds <= 0:
            raise ValueError("tick_seconds must be > 0")
        if self.gate_mode not in ("auto", "manual"):
            raise ValueError("gate_mode must be 'auto' or 'manual'")
        if self.pace_ticks_per_sec < 0:
            raise ValueError("pace_ticks_per_sec must be >= 0")


@dataclass(frozen=True)
class TrajectoryRecord:
    """One line of the run log; serialized as JSONL in trajectory files."""

    tick: int
    state_digest: str
    context_digest: str
    commands: str  # canonical text of the issued commands, "" off-boundary
    messages: Mapping[str, tuple[dict, ...]]  # keys a1 / e2 / o1
    kpis: env.KpiVector
    utility: float | None
    residual: float
    tier: str  # near-rt | non-rt
    audit: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        if self.residual < 0:
            raise ValueError("residual must be >= 0")

    def to_dict(self) -> dict[str, Any]:
        return {
            "tick": self.tick,
            "state_digest": self.state_digest,
            "context_digest": self.context_digest,
            "commands": self.commands,
            "messages": {k: list(v) for k, v in self.messages.items()},
            "kpis": {
                "throughput": self.kpis.throughput,
                "latency": self.kpis.latency,
                "energy": self.kpis.energy,
            },
            "utility": self.utility,
            "residual": self.residual,
            "tier": self.tier,
            "audit": list(self.audit),
        }


@dataclass(frozen=True)
class PendingDecision:
    decision_id: str
    commands: tuple[Command, ...]
    commands_text: str
    created_tick: int


@dataclass(frozen=True)
class RunResult:
    records: tuple[TrajectoryRecord, ...]
    states: tuple[RanState, ...]
    fixed_point: tuple[int, str] | None  # (tick, state digest)
    faults: int


class GateConflict(Exception):
    """The gate decision was already resolved or has expired."""


@dataclass
class SchedulerXApp:
    """Built-in near-RT scheduler: holds the standing A1 weight policy and
    re-applies it every tick."""

    weights: dict[str, float]

    def observe(self, messages: Sequence[adapter.InterfaceMessage]) -> None:
        for message in messages:
            if isinstance(message, adapter.A1PolicyMessage):
                self.weights = dict(message.scheduler_weights)

    def merge(self, delta: ConfigDelta, scenario: ScenarioConfig) -> ConfigDelta:
        standing = {f: self.weights.get(f, 0.0) for f in scenario.flows}
        return replace(delta, scheduler_weights=standing)


class LoopEngine:
    """Single-writer loop state machine. tick_once() advances exactly one
    near-RT tick; boundaries additionally run the decision pipeline.

    Intents posted mid-run and gate resolutions queue up and are drained at
    the next boundary (last writer wins for intents)."""

    def __init__(
        self,
        scenario: ScenarioConfig,
        policy: Policy,
        loop: LoopConfig,
        intent: Intent | None = None,
        quantization: QuantizationSpec | None = None,
    ):
        self.scenario = scenario
        self.policy = policy
        self.loop = loop
        self.intent = intent
        self.qspec = quantization or QuantizationSpec()
        self.normalizer = KpiNormalizer.from_scenario(scenario)
        self.state = env.initial_state(scenario)
        self.context: StateContext = tokenize_state(self.state, self.qspec)
        self.states: list[RanState] = [self.state]
        self.records: list[TrajectoryRecord] = [
            self._make_record(self.state, self.context, "", (), 0.0, NEAR_RT, ())
        ]
        self.xapp = SchedulerXApp(dict(self.state.config.scheduler_weights))
        self.faults = 0
        self.converged_at: tuple[int, str] | None = None
        self._intent_queue: list[Intent] = []
        self._pending_gate: PendingDecision | None = None
        self._approved: PendingDecision | None = None
        self._rejected_note: str | None = None
        self._resolved_gate_ids: set[str] = set()
        self._gate_seq = 0
        self._clean_streak = 0
        self._period_clean = True

    # ── external inputs (drained at boundaries) ──────────────────────────

    def queue_intent(self, intent: Intent) -> None:
        self._intent_queue.append(intent)

    @property
    def pending_gate(self) -> PendingDecision | None:
        return self._pending_gate

    def resolve_gate(self, decision_id: str, approve: bool) -> str:
        """Returns "approved" or "rejected"; raises KeyError for unknown ids
        and GateConflict for ids already resolved."""
        if self._pending_gate is None or self._pending_gate.decision_id != decision_id:
            if decision_id in self._resolved_gate_ids:
                raise GateConflict(f"decision {decision_id} already resolved")
            raise KeyError(decision_id)
        decision = self._pending_gate
        self._pending_gate = None
        self._resolved_gate_ids.add(decision_id)
        if approve:
            self._approved = decision
            return "approved"
        self._rejected_note = f"operator-rejected: {decision_id}"
        return "rejected"

    # ── loop advancement ──────────────────────────────────────────────────

    @property
    def done(self) -> bool:
        if self.state.tick >= self.loop.max_ticks:
            return True
        return self.loop.stop_on_convergence and self.converged_at is not None

    def run_to_completion(self) -> None:
        while not self.done:
            self.tick_once()

    def tick_once(self) -> TrajectoryRecord:
        t = self.state.tick
        audit: list[str] = []
        messages: tuple[adapter.InterfaceMessage, ...] = ()
        commands_text = ""
        tier = NEAR_RT

        if t % self.loop.non_rt_period == 0:
            tier = NON_RT
            if self._intent_queue:
                self.intent = self._intent_queue[-1]
                self._intent_queue.clear()
                audit.append(f"intent-replaced: {self.intent.objective}")
                # the closed-loop map changed; previous convergence is stale
                self._clean_streak = 0
                self._period_clean = True
                self.converged_at = None
            proposed = self._propose(audit)
            scope = adapter.scope_for(self.scenario, self.state)
            decision = adapter.guard(proposed, scope)
            if decision.accepted:
                messages = adapter.compile_commands(decision, tick=t)
                commands_text = dsl.render_program(proposed)
            else:
                reasons = "; ".join(
                    f"{r.rule}: {r.message}" for r in decision.verdict.reasons
                )
                audit.append(
                    f"gate-rejected: {dsl.render_program(proposed)} [{reasons}]"
                )
                commands_text = dsl.render_program(dsl.NOOP_PROGRAM)
            self.xapp.observe(messages)

        delta = adapter.apply_messages(messages, self.state, self.scenario)
        delta = self.xapp.merge(delta, self.scenario)
        new_state = env.step(self.state, delta, self.scenario)
        residual = state_distance(new_state, self.state, self.loop.norm)
        context = tokenize_state(new_state, self.qspec)

        record = self._make_record(
            new_state,
            context,
            commands_text,
            messages,
            residual,
            tier,
            tuple(audit),
        )
        self.state = new_state
        self.context = context
        self.states.append(new_state)
        self.records.append(record)
        self._update_convergence(record)
        return record

    def _propose(self, audit: list[str]) -> tuple[Command, ...]:
        if self._rejected_note is not None:
            audit.append(self._rejected_note)
            self._rejected_note = None
            return dsl.NOOP_PROGRAM
        if self._approved is not None:
            decision = self._approved
            self._approved = None
            audit.append(f"gate-approved: {decision.decision_id}")
            return decision.commands
        if self.loop.gate_mode == "manual" and self._pending_gate is not None:
            audit.append(f"gate-pending: {self._pending_gate.decision_id}")
            return dsl.NOOP_PROGRAM
        try:
            proposed = self.policy.decide(self.intent, self.state, self.context)
        except Exception as exc:
            self.faults += 1
            audit.append(f"policy-fault: {exc}")
            if self.loop.fault_budget is not None and self.faults > self.loop.fault_budget:
                raise PolicyFaultBudgetExceeded(
                    f"{self.faults} policy faults exceed budget {self.loop.fault_budget}"
                ) from exc
            return dsl.NOOP_PROGRAM
        if self.loop.gate_mode == "manual" and tuple(proposed) != dsl.NOOP_PROGRAM:
            self._gate_seq += 1
            pending = PendingDecision(
                decision_id=f"d{self._gate_seq}",
                commands=tuple(proposed),
                commands_text=dsl.render_program(proposed),
                created_tick=self.state.tick,
            )
            self._pending_gate = pending
            audit.append(f"gate-pending: {pending.decision_id}")
            return dsl.NOOP_PROGRAM
        return tuple(proposed)

    def _make_record(
        self,
        state: RanState,
        context: StateContext,
        commands_text: str,
        messages: Sequence[adapter.InterfaceMessage],
        residual: float,
        tier: str,
        audit: tuple[str, ...],
    ) -> TrajectoryRecord:
        grouped: dict[str, list[dict]] = {"a1": [], "e2": [], "o1": []}
        for message in messages:
            grouped[message.kind].append(adapter.message_dict(message))
        u = None
        if self.intent is not None:
            u = utility(state, weights_for(self.intent), self.scenario, self.normalizer)
        return TrajectoryRecord(
            tick=state.tick,
            state_digest=state_digest(state),
            context_digest=context.digest,
            commands=commands_text,
            messages={k: tuple(v) for k, v in grouped.items()},
            kpis=env.compute_kpis(state, self.scenario),
            utility=u,
            residual=residual,
            tier=tier,
            audit=audit,
        )

    def _update_convergence(self, record: TrajectoryRecord) -> None:
        if record.residual >= self.loop.residual_tolerance:
            self._period_clean = False
        if record.tick % self.loop.non_rt_period == 0:
            if self._period_clean:
                self._clean_streak += 1
            else:
                self._clean_streak = 0
            self._period_clean = True
            if self._clean_streak >= self.loop.confirmation_periods:
                fp_tick = record.tick - self.loop.confirmation_periods * self.loop.non_rt_period
                self.converged_at = (fp_tick, self.records[fp_tick].state_digest)


def run(
    scenario: ScenarioConfig,
    intent: Intent | None,
    policy: Policy,
    loop: LoopConfig,
    quantization: QuantizationSpec | None = None,
) -> RunResult:
    """Run the closed loop until max_ticks or a confirmed fixed point."""
    engine = LoopEngine(scenario, policy, loop, intent, quantization)
    engine.run_to_completion()
    return RunResult(
        records=tuple(engine.records),
        states=tuple(engine.states),
        fixed_point=engine.converged_at,
        faults=engine.faults,
    )


def detect_fixed_point(
    records: Sequence[TrajectoryRecord],
    residual_tolerance: float,
    period: int | None = None,
    confirmation_periods: int = 3,
) -> tuple[int, str] | None:
    """First tick after which residuals stay below tolerance for the whole
    confirmation window, with the state digest at that tick; None when the
    trajectory never settles.

    Residuals come from the records themselves (they were computed with the
    run's norm). The period is inferred from the non-rt tier tags when not
    given; trajectories without boundary tags count each record as its own
    period.
    """
    if not records:
        raise ValueError("trajectory must be non-empty")
    if period is None:
        boundary_ticks = [r.tick for r in records if r.tier == NON_RT]
        period = boundary_ticks[1] - boundary_ticks[0] if len(boundary_ticks) >= 2 else 1
    window = confirmation_periods * period
    by_tick = {r.tick: r for r in records}
    last_tick = records[-1].tick
    for candidate in records:
        end = candidate.tick + window
        if end > last_tick:
            break
        ticks = range(candidate.tick + 1, end + 1)
        if all(
            t in by_tick and by_tick[t].residual < residual_tolerance for t in ticks
        ):
            return (candidate.tick, candidate.state_digest)
    return None


def closed_loop_map(
    policy: Policy,
    intent: Intent | None,
    scenario: ScenarioConfig,
    quantization: QuantizationSpec | None = None,
) -> Callable[[RanState], RanState]:
    """F(s) = env.step(s, decision(s)): one decision plus one tick, the map
    whose contraction the convergence theory is about. Policy faults and
    guard rejections degrade to noop, mirroring the loop."""
    qspec = quantization or QuantizationSpec()

    def f(state: RanState) -> RanState:
        context = tokenize_state(state, qspec)
        try:
            commands = policy.decide(intent, state, context)
        except Exception:
            commands = dsl.NOOP_PROGRAM
        decision = adapter.guard(commands, adapter.scope_for(scenario, state))
        if not decision.accepted:
            decision = adapter.guard(dsl.NOOP_PROGRAM, adapter.scope_for(scenario, state))
        messages = adapter.compile_commands(decision, tick=state.tick)
        delta = adapter.apply_messages(messages, state, scenario)
        return env.step(state, delta, scenario)

    return f


def sample_state(
    scenario: ScenarioConfig, rng: np.random.Generator, queue_high: float = 0.0
) -> RanState:
    """Random state for diagnostics: per-cell powers uniform in linear watts
    over the validator's range (uniform in the norm's power coordinates),
    queues uniform in [0, queue_high], channel and carriers at their
    scenario values, SINR consistent."""
    lo, hi = dbm_to_watts(scenario.p_min_dbm), dbm_to_watts(scenario.p_max_cell_dbm)
    powers = {
        cell: watts_to_dbm(float(rng.uniform(lo, hi))) for cell in scenario.cells
    }
    config = env.ConfigState(
        powers_dbm=powers,
        carriers={c: c in scenario.initial_carriers_on for c in scenario.carriers},
        scheduler_weights=dict(scenario.initial_scheduler_weights),
    )
    channel = env.ChannelState(gains=scenario.base_gains.copy())
    if queue_high > 0:
        lengths = rng.uniform(0.0, queue_high, size=scenario.initial_queues_bits.shape)
    else:
        lengths = scenario.initial_queues_bits.copy()
    return RanState(
        channel=channel,
        queues=env.QueueState(lengths=lengths),
        config=config,
        interference=env.InterferenceState(sinr=env.compute_sinr(channel, config, scenario)),
        tick=0,
    )


def estimate_lipschitz(
    closed_loop: Callable[[RanState], RanState],
    scenario: ScenarioConfig,
    norm: NormSpec | None = None,
    pairs: int = 1000,
    seed: int = 0,
    queue_high: float = 0.0,
) -> float:
    """Empirical Lipschitz constant of a state map: the max over seeded
    random state pairs of d(F(s1), F(s2)) / d(s1, s2), skipping pairs
    closer than 1e-12. Raises when every sampled pair is degenerate."""
    if pairs < 1:
        raise ValueError("pairs must be >= 1")
    norm = norm or NormSpec()
    rng = np.random.default_rng(seed)
    k_hat = 0.0
    usable = 0
    for _ in range(pairs):
        s1 = sample_state(scenario, rng, queue_high)
        s2 = sample_state(scenario, rng, queue_high)
        d_in = state_distance(s1, s2, norm)
        if d_in < 1e-12:
            continue
        usable += 1
        d_out = state_distance(closed_loop(s1), closed_loop(s2), norm)
        k_hat = max(k_hat, d_out / d_in)
    if usable == 0:
        raise ValueError("all sampled state pairs were degenerate")
    return k_hat


def write_trajectory(records: Sequence[TrajectoryRecord], path: str) -> None:
    import json

    with open(path, "w", encoding="utf-8") as fh:
        for record in records:
            fh.write(json.dumps(record.to_dict()) + "\n")
