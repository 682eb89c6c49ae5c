"""Radio network environment: state space, transition function, and KPIs.

The network state is the product of four sections: channel gains, traffic
queues, configuration (powers, carriers, scheduler weights), and the
per-user SINR derived from the first and third. Transitions are pure
functions; nothing here holds mutable state between calls.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping, Sequence

import numpy as np

from .units import dbm_to_watts, watts_to_dbm

# Simulated duration of one environment tick (10 ms).
TICK_SECONDS = 0.01

# Service-rate floor used by the latency proxy, in bits/s.
EPS_RATE = 1e-9

MODES = ("config-response", "quasi-static", "stochastic")


class ScenarioError(Exception):
    """A scenario document is malformed or internally inconsistent."""


class ConfigurationError(Exception):
    """A state element or delta references an unknown identifier."""


def _readonly(arr: np.ndarray) -> np.ndarray:
    out = np.asarray(arr, dtype=float)
    out.flags.writeable = False
    return out


@dataclass(frozen=True, eq=False)
class ChannelState:
    """Per-(user, cell) linear power gains, optionally backed by complex
    antenna matrices (rx_antennas x tx_antennas) per user."""

    gains: np.ndarray  # shape (users, cells), non-negative
    matrices: Mapping[str, np.ndarray] | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "gains", _readonly(self.gains))

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, ChannelState):
            return NotImplemented
        if not np.array_equal(self.gains, other.gains):
            return False
        a, b = self.matrices or {}, other.matrices or {}
        if a.keys() != b.keys():
            return False
        return all(np.array_equal(a[k], b[k]) for k in a)

    def check(self, scenario: "ScenarioConfig") -> None:
        if self.gains.shape != (len(scenario.users), len(scenario.cells)):
            raise ConfigurationError(
                f"gain table shape {self.gains.shape} does not match "
                f"{len(scenario.users)} users x {len(scenario.cells)} cells"
            )
        if not np.all(np.isfinite(self.gains)) or np.any(self.gains < 0):
            raise ConfigurationError("channel gains must be finite and >= 0")
        for user, mat in (self.matrices or {}).items():
            if mat.shape != (scenario.rx_antennas, scenario.tx_antennas):
                raise ConfigurationError(
                    f"channel matrix for {user} has shape {mat.shape}, expected "
                    f"({scenario.rx_antennas}, {scenario.tx_antennas})"
                )


@dataclass(frozen=True, eq=False)
class QueueState:
    """Queued traffic in bits, one row per user, one column per flow."""

    lengths: np.ndarray  # shape (users, flows), non-negative

    def __post_init__(self) -> None:
        object.__setattr__(self, "lengths", _readonly(self.lengths))

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, QueueState):
            return NotImplemented
        return np.array_equal(self.lengths, other.lengths)

    @property
    def total_bits(self) -> float:
        return float(self.lengths.sum())


@dataclass(frozen=True)
class ConfigState:
    """Controllable configuration: per-cell transmit power (dBm), per-carrier
    activation flags, and the per-flow scheduler weight vector."""

    powers_dbm: Mapping[str, float]
    carriers: Mapping[str, bool]
    scheduler_weights: Mapping[str, float]

    def power_watts(self, cell: str) -> float:
        return dbm_to_watts(self.powers_dbm[cell])

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, ConfigState):
            return NotImplemented
        return (
            dict(self.powers_dbm) == dict(other.powers_dbm)
            and dict(self.carriers) == dict(other.carriers)
            and dict(self.scheduler_weights) == dict(other.scheduler_weights)
        )

    def check(self, scenario: "ScenarioConfig") -> None:
        if set(self.powers_dbm) != set(scenario.cells):
            raise ConfigurationError("power map must cover exactly the scenario cells")
        if set(self.carriers) != set(scenario.carriers):
            raise ConfigurationError("carrier map must cover exactly the scenario carriers")
        if set(self.scheduler_weights) != set(scenario.flows):
            raise ConfigurationError("weight map must cover exactly the scenario flows")
        for cell, dbm in self.powers_dbm.items():
            if not (scenario.p_min_dbm <= dbm <= scenario.p_max_cell_dbm):
                raise ConfigurationError(
                    f"power for {cell} ({dbm} dBm) outside "
                    f"[{scenario.p_min_dbm}, {scenario.p_max_cell_dbm}] dBm"
                )
        if self.total_active_watts(scenario) > scenario.p_max_w * (1 + 1e-12):
            raise ConfigurationError(
                f"active linear powers total {self.total_active_watts(scenario):g} W "
                f"over budget {scenario.p_max_w:g} W"
            )
        total = 0.0
        for flow, w in self.scheduler_weights.items():
            if not (0.0 <= w <= 1.0):
                raise ConfigurationError(f"scheduler weight for {flow} outside [0, 1]")
            total += w
        if abs(total - 1.0) > 1e-9:
            raise ConfigurationError(f"scheduler weights sum to {total}, expected 1")

    def total_active_watts(self, scenario: "ScenarioConfig") -> float:
        return sum(
            self.power_watts(cell)
            for cell in scenario.cells
            if self.carriers[scenario.cell_carrier[cell]]
        )


@dataclass(frozen=True, eq=False)
class InterferenceState:
    """Per-user linear SINR. Always the value recomputed from the channel and
    configuration by compute_sinr; never set independently by transitions."""

    sinr: np.ndarray  # shape (users,), non-negative linear ratios

    def __post_init__(self) -> None:
        object.__setattr__(self, "sinr", _readonly(self.sinr))

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, InterferenceState):
            return NotImplemented
        return np.array_equal(self.sinr, other.sinr)

    def sinr_db(self) -> np.ndarray:
        with np.errstate(divide="ignore"):
            return 10.0 * np.log10(self.sinr)


@dataclass(frozen=True, eq=False)
class RanState:
    """Full network snapshot. Equality is field-wise over the four sections;
    the tick counter is excluded so fixed points are well-defined."""

    channel: ChannelState
    queues: QueueState
    config: ConfigState
    interference: InterferenceState
    tick: int = 0

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, RanState):
            return NotImplemented
        return (
            self.channel == other.channel
            and self.queues == other.queues
            and self.config == other.config
            and self.interference == other.interference
        )

    def check(self, scenario: "ScenarioConfig") -> None:
        self.channel.check(scenario)
        self.config.check(scenario)
        if self.queues.lengths.shape != (len(scenario.users), len(scenario.flows)):
            raise ConfigurationError("queue matrix shape does not match scenario")
        if np.any(self.queues.lengths < 0):
            raise ConfigurationError("queue lengths must be >= 0")
        if self.tick < 0:
            raise ConfigurationError("tick must be >= 0")
        expected = compute_sinr(self.channel, self.config, scenario)
        if not np.array_equal(self.interference.sinr, expected):
            raise ConfigurationError("cached SINR inconsistent with channel and config")


@dataclass(frozen=True)
class KpiVector:
    """[throughput bits/s, latency s, energy W], the fixed KPI order."""

    throughput: float
    latency: float
    energy: float

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.throughput, self.latency, self.energy)


@dataclass(frozen=True)
class ConfigDelta:
    """Partial configuration update folded out of adapter messages.

    ``scheduler_weights`` is either None (unchanged) or a full replacement
    vector; flows missing from a replacement get weight 0.
    """

    powers_dbm: Mapping[str, float] = field(default_factory=dict)
    carriers: Mapping[str, bool] = field(default_factory=dict)
    scheduler_weights: Mapping[str, float] | None = None

    def is_empty(self) -> bool:
        return not self.powers_dbm and not self.carriers and self.scheduler_weights is None


@dataclass(frozen=True)
class ScenarioConfig:
    """Static description of one desk-scale network scenario."""

    cells: tuple[str, ...]
    users: tuple[str, ...]
    flows: tuple[str, ...]
    carriers: tuple[str, ...]
    cell_carrier: Mapping[str, str]
    serving_cell: Mapping[str, str]
    base_gains: np.ndarray  # (users, cells)
    noise_power_w: float
    p_max_w: float
    p_min_dbm: float
    p_max_cell_dbm: float
    arrival_rates: np.ndarray  # (users, flows), bits/s
    bandwidth_hz: np.ndarray  # (users,)
    carrier_static_w: float
    mode: str
    seed: int
    rbs: tuple[str, ...]
    initial_powers_dbm: Mapping[str, float]
    initial_queues_bits: np.ndarray  # (users, flows)
    initial_carriers_on: tuple[str, ...]
    initial_scheduler_weights: Mapping[str, float]
    rx_antennas: int = 1
    tx_antennas: int = 1

    def __post_init__(self) -> None:
        object.__setattr__(self, "base_gains", _readonly(self.base_gains))
        object.__setattr__(self, "arrival_rates", _readonly(self.arrival_rates))
        object.__setattr__(self, "bandwidth_hz", _readonly(self.bandwidth_hz))
        object.__setattr__(self, "initial_queues_bits", _readonly(self.initial_queues_bits))

    def user_index(self, user: str) -> int:
        return self.users.index(user)

    def cell_index(self, cell: str) -> int:
        return self.cells.index(cell)

    def flow_index(self, flow: str) -> int:
        return self.flows.index(flow)


def _ids(prefix: str, count: int) -> tuple[str, ...]:
    return tuple(f"{prefix}_{i}" for i in range(count))


def _broadcast(value: Any, keys: Sequence[str], what: str) -> dict[str, float]:
    if isinstance(value, (int, float)):
        return {k: float(value) for k in keys}
    if isinstance(value, dict):
        return {k: float(value[k]) for k in keys if k in value} | {
            k: 0.0 for k in keys if k not in value
        }
    raise ScenarioError(f"{what} must be a number or an object keyed by id")


def _pathloss_gains(spec: Mapping[str, Any], users: Sequence[str], cells: Sequence[str]) -> np.ndarray:
    """Log-distance pathloss: gain = g0 * (max(d, d0) / d0) ** -exponent."""
    try:
        cell_pos = np.asarray(spec["cell_positions"], dtype=float)
        user_pos = np.asarray(spec["user_positions"], dtype=float)
        exponent = float(spec.get("exponent", 3.5))
        g0 = float(spec.get("reference_gain", 1e-3))
        d0 = float(spec.get("reference_distance_m", 10.0))
    except (KeyError, TypeError, ValueError) as exc:
        raise ScenarioError(f"bad pathloss spec: {exc}") from exc
    if cell_pos.shape != (len(cells), 2) or user_pos.shape != (len(users), 2):
        raise ScenarioError("pathloss positions must be [x, y] per cell and per user")
    gains = np.zeros((len(users), len(cells)))
    for k in range(len(users)):
        for m in range(len(cells)):
            d = max(float(np.linalg.norm(user_pos[k] - cell_pos[m])), d0)
            gains[k, m] = g0 * (d / d0) ** (-exponent)
    return gains


def scenario_from_dict(doc: Mapping[str, Any]) -> ScenarioConfig:
    """Build and fully validate a scenario from its JSON document form.

    All powers in the document are dBm except the total budget ``p_max_w``
    and noise/static draws, which are watts.
    """
    try:
        cell_count = int(doc["cell_count"])
        user_count = int(doc["user_count"])
        flow_count = int(doc["flow_count"])
    except KeyError as exc:
        raise ScenarioError(f"missing required field {exc.args[0]!r}") from exc
    if min(cell_count, user_count, flow_count) < 1:
        raise ScenarioError("cell_count, user_count and flow_count must each be >= 1")

    cells = _ids("cell", cell_count)
    users = _ids("user", user_count)
    flows = tuple(doc.get("flows", _ids("flow", flow_count)))
    if len(flows) != flow_count:
        raise ScenarioError(f"flows lists {len(flows)} names for flow_count {flow_count}")

    carriers = tuple(doc.get("carriers", ["carrier_0"]))
    if not carriers:
        raise ScenarioError("carriers must be non-empty")
    cell_carrier = dict(doc.get("cell_carrier", {c: carriers[0] for c in cells}))
    for cell in cells:
        if cell not in cell_carrier:
            raise ScenarioError(f"cell_carrier missing entry for {cell}")
        if cell_carrier[cell] not in carriers:
            raise ScenarioError(f"cell_carrier maps {cell} to unknown {cell_carrier[cell]}")

    serving = dict(doc.get("serving_cell", {}))
    if not serving:
        # Round-robin default keeps tiny scenarios terse.
        serving = {u: cells[i % cell_count] for i, u in enumerate(users)}
    for user in users:
        if user not in serving:
            raise ScenarioError(f"serving_cell map missing entry for {user}")
        if serving[user] not in cells:
            raise ScenarioError(f"serving_cell maps {user} to unknown {serving[user]}")

    if "gains" in doc:
        gains = np.zeros((user_count, cell_count))
        table = doc["gains"]
        for k, user in enumerate(users):
            for m, cell in enumerate(cells):
                try:
                    gains[k, m] = float(table[user][cell])
                except (KeyError, TypeError) as exc:
                    raise ScenarioError(f"missing gain entry for ({user}, {cell})") from exc
    elif "pathloss" in doc:
        gains = _pathloss_gains(doc["pathloss"], users, cells)
    else:
        raise ScenarioError("scenario needs either a gains table or pathloss parameters")
    if not np.all(np.isfinite(gains)) or np.any(gains < 0):
        raise ScenarioError("gains must be finite and >= 0")

    noise = float(doc.get("noise_power_w", 1e-9))
    if noise <= 0:
        raise ScenarioError("noise_power_w must be > 0")

    p_max_w = float(doc.get("p_max_w", 10.0))
    if p_max_w <= 0:
        raise ScenarioError("p_max_w must be > 0")
    p_min_dbm = float(doc.get("p_min_dbm", -60.0))
    p_max_cell_dbm = float(doc.get("p_max_cell_dbm", 36.0))
    if p_min_dbm >= p_max_cell_dbm:
        raise ScenarioError("p_min_dbm must be below p_max_cell_dbm")

    arrivals_doc = doc.get("arrival_rates", 0.0)
    arrivals = np.zeros((user_count, flow_count))
    if isinstance(arrivals_doc, (int, float)):
        arrivals[:] = float(arrivals_doc)
    elif isinstance(arrivals_doc, dict):
        for k, user in enumerate(users):
            per_user = _broadcast(arrivals_doc.get(user, 0.0), flows, "arrival_rates")
            arrivals[k] = [per_user[f] for f in flows]
    else:
        raise ScenarioError("arrival_rates must be a number or an object keyed by user")
    if np.any(arrivals < 0):
        raise ScenarioError("arrival rates must be >= 0")

    bw_doc = doc.get("bandwidth_hz", 1.0)
    bw = np.array([_broadcast(bw_doc, users, "bandwidth_hz")[u] for u in users])
    if np.any(bw < 0):
        raise ScenarioError("bandwidth_hz must be >= 0")

    mode = str(doc.get("mode", "config-response"))
    if mode not in MODES:
        raise ScenarioError(f"mode must be one of {MODES}, got {mode!r}")

    rb_count = int(doc.get("rb_count", 8))
    rbs = _ids("rb", rb_count)

    default_power_w = min(dbm_to_watts(p_max_cell_dbm), p_max_w / (2 * cell_count))
    default_power_dbm = max(watts_to_dbm(default_power_w), p_min_dbm)
    initial_powers = {
        c: float(doc.get("initial_powers_dbm", {}).get(c, default_power_dbm)) for c in cells
    }

    init_queues = np.zeros((user_count, flow_count))
    for k, user in enumerate(users):
        per_user = _broadcast(
            doc.get("initial_queues_bits", {}).get(user, 0.0), flows, "initial_queues_bits"
        )
        init_queues[k] = [per_user[f] for f in flows]
    if np.any(init_queues < 0):
        raise ScenarioError("initial queues must be >= 0")

    carriers_on = tuple(doc.get("initial_carriers_on", carriers))
    for c in carriers_on:
        if c not in carriers:
            raise ScenarioError(f"initial_carriers_on names unknown carrier {c}")

    weights_doc = doc.get("initial_scheduler_weights")
    if weights_doc is None:
        weights = {f: 1.0 / flow_count for f in flows}
    else:
        weights = {f: float(weights_doc.get(f, 0.0)) for f in flows}

    scenario = ScenarioConfig(
        cells=cells,
        users=users,
        flows=flows,
        carriers=carriers,
        cell_carrier=cell_carrier,
        serving_cell=serving,
        base_gains=gains,
        noise_power_w=noise,
        p_max_w=p_max_w,
        p_min_dbm=p_min_dbm,
        p_max_cell_dbm=p_max_cell_dbm,
        arrival_rates=arrivals,
        bandwidth_hz=bw,
        carrier_static_w=float(doc.get("carrier_static_w", 0.0)),
        mode=mode,
        seed=int(doc.get("seed", 0)),
        rbs=rbs,
        initial_powers_dbm=initial_powers,
        initial_queues_bits=init_queues,
        initial_carriers_on=carriers_on,
        initial_scheduler_weights=weights,
        rx_antennas=int(doc.get("rx_antennas", 1)),
        tx_antennas=int(doc.get("tx_antennas", 1)),
    )
    # Fail loudly now rather than on first use.
    try:
        initial_state(scenario).check(scenario)
    except ConfigurationError as exc:
        raise ScenarioError(f"initial state invalid: {exc}") from exc
    return scenario


def load_scenario(path: str | Path) -> ScenarioConfig:
    try:
        doc = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ScenarioError(f"cannot load scenario {path}: {exc}") from exc
    if not isinstance(doc, dict):
        raise ScenarioError("scenario document must be a JSON object")
    return scenario_from_dict(doc)


def initial_state(scenario: ScenarioConfig) -> RanState:
    channel = ChannelState(gains=scenario.base_gains.copy())
    config = ConfigState(
        powers_dbm=dict(scenario.initial_powers_dbm),
        carriers={c: c in scenario.initial_carriers_on for c in scenario.carriers},
        scheduler_weights=dict(scenario.initial_scheduler_weights),
    )
    return RanState(
        channel=channel,
        queues=QueueState(lengths=scenario.initial_queues_bits.copy()),
        config=config,
        interference=InterferenceState(sinr=compute_sinr(channel, config, scenario)),
        tick=0,
    )


def compute_sinr(
    channel: ChannelState, config: ConfigState, scenario: ScenarioConfig
) -> np.ndarray:
    """Per-user linear SINR from the gain table and current powers.

    sinr_k = p_serv * g[k, serv] / (N0 + sum of active interferer powers
    weighted by their gains); cells on inactive carriers contribute zero.
    """
    powers_w = np.zeros(len(scenario.cells))
    for m, cell in enumerate(scenario.cells):
        if cell not in config.powers_dbm:
            raise ConfigurationError(f"missing power entry for {cell}")
        if config.carriers[scenario.cell_carrier[cell]]:
            powers_w[m] = config.power_watts(cell)
    sinr = np.zeros(len(scenario.users))
    for k, user in enumerate(scenario.users):
        serv = scenario.cell_index(scenario.serving_cell[user])
        signal = powers_w[serv] * channel.gains[k, serv]
        interference = sum(
            powers_w[m] * channel.gains[k, m]
            for m in range(len(scenario.cells))
            if m != serv
        )
        sinr[k] = signal / (scenario.noise_power_w + interference)
    return sinr


def user_rates(state: RanState, scenario: ScenarioConfig) -> np.ndarray:
    """Shannon rate per user in bits/s: bandwidth * log2(1 + sinr)."""
    return scenario.bandwidth_hz * np.log2(1.0 + state.interference.sinr)


def compute_kpis(state: RanState, scenario: ScenarioConfig) -> KpiVector:
    """KPI triple for a state.

    Latency is a drain-time proxy: total queued bits over the total service
    rate, floored at EPS_RATE so empty-rate states stay finite.
    """
    throughput = float(user_rates(state, scenario).sum())
    active_carriers = sum(1 for c in scenario.carriers if state.config.carriers[c])
    energy = (
        state.config.total_active_watts(scenario)
        + scenario.carrier_static_w * active_carriers
    )
    latency = state.queues.total_bits / max(throughput, EPS_RATE)
    return KpiVector(throughput=throughput, latency=latency, energy=float(energy))


def apply_delta(config: ConfigState, delta: ConfigDelta, scenario: ScenarioConfig) -> ConfigState:
    for cell in delta.powers_dbm:
        if cell not in scenario.cells:
            raise ConfigurationError(f"delta references unknown cell {cell}")
    for carrier in delta.carriers:
        if carrier not in scenario.carriers:
            raise ConfigurationError(f"delta references unknown carrier {carrier}")
    powers = dict(config.powers_dbm) | {c: float(p) for c, p in delta.powers_dbm.items()}
    carriers = dict(config.carriers) | {c: bool(v) for c, v in delta.carriers.items()}
    if delta.scheduler_weights is None:
        weights = dict(config.scheduler_weights)
    else:
        for flow in delta.scheduler_weights:
            if flow not in scenario.flows:
                raise ConfigurationError(f"delta references unknown flow {flow}")
        weights = {f: float(delta.scheduler_weights.get(f, 0.0)) for f in scenario.flows}
    return ConfigState(powers_dbm=powers, carriers=carriers, scheduler_weights=weights)


def _evolve_channel(state: RanState, scenario: ScenarioConfig) -> ChannelState:
    if scenario.mode in ("config-response", "quasi-static"):
        return state.channel
    # Stochastic mode: seeded Rayleigh-style power fading redraw around the
    # scenario base gains. The generator is keyed on (seed, tick) so step
    # stays a pure function of its inputs.
    rng = np.random.default_rng([scenario.seed, state.tick])
    fading = rng.exponential(1.0, size=scenario.base_gains.shape)
    return ChannelState(gains=scenario.base_gains * fading, matrices=state.channel.matrices)


def step(state: RanState, delta: ConfigDelta, scenario: ScenarioConfig) -> RanState:
    """One environment tick: apply the (already validated) configuration
    delta, evolve the channel per scenario mode, recompute SINR, and drain
    queues against arrivals.

    In config-response mode the channel and queues are frozen, so an empty
    delta returns a state equal to the input (tick aside) — the identity
    action the control loop's improvement argument leans on.
    """
    config = apply_delta(state.config, delta, scenario)
    channel = _evolve_channel(state, scenario)
    interference = InterferenceState(sinr=compute_sinr(channel, config, scenario))

    if scenario.mode == "config-response":
        queues = state.queues
    else:
        mid = RanState(channel, state.queues, config, interference, state.tick)
        rates = user_rates(mid, scenario)
        weights = np.array([config.scheduler_weights[f] for f in scenario.flows])
        served_bits = weights[None, :] * rates[:, None] * TICK_SECONDS
        lengths = np.maximum(
            0.0,
            state.queues.lengths + scenario.arrival_rates * TICK_SECONDS - served_bits,
        )
        queues = QueueState(lengths=lengths)

    return RanState(
        channel=channel,
        queues=queues,
        config=config,
        interference=interference,
        tick=state.tick + 1,
    )
