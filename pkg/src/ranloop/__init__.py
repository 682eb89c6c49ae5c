"""ranloop: a desk-scale, intent-driven RAN control-loop workbench."""

from .env import (
    ChannelState,
    ConfigDelta,
    ConfigState,
    InterferenceState,
    KpiVector,
    QueueState,
    RanState,
    ScenarioConfig,
    ScenarioError,
    compute_kpis,
    compute_sinr,
    initial_state,
    load_scenario,
    scenario_from_dict,
    step,
)
from .intents import Intent, IntentError, WeightVector, parse_intent, permitted, weights_for
from .loop import (
    LoopConfig,
    LoopEngine,
    NormSpec,
    RunResult,
    TrajectoryRecord,
    detect_fixed_point,
    estimate_lipschitz,
    run,
    state_distance,
)
from .policies import CandidateGrid, GreedyPolicy, LinearPolicy, LinearPolicyParams, greedy_decide
from .telemetry import QuantizationSpec, StateContext, kpi_summary, tokenize_state

__version__ = "0.1.0"

__all__ = [
    "ChannelState",
    "ConfigDelta",
    "ConfigState",
    "InterferenceState",
    "KpiVector",
    "QueueState",
    "RanState",
    "ScenarioConfig",
    "ScenarioError",
    "compute_kpis",
    "compute_sinr",
    "initial_state",
    "load_scenario",
    "scenario_from_dict",
    "step",
    "Intent",
    "IntentError",
    "WeightVector",
    "parse_intent",
    "permitted",
    "weights_for",
    "LoopConfig",
    "LoopEngine",
    "NormSpec",
    "RunResult",
    "TrajectoryRecord",
    "detect_fixed_point",
    "estimate_lipschitz",
    "run",
    "state_distance",
    "CandidateGrid",
    "GreedyPolicy",
    "LinearPolicy",
    "LinearPolicyParams",
    "greedy_decide",
    "QuantizationSpec",
    "StateContext",
    "kpi_summary",
    "tokenize_state",
]
