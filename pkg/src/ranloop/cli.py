"""Command-line entry points: run a loop to a trajectory file, estimate the
closed-loop contraction constant, check a command file against a scenario,
or serve the HTTP interface.

Exit codes: 0 success, 2 configuration error, 3 scenario error, 4 policy
fault budget exceeded.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import dsl
from .adapter import scope_for
from .env import ScenarioConfig, ScenarioError, load_scenario
from .intents import Intent, IntentError, parse_intent
from .loop import (
    LoopConfig,
    PolicyFaultBudgetExceeded,
    closed_loop_map,
    estimate_lipschitz,
    run,
    write_trajectory,
)
from .policies import (
    CandidateGrid,
    CompletionEndpoint,
    ExternalPolicy,
    GreedyPolicy,
    LinearPolicy,
    LinearPolicyParams,
    Policy,
)
from .units import dbm_to_watts

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_SCENARIO = 3
EXIT_FAULT_BUDGET = 4


class CliError(Exception):
    pass


def default_grid(scenario: ScenarioConfig, levels: int = 7) -> CandidateGrid:
    """Evenly spaced per-cell power levels across the validator range, plus
    a coarse weight simplex when the flow count is small."""
    power_levels = tuple(
        float(x) for x in np.linspace(scenario.p_min_dbm, scenario.p_max_cell_dbm, levels)
    )
    weight_step = 0.25 if len(scenario.flows) <= 3 else None
    return CandidateGrid(power_levels_dbm=power_levels, weight_step=weight_step)


def build_policy(name: str, scenario: ScenarioConfig, args: argparse.Namespace) -> Policy:
    if name == "greedy":
        return GreedyPolicy(scenario=scenario, grid=default_grid(scenario))
    if name == "linear":
        target_w = dbm_to_watts(args.linear_target_dbm)
        params = LinearPolicyParams(
            gain=args.linear_gain,
            target_powers_w={c: target_w for c in scenario.cells},
        )
        return LinearPolicy(scenario=scenario, params=params)
    if name == "external":
        if not args.endpoint:
            raise CliError("--endpoint is required with --policy external")
        return ExternalPolicy(scenario=scenario, endpoint=CompletionEndpoint(base_url=args.endpoint))
    raise CliError(f"unknown policy {name!r}")


def _load_intent(path: str | None) -> Intent | None:
    if path is None:
        return None
    try:
        return parse_intent(Path(path).read_text())
    except OSError as exc:
        raise CliError(f"cannot read intent file: {exc}") from exc


def _loop_config(args: argparse.Namespace, **overrides) -> LoopConfig:
    return LoopConfig(
        non_rt_period=args.period,
        max_ticks=args.ticks,
        residual_tolerance=args.tolerance,
        **overrides,
    )


def cmd_run(args: argparse.Namespace) -> int:
    scenario = load_scenario(args.scenario)
    policy = build_policy(args.policy, scenario, args)
    intent = _load_intent(args.intent)
    result = run(scenario, intent, policy, _loop_config(args, fault_budget=args.fault_budget))
    if args.out:
        write_trajectory(result.records, args.out)
    else:
        for record in result.records:
            print(json.dumps(record.to_dict()))
    summary = {
        "ticks": result.records[-1].tick,
        "fixed_point": (
            {"tick": result.fixed_point[0], "state_digest": result.fixed_point[1]}
            if result.fixed_point
            else None
        ),
        "faults": result.faults,
        "final_kpis": result.records[-1].to_dict()["kpis"],
    }
    print(json.dumps(summary), file=sys.stderr)
    return EXIT_OK


def cmd_lipschitz(args: argparse.Namespace) -> int:
    scenario = load_scenario(args.scenario)
    if scenario.mode != "config-response":
        raise CliError("lipschitz estimation needs a config-response scenario")
    policy = build_policy(args.policy, scenario, args)
    intent = _load_intent(args.intent)
    k_hat = estimate_lipschitz(
        closed_loop_map(policy, intent, scenario),
        scenario,
        pairs=args.pairs,
        seed=args.seed,
    )
    print(json.dumps({"policy": args.policy, "pairs": args.pairs, "k_hat": k_hat}))
    return EXIT_OK


def cmd_validate(args: argparse.Namespace) -> int:
    scenario = load_scenario(args.scenario)
    try:
        text = Path(args.file).read_text()
    except OSError as exc:
        raise CliError(f"cannot read command file: {exc}") from exc
    try:
        commands = dsl.parse(text, flow_order=scenario.flows)
    except dsl.ParseError as exc:
        print(json.dumps({"accepted": False, "parse_error": str(exc)}))
        return EXIT_CONFIG
    verdict = dsl.validate(commands, scope_for(scenario))
    print(
        json.dumps(
            {
                "accepted": verdict.accepted,
                "canonical": dsl.render_program(commands),
                "reasons": [{"rule": r.rule, "message": r.message} for r in verdict.reasons],
            }
        )
    )
    return EXIT_OK if verdict.accepted else EXIT_CONFIG


def cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    from .service import create_app

    scenario = load_scenario(args.scenario)
    policy = build_policy(args.policy, scenario, args)
    intent = _load_intent(args.intent)
    loop_config = _loop_config(args, gate_mode=args.gate, pace_ticks_per_sec=args.pace)
    host, _, port = args.bind.rpartition(":")
    if not host or not port.isdigit():
        raise CliError(f"--bind must be HOST:PORT, got {args.bind!r}")
    console_dir = Path(__file__).resolve().parents[2] / "frontend" / "dist"
    app = create_app(
        scenario,
        policy,
        loop_config,
        intent=intent,
        console_dir=console_dir if console_dir.is_dir() else None,
    )
    uvicorn.run(app, host=host, port=int(port), log_level="info")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ranloop", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser, with_policy: bool = True) -> None:
        p.add_argument("--scenario", required=True, help="scenario JSON path")
        if with_policy:
            p.add_argument("--intent", default=None, help="intent JSON path")
            p.add_argument(
                "--policy", default="greedy", choices=("greedy", "linear", "external")
            )
            p.add_argument("--linear-gain", type=float, default=0.3)
            p.add_argument("--linear-target-dbm", type=float, default=-60.0)
            p.add_argument("--endpoint", default=None, help="completion service base URL")
        p.add_argument("--period", type=int, default=100, help="ticks per non-RT boundary")
        p.add_argument("--ticks", type=int, default=1000, help="max ticks")
        p.add_argument("--tolerance", type=float, default=1e-8, help="fixed-point residual tolerance")

    p_run = sub.add_parser("run", help="run a closed loop and write the trajectory")
    common(p_run)
    p_run.add_argument("--out", default=None, help="trajectory JSONL path (default stdout)")
    p_run.add_argument("--fault-budget", type=int, default=None)
    p_run.set_defaults(func=cmd_run)

    p_lip = sub.add_parser("lipschitz", help="estimate the closed-loop contraction constant")
    common(p_lip)
    p_lip.add_argument("--pairs", type=int, default=1000)
    p_lip.add_argument("--seed", type=int, default=0)
    p_lip.set_defaults(func=cmd_lipschitz)

    p_val = sub.add_parser("validate", help="check a command file against a scenario")
    common(p_val, with_policy=False)
    p_val.add_argument("file", help="path to a command program")
    p_val.set_defaults(func=cmd_validate)

    p_serve = sub.add_parser("serve", help="serve the HTTP interface")
    common(p_serve)
    p_serve.add_argument("--bind", default="127.0.0.1:8000", help="HOST:PORT")
    p_serve.add_argument("--gate", default="auto", choices=("auto", "manual"))
    p_serve.add_argument("--pace", type=float, default=100.0, help="real ticks/second (0 = free-run)")
    p_serve.set_defaults(func=cmd_serve, ticks=100_000)  # long-lived by default

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ScenarioError as exc:
        print(f"scenario error: {exc}", file=sys.stderr)
        return EXIT_SCENARIO
    except (CliError, IntentError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except PolicyFaultBudgetExceeded as exc:
        print(f"aborted: {exc}", file=sys.stderr)
        return EXIT_FAULT_BUDGET


if __name__ == "__main__":
    sys.exit(main())
