import pytest

from ranloop.adapter import (
    A1PolicyMessage,
    E2ControlMessage,
    GateViolationError,
    GuardDecision,
    O1ConfigMessage,
    apply_messages,
    compile_commands,
    guard,
    message_dict,
    scope_for,
)
from ranloop.dsl import (
    AssignRbs,
    Noop,
    SetCarrier,
    SetPower,
    SetSchedulerWeights,
    Verdict,
)
from ranloop.env import initial_state


@pytest.fixture
def scope(scenario):
    return scope_for(scenario, initial_state(scenario))


class TestGuard:
    def test_valid_noop_passes_through(self, scope):
        decision = guard([Noop()], scope)
        assert decision.accepted
        assert decision.commands == (Noop(),)

    def test_over_budget_rejected_with_reasons(self):
        from conftest import make_scenario

        scen = make_scenario(p_max_w=3.0)
        decision = guard(
            [SetPower(entries=(("cell_0", 33.0), ("cell_1", 33.0)))],  # ~3.99 W
            scope_for(scen, initial_state(scen)),
        )
        assert not decision.accepted
        assert any(r.rule == "power-budget" for r in decision.verdict.reasons)

    def test_unknown_cell_rejected(self, scope):
        decision = guard([SetPower(entries=(("cell_99", 0.0),))], scope)
        assert not decision.accepted
        assert any(r.rule == "unknown-id" for r in decision.verdict.reasons)

    def test_scope_uses_live_state_powers(self, scenario):
        state = initial_state(scenario)
        scope = scope_for(scenario, state)
        assert scope.current_powers_dbm == dict(state.config.powers_dbm)


class TestCompile:
    def test_noop_compiles_to_nothing(self, scope):
        assert compile_commands(guard([Noop()], scope), tick=3) == ()

    def test_set_power_maps_to_e2(self, scope):
        decision = guard([SetPower(entries=(("cell_1", -10.0),))], scope)
        messages = compile_commands(decision, tick=7)
        assert messages == (
            E2ControlMessage(target="cell_1", parameter="tx_power_dbm", value=-10.0, issue_tick=7),
        )

    def test_weights_map_to_a1(self, scope):
        decision = guard(
            [SetSchedulerWeights(entries=(("URLLC", 0.8), ("eMBB", 0.2)))], scope
        )
        (message,) = compile_commands(decision, tick=0)
        assert isinstance(message, A1PolicyMessage)
        assert message.scheduler_weights == (("URLLC", 0.8), ("eMBB", 0.2))

    def test_carrier_maps_to_o1(self, scope):
        decision = guard([SetCarrier("carrier_0", False)], scope)
        (message,) = compile_commands(decision, tick=0)
        assert message == O1ConfigMessage(carrier="carrier_0", active=False, issue_tick=0)

    def test_rbs_map_to_e2(self, scope):
        decision = guard([AssignRbs(entries=(("user_0", ("rb_1", "rb_2")),))], scope)
        (message,) = compile_commands(decision, tick=0)
        assert message.parameter == "rb_assignment"
        assert message.target == "user_0"

    def test_order_preserved_across_interfaces(self, scope):
        decision = guard(
            [
                SetCarrier("carrier_0", True),
                SetPower(entries=(("cell_0", 0.0),)),
                SetSchedulerWeights(entries=(("URLLC", 1.0),)),
            ],
            scope,
        )
        kinds = [m.kind for m in compile_commands(decision, tick=0)]
        assert kinds == ["o1", "e2", "a1"]

    def test_unguarded_commands_refused_loudly(self, scope):
        with pytest.raises(GateViolationError):
            compile_commands([Noop()], tick=0)  # type: ignore[arg-type]
        rejected = GuardDecision(commands=(Noop(),), verdict=Verdict(accepted=False))
        with pytest.raises(GateViolationError):
            compile_commands(rejected, tick=0)

    def test_message_dict_serializable(self, scope):
        import json

        decision = guard([SetPower(entries=(("cell_0", 1.5),))], scope)
        (message,) = compile_commands(decision, tick=2)
        assert json.loads(json.dumps(message_dict(message)))["kind"] == "e2"


class TestApply:
    def test_empty_messages_empty_delta(self, scenario):
        delta = apply_messages((), initial_state(scenario), scenario)
        assert delta.is_empty()

    def test_last_power_message_wins(self, scenario, scope):
        state = initial_state(scenario)
        messages = (
            E2ControlMessage("cell_0", "tx_power_dbm", 10.0, 0),
            E2ControlMessage("cell_0", "tx_power_dbm", 5.0, 0),
        )
        delta = apply_messages(messages, state, scenario)
        assert delta.powers_dbm == {"cell_0": 5.0}

    def test_carrier_off_marks_inactive(self, scenario):
        state = initial_state(scenario)
        delta = apply_messages(
            (O1ConfigMessage("carrier_0", False, 0),), state, scenario
        )
        assert delta.carriers == {"carrier_0": False}

    def test_a1_weights_expand_to_full_vector(self, scenario):
        state = initial_state(scenario)
        delta = apply_messages(
            (A1PolicyMessage("a1-0-0", (), (("URLLC", 1.0),), 0),), state, scenario
        )
        assert delta.scheduler_weights == {"URLLC": 1.0, "eMBB": 0.0}

    def test_rb_assignment_produces_no_config_change(self, scenario):
        state = initial_state(scenario)
        delta = apply_messages(
            (E2ControlMessage("user_0", "rb_assignment", ["rb_0"], 0),), state, scenario
        )
        assert delta.is_empty()

    def test_noop_pipeline_is_identity(self, scenario, scope):
        state = initial_state(scenario)
        messages = compile_commands(guard([Noop()], scope), tick=0)
        assert apply_messages(messages, state, scenario).is_empty()
