import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ranloop.env import (
    ChannelState,
    ConfigDelta,
    ConfigState,
    ConfigurationError,
    InterferenceState,
    QueueState,
    RanState,
    ScenarioError,
    compute_kpis,
    compute_sinr,
    initial_state,
    step,
)
from ranloop.loop import NormSpec, state_distance

from conftest import make_scenario


def single_cell(noise_w=0.1, gain=1.0, **overrides):
    return make_scenario(
        cell_count=1,
        user_count=1,
        gains={"user_0": {"cell_0": gain}},
        noise_power_w=noise_w,
        initial_powers_dbm={"cell_0": 30.0},
        **overrides,
    )


def config_with(scenario, powers_dbm):
    base = initial_state(scenario).config
    return ConfigState(
        powers_dbm=powers_dbm,
        carriers=dict(base.carriers),
        scheduler_weights=dict(base.scheduler_weights),
    )


class TestComputeSinr:
    def test_zero_power_gives_zero_sinr(self):
        scen = single_cell()
        config = config_with(scen, {"cell_0": float("-inf")})  # 0 W
        sinr = compute_sinr(initial_state(scen).channel, config, scen)
        assert sinr[0] == 0.0

    def test_single_cell_hand_arithmetic(self):
        # p = 1 W, g = 1, N0 = 0.1 W -> sinr = 10
        scen = single_cell(noise_w=0.1, gain=1.0)
        state = initial_state(scen)  # initial power 30 dBm = 1 W
        assert state.interference.sinr[0] == pytest.approx(10.0, abs=1e-9)

    def test_two_cell_interference_sum(self):
        scen = make_scenario(
            cell_count=2,
            user_count=1,
            gains={"user_0": {"cell_0": 1.0, "cell_1": 0.5}},
            serving_cell={"user_0": "cell_0"},
            initial_powers_dbm={"cell_0": 30.0, "cell_1": 30.0},
            noise_power_w=0.1,
        )
        state = initial_state(scen)
        assert state.interference.sinr[0] == pytest.approx(1.0 / 0.6, abs=1e-9)

    def test_missing_power_entry_names_cell(self, scenario):
        config = config_with(scenario, {"cell_0": 30.0})  # cell_1 missing
        with pytest.raises(ConfigurationError, match="cell_1"):
            compute_sinr(initial_state(scenario).channel, config, scenario)

    def test_inactive_carrier_contributes_no_power(self):
        scen = make_scenario(
            carriers=["carrier_0", "carrier_1"],
            cell_carrier={"cell_0": "carrier_0", "cell_1": "carrier_1"},
        )
        state = initial_state(scen)
        off = ConfigState(
            powers_dbm=dict(state.config.powers_dbm),
            carriers={"carrier_0": True, "carrier_1": False},
            scheduler_weights=dict(state.config.scheduler_weights),
        )
        sinr = compute_sinr(state.channel, off, scen)
        # user_0 served by cell_0 now sees no interference from cell_1
        assert sinr[0] == pytest.approx(1.0 / 0.1, abs=1e-9)
        # user_1 served by cell_1 gets zero signal
        assert sinr[1] == 0.0

    def test_missing_gain_entry_at_load_names_pair(self):
        with pytest.raises(ScenarioError, match=r"user_0.*cell_1"):
            make_scenario(gains={"user_0": {"cell_0": 1.0}}, user_count=1)


class TestComputeKpis:
    def test_zero_power_empty_queue_energy_is_static_draw(self):
        scen = single_cell(carrier_static_w=2.0)
        state = initial_state(scen)
        config = config_with(scen, {"cell_0": float("-inf")})
        zero = RanState(
            channel=state.channel,
            queues=state.queues,
            config=config,
            interference=InterferenceState(sinr=compute_sinr(state.channel, config, scen)),
        )
        kpis = compute_kpis(zero, scen)
        assert kpis.throughput == 0.0
        assert kpis.latency == 0.0
        assert kpis.energy == pytest.approx(2.0)

    @pytest.mark.parametrize("sinr,expected", [(1.0, 1.0), (3.0, 2.0)])
    def test_shannon_throughput(self, sinr, expected):
        # bandwidth 1 Hz: log2(1 + sinr)
        scen = single_cell(noise_w=1.0)
        state = initial_state(scen)
        synthetic = RanState(
            channel=state.channel,
            queues=state.queues,
            config=state.config,
            interference=InterferenceState(sinr=np.array([sinr])),
        )
        assert compute_kpis(synthetic, scen).throughput == pytest.approx(expected, abs=1e-12)

    def test_energy_additivity_direct_recomputation(self, scenario):
        state = initial_state(scenario)
        kpis = compute_kpis(state, scenario)
        expected = sum(
            state.config.power_watts(c)
            for c in scenario.cells
            if state.config.carriers[scenario.cell_carrier[c]]
        ) + scenario.carrier_static_w * sum(
            1 for c in scenario.carriers if state.config.carriers[c]
        )
        assert kpis.energy == pytest.approx(expected, rel=1e-12)

    def test_latency_uses_rate_floor(self, scenario):
        state = initial_state(scenario)
        queued = RanState(
            channel=state.channel,
            queues=QueueState(lengths=np.full((3, 2), 10.0)),
            config=state.config,
            interference=state.interference,
        )
        kpis = compute_kpis(queued, scenario)
        assert kpis.latency == pytest.approx(60.0 / kpis.throughput)


class TestStep:
    def test_identity_action_config_response(self, scenario):
        state = initial_state(scenario)
        after = step(state, ConfigDelta(), scenario)
        assert after == state  # tick excluded from equality
        assert after.tick == state.tick + 1
        assert state_distance(after, state, NormSpec()) == 0.0

    def test_queue_drain_hand_arithmetic(self):
        # queue 100 bits, rate 50 bits/s, dt 0.01 s, no arrivals -> 99.5
        scen = make_scenario(
            mode="quasi-static",
            cell_count=1,
            user_count=1,
            flow_count=1,
            flows=["f"],
            gains={"user_0": {"cell_0": 1.0}},
            noise_power_w=1.0,
            initial_powers_dbm={"cell_0": 30.0},  # sinr 1 -> log2(2) = 1 bit/s
            bandwidth_hz=50.0,  # rate = 50 bits/s
            initial_queues_bits={"user_0": {"f": 100.0}},
        )
        after = step(initial_state(scen), ConfigDelta(), scen)
        assert after.queues.lengths[0, 0] == pytest.approx(99.5, abs=1e-12)

    def test_drain_never_goes_negative(self):
        scen = make_scenario(
            mode="quasi-static",
            cell_count=1,
            user_count=1,
            flow_count=1,
            flows=["f"],
            gains={"user_0": {"cell_0": 1.0}},
            noise_power_w=1.0,
            initial_powers_dbm={"cell_0": 30.0},
            bandwidth_hz=1e6,
            initial_queues_bits={"user_0": {"f": 1.0}},
        )
        after = step(initial_state(scen), ConfigDelta(), scen)
        assert after.queues.lengths[0, 0] == 0.0

    def test_stochastic_mode_is_seed_deterministic(self):
        scen = make_scenario(mode="stochastic", seed=7)
        s0 = initial_state(scen)
        a = step(s0, ConfigDelta(powers_dbm={"cell_0": 20.0}), scen)
        b = step(s0, ConfigDelta(powers_dbm={"cell_0": 20.0}), scen)
        assert a == b
        assert np.array_equal(a.channel.gains, b.channel.gains)

    def test_stochastic_mode_redraws_channel(self):
        scen = make_scenario(mode="stochastic", seed=7)
        after = step(initial_state(scen), ConfigDelta(), scen)
        assert not np.array_equal(after.channel.gains, scen.base_gains)

    def test_unknown_delta_target_raises(self, scenario):
        state = initial_state(scenario)
        with pytest.raises(ConfigurationError, match="cell_9"):
            step(state, ConfigDelta(powers_dbm={"cell_9": 0.0}), scenario)
        with pytest.raises(ConfigurationError, match="carrier_9"):
            step(state, ConfigDelta(carriers={"carrier_9": False}), scenario)

    def test_weight_replacement_zero_fills_missing_flows(self, scenario):
        state = initial_state(scenario)
        after = step(state, ConfigDelta(scheduler_weights={"URLLC": 1.0}), scenario)
        assert after.config.scheduler_weights == {"URLLC": 1.0, "eMBB": 0.0}


class TestInvariants:
    @given(
        p0=st.floats(-30.0, 33.0),
        p1=st.floats(-30.0, 33.0),
        bump=st.floats(0.1, 10.0),
    )
    @settings(max_examples=60, deadline=None)
    def test_sinr_monotone_in_interferer_power(self, p0, p1, bump):
        scen = make_scenario()
        state = initial_state(scen)
        base = config_with(scen, {"cell_0": p0, "cell_1": p1})
        raised = config_with(scen, {"cell_0": p0, "cell_1": min(p1 + bump, 33.0)})
        before = compute_sinr(state.channel, base, scen)
        after = compute_sinr(state.channel, raised, scen)
        # user_0 is served by cell_0; cell_1 only interferes with it
        assert after[0] <= before[0] + 1e-15

    @given(
        power=st.floats(-30.0, 33.0),
        queue=st.floats(0.0, 1e5),
        ticks=st.integers(1, 5),
    )
    @settings(max_examples=40, deadline=None)
    def test_reachable_states_stay_non_negative(self, power, queue, ticks):
        scen = make_scenario(
            mode="stochastic",
            arrival_rates=25.0,
            initial_queues_bits={u: queue for u in ("user_0", "user_1", "user_2")},
        )
        state = initial_state(scen)
        for _ in range(ticks):
            state = step(state, ConfigDelta(powers_dbm={"cell_0": power}), scen)
            assert np.all(state.queues.lengths >= 0)
            assert np.all(state.interference.sinr >= 0)
            kpis = compute_kpis(state, scen)
            assert kpis.throughput >= 0 and kpis.latency >= 0 and kpis.energy >= 0
            assert all(map(math.isfinite, kpis.as_tuple()))

    def test_state_equality_ignores_tick_only(self, scenario):
        s0 = initial_state(scenario)
        s1 = step(s0, ConfigDelta(), scenario)
        s2 = step(s0, ConfigDelta(powers_dbm={"cell_0": 10.0}), scenario)
        assert s1 == s0
        assert s2 != s0

    def test_check_rejects_inconsistent_cached_sinr(self, scenario):
        state = initial_state(scenario)
        broken = RanState(
            channel=state.channel,
            queues=state.queues,
            config=state.config,
            interference=InterferenceState(sinr=state.interference.sinr + 1.0),
        )
        with pytest.raises(ConfigurationError, match="SINR"):
            broken.check(scenario)


class TestScenarioLoading:
    def test_counts_must_be_positive(self):
        with pytest.raises(ScenarioError):
            make_scenario(cell_count=0)

    def test_bad_mode_rejected(self):
        with pytest.raises(ScenarioError, match="mode"):
            make_scenario(mode="warp")

    def test_noise_must_be_positive(self):
        with pytest.raises(ScenarioError, match="noise"):
            make_scenario(noise_power_w=0.0)

    def test_negative_arrivals_rejected(self):
        with pytest.raises(ScenarioError):
            make_scenario(arrival_rates=-1.0)

    def test_serving_cell_must_cover_users(self):
        with pytest.raises(ScenarioError, match="user_2"):
            make_scenario(serving_cell={"user_0": "cell_0", "user_1": "cell_1"})

    def test_over_budget_initial_powers_rejected(self):
        with pytest.raises(ScenarioError, match="budget"):
            make_scenario(
                p_max_w=3.0, initial_powers_dbm={"cell_0": 33.0, "cell_1": 33.0}
            )

    def test_matrix_shape_checked(self, scenario):
        state = initial_state(scenario)
        bad = ChannelState(
            gains=scenario.base_gains.copy(),
            matrices={"user_0": np.zeros((2, 2), dtype=complex)},
        )
        with pytest.raises(ConfigurationError, match="user_0"):
            RanState(bad, state.queues, state.config, state.interference).check(scenario)
