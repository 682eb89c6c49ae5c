import pytest

from ranloop.env import scenario_from_dict


def make_scenario(**overrides):
    """Two-cell, three-user config-response scenario; override any field."""
    doc = {
        "cell_count": 2,
        "user_count": 3,
        "flow_count": 2,
        "flows": ["URLLC", "eMBB"],
        "gains": {
            "user_0": {"cell_0": 1.0, "cell_1": 0.3},
            "user_1": {"cell_0": 0.2, "cell_1": 0.9},
            "user_2": {"cell_0": 0.5, "cell_1": 0.5},
        },
        "noise_power_w": 0.1,
        "p_max_w": 4.0,
        "p_min_dbm": -30.0,
        "p_max_cell_dbm": 33.0,
        "bandwidth_hz": 1.0,
        "mode": "config-response",
        "seed": 1,
        "initial_powers_dbm": {"cell_0": 30.0, "cell_1": 30.0},
        "carrier_static_w": 0.5,
    }
    doc.update(overrides)
    return scenario_from_dict(doc)


def make_linear_scenario(initial_dbm: float = 30.0):
    """Single-cell reference scenario for the contraction testbed."""
    return scenario_from_dict(
        {
            "cell_count": 1,
            "user_count": 1,
            "flow_count": 1,
            "gains": {"user_0": {"cell_0": 1.0}},
            "noise_power_w": 1.0,
            "p_max_w": 10.0,
            "p_min_dbm": -60.0,
            "p_max_cell_dbm": 36.0,
            "bandwidth_hz": 1.0,
            "mode": "config-response",
            "initial_powers_dbm": {"cell_0": initial_dbm},
        }
    )


@pytest.fixture
def scenario():
    return make_scenario()


@pytest.fixture
def linear_scenario():
    return make_linear_scenario()


@pytest.fixture
def quasi_scenario():
    return make_scenario(
        mode="quasi-static",
        arrival_rates={"user_0": {"URLLC": 20.0, "eMBB": 10.0}},
        initial_queues_bits={"user_0": {"URLLC": 100.0, "eMBB": 50.0}},
    )
