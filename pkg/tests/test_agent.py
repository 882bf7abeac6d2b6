import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from agentsim.agent import (
    AgentError,
    AgentRuntime,
    ConfigError,
    Message,
    ReflexRule,
    ThresholdRule,
    apply_reflexes,
    interpret,
    rng_seed_for,
    steer_command,
)
from agentsim.csm import EventInstance
from agentsim.devices import DriveState
from helpers import spec


def test_interpret_orders_tick_rules_then_messages():
    rules = [ThresholdRule("ir", "<", 0.5, "NEAR", "value"),
             ThresholdRule("touch", "==", True, "HIT"),
             ThresholdRule("ir", "absent", None, "CLEAR"),
             ThresholdRule("scan", "present", None, "SEE", "bearing")]
    readings = {"ir": 0.3, "touch": True, "scan": (), "bearing": 1.25}
    events = interpret(readings, rules, [Message(1, "me", "hi", 4)])
    assert [(e.name, e.payload) for e in events] == [
        ("TICK", None), ("NEAR", 0.3), ("HIT", None), ("SEE", 1.25), ("MSG", "hi")]


def test_threshold_none_and_tuple_readings_never_compare():
    r = ThresholdRule("x", "<", 1.0, "E")
    assert not r.holds(None) and not r.holds((1, 2))
    with pytest.raises(ConfigError):
        ThresholdRule("x", "~", 1.0, "E")


def test_reflex_highest_priority_wins():
    rules = [ReflexRule("A", (1.0, 1.0), 1), ReflexRule("B", (-1.0, -1.0), 5)]
    assert apply_reflexes([EventInstance("A"), EventInstance("B")], rules) == (-1.0, -1.0)
    assert apply_reflexes([EventInstance("A")], rules) == (1.0, 1.0)
    assert apply_reflexes([EventInstance("C")], rules) is None


def test_reflex_priorities_must_be_unique():
    with pytest.raises(ConfigError):
        spec("a", 1, 1, reflexes=[("A", (0, 0), 1), ("B", (0, 0), 1)])


def test_steer_turns_in_place_then_drives():
    drive = DriveState(max_speed=1.0, wheel_base=0.2, align_tol=0.3)
    vL, vR = steer_command(0.0, 1.0, 0.0, drive, 0.1)  # target 90 degrees left
    assert vL == -vR and vR > 0
    vL, vR = steer_command(1.0, 0.05, 0.0, drive, 0.1)
    assert vL > 0 and vR > vL
    assert steer_command(0.0, 0.0, 0.0, drive, 0.1) == (0.0, 0.0)
    vL, vR = steer_command(-1.0, 0.0, 0.0, drive, 0.1)  # straight behind: reverse
    assert vL == vR == -1.0


@given(seed=st.integers(0, 2**63), a=st.integers(0, 50), b=st.integers(0, 50))
def test_rng_streams_depend_on_seed_and_id_only(seed, a, b):
    assert rng_seed_for(seed, a) == rng_seed_for(seed, a)
    if a != b:
        assert rng_seed_for(seed, a) != rng_seed_for(seed, b)


PIPE = """
input HIT;
var seen = 0;
machine m {
  initial A;
  state A {
    on HIT -> B do emit(LATER), set_wheels(1, 1);
    on MSG -> A do assign(seen, payload);
    on TICK -> A do set_wheels(0.5, 0.5);
  }
  state B { on LATER -> C do send("b", 2); }
  state C { }
}
"""


def test_runtime_pipeline_and_reflex_override():
    s = spec("a", 1, 1, 0.0, PIPE, thresholds=[("bump", "==", True, "HIT")],
             reflexes=[("HIT", (-0.2, -0.2), 1)])
    rt = AgentRuntime(s, 0, 0.1)
    out = rt.step(0, {"bump": False}, [Message(1, "a", 4.0, 0)])
    assert out.drive is None and rt.memory.values["seen"] == 4.0
    out = rt.step(1, {"bump": False})
    assert out.drive == (0.5, 0.5)
    out = rt.step(2, {"bump": True})
    assert out.drive == (-0.2, -0.2)  # reflex beats the automaton
    assert rt.states == {"m": "B"}
    out = rt.step(3, {"bump": False})
    assert rt.states == {"m": "C"}
    assert [(m.dest, m.payload) for m in out.messages] == [("b", 2)]
    assert out.events == ["TICK", "LATER"]


def test_steer_without_pose_is_an_agent_error():
    text = "machine m { initial A; state A { on TICK -> A do steer(1, 0); } }"
    rt = AgentRuntime(spec("a", 1, 1, 0.0, text), 0)
    with pytest.raises(AgentError, match="pose"):
        rt.step(0, {})
    rt = AgentRuntime(spec("a", 1, 1, 0.0, text), 0)
    vL, vR = rt.step(0, {"pose.heading": math.pi / 2}).drive
    assert vL > 0 > vR  # facing north, target east: turn right


def test_wander_strategy_is_seeded():
    from agentsim.agent import StrategySpec

    text = "input ROAM; machine m { initial A; state A { on ROAM -> A do set_wheels(1 - payload, 1 + payload); } }"
    s = spec("a", 1, 1, 0.0, text, strategy=StrategySpec("wander", {"turn_every": "1"}))
    runs = []
    for _ in range(2):
        rt = AgentRuntime(s, 42)
        runs.append([rt.step(t, {}).drive for t in range(20)])
    assert runs[0] == runs[1]
    rt = AgentRuntime(s, 43)
    assert [rt.step(t, {}).drive for t in range(20)] != runs[0]
