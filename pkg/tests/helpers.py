"""Small builders shared by the test modules."""
import json
import math
import socket
import threading

from agentsim.agent import AgentSpec, ReflexRule, ThresholdRule
from agentsim.devices import DeviceSuite, DriveState, TouchSensor
from agentsim.geometry import Pose, Vec2, WorldMap
from agentsim.server.config import RunConfig
from agentsim.server.engine import run_to_text
from agentsim.server.runlog import parse_record
from agentsim.server.wire import AgentClient, accept_agents

FRONT_TOUCH = DeviceSuite(touch=(TouchSensor("front", 0.0, math.pi / 3),))

CRUISE = """
input HIT;
machine m {
  initial GO;
  state GO {
    on HIT -> STOP do set_wheels(0, 0);
    on TICK -> GO do set_wheels(0.5, 0.5);
  }
  state STOP { }
}
"""


def spec(name, x, y, heading=0.0, behavior="", *, radius=0.2, devices=DeviceSuite(),
         drive=None, thresholds=(), reflexes=(), strategy=None):
    kw = {}
    if strategy is not None:
        kw["strategy"] = strategy
    return AgentSpec(
        name=name,
        body_radius=radius,
        initial_pose=Pose(Vec2(x, y), heading),
        devices=devices,
        drive=drive or DriveState(max_accel=100.0),
        behavior=behavior,
        thresholds=tuple(t if isinstance(t, ThresholdRule) else ThresholdRule(*t) for t in thresholds),
        reflexes=tuple(r if isinstance(r, ReflexRule) else ReflexRule(*r) for r in reflexes),
        **kw,
    )


def config(agents, world=None, **kw):
    return RunConfig(world=world or WorldMap(10.0, 10.0), agents=tuple(agents), **kw)



def mutate_command(text, rng):
    """Change one logged wheel command; returns the new text and its tick."""
    lines = text.split("\n")
    candidates = [i for i, line in enumerate(lines) if "|5.cmd|" in line]
    i = rng.choice(candidates[len(candidates) // 4:])
    r = parse_record(lines[i])
    vl, vr = r.payload
    lines[i] = f"{r.tick}|5.cmd|{r.agent}|{json.dumps([vl + 0.25, vr])}"
    return "\n".join(lines), r.tick


def run_remote(config, names):
    """Run ``config`` with the named agents served from threads over loopback TCP."""
    listener = socket.create_server(("127.0.0.1", 0))
    port = listener.getsockname()[1]
    clients = [AgentClient(config, n) for n in names]
    threads = []
    for cl in clients:
        th = threading.Thread(target=lambda cl=cl: (cl.connect("127.0.0.1", port), cl.serve()), daemon=True)
        th.start()
        threads.append(th)
    with listener:
        peers = accept_agents(listener, config, names, timeout=10)
    report, text = run_to_text(config, remote=peers)
    for th in threads:
        th.join(10)
    return report, text, clients
