"""Swarm formations: agents arrange themselves on a circle or along a chain.

Each agent reads its own pose and the bearings and distances of the others,
and its strategy turns them into a velocity order through the rules in
:mod:`.formation`. The monitors stop a run once the formation error falls
under a threshold.
"""
from __future__ import annotations

import math
import random

from ..devices import DeviceSuite, DriveState
from ..geometry import Vec2, WorldMap
from ..server.config import RunConfig, ScenarioSpec
from . import ScenarioDef, register
from .base import Monitor, builtin_agent, checked
from .formation import circle_error, chain_error, perpendicular_deviation

CIRCLE_DEFAULTS = dict(n=6, radius=3.0, size=20.0, spread=8.0, body=0.15, speed=0.5,
                       radial_gain=1.0, tangential_gain=1.0, threshold=0.05, max_ticks=20000)
CHAIN_DEFAULTS = dict(n=5, ax=5.0, ay=10.0, bx=15.0, by=10.0, size=20.0, spread=4.0, body=0.1,
                      speed=0.5, gain=2.0, threshold=0.02, max_ticks=20000)
# agents see every distance; the formation rules need them all
FAR = 1e6
# turn fully before moving, with no acceleration lag, so each move is a straight
# segment toward the ordered point and cannot swing the agent sideways
SHARP_DRIVE = dict(max_accel=1e6, align_tol=1e-9)
# slack on the per-tick monotone deviation check, for the residual heading error
MONOTONE_TOL = 1e-9

_SUITE = DeviceSuite(scanner=True, pose=True)


def _scatter(rng: random.Random, n: int, center: Vec2, spread: float, gap: float) -> list:
    pts = []
    while len(pts) < n:
        p = Vec2(center.x + rng.uniform(-spread / 2, spread / 2), center.y + rng.uniform(-spread / 2, spread / 2))
        if all((p - q).norm() >= gap for q in pts):
            pts.append(p)
    return pts


def _member(i: int, p: Vec2, heading: float, body: float, speed: float, strategy: str, params: dict):
    return builtin_agent(f"m{i}", "formation", p.x, p.y, heading, radius=body, color="teal",
                         devices=_SUITE, drive=DriveState(max_speed=speed, **SHARP_DRIVE),
                         strategy=strategy, params=params)


def circle_config(seed: int, **params) -> RunConfig:
    p = {**CIRCLE_DEFAULTS, **params}
    n = int(p["n"])
    if n < 3:
        raise ValueError("a circle needs at least three agents")
    rng = random.Random(seed)
    size = p["size"]
    pts = _scatter(rng, n, Vec2(size / 2, size / 2), p["spread"], 4 * p["body"])
    rule = {"radius": p["radius"], "radial_gain": p["radial_gain"],
            "tangential_gain": p["tangential_gain"], "max_speed": p["speed"]}
    agents = tuple(_member(i, q, rng.uniform(-math.pi, math.pi), p["body"], p["speed"], "circle", rule)
                   for i, q in enumerate(pts))
    scenario = ScenarioSpec("circle", {"radius": repr(p["radius"]), "threshold": repr(p["threshold"])})
    return checked(RunConfig(world=WorldMap(size, size), agents=agents, scenario=scenario, seed=seed,
                             max_ticks=int(p["max_ticks"]), near_threshold=FAR, checkpoint_every=100))


def chain_config(seed: int, **params) -> RunConfig:
    p = {**CHAIN_DEFAULTS, **params}
    n = int(p["n"])
    if n < 1:
        raise ValueError("a chain needs at least one agent")
    a, b = Vec2(p["ax"], p["ay"]), Vec2(p["bx"], p["by"])
    rng = random.Random(seed)
    mid = Vec2((a.x + b.x) / 2, (a.y + b.y) / 2)
    spread = max((b - a).norm(), p["spread"])
    pts = _scatter(rng, n, mid, spread, 4 * p["body"])
    rule = {"ax": a.x, "ay": a.y, "bx": b.x, "by": b.y, "gain": p["gain"], "max_speed": p["speed"]}
    agents = tuple(_member(i, q, rng.uniform(-math.pi, math.pi), p["body"], p["speed"], "chain", rule)
                   for i, q in enumerate(pts))
    scenario = ScenarioSpec("chain", {"anchors": f"{a.x!r} {a.y!r} {b.x!r} {b.y!r}",
                                      "threshold": repr(p["threshold"])})
    return checked(RunConfig(world=WorldMap(p["size"], p["size"]), agents=agents, scenario=scenario,
                             seed=seed, max_ticks=int(p["max_ticks"]), near_threshold=FAR,
                             checkpoint_every=100))


def _positions(server) -> list:
    return [a.pose.position for a in server.agents]


class CircleMonitor(Monitor):
    """Stops once the circle error drops under the threshold."""

    def __init__(self, config: RunConfig):
        self.radius = float(config.scenario.params.get("radius", 3.0))
        self.threshold = float(config.scenario.params.get("threshold", 0.05))
        self.converged_tick = None
        self.error = math.inf

    def after_tick(self, server) -> bool:
        self.error = circle_error(_positions(server), self.radius)
        if self.error < self.threshold:
            self.converged_tick = server.tick_count - 1
            return True
        return False

    def metrics(self, server) -> dict:
        return {"converged": self.converged_tick is not None, "converged_tick": self.converged_tick,
                "error": self.error}


class ChainMonitor(Monitor):
    """Stops once the chain error drops under the threshold; checks that the
    worst distance from the anchor line never grows."""

    def __init__(self, config: RunConfig):
        ax, ay, bx, by = (float(v) for v in config.scenario.params["anchors"].split())
        self.a, self.b = Vec2(ax, ay), Vec2(bx, by)
        self.threshold = float(config.scenario.params.get("threshold", 0.02))
        self.converged_tick = None
        self.error = math.inf
        self.deviation = None
        self.monotone = True
        self.worst_rise = 0.0

    def _deviation(self, server) -> float:
        return max(perpendicular_deviation(p, self.a, self.b) for p in _positions(server))

    def start(self, server) -> None:
        self.deviation = self._deviation(server)

    def after_tick(self, server) -> bool:
        dev = self._deviation(server)
        if self.deviation is not None:
            rise = dev - self.deviation
            self.worst_rise = max(self.worst_rise, rise)
            if rise > MONOTONE_TOL:
                self.monotone = False
        self.deviation = dev
        self.error = chain_error(_positions(server), self.a, self.b)
        if self.error < self.threshold:
            self.converged_tick = server.tick_count - 1
            return True
        return False

    def metrics(self, server) -> dict:
        return {"converged": self.converged_tick is not None, "converged_tick": self.converged_tick,
                "error": self.error, "max_deviation": self.deviation, "monotone": self.monotone,
                "worst_rise": self.worst_rise}


register(ScenarioDef(
    name="circle",
    roles=("m0", "m1", "m2", "..."),
    policies={"member": "circle"},
    defaults=CIRCLE_DEFAULTS,
    build=circle_config,
    monitor=CircleMonitor,
    ranges={"n": (3, None), "radius": (0.0, None)},
))

register(ScenarioDef(
    name="chain",
    roles=("m0", "m1", "m2", "..."),
    policies={"member": "chain"},
    defaults=CHAIN_DEFAULTS,
    build=chain_config,
    monitor=ChainMonitor,
    ranges={"n": (1, None)},
))
