"""Chasing game: a faster predator steers at the prey's bearing; the prey
wanders and runs away once the map discloses how close the predator is."""
from __future__ import annotations

import math
import random
import warnings

from ..devices import DriveState, whisker_suite
from ..geometry import WorldMap
from ..server.config import RunConfig, ScenarioSpec
from . import ScenarioDef, register
from .base import Monitor, builtin_agent, checked

DEFAULTS = dict(size=20.0, predator_speed=1.2, prey_speed=1.0, radius=0.2, near=1.0,
                max_ticks=5000, min_separation=5.0, turn_every=10, turn_max=0.5)


def chase_config(seed: int, **params) -> RunConfig:
    p = {**DEFAULTS, **params}
    if p["predator_speed"] <= p["prey_speed"]:
        warnings.warn("predator is not faster than prey; the chase may never end", stacklevel=2)
    rng = random.Random(seed)
    size, r = p["size"], p["radius"]
    lo, hi = 2.0, size - 2.0
    while True:
        a = (rng.uniform(lo, hi), rng.uniform(lo, hi))
        b = (rng.uniform(lo, hi), rng.uniform(lo, hi))
        if math.dist(a, b) >= p["min_separation"]:
            break
    ha, hb = rng.uniform(-math.pi, math.pi), rng.uniform(-math.pi, math.pi)
    suite = whisker_suite()
    predator = builtin_agent(
        "predator", "chase_predator", *a, ha, radius=r, color="red", devices=suite,
        drive=DriveState(max_speed=p["predator_speed"], max_accel=4.0),
        thresholds=[("scan.prey.bearing", "present", None, "PREY_BEARING", "value"),
                    ("touchFL.agent", "==", "prey", "CAUGHT_PREY"),
                    ("touchFR.agent", "==", "prey", "CAUGHT_PREY")],
    )
    prey = builtin_agent(
        "prey", "chase_prey", *b, hb, radius=r, color="blue", devices=suite,
        drive=DriveState(max_speed=p["prey_speed"], max_accel=4.0),
        strategy="wander", params={"turn_every": p["turn_every"], "turn_max": p["turn_max"]},
        thresholds=[("scan.predator.distance", "present", None, "THREAT", "scan.predator.bearing"),
                    ("touchFL", "==", True, "BUMP"),
                    ("touchFR", "==", True, "BUMP")],
    )
    config = RunConfig(
        world=WorldMap(size, size),
        agents=(predator, prey),
        scenario=ScenarioSpec("chase", {"predator": "predator", "prey": "prey"}),
        seed=seed,
        max_ticks=int(p["max_ticks"]),
        near_threshold=p["near"],
        checkpoint_every=10,
    )
    return checked(config)


class ChaseMonitor(Monitor):
    """Ends the run on the first tick a front whisker of the predator touches the prey."""

    def __init__(self, config: RunConfig):
        self.predator = config.scenario.params.get("predator", "predator")
        self.prey = config.scenario.params.get("prey", "prey")
        spec = config.agent(self.predator)
        self.front = [t.name + ".agent" for t in spec.devices.touch if abs(t.center_angle) < math.pi / 2]
        self.catch_tick = None

    def after_tick(self, server) -> bool:
        readings = server.readings[server.directory.names[self.predator]]
        if any(readings.get(ch) == self.prey for ch in self.front):
            self.catch_tick = server.tick_count - 1
            return True
        return False

    def metrics(self, server) -> dict:
        return {"caught": self.catch_tick is not None, "catch_tick": self.catch_tick}


register(ScenarioDef(
    name="chase",
    roles=("predator", "prey"),
    policies={"predator": "null", "prey": "wander"},
    defaults=DEFAULTS,
    build=chase_config,
    monitor=ChaseMonitor,
    ranges={"predator_speed": (0.0, None), "prey_speed": (0.0, None), "near": (0.0, None)},
))
