"""Mushroom picking: foragers with corner homes collect resources and carry them home.

A stored mushroom stays visible to every agent except the owner of the home
it lies in, so once the forest is empty agents keep finding their
neighbors' crops. A pick from someone else's home is counted as a theft.
"""
from __future__ import annotations

import dataclasses
import math
import random
from collections import Counter

from ..devices import DeviceSuite, DriveState, OdometryState, TouchSensor, VisionSensor
from ..geometry import CARRIED, IN_FIELD, STORED, Home, Resource, Vec2, WorldMap
from ..server.config import RunConfig, ScenarioSpec
from . import ScenarioDef, register
from .base import Monitor, builtin_agent, checked

RANDOM = "random"
RETURN = "return"
POLICY = {RANDOM: "mushroom_random", RETURN: "mushroom_return"}
COLORS = ("crimson", "royalblue", "darkorange", "seagreen", "purple", "goldenrod")


@dataclasses.dataclass(frozen=True)
class MushroomParams:
    agents: int = 4
    mushrooms: int = 40
    size: float = 20.0
    home_size: float = 3.0
    vision: float = 3.0
    d_min: float = 0.8
    radius: float = 0.2
    speed: float = 0.5
    strategies: tuple = (RETURN, RANDOM, RETURN, RANDOM)
    mode: str = "A"  # A: stop once the forest is empty and nothing is carried; B: run the full horizon
    max_ticks: int = 60000

    def __post_init__(self):
        if self.agents < 1 or self.agents > 4:
            raise ValueError("homes sit at the four corners, so 1 to 4 agents")
        if len(self.strategies) < self.agents:
            raise ValueError("one strategy per agent")
        if any(s not in POLICY for s in self.strategies):
            raise ValueError(f"strategies must be {RANDOM!r} or {RETURN!r}")
        if not self.d_min > 2 * self.radius:
            raise ValueError("d_min must exceed two body radii")
        if 2 * self.home_size >= self.size:
            raise ValueError("homes would overlap")
        if self.mode not in ("A", "B"):
            raise ValueError("mode is 'A' or 'B'")


def corner_homes(names, size: float, home: float) -> tuple:
    corners = ((0.0, 0.0), (size - home, 0.0), (size - home, size - home), (0.0, size - home))
    return tuple(Home(n, x, y, home, home) for n, (x, y) in zip(names, corners))


def mushroom_config(seed: int, params: MushroomParams = MushroomParams(), **overrides) -> RunConfig:
    p = dataclasses.replace(params, **overrides) if overrides else params
    rng = random.Random(seed)
    names = [f"forager{i}" for i in range(p.agents)]
    homes = corner_homes(names, p.size, p.home_size)
    margin = 0.5
    resources = []
    while len(resources) < p.mushrooms:
        pt = Vec2(rng.uniform(margin, p.size - margin), rng.uniform(margin, p.size - margin))
        if any(h.contains(pt, -margin) for h in homes):
            continue
        resources.append(Resource(len(resources), pt))
    world = WorldMap(p.size, p.size, homes=homes, resources=tuple(resources))

    center = Vec2(p.size / 2, p.size / 2)
    # the two whiskers cover the whole front half, so any contact that blocks
    # forward motion raises BUMP and the forager turns away
    q = math.pi / 4
    devices = DeviceSuite(
        touch=(TouchSensor("touchFL", q, q), TouchSensor("touchFR", -q, q)),
        odometry=OdometryState(),
        scanner=True,
        vision=VisionSensor("eyes", p.vision),
        pose=True,
        gripper=True,
    )
    reach = p.radius + 0.1 - 0.01
    agents = []
    for i, (name, home) in enumerate(zip(names, homes)):
        c = home.center
        heading = math.atan2(center.y - c.y, center.x - c.x)
        agents.append(builtin_agent(
            name, "forager", c.x, c.y, heading, radius=p.radius, color=COLORS[i],
            devices=devices, drive=DriveState(max_speed=p.speed, max_accel=2.0),
            strategy=POLICY[p.strategies[i]],
            params={"home_x": home.x, "home_y": home.y, "home_w": home.w, "home_h": home.h},
            thresholds=[
                ("vision.nearest.bearing", "present", None, "SEEN", "value"),
                ("vision.nearest.distance", "<=", reach, "REACH"),
                ("gripper.holding", "==", True, "LOADED"),
                ("touchFL", "==", True, "BUMP"),
                ("touchFR", "==", True, "BUMP"),
                ("scan.front.distance", "<", p.d_min, "TOO_CLOSE_F"),
                ("scan.rear.distance", "<", p.d_min, "TOO_CLOSE_R"),
            ],
            reflexes=[("TOO_CLOSE_F", (-p.speed, -p.speed), 2), ("TOO_CLOSE_R", (p.speed, p.speed), 1)],
        ))
    scenario = ScenarioSpec("mushrooms", {"mode": p.mode})
    config = RunConfig(world=world, agents=tuple(agents), scenario=scenario, seed=seed,
                       max_ticks=p.max_ticks, near_threshold=max(1.0, p.d_min), checkpoint_every=100)
    return checked(config)


class MushroomMonitor(Monitor):
    """Counts crops and thefts and checks the per-tick invariants as it goes."""

    def __init__(self, config: RunConfig):
        self.mode = config.scenario.params.get("mode", "A")
        self.total = len(config.world.resources)
        self.completion_tick = None
        self.thefts: Counter = Counter()  # (thief, victim home owner) -> count
        self.conservation_ok = True
        self.host_visible = 0
        self.hard_collisions = 0
        self.min_gap = math.inf

    def after_tick(self, server) -> bool:
        counts = Counter(r.status for r in server.resources)
        if counts[IN_FIELD] + counts[CARRIED] + counts[STORED] != self.total:
            self.conservation_ok = False
        held = sum(1 for a in server.agents if a.holding is not None)
        if held != counts[CARRIED]:
            self.conservation_ok = False
        for ev in server.resource_events:
            if ev["kind"] == "pick" and ev["theft"]:
                self.thefts[(server.agents[ev["agent"]].name, ev["victim"])] += 1
        res = server.resources
        for a in server.agents:
            for s in server.readings[a.id].get("vision", ()):
                r = res[s[0]]
                if r.status == STORED and r.holder == a.name:
                    self.host_visible += 1
        agents = server.agents
        for i in range(len(agents)):
            (xi, yi), _ = agents[i].pose
            for j in range(i + 1, len(agents)):
                (xj, yj), _ = agents[j].pose
                gap = math.hypot(xi - xj, yi - yj) - agents[i].radius - agents[j].radius
                self.min_gap = min(self.min_gap, gap)
                if gap <= 1e-6:
                    self.hard_collisions += 1
        if self.completion_tick is None and counts[IN_FIELD] == 0:
            self.completion_tick = server.tick_count - 1
        # mode A waits for the last load to be set down so crops are final
        return self.mode == "A" and self.completion_tick is not None and counts[CARRIED] == 0

    def metrics(self, server) -> dict:
        crop = Counter(r.holder for r in server.resources if r.status == STORED)
        by_thief: Counter = Counter()
        for (thief, _), n in self.thefts.items():
            by_thief[thief] += n
        return {
            "forest": sum(1 for r in server.resources if r.status == IN_FIELD),
            "crop": {a.name: crop.get(a.name, 0) for a in server.agents},
            "completion_tick": self.completion_tick,
            "thefts": sum(self.thefts.values()),
            "thefts_by_agent": {a.name: by_thief.get(a.name, 0) for a in server.agents},
            "max_thefts_same_home": {a.name: max((n for (t, _), n in self.thefts.items() if t == a.name),
                                                 default=0) for a in server.agents},
            "conservation_ok": self.conservation_ok,
            "host_visible": self.host_visible,
            "hard_collisions": self.hard_collisions,
            "min_gap": self.min_gap if math.isfinite(self.min_gap) else None,
        }


register(ScenarioDef(
    name="mushrooms",
    roles=("forager0", "forager1", "forager2", "forager3"),
    policies={RANDOM: POLICY[RANDOM], RETURN: POLICY[RETURN]},
    defaults=dataclasses.asdict(MushroomParams()),
    build=mushroom_config,
    monitor=MushroomMonitor,
    ranges={"agents": (1, 4), "d_min": ("2*radius", None)},
))
