"""Maze solving by a left-hand wall follower.

Mazes are perfect (every cell reachable by exactly one path) and built by a
randomized depth-first carve. Walls are thin rectangles; collinear runs of
wall are merged into one obstacle each.
"""
from __future__ import annotations

import math
import random
from typing import NamedTuple

from ..devices import DeviceSuite, DriveState, OdometryState, ProximitySensor, TouchSensor
from ..geometry import Polygon, WorldMap
from ..server.config import RunConfig, ScenarioSpec
from . import ScenarioDef, register
from .base import Monitor, builtin_agent, checked

DEFAULTS = dict(n=15, cell=1.0, thickness=0.1, radius=0.15, max_ticks=50000,
                band_lo=0.2, band_hi=0.35, sealed_exit=False)
# after (re)acquiring a wall the follower gets this many ticks to settle
ACQUIRE_TICKS = 30
# documented tolerance on the clearance band once settled
BAND_DELTA = 0.05
# a wall seen farther than this across an opening is not the wall being followed
WALL_NEAR = 0.45


class Maze(NamedTuple):
    n: int
    # open passages as frozensets {(c, r), (c', r')}
    passages: frozenset

    def is_open(self, a, b) -> bool:
        return frozenset((a, b)) in self.passages


def generate_maze(n: int, rng: random.Random) -> Maze:
    """Recursive-backtracker carve from cell (0, 0), iterative to avoid deep recursion."""
    seen = {(0, 0)}
    stack = [(0, 0)]
    passages = set()
    while stack:
        c, r = stack[-1]
        options = [(c + dc, r + dr) for dc, dr in ((1, 0), (-1, 0), (0, 1), (0, -1))
                   if 0 <= c + dc < n and 0 <= r + dr < n and (c + dc, r + dr) not in seen]
        if not options:
            stack.pop()
            continue
        nxt = rng.choice(options)
        passages.add(frozenset(((c, r), nxt)))
        seen.add(nxt)
        stack.append(nxt)
    return Maze(n, frozenset(passages))


def wall_segments(maze: Maze, sealed: tuple = ()) -> list:
    """Merged walls as ((c0, r0), (c1, r1)) grid-corner endpoints, horizontal then vertical."""
    n = maze.n
    sealed = set(sealed)

    def closed(a, b):
        if a in sealed or b in sealed:
            return True
        return not maze.is_open(a, b)

    segs = []
    # horizontal grid lines y = r, r = 0..n; the piece over column c separates (c, r-1) and (c, r)
    for r in range(n + 1):
        run = None
        for c in range(n + 1):
            present = c < n and (r in (0, n) or closed((c, r - 1), (c, r)))
            if present and run is None:
                run = c
            elif not present and run is not None:
                segs.append(((run, r), (c, r)))
                run = None
    for c in range(n + 1):
        run = None
        for r in range(n + 1):
            present = r < n and (c in (0, n) or closed((c - 1, r), (c, r)))
            if present and run is None:
                run = r
            elif not present and run is not None:
                segs.append(((c, run), (c, r)))
                run = None
    return segs


def maze_world(maze: Maze, cell: float = 1.0, thickness: float = 0.1, sealed: tuple = ()) -> WorldMap:
    t = thickness
    size = maze.n * cell + t
    obstacles = []
    for (c0, r0), (c1, r1) in wall_segments(maze, sealed):
        x0, y0 = c0 * cell, r0 * cell
        x1, y1 = c1 * cell, r1 * cell
        # grid corner (c, r) sits at (c*cell + t/2, r*cell + t/2); the wall is t thick around it
        obstacles.append(Polygon.rect(x0, y0, x1 - x0 + t, y1 - y0 + t))
    return WorldMap(size, size, tuple(obstacles))


def cell_center(c: int, r: int, cell: float, thickness: float):
    return (c + 0.5) * cell + thickness / 2.0, (r + 0.5) * cell + thickness / 2.0


def follower_spec(x: float, y: float, heading: float, radius: float = 0.15):
    devices = DeviceSuite(
        touch=(TouchSensor("bumper", 0.0, math.pi / 3),),
        proximity=(ProximitySensor("whiskerL", math.pi / 2, 0.7), ProximitySensor("front", 0.0, 0.7)),
        odometry=OdometryState(),
    )
    return builtin_agent(
        "follower", "wall_follower", x, y, heading, radius=radius, color="darkgreen",
        devices=devices, drive=DriveState(max_speed=1.0, max_accel=50.0),
        thresholds=[("whiskerL", "<", WALL_NEAR, "WALL", "value"),
                    ("whiskerL", ">=", WALL_NEAR, "LOST"),
                    ("whiskerL", "absent", None, "LOST"),
                    ("front", "<", 0.28, "BLOCKED"),
                    ("bumper", "==", True, "BLOCKED")],
    )


def maze_config(seed: int, **params) -> RunConfig:
    p = {**DEFAULTS, **params}
    n, cell, t = int(p["n"]), p["cell"], p["thickness"]
    if cell < 4 * p["radius"]:
        raise ValueError("maze cells must be at least four body radii wide")
    maze = generate_maze(n, random.Random(seed))
    exit_cell = (n - 1, n - 1)
    world = maze_world(maze, cell, t, (exit_cell,) if p["sealed_exit"] else ())
    x, y = cell_center(0, 0, cell, t)
    ex0, ey0 = exit_cell[0] * cell + t, exit_cell[1] * cell + t
    scenario = ScenarioSpec("maze", {
        "exit": f"{ex0!r} {ey0!r} {cell - t!r} {cell - t!r}",
        "band": f"{p['band_lo']!r} {p['band_hi']!r}",
    })
    config = RunConfig(world=world, agents=(follower_spec(x, y, math.pi / 2, p["radius"]),),
                       scenario=scenario, seed=seed, max_ticks=int(p["max_ticks"]), checkpoint_every=100)
    return checked(config)


def corridor_config(length: float = 12.0, width: float = 0.9, **params) -> RunConfig:
    """A straight walled corridor open at the far end; the exit lies past it."""
    p = {**DEFAULTS, **params}
    t = p["thickness"]
    h = width + 2 * t
    w = length + 2.0
    walls = (Polygon.rect(0.0, 0.0, length, t), Polygon.rect(0.0, h - t, length, t), Polygon.rect(0.0, 0.0, t, h))
    world = WorldMap(w, h, walls)
    scenario = ScenarioSpec("maze", {"exit": f"{length + 0.5!r} 0.0 1.5 {h!r}",
                                     "band": f"{p['band_lo']!r} {p['band_hi']!r}"})
    # heading east, the top wall is on the left; start a little off the target clearance
    y = h - t - 0.275 - p["radius"] - 0.03
    agent = follower_spec(t + 0.6, y, 0.0, p["radius"])
    return checked(RunConfig(world=world, agents=(agent,), scenario=scenario, seed=0,
                             max_ticks=int(p["max_ticks"])))


class MazeMonitor(Monitor):
    """Stops when the follower's center enters the exit rectangle; tracks the clearance band."""

    def __init__(self, config: RunConfig):
        x, y, w, h = (float(v) for v in config.scenario.params["exit"].split())
        self.exit = (x, y, x + w, y + h)
        self.lo, self.hi = (float(v) for v in config.scenario.params.get("band", "0.2 0.35").split())
        self.exit_tick = None
        self.tracking = 0
        self.excursion = 0.0
        self.checked = 0

    def after_tick(self, server) -> bool:
        a = server.agents[0]
        x, y = a.pose.position
        peer = server.peers[0]
        if peer.runtime is not None:
            state = peer.runtime.states.get("follow")
            d = server.readings[0].get("whiskerL")
            if state == "FOLLOW" and d is not None:
                self.tracking += 1
                if self.tracking > ACQUIRE_TICKS:
                    self.checked += 1
                    self.excursion = max(self.excursion, self.lo - d, d - self.hi, 0.0)
            else:
                self.tracking = 0
        x0, y0, x1, y1 = self.exit
        if x0 <= x <= x1 and y0 <= y <= y1:
            self.exit_tick = server.tick_count - 1
            return True
        return False

    def metrics(self, server) -> dict:
        a = server.agents[0]
        odo = a.odometry
        path = None
        if odo is not None:
            counts = (odo.reported[0] + odo.reported[1]) / 2.0
            path = counts / odo.ticks_per_rev * 2.0 * math.pi * odo.wheel_radius
        return {
            "solved": self.exit_tick is not None,
            "verdict": "SOLVED" if self.exit_tick is not None else "FAILED",
            "exit_tick": self.exit_tick,
            "path_length": path,
            "band_excursion": self.excursion,
            "band_samples": self.checked,
        }


register(ScenarioDef(
    name="maze",
    roles=("follower",),
    policies={"follower": "null"},
    defaults=DEFAULTS,
    build=maze_config,
    monitor=MazeMonitor,
    ranges={"n": (2, None), "cell": (0.6, None)},
))
