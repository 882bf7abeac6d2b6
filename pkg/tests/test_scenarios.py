import math
import random
import warnings

import pytest
from hypothesis import given
from hypothesis import strategies as st

from agentsim.geometry import Vec2
from agentsim.scenarios import get
from agentsim.scenarios.chase import chase_config
from agentsim.scenarios.formation import (
    ChainParams,
    CircleParams,
    bearing_view,
    chain_neighbors,
    chain_step,
    circle_error,
    circle_step,
    formation_metrics,
    perpendicular_deviation,
    regular_polygon,
)
from agentsim.scenarios.maze import BAND_DELTA, corridor_config, generate_maze, maze_config
from agentsim.scenarios.mushrooms import MushroomParams, mushroom_config
from agentsim.scenarios.swarm import chain_config, circle_config
from agentsim.server.engine import run
from oracles import regular_polygon_points

# ---------------------------------------------------------------- chase


@pytest.mark.parametrize("seed", range(4))
def test_static_prey_is_caught_within_pursuit_bound(seed):
    c = chase_config(seed, prey_speed=0.0)
    pred, prey = c.agents
    d = math.dist(pred.initial_pose.position, prey.initial_pose.position) - 2 * pred.body_radius
    drive = pred.drive
    dt = c.tick_duration
    # straight run, plus one half turn in place, plus the speed-up, plus slack for the curve
    lower = d / drive.max_speed / dt - 1
    upper = (d / drive.max_speed + math.pi / drive.max_turn_rate + drive.max_speed / drive.max_accel) / dt + 10
    report = run(c)
    assert report.metrics["caught"]
    assert lower <= report.metrics["catch_tick"] <= upper


def test_equal_speeds_warn_and_cap():
    with warnings.catch_warnings(record=True) as w:
        warnings.simplefilter("always")
        c = chase_config(0, predator_speed=1.0, prey_speed=1.0, max_ticks=60)
    assert any("not faster" in str(x.message) for x in w)
    report = run(c)
    assert report.ticks <= 60
    if report.reason == "max_ticks":
        assert report.metrics == {"caught": False, "catch_tick": None}


# ---------------------------------------------------------------- maze


@pytest.mark.parametrize("n", [2, 5, 15])
def test_generated_mazes_are_perfect(n):
    maze = generate_maze(n, random.Random(n))
    assert len(maze.passages) == n * n - 1  # a spanning tree
    seen = {(0, 0)}
    stack = [(0, 0)]
    while stack:
        c, r = stack.pop()
        for nb in ((c + 1, r), (c - 1, r), (c, r + 1), (c, r - 1)):
            if nb not in seen and maze.is_open((c, r), nb):
                seen.add(nb)
                stack.append(nb)
    assert len(seen) == n * n


def test_corridor_is_followed_within_band():
    c = corridor_config()
    report = run(c)
    m = report.metrics
    assert m["solved"] and m["verdict"] == "SOLVED"
    assert m["band_samples"] > 50
    assert m["band_excursion"] <= BAND_DELTA
    assert m["path_length"] == pytest.approx(c.world.width - 2.0, rel=0.25)


def test_small_maze_is_solved():
    report = run(maze_config(3, n=5))
    assert report.metrics["solved"] and report.metrics["band_excursion"] <= BAND_DELTA


def test_sealed_exit_fails_at_cap():
    report = run(maze_config(1, n=4, sealed_exit=True, max_ticks=3000))
    assert report.reason == "max_ticks" and report.metrics["verdict"] == "FAILED"


def test_maze_cells_must_fit_the_body():
    with pytest.raises(ValueError):
        maze_config(0, cell=0.5)


# ---------------------------------------------------------------- formations


@pytest.mark.parametrize("n", [3, 4, 6, 8])
def test_regular_polygon_is_a_fixed_point(n):
    pts = [Vec2(*p) for p in regular_polygon_points(n, 3.0, 10.0, 10.0, 0.3)]
    for i, me in enumerate(pts):
        heading = 0.7 * i
        view = bearing_view(me, heading, pts[:i] + pts[i + 1:])
        assert circle_step(me, view, CircleParams(radius=3.0), heading) == Vec2(0.0, 0.0)


def test_clustered_on_circle_moves_tangentially():
    pts = [Vec2(3 * math.cos(a), 3 * math.sin(a)) for a in (0.0, 0.3, 0.9, 3.5)]
    # centroid is not the origin, so use the radius about the group's own centroid
    cx = sum(p.x for p in pts) / 4
    cy = sum(p.y for p in pts) / 4
    r = [math.hypot(p.x - cx, p.y - cy) for p in pts]
    me = pts[1]
    params = CircleParams(radius=r[1], max_speed=100.0)
    v = circle_step(me, bearing_view(me, 0.0, [pts[0], pts[2], pts[3]]), params)
    radial = Vec2((me.x - cx) / r[1], (me.y - cy) / r[1])
    assert abs(v.dot(radial)) < 1e-9 and v.norm() > 0


def test_circle_needs_two_neighbors():
    assert circle_step(Vec2(1, 1), [(0.0, 1.0)]) == Vec2(0.0, 0.0)


def test_formation_metrics_definitions():
    assert circle_error(regular_polygon(6, 3.0, Vec2(4, 5), 0.1), 3.0) == pytest.approx(0.0, abs=1e-12)
    square = [Vec2(0, 0), Vec2(1, 0), Vec2(1, 1), Vec2(0, 1)]
    assert formation_metrics(square, CircleParams(radius=1.0))["error"] == pytest.approx(0.0, abs=1e-12)
    chain = ChainParams(Vec2(0, 0), Vec2(10, 0))
    uniform = [Vec2(2.0 * k, 0.0) for k in range(1, 5)]
    assert formation_metrics(uniform, chain)["error"] == pytest.approx(0.0, abs=1e-12)
    assert formation_metrics([Vec2(1, 1)] * 3, CircleParams())["error"] == math.inf
    assert formation_metrics([Vec2(1, 1)] * 3, chain)["error"] == math.inf


def test_chain_fixed_point_and_single_agent():
    a, b = Vec2(0, 0), Vec2(10, 0)
    pts = [Vec2(2.0 * k, 0.0) for k in range(1, 5)]
    for i, p in enumerate(pts):
        prev, nxt = chain_neighbors(p, pts[:i] + pts[i + 1:], a, b)
        assert chain_step(p, prev, nxt, ChainParams(a, b)) == Vec2(0.0, 0.0)
    p = Vec2(1.0, 3.0)
    for _ in range(400):
        p = p + chain_step(p, a, b, ChainParams(a, b)) * 0.1
    assert p.x == pytest.approx(5.0, abs=1e-6) and p.y == pytest.approx(0.0, abs=1e-6)


coords = st.tuples(st.floats(0, 10), st.floats(-3, 3))


@given(st.lists(coords, min_size=1, max_size=7), st.floats(0.01, 0.2))
def test_chain_deviation_never_grows(points, dt):
    a, b = Vec2(0, 0), Vec2(10, 0)
    params = ChainParams(a, b, gain=2.0, max_speed=0.5)
    pts = [Vec2(*p) for p in points]
    for _ in range(20):
        before = max(perpendicular_deviation(p, a, b) for p in pts)
        moved = []
        for i, p in enumerate(pts):
            prev, nxt = chain_neighbors(p, pts[:i] + pts[i + 1:], a, b)
            moved.append(p + chain_step(p, prev, nxt, params) * dt)
        pts = moved
        assert max(perpendicular_deviation(p, a, b) for p in pts) <= before + 1e-12


def test_circle_run_converges():
    report = run(circle_config(0))
    assert report.metrics["converged"] and report.metrics["error"] < 0.05


def test_chain_run_converges_monotonically():
    report = run(chain_config(0))
    assert report.metrics["converged"] and report.metrics["monotone"]


# ---------------------------------------------------------------- mushrooms


def test_single_agent_collects_a_visible_mushroom():
    c = mushroom_config(0, MushroomParams(agents=1, mushrooms=1, size=8.0, home_size=2.0, vision=20.0,
                                          strategies=("random",), max_ticks=3000))
    report = run(c)
    m = report.metrics
    assert report.reason == "terminated"
    assert m["crop"] == {"forager0": 1} and m["forest"] == 0 and m["conservation_ok"]


def test_mode_a_run_holds_invariants():
    c = mushroom_config(1, mushrooms=12)
    hidden = []

    def check(server):
        for a in server.agents:
            for s in server.readings[a.id]["vision"]:
                r = server.resources[s.id]
                hidden.append(r.status == "stored" and r.holder == a.name)

    report = run(c, on_tick=check)
    m = report.metrics
    assert report.reason == "terminated" and m["forest"] == 0
    assert m["conservation_ok"] and m["hard_collisions"] == 0 and m["host_visible"] == 0
    assert not any(hidden)
    assert sum(m["crop"].values()) == 12


@pytest.mark.parametrize("bad", [dict(agents=5), dict(d_min=0.3), dict(strategies=("greedy",) * 4),
                                 dict(home_size=10.0), dict(mode="C")])
def test_mushroom_params_validated(bad):
    with pytest.raises(ValueError):
        MushroomParams(**bad)


def test_registry_lists_the_scenarios():
    for name in ("chase", "maze", "mushrooms", "circle", "chain"):
        d = get(name)
        assert d.name == name and d.roles and d.defaults
    with pytest.raises(KeyError):
        get("tag")
