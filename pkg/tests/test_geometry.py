import math
import random

import pytest
from hypothesis import given
from hypothesis import strategies as st

from agentsim.devices import AgentState, DriveState
from agentsim.geometry import (
    FloorGrid,
    ObjRef,
    Polygon,
    Pose,
    Vec2,
    WorldMap,
    clearance,
    contacts_within,
    disc_penetration,
    floor_brightness,
    floor_cell,
    integrate_unicycle,
    move_with_collision,
    ray_cast,
    signed_area,
    wrap_angle,
)
from oracles import angle_diff, arc_endpoint, ray_hit

finite = st.floats(-50, 50, allow_nan=False)
speeds = st.floats(-2, 2, allow_nan=False)


@given(x=finite, y=finite, h=st.floats(-math.pi, math.pi), vL=speeds, vR=speeds,
       dt=st.floats(0.001, 1.0), base=st.floats(0.05, 1.0))
def test_unicycle_matches_arc_oracle(x, y, h, vL, vR, dt, base):
    p = integrate_unicycle(Pose(Vec2(x, y), h), vL, vR, base, dt)
    ox, oy, oh = arc_endpoint(x, y, h, vL, vR, base, dt)
    assert abs(p.x - ox) <= 1e-9 and abs(p.y - oy) <= 1e-9
    assert angle_diff(p.heading, oh) <= 1e-9


@given(h=st.floats(-math.pi, math.pi), vL=speeds, vR=speeds, dt=st.floats(0.001, 1.0))
def test_two_half_steps_equal_one_step(h, vL, vR, dt):
    p0 = Pose(Vec2(1.0, 2.0), h)
    full = integrate_unicycle(p0, vL, vR, 0.2, dt)
    half = integrate_unicycle(integrate_unicycle(p0, vL, vR, 0.2, dt / 2), vL, vR, 0.2, dt / 2)
    assert abs(full.x - half.x) <= 1e-9 and abs(full.y - half.y) <= 1e-9
    assert angle_diff(full.heading, half.heading) <= 1e-9


def test_unicycle_special_cases():
    p = integrate_unicycle(Pose(Vec2(0, 0), 0.0), 1.0, 1.0, 0.2, 0.5)
    assert p == Pose(Vec2(0.5, 0.0), 0.0)
    spin = integrate_unicycle(Pose(Vec2(3, 4), 0.0), -0.1, 0.1, 0.2, math.pi / 2)
    assert spin.position == Vec2(3, 4)
    assert spin.heading == pytest.approx(math.pi / 2)


@pytest.mark.parametrize("bad", [dict(dt=0.0), dict(base=0.0), dict(vL=math.nan), dict(vR=math.inf)])
def test_unicycle_rejects_bad_input(bad):
    args = dict(vL=1.0, vR=1.0, base=0.2, dt=0.1) | bad
    with pytest.raises(ValueError):
        integrate_unicycle(Pose(Vec2(0, 0), 0.0), args["vL"], args["vR"], args["base"], args["dt"])


def test_wrap_angle_range():
    for a in (-10.0, -math.pi, 0.0, math.pi, 3 * math.pi, 7.5):
        w = wrap_angle(a)
        assert -math.pi <= w < math.pi
        assert angle_diff(w, a) < 1e-12


def test_polygon_orientation_and_errors():
    cw = Polygon([(0, 0), (0, 1), (1, 1), (1, 0)])
    assert signed_area(cw.vertices) == pytest.approx(1.0)
    assert cw.contains((0.5, 0.5)) and not cw.contains((1.5, 0.5))
    with pytest.raises(ValueError):
        Polygon([(0, 0), (1, 0)])
    with pytest.raises(ValueError):
        Polygon([(0, 0), (1, 0), (2, 0)])
    with pytest.raises(ValueError):
        Polygon([(0, 0), (2, 0), (1, 0.2), (1, 2)])


def test_world_validation():
    with pytest.raises(ValueError):
        WorldMap(0.0, 5.0)
    with pytest.raises(ValueError):
        WorldMap(5.0, 5.0, (Polygon.rect(4, 4, 2, 2),))


# ---------------------------------------------------------------- ray casting


def _random_world(rng, n=6):
    polys = []
    for _ in range(n):
        cx, cy = rng.uniform(2, 18), rng.uniform(2, 18)
        k = rng.randint(3, 7)
        r = rng.uniform(0.3, 1.5)
        phase = rng.uniform(0, 2 * math.pi)
        polys.append([(cx + r * math.cos(phase + 2 * math.pi * i / k),
                       cy + r * math.sin(phase + 2 * math.pi * i / k)) for i in range(k)])
    return polys


class _Disc:
    def __init__(self, i, x, y, r):
        self.id, self.pose, self.radius = i, Pose(Vec2(x, y), 0.0), r


@pytest.mark.parametrize("seed", range(5))
def test_ray_cast_matches_brute_force(seed):
    rng = random.Random(seed)
    polys = _random_world(rng)
    world = WorldMap(20.0, 20.0, tuple(Polygon(p) for p in polys))
    discs = [_Disc(i, rng.uniform(1, 19), rng.uniform(1, 19), 0.3) for i in range(4)]
    checked = 0
    while checked < 200:
        ox, oy = rng.uniform(0, 20), rng.uniform(0, 20)
        if any(p.contains((ox, oy)) for p in world.obstacles):
            continue
        if any(math.hypot(ox - d.pose.x, oy - d.pose.y) <= d.radius for d in discs):
            continue
        a = rng.uniform(-math.pi, math.pi)
        hit = ray_cast(world, (ox, oy), a, 100.0, agents=discs)
        expect = ray_hit(20.0, 20.0, polys, [(d.pose.x, d.pose.y, d.radius) for d in discs], ox, oy, a)
        assert hit is not None
        assert hit[0] == pytest.approx(expect, abs=1e-9)
        checked += 1


def test_ray_cast_range_and_ignore():
    world = WorldMap(10.0, 10.0, (Polygon.rect(4, 4, 2, 2),))
    assert ray_cast(world, (1.0, 5.0), 0.0, 2.0) is None
    d, ref = ray_cast(world, (1.0, 5.0), 0.0, 10.0)
    assert d == pytest.approx(3.0) and ref == ObjRef("obstacle", 0)
    me = _Disc(0, 1.0, 5.0, 0.2)
    other = _Disc(1, 2.0, 5.0, 0.2)
    d, ref = ray_cast(world, (1.0, 5.0), 0.0, 10.0, ignore=0, agents=[me, other])
    assert ref == ObjRef("agent", 1) and d == pytest.approx(0.8)
    d, ref = ray_cast(world, (1.0, 5.0), math.pi, 10.0)
    assert ref.kind == "wall" and d == pytest.approx(1.0)


# ---------------------------------------------------------------- contact and motion


def _body(i, x, y, h, vL, vR, r=0.2):
    return AgentState(i, f"a{i}", Pose(Vec2(x, y), h), r,
                      drive=DriveState(actual=(vL, vR), max_speed=5.0))


@given(seed=st.integers(0, 10_000))
def test_motion_never_penetrates(seed):
    rng = random.Random(seed)
    world = WorldMap(20.0, 20.0, tuple(Polygon(p) for p in _random_world(rng, 10)))
    others = [_body(i + 1, rng.uniform(1, 19), rng.uniform(1, 19), 0.0, 0.0, 0.0) for i in range(3)]
    others = [o for o in others if disc_penetration(world, o.pose.position, o.radius) is None]
    while True:
        x, y = rng.uniform(0.3, 19.7), rng.uniform(0.3, 19.7)
        if clearance(world, (x, y), 0.2, 0, others) >= 0.0:
            break
    me = _body(0, x, y, rng.uniform(-math.pi, math.pi), rng.uniform(-5, 5), rng.uniform(-5, 5))
    pose, _ = move_with_collision(world, me, rng.uniform(0.05, 1.0), others)
    assert clearance(world, pose.position, 0.2, 0, others) >= -1e-6


def test_stop_at_contact_reports_the_obstacle():
    world = WorldMap(10.0, 10.0, (Polygon.rect(5, 4, 1, 2),))
    me = _body(0, 4.0, 5.0, 0.0, 1.0, 1.0)
    pose, contact = move_with_collision(world, me, 2.0)
    assert contact is not None and contact.other == ObjRef("obstacle", 0)
    assert pose.x == pytest.approx(4.8, abs=2e-6) and pose.x <= 4.8 + 1e-6
    touching = contacts_within(world, pose.position, 0.2)
    assert [c.other for c in touching] == [ObjRef("obstacle", 0)]


def test_free_motion_has_no_contact():
    me = _body(0, 5.0, 5.0, 0.0, 1.0, 1.0)
    pose, contact = move_with_collision(WorldMap(10.0, 10.0), me, 1.0)
    assert contact is None and pose.x == pytest.approx(6.0)


def test_head_on_agents_touch_front_on_the_same_tick(head_on):
    from agentsim.server.engine import EnvServer

    server = EnvServer(head_on)
    server.register_all()
    first = {}
    for _ in range(100):
        server.tick()
        for a in server.agents:
            if server.readings[a.id]["front"] and a.name not in first:
                first[a.name] = server.tick_count - 1
        if len(first) == 2:
            break
    assert first["a"] == first["b"]
    gap = server.agents[1].pose.x - server.agents[0].pose.x - 0.4
    assert -1e-6 <= gap <= 1e-5
    # both stop on the following ticks
    server.tick()
    server.tick()
    assert server.agents[0].drive.actual == (0.0, 0.0) == server.agents[1].drive.actual


# ---------------------------------------------------------------- floor


def test_floor_cells_and_boundary_tie_break():
    world = WorldMap(4.0, 2.0, floor=FloorGrid(2, 4, (0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7)))
    assert floor_cell(world, (0.5, 0.5)) == (0, 0)
    assert floor_cell(world, (1.0, 0.5)) == (0, 1)  # on a boundary: the higher cell
    assert floor_cell(world, (1.0, 1.0)) == (1, 1)
    assert floor_cell(world, (4.0, 2.0)) == (1, 3)  # far edge stays in the last cell
    assert floor_brightness(world, (3.5, 1.5)) == 0.7
    with pytest.raises(ValueError):
        floor_cell(world, (4.1, 0.0))


def test_floor_grid_validation():
    with pytest.raises(ValueError):
        FloorGrid(2, 2, (0.0, 0.0, 0.0))
    with pytest.raises(ValueError):
        FloorGrid(1, 1, (1.5,))
