"""Formation control: a regular polygon (circle) and a chain between two anchors.

Both step rules return a world-frame velocity for one agent from what that
agent can sense about its neighbors. They are local rules; convergence of
the whole group is checked by simulation, not proven.
"""
from __future__ import annotations

import math
import statistics
from typing import NamedTuple, Sequence

from ..geometry import Vec2, wrap_angle

TAU = 2.0 * math.pi
# velocities below this are treated as "already there"
DEADBAND = 1e-9


class CircleParams(NamedTuple):
    radius: float = 3.0
    radial_gain: float = 1.0
    tangential_gain: float = 1.0
    max_speed: float = 0.5


class ChainParams(NamedTuple):
    anchor_a: Vec2 = Vec2(0.0, 0.0)
    anchor_b: Vec2 = Vec2(10.0, 0.0)
    gain: float = 2.0
    max_speed: float = 0.5


def _clamp_speed(v: Vec2, max_speed: float) -> Vec2:
    n = v.norm()
    if n <= DEADBAND:
        return Vec2(0.0, 0.0)
    if n > max_speed:
        return v * (max_speed / n)
    return v


def relative_positions(neighbors: Sequence, heading: float = 0.0) -> list:
    """(bearing, distance) pairs measured from a heading into offsets in the world frame."""
    out = []
    for bearing, dist in neighbors:
        a = bearing + heading
        out.append(Vec2(dist * math.cos(a), dist * math.sin(a)))
    return out


def circle_step(position: Vec2, neighbors: Sequence, params: CircleParams = CircleParams(),
                heading: float = 0.0) -> Vec2:
    """Velocity that moves one agent toward its slot on a circle of radius ``params.radius``.

    ``neighbors`` are (bearing relative to ``heading``, distance) for the agents
    this one knows about. The circle's center is estimated as the centroid of
    those agents and self. The radial part closes the gap to the radius; the
    tangential part moves toward the angular midpoint of the two neighbors
    adjacent around that center. Fewer than two neighbors: hold still.
    """
    if len(neighbors) < 2:
        return Vec2(0.0, 0.0)
    pts = [position + off for off in relative_positions(neighbors, heading)]
    n = len(pts) + 1
    cx = (position.x + sum(p.x for p in pts)) / n
    cy = (position.y + sum(p.y for p in pts)) / n
    rx, ry = position.x - cx, position.y - cy
    dist = math.hypot(rx, ry)
    if dist <= DEADBAND:
        # sitting on the estimated center: step out along a fixed direction
        return _clamp_speed(Vec2(params.radial_gain * params.radius, 0.0), params.max_speed)
    ux, uy = rx / dist, ry / dist
    mine = math.atan2(ry, rx)
    ahead = behind = TAU
    for p in pts:
        gap = (math.atan2(p.y - cy, p.x - cx) - mine) % TAU
        if gap == 0.0:
            continue
        ahead = min(ahead, gap)
        behind = min(behind, TAU - gap)
    if ahead == TAU:
        # every neighbor shares my angle; only the radial part is defined
        ahead = behind = 0.0
    shift = (ahead - behind) / 2.0
    radial = params.radial_gain * (params.radius - dist)
    tangential = params.tangential_gain * params.radius * shift
    v = Vec2(radial * ux - tangential * uy, radial * uy + tangential * ux)
    return _clamp_speed(v, params.max_speed)


def chain_order(points: Sequence[Vec2], a: Vec2, b: Vec2) -> list:
    """Indices of ``points`` sorted by their projection onto A->B (ties by index)."""
    d = b - a
    return sorted(range(len(points)), key=lambda i: ((points[i] - a).dot(d), i))


def chain_step(position: Vec2, prev: Vec2, nxt: Vec2, params: ChainParams = ChainParams()) -> Vec2:
    """Velocity toward the midpoint of the two chain neighbors (anchors at the ends)."""
    mid = Vec2((prev.x + nxt.x) / 2.0, (prev.y + nxt.y) / 2.0)
    return _clamp_speed((mid - position) * params.gain, params.max_speed)


def chain_neighbors(position: Vec2, others: Sequence[Vec2], a: Vec2, b: Vec2) -> tuple:
    """The two neighbors of ``position`` in projection order, anchors standing in at the ends."""
    pts = [position, *others]
    order = chain_order(pts, a, b)
    k = order.index(0)
    prev = a if k == 0 else pts[order[k - 1]]
    nxt = b if k == len(order) - 1 else pts[order[k + 1]]
    return prev, nxt


# ---------------------------------------------------------------- metrics


def circle_error(positions: Sequence[Vec2], radius: float) -> float:
    """Spread of radii about the centroid over R plus spread of angular gaps over 2pi/n."""
    n = len(positions)
    if n < 3:
        raise ValueError("circle error needs at least three positions")
    cx = sum(p.x for p in positions) / n
    cy = sum(p.y for p in positions) / n
    dists = [math.hypot(p.x - cx, p.y - cy) for p in positions]
    if max(dists) <= 1e-12:
        return math.inf
    angles = sorted(math.atan2(p.y - cy, p.x - cx) for p in positions)
    gaps = [angles[i + 1] - angles[i] for i in range(n - 1)] + [angles[0] + TAU - angles[-1]]
    return statistics.pstdev(dists) / radius + statistics.pstdev(gaps) / (TAU / n)


def perpendicular_deviation(p: Vec2, a: Vec2, b: Vec2) -> float:
    d = b - a
    return abs(d.x * (p.y - a.y) - d.y * (p.x - a.x)) / d.norm()


def chain_error(positions: Sequence[Vec2], a: Vec2, b: Vec2) -> float:
    """Worst offset from line AB over |AB| plus spread of link lengths over |AB|/(n+1)."""
    length = (b - a).norm()
    if length <= 0:
        raise ValueError("chain anchors must differ")
    n = len(positions)
    if n == 0:
        return 0.0
    if n > 1 and all((p - positions[0]).norm() <= 1e-12 for p in positions):
        return math.inf
    chain = [a] + [positions[i] for i in chain_order(positions, a, b)] + [b]
    links = [(chain[i + 1] - chain[i]).norm() for i in range(n + 1)]
    dev = max(perpendicular_deviation(p, a, b) for p in positions)
    return dev / length + statistics.pstdev(links) / (length / (n + 1))


def formation_metrics(positions: Sequence, params) -> dict:
    """Error record for either formation; ``params`` picks which."""
    pts = [Vec2(*p) for p in positions]
    if isinstance(params, ChainParams):
        a, b = Vec2(*params.anchor_a), Vec2(*params.anchor_b)
        return {
            "kind": "chain",
            "error": chain_error(pts, a, b),
            "max_deviation": max((perpendicular_deviation(p, a, b) for p in pts), default=0.0),
        }
    return {"kind": "circle", "error": circle_error(pts, params.radius)}


def regular_polygon(n: int, radius: float, center: Vec2 = Vec2(0.0, 0.0), phase: float = 0.0) -> list:
    return [Vec2(center.x + radius * math.cos(phase + TAU * i / n),
                 center.y + radius * math.sin(phase + TAU * i / n)) for i in range(n)]


def bearing_view(me: Vec2, heading: float, others: Sequence[Vec2]) -> list:
    """What a scanner would report: (bearing relative to heading, distance) per other."""
    return [(wrap_angle(math.atan2(o.y - me.y, o.x - me.x) - heading), math.hypot(o.x - me.x, o.y - me.y))
            for o in others]
