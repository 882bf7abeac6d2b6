"""Continuous 2D world model: kinematics, obstacles, collisions, floor field, rays.

All functions here are pure. Agents are duck-typed: anything with ``id``,
``pose`` and ``radius`` attributes can be passed in an ``agents`` sequence;
:func:`move_with_collision` additionally reads ``agent.drive.actual`` and
``agent.drive.wheel_base``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import NamedTuple, Optional, Sequence

TAU = 2.0 * math.pi

# overlap below this is not a collision
PENETRATION_EPS = 1e-9
# bisection stops once the bracketing poses are this close
CONTACT_TOL = 1e-6
# smallest advance used while sweeping; bounds missed grazing depth to ~1e-6
MIN_SWEEP_STEP = 1e-3
STRAIGHT_EPS = 1e-12


class Vec2(NamedTuple):
    x: float
    y: float

    def __add__(self, o):  # type: ignore[override]
        return Vec2(self.x + o[0], self.y + o[1])

    def __sub__(self, o):
        return Vec2(self.x - o[0], self.y - o[1])

    def __mul__(self, k):  # type: ignore[override]
        return Vec2(self.x * k, self.y * k)

    __rmul__ = __mul__

    def dot(self, o) -> float:
        return self.x * o[0] + self.y * o[1]

    def norm(self) -> float:
        return math.hypot(self.x, self.y)


class Pose(NamedTuple):
    position: Vec2
    heading: float

    @property
    def x(self) -> float:
        return self.position.x

    @property
    def y(self) -> float:
        return self.position.y


def wrap_angle(a: float) -> float:
    """Normalize an angle to [-pi, pi)."""
    r = math.fmod(a + math.pi, TAU)
    if r < 0.0:
        r += TAU
    r -= math.pi
    if r >= math.pi:
        r -= TAU
    return r


class ObjRef(NamedTuple):
    """Identifies what a ray or a disc touched: ``kind`` is wall/obstacle/agent."""

    kind: str
    index: int


WEST, EAST, SOUTH, NORTH = 0, 1, 2, 3


class Contact(NamedTuple):
    point: Vec2
    normal: Vec2  # unit, from the other object into the agent
    other: ObjRef
    depth: float = 0.0


class Polygon:
    """Convex polygon with counter-clockwise vertices."""

    __slots__ = ("vertices", "edges", "normals", "bbox")

    def __init__(self, vertices: Sequence[Sequence[float]]):
        pts = [Vec2(float(x), float(y)) for x, y in vertices]
        if len(pts) < 3:
            raise ValueError("polygon needs at least 3 vertices")
        area = signed_area(pts)
        if area < 0:
            pts.reverse()
            area = -area
        if not area > 1e-12:
            raise ValueError("degenerate polygon (zero area)")
        n = len(pts)
        for i in range(n):
            a, b, c = pts[i], pts[(i + 1) % n], pts[(i + 2) % n]
            if (b.x - a.x) * (c.y - b.y) - (b.y - a.y) * (c.x - b.x) < -1e-12:
                raise ValueError("polygon is not convex")
        self.vertices = tuple(pts)
        edges = []
        normals = []
        for i in range(n):
            a, b = pts[i], pts[(i + 1) % n]
            ex, ey = b.x - a.x, b.y - a.y
            length = math.hypot(ex, ey)
            if length == 0.0:
                raise ValueError("polygon has repeated vertices")
            edges.append((a.x, a.y, b.x, b.y))
            normals.append((ey / length, -ex / length))
        self.edges = tuple(edges)
        self.normals = tuple(normals)
        xs = [p.x for p in pts]
        ys = [p.y for p in pts]
        self.bbox = (min(xs), min(ys), max(xs), max(ys))

    def __eq__(self, other):
        return isinstance(other, Polygon) and self.vertices == other.vertices

    def __hash__(self):
        return hash(self.vertices)

    def __repr__(self):
        return f"Polygon({[tuple(v) for v in self.vertices]})"

    @classmethod
    def rect(cls, x: float, y: float, w: float, h: float) -> "Polygon":
        return cls([(x, y), (x + w, y), (x + w, y + h), (x, y + h)])

    def contains(self, p) -> bool:
        px, py = p
        for (ax, ay, _, _), (nx, ny) in zip(self.edges, self.normals):
            if nx * (px - ax) + ny * (py - ay) > 0.0:
                return False
        return True


def signed_area(pts: Sequence[Sequence[float]]) -> float:
    s = 0.0
    n = len(pts)
    for i in range(n):
        x1, y1 = pts[i]
        x2, y2 = pts[(i + 1) % n]
        s += x1 * y2 - x2 * y1
    return s / 2.0


@dataclass(frozen=True)
class FloorGrid:
    """Brightness field; row 0 is the bottom strip (smallest y)."""

    rows: int
    cols: int
    values: tuple  # row-major, len == rows * cols

    def __post_init__(self):
        if self.rows <= 0 or self.cols <= 0:
            raise ValueError("floor grid needs positive rows and cols")
        if len(self.values) != self.rows * self.cols:
            raise ValueError(
                f"floor grid expects {self.rows * self.cols} values, got {len(self.values)}"
            )
        for v in self.values:
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"floor brightness {v} outside [0, 1]")

    @classmethod
    def uniform(cls, value: float = 1.0) -> "FloorGrid":
        return cls(1, 1, (float(value),))


class Home(NamedTuple):
    owner: str
    x: float
    y: float
    w: float
    h: float

    def contains(self, p, margin: float = 0.0) -> bool:
        return (
            self.x + margin <= p[0] <= self.x + self.w - margin
            and self.y + margin <= p[1] <= self.y + self.h - margin
        )

    @property
    def center(self) -> Vec2:
        return Vec2(self.x + self.w / 2.0, self.y + self.h / 2.0)


IN_FIELD = "in_field"
CARRIED = "carried"
STORED = "stored"


class Resource(NamedTuple):
    """A passive collectible. ``holder`` is the carrying agent id or the home owner."""

    id: int
    position: Vec2
    status: str = IN_FIELD
    holder: object = None


@dataclass(frozen=True)
class WorldMap:
    width: float
    height: float
    obstacles: tuple = ()
    floor: FloorGrid = field(default_factory=FloorGrid.uniform)
    homes: tuple = ()
    resources: tuple = ()

    def __post_init__(self):
        if not (self.width > 0 and self.height > 0):
            raise ValueError("world width and height must be positive")
        if not (math.isfinite(self.width) and math.isfinite(self.height)):
            raise ValueError("world bounds must be finite")
        for i, poly in enumerate(self.obstacles):
            for v in poly.vertices:
                if not (0.0 <= v.x <= self.width and 0.0 <= v.y <= self.height):
                    raise ValueError(f"obstacle {i} vertex {tuple(v)} outside bounds")

    @cached_property
    def _grid(self) -> "_ObstacleGrid":
        return _ObstacleGrid(self)

    def obstacles_near(self, x0: float, y0: float, x1: float, y1: float) -> list:
        """Indices of obstacles whose bounding box meets the query box, ascending."""
        return self._grid.query(x0, y0, x1, y1)

    def home_of(self, owner: str) -> Optional[Home]:
        for h in self.homes:
            if h.owner == owner:
                return h
        return None

    def home_at(self, p) -> Optional[Home]:
        for h in self.homes:
            if h.contains(p):
                return h
        return None

    def inside(self, p) -> bool:
        return 0.0 <= p[0] <= self.width and 0.0 <= p[1] <= self.height


class _ObstacleGrid:
    """Uniform bucket grid over obstacle bounding boxes."""

    def __init__(self, world: WorldMap):
        n = max(1, len(world.obstacles))
        side = max(world.width, world.height) / max(1.0, math.sqrt(n))
        self.cell = max(side, 1e-9)
        self.buckets: dict = {}
        self.count = len(world.obstacles)
        for i, poly in enumerate(world.obstacles):
            bx0, by0, bx1, by1 = poly.bbox
            for key in self._keys(bx0, by0, bx1, by1):
                self.buckets.setdefault(key, []).append(i)
        self.boxes = [p.bbox for p in world.obstacles]

    def _keys(self, x0, y0, x1, y1):
        c = self.cell
        for gx in range(int(math.floor(x0 / c)), int(math.floor(x1 / c)) + 1):
            for gy in range(int(math.floor(y0 / c)), int(math.floor(y1 / c)) + 1):
                yield gx, gy

    def query(self, x0, y0, x1, y1) -> list:
        if self.count == 0:
            return []
        found = set()
        for key in self._keys(x0, y0, x1, y1):
            b = self.buckets.get(key)
            if b:
                found.update(b)
        out = []
        for i in sorted(found):
            bx0, by0, bx1, by1 = self.boxes[i]
            if bx0 <= x1 and x0 <= bx1 and by0 <= y1 and y0 <= by1:
                out.append(i)
        return out


# ---------------------------------------------------------------- kinematics


def _check_finite(*values: float) -> None:
    for v in values:
        if not math.isfinite(v):
            raise ValueError(f"non-finite input: {v!r}")


def integrate_unicycle(pose: Pose, vL: float, vR: float, wheel_base: float, dt: float) -> Pose:
    """Exact differential-drive step with constant wheel speeds over ``dt``."""
    (x, y), h = pose
    _check_finite(x, y, h, vL, vR, wheel_base, dt)
    if wheel_base <= 0:
        raise ValueError("wheel_base must be positive")
    if dt <= 0:
        raise ValueError("dt must be positive")
    v = (vL + vR) / 2.0
    w = (vR - vL) / wheel_base
    if abs(w) < STRAIGHT_EPS:
        d = v * dt
        return Pose(Vec2(x + d * math.cos(h), y + d * math.sin(h)), wrap_angle(h))
    phi = w * dt
    half = phi / 2.0
    # chord of the arc, written to stay accurate for tiny turn angles
    chord = v * dt * (math.sin(half) / half)
    mid = h + half
    return Pose(Vec2(x + chord * math.cos(mid), y + chord * math.sin(mid)), wrap_angle(h + phi))


# ---------------------------------------------------------------- ray casting


def _ray_polygon(poly: Polygon, ox, oy, dx, dy) -> Optional[float]:
    # Cyrus-Beck clipping against the convex polygon's half-planes
    t_enter = 0.0
    t_exit = math.inf
    for (ax, ay, _, _), (nx, ny) in zip(poly.edges, poly.normals):
        num = nx * (ox - ax) + ny * (oy - ay)  # > 0 means outside this edge
        den = nx * dx + ny * dy
        if den == 0.0:
            if num > 0.0:
                return None
            continue
        t = -num / den
        if den < 0.0:
            if t > t_enter:
                t_enter = t
        else:
            if t < t_exit:
                t_exit = t
        if t_enter > t_exit:
            return None
    return t_enter


def _ray_disc(cx, cy, r, ox, oy, dx, dy) -> Optional[float]:
    fx, fy = ox - cx, oy - cy
    b = fx * dx + fy * dy
    c = fx * fx + fy * fy - r * r
    if c <= 0.0:
        return 0.0
    disc = b * b - c
    if disc < 0.0 or b > 0.0:
        return None
    t = -b - math.sqrt(disc)
    return t if t >= 0.0 else 0.0


def ray_cast(world: WorldMap, origin, angle: float, max_range: float,
             ignore: Optional[int] = None, agents: Sequence = ()):
    """Nearest hit along a ray: ``(distance, ObjRef)`` or ``None`` beyond ``max_range``."""
    ox, oy = origin
    dx, dy = math.cos(angle), math.sin(angle)
    best = math.inf
    best_ref = None

    # arena walls
    if dx > 0.0:
        t = (world.width - ox) / dx
        if t < best:
            best, best_ref = t, ObjRef("wall", EAST)
    elif dx < 0.0:
        t = -ox / dx
        if t < best:
            best, best_ref = t, ObjRef("wall", WEST)
    if dy > 0.0:
        t = (world.height - oy) / dy
        if t < best:
            best, best_ref = t, ObjRef("wall", NORTH)
    elif dy < 0.0:
        t = -oy / dy
        if t < best:
            best, best_ref = t, ObjRef("wall", SOUTH)
    if best < 0.0:
        best = 0.0

    reach = min(best, max_range)
    ex, ey = ox + dx * reach, oy + dy * reach
    for i in world.obstacles_near(min(ox, ex), min(oy, ey), max(ox, ex), max(oy, ey)):
        t = _ray_polygon(world.obstacles[i], ox, oy, dx, dy)
        if t is not None and t < best:
            best, best_ref = t, ObjRef("obstacle", i)

    for a in agents:
        if a.id == ignore:
            continue
        (cx, cy), _ = a.pose
        t = _ray_disc(cx, cy, a.radius, ox, oy, dx, dy)
        if t is not None and t < best:
            best, best_ref = t, ObjRef("agent", a.id)

    if best_ref is None or best > max_range:
        return None
    return best, best_ref


# ---------------------------------------------------------------- distances


def _closest_on_polygon(poly: Polygon, px: float, py: float):
    """Return (signed distance, closest boundary point, outward normal at it)."""
    best_s = -math.inf
    best_i = 0
    for i, ((ax, ay, _, _), (nx, ny)) in enumerate(zip(poly.edges, poly.normals)):
        s = nx * (px - ax) + ny * (py - ay)
        if s > best_s:
            best_s, best_i = s, i
    if best_s <= 0.0:
        nx, ny = poly.normals[best_i]
        return best_s, Vec2(px - best_s * nx, py - best_s * ny), Vec2(nx, ny)
    best_d2 = math.inf
    qx = qy = 0.0
    for ax, ay, bx, by in poly.edges:
        ex, ey = bx - ax, by - ay
        t = ((px - ax) * ex + (py - ay) * ey) / (ex * ex + ey * ey)
        if t < 0.0:
            t = 0.0
        elif t > 1.0:
            t = 1.0
        cx, cy = ax + t * ex, ay + t * ey
        d2 = (px - cx) ** 2 + (py - cy) ** 2
        if d2 < best_d2:
            best_d2, qx, qy = d2, cx, cy
    d = math.sqrt(best_d2)
    return d, Vec2(qx, qy), Vec2((px - qx) / d, (py - qy) / d)


def _features(world: WorldMap, cx, cy, radius, self_id, agents, obstacle_ids):
    """Yield (gap, Contact-without-depth) for every nearby feature."""
    yield cx - radius, Vec2(0.0, cy), Vec2(1.0, 0.0), ObjRef("wall", WEST)
    yield world.width - cx - radius, Vec2(world.width, cy), Vec2(-1.0, 0.0), ObjRef("wall", EAST)
    yield cy - radius, Vec2(cx, 0.0), Vec2(0.0, 1.0), ObjRef("wall", SOUTH)
    yield world.height - cy - radius, Vec2(cx, world.height), Vec2(0.0, -1.0), ObjRef("wall", NORTH)
    for i in obstacle_ids:
        s, q, n = _closest_on_polygon(world.obstacles[i], cx, cy)
        yield s - radius, q, n, ObjRef("obstacle", i)
    for a in agents:
        if a.id == self_id:
            continue
        (ax, ay), _ = a.pose
        dx, dy = cx - ax, cy - ay
        d = math.hypot(dx, dy)
        if d > 0.0:
            nx, ny = dx / d, dy / d
        else:
            nx, ny = 1.0, 0.0
        yield d - radius - a.radius, Vec2(ax + nx * a.radius, ay + ny * a.radius), Vec2(nx, ny), ObjRef("agent", a.id)


def _nearby_obstacles(world: WorldMap, cx, cy, reach):
    return world.obstacles_near(cx - reach, cy - reach, cx + reach, cy + reach)


def _polygon_distance(poly: Polygon, px: float, py: float) -> float:
    # same value as _closest_on_polygon without building the contact point
    best_s = -math.inf
    for (ax, ay, _, _), (nx, ny) in zip(poly.edges, poly.normals):
        s = nx * (px - ax) + ny * (py - ay)
        if s > best_s:
            best_s = s
    if best_s <= 0.0:
        return best_s
    best_d2 = math.inf
    for ax, ay, bx, by in poly.edges:
        ex, ey = bx - ax, by - ay
        t = ((px - ax) * ex + (py - ay) * ey) / (ex * ex + ey * ey)
        if t < 0.0:
            t = 0.0
        elif t > 1.0:
            t = 1.0
        d2 = (px - (ax + t * ex)) ** 2 + (py - (ay + t * ey)) ** 2
        if d2 < best_d2:
            best_d2 = d2
    return math.sqrt(best_d2)


def clearance(world: WorldMap, center, radius: float, self_id=None, agents: Sequence = (),
              obstacle_ids=None) -> float:
    """Smallest gap between the disc and any feature (negative when overlapping)."""
    cx, cy = center
    if obstacle_ids is None:
        obstacle_ids = range(len(world.obstacles))
    best = min(cx, world.width - cx, cy, world.height - cy) - radius
    obstacles = world.obstacles
    for i in obstacle_ids:
        gap = _polygon_distance(obstacles[i], cx, cy) - radius
        if gap < best:
            best = gap
    for a in agents:
        if a.id == self_id:
            continue
        (ax, ay), _ = a.pose
        gap = math.hypot(cx - ax, cy - ay) - radius - a.radius
        if gap < best:
            best = gap
    return best


def disc_penetration(world: WorldMap, center, radius: float, self_id=None,
                     agents: Sequence = ()) -> Optional[Contact]:
    """Deepest overlap of the disc with a wall, obstacle or other agent, if any."""
    if radius <= 0:
        raise ValueError("radius must be positive")
    cx, cy = center
    ids = _nearby_obstacles(world, cx, cy, radius)
    best = None
    best_depth = PENETRATION_EPS
    for gap, point, normal, ref in _features(world, cx, cy, radius, self_id, agents, ids):
        depth = -gap
        if depth > best_depth:
            best_depth = depth
            best = Contact(point, normal, ref, depth)
    return best


def contacts_within(world: WorldMap, center, radius: float, self_id=None,
                    agents: Sequence = (), tol: float = 1e-5) -> list:
    """Every feature whose gap to the disc is at most ``tol`` (touching or overlapping)."""
    cx, cy = center
    ids = _nearby_obstacles(world, cx, cy, radius + tol)
    out = []
    for gap, point, normal, ref in _features(world, cx, cy, radius, self_id, agents, ids):
        if gap <= tol:
            out.append(Contact(point, normal, ref, max(0.0, -gap)))
    return out


# ---------------------------------------------------------------- motion


def move_with_collision(world: WorldMap, agent, dt: float, agents: Sequence = ()):
    """Advance ``agent`` by its actual wheel speeds, stopping at the first contact.

    Returns ``(pose, contact)``; ``contact`` is None when the whole step was free.
    """
    pose = agent.pose
    vL, vR = agent.drive.actual
    base = agent.drive.wheel_base
    end = integrate_unicycle(pose, vL, vR, base, dt)
    speed = abs(vL + vR) / 2.0
    if speed == 0.0:
        # pure rotation of a disc never changes what it overlaps
        return end, None

    radius = agent.radius
    (x0, y0), _ = pose
    path = speed * dt
    reach = path + radius
    ids = world.obstacles_near(x0 - reach, y0 - reach, x0 + reach, y0 + reach)
    others = []
    for a in agents:
        if a.id == agent.id:
            continue
        (ax, ay), _ = a.pose
        if math.hypot(ax - x0, ay - y0) <= reach + a.radius + 1e-9:
            others.append(a)

    def pose_at(t):
        if t <= 0.0:
            return pose
        if t >= dt:
            return end
        return integrate_unicycle(pose, vL, vR, base, t)

    def gap_at(p):
        return clearance(world, p.position, radius, agent.id, others, ids)

    t = 0.0
    gap = gap_at(pose)
    if gap >= path:
        # the center moves at most `path`, so the step cannot reach anything
        return end, None
    while True:
        if t >= dt:
            return end, None
        # the center travels at most speed * step, so a step of `gap` cannot tunnel
        step = max(gap, MIN_SWEEP_STEP) / speed
        t_next = min(dt, t + step)
        p_next = pose_at(t_next)
        g_next = gap_at(p_next)
        if g_next < -PENETRATION_EPS:
            break
        t, gap = t_next, g_next

    lo, hi = t, t_next
    while (hi - lo) * speed > CONTACT_TOL:
        mid = (lo + hi) / 2.0
        if gap_at(pose_at(mid)) < -PENETRATION_EPS:
            hi = mid
        else:
            lo = mid
    contact = disc_penetration(world, pose_at(hi).position, radius, agent.id, others)
    return pose_at(lo), contact


# ---------------------------------------------------------------- floor


def _cell_index(coord: float, extent: float, n: int) -> int:
    # boundaries are k * extent / n; a point on a boundary belongs to the higher cell
    k = int(math.floor(coord * n / extent))
    k = min(max(k, 0), n - 1)
    while k + 1 <= n - 1 and (k + 1) * extent / n <= coord:
        k += 1
    while k > 0 and k * extent / n > coord:
        k -= 1
    return k


def floor_cell(world: WorldMap, point) -> tuple:
    x, y = point
    if not world.inside(point):
        raise ValueError(f"point {tuple(point)} outside the world bounds")
    g = world.floor
    return _cell_index(y, world.height, g.rows), _cell_index(x, world.width, g.cols)


def floor_brightness(world: WorldMap, point) -> float:
    row, col = floor_cell(world, point)
    return world.floor.values[row * world.floor.cols + col]
