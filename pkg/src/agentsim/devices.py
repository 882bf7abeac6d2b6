"""Simulated sensors, effectors and communicators: the physical part of an agent.

Device reads are pure functions of a world snapshot. :func:`read_devices`
bundles them into a flat ``readings`` mapping of channel name to plain value,
which is what the interpretation layer consumes (and what travels over the
wire for remote agents).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import NamedTuple, Optional, Sequence

from .geometry import (
    IN_FIELD,
    STORED,
    Contact,
    Pose,
    WorldMap,
    floor_brightness,
    ray_cast,
    wrap_angle,
)

PICK_MARGIN = 0.1


# ---------------------------------------------------------------- drive


@dataclass(frozen=True)
class DriveState:
    commanded: tuple = (0.0, 0.0)
    actual: tuple = (0.0, 0.0)
    wheel_base: float = 0.2
    max_speed: float = 1.0
    max_accel: float = 2.0
    align_tol: float = 0.3

    def command(self, vL: float, vR: float) -> "DriveState":
        m = self.max_speed
        return replace(self, commanded=(min(m, max(-m, float(vL))), min(m, max(-m, float(vR)))))

    @property
    def max_turn_rate(self) -> float:
        return 2.0 * self.max_speed / self.wheel_base


def apply_inertia(drive: DriveState, dt: float) -> DriveState:
    """Move each actual wheel speed toward its command by at most ``max_accel * dt``."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    limit = drive.max_accel * dt
    out = []
    for act, cmd in zip(drive.actual, drive.commanded):
        delta = cmd - act
        if abs(delta) <= limit:
            out.append(cmd)
        else:
            out.append(act + math.copysign(limit, delta))
    new = (out[0], out[1])
    if new == drive.actual:
        return drive
    return replace(drive, actual=new)


# ---------------------------------------------------------------- sensors


@dataclass(frozen=True)
class TouchSensor:
    name: str
    center_angle: float
    half_width: float

    def __post_init__(self):
        if not 0 < self.half_width <= math.pi:
            raise ValueError("touch sensor half_width must be in (0, pi]")


@dataclass(frozen=True)
class ProximitySensor:
    name: str
    mount_angle: float
    range: float

    def __post_init__(self):
        if not self.range > 0:
            raise ValueError("proximity range must be positive")


@dataclass(frozen=True)
class VisionSensor:
    name: str = "vision"
    range: float = 3.0

    def __post_init__(self):
        if not self.range > 0:
            raise ValueError("vision range must be positive")


@dataclass(frozen=True)
class OdometryState:
    wheel_radius: float = 0.03
    ticks_per_rev: int = 100
    accum: tuple = (0.0, 0.0)
    reported: tuple = (0, 0)


def read_touch(sensor: TouchSensor, pose: Pose, contact: Optional[Contact]) -> bool:
    if contact is None:
        return False
    (px, py), h = pose
    cx, cy = contact.point
    if cx == px and cy == py:
        return False
    bearing = wrap_angle(math.atan2(cy - py, cx - px) - h)
    return abs(wrap_angle(bearing - sensor.center_angle)) <= sensor.half_width + 1e-12


def read_proximity(sensor: ProximitySensor, pose: Pose, radius: float, world: WorldMap,
                   agents: Sequence = (), self_id=None) -> Optional[float]:
    """Distance from the body surface along the sensor axis, or None past its range."""
    (px, py), h = pose
    a = h + sensor.mount_angle
    ox = px + radius * math.cos(a)
    oy = py + radius * math.sin(a)
    # a body pressed against the arena edge can put the mount point a hair outside
    ox = min(max(ox, 0.0), world.width)
    oy = min(max(oy, 0.0), world.height)
    hit = ray_cast(world, (ox, oy), a, sensor.range, self_id, agents)
    return None if hit is None else hit[0]


def read_odometry(odo: OdometryState, speeds, dt: float) -> OdometryState:
    if odo.wheel_radius <= 0:
        raise ValueError("wheel_radius must be positive")
    circ = 2.0 * math.pi * odo.wheel_radius
    aL = odo.accum[0] + speeds[0] * dt / circ
    aR = odo.accum[1] + speeds[1] * dt / circ
    tpr = odo.ticks_per_rev
    return replace(odo, accum=(aL, aR),
                   reported=(math.floor(aL * tpr), math.floor(aR * tpr)))


class ScanEntry(NamedTuple):
    name: str
    bearing: float
    distance: Optional[float]


class Sighting(NamedTuple):
    id: int
    bearing: float
    distance: float


def scan_agents(me, agents: Sequence, near_threshold: float) -> tuple:
    """Bearings to every other agent; distance disclosed only within ``near_threshold``."""
    if near_threshold < 0:
        raise ValueError("near_threshold must be non-negative")
    (px, py), h = me.pose
    out = []
    for a in agents:
        if a.id == me.id:
            continue
        (ax, ay), _ = a.pose
        dx, dy = ax - px, ay - py
        d = math.hypot(dx, dy)
        bearing = wrap_angle(math.atan2(dy, dx) - h)
        out.append(ScanEntry(a.name, bearing, d if d <= near_threshold else None))
    out.sort(key=lambda e: e.name)
    return tuple(out)


def resource_visible_to(res, name: str) -> bool:
    if res.status == IN_FIELD:
        return True
    if res.status == STORED:
        return res.holder != name
    return False


def scan_resources(me, resources: Sequence, vision: VisionSensor) -> tuple:
    """Visible resources within range, nearest first (ties by id)."""
    (px, py), h = me.pose
    name, rng = me.name, vision.range
    out = []
    for r in resources:
        rx, ry = r.position
        dx, dy = rx - px, ry - py
        # cheap box reject before the visibility rule and the exact distance
        if abs(dx) > rng or abs(dy) > rng or not resource_visible_to(r, name):
            continue
        d = math.hypot(dx, dy)
        if d <= rng:
            out.append(Sighting(r.id, wrap_angle(math.atan2(dy, dx) - h), d))
    out.sort(key=lambda s: (s.distance, s.id))
    return tuple(out)


# ---------------------------------------------------------------- suites


@dataclass(frozen=True)
class DeviceSuite:
    touch: tuple = ()
    proximity: tuple = ()
    floor: bool = False
    odometry: Optional[OdometryState] = None
    scanner: bool = False
    vision: Optional[VisionSensor] = None
    pose: bool = False
    gripper: bool = False

    def channel_names(self, others: Sequence[str] = ()) -> set:
        names = set()
        for t in self.touch:
            names.update({t.name, t.name + ".agent"})
        for p in self.proximity:
            names.add(p.name)
        if self.floor:
            names.add("floor")
        if self.odometry is not None:
            names.update({"odo.L", "odo.R"})
        if self.scanner:
            names.update({"scan", "scan.nearest.distance", "scan.nearest.bearing",
                          "scan.front.distance", "scan.rear.distance"})
            for n in others:
                names.update({f"scan.{n}.bearing", f"scan.{n}.distance"})
        if self.vision is not None:
            names.update({"vision", "vision.count", "vision.nearest.id",
                          "vision.nearest.distance", "vision.nearest.bearing"})
        if self.pose:
            names.update({"pose.x", "pose.y", "pose.heading"})
        if self.gripper:
            names.add("gripper.holding")
        return names


def whisker_suite() -> DeviceSuite:
    """One floor sensor, wheel odometry, two front IR rangers, four whisker switches."""
    s = math.pi / 6
    return DeviceSuite(
        touch=(
            TouchSensor("touchFL", s, s),
            TouchSensor("touchFR", -s, s),
            TouchSensor("touchBL", math.pi - s, s),
            TouchSensor("touchBR", -math.pi + s, s),
        ),
        proximity=(
            ProximitySensor("proxL", math.pi / 8, 1.0),
            ProximitySensor("proxR", -math.pi / 8, 1.0),
        ),
        floor=True,
        odometry=OdometryState(),
        scanner=True,
    )


@dataclass
class AgentState:
    """Server-side physical state of one registered agent."""

    id: int
    name: str
    pose: Pose
    radius: float
    drive: DriveState = field(default_factory=DriveState)
    devices: DeviceSuite = field(default_factory=DeviceSuite)
    odometry: Optional[OdometryState] = None
    color: str = "black"
    holding: Optional[int] = None

    def __post_init__(self):
        if self.odometry is None and self.devices.odometry is not None:
            self.odometry = self.devices.odometry

    @property
    def pick_radius(self) -> float:
        return self.radius + PICK_MARGIN


def read_devices(me: AgentState, world: WorldMap, agents: Sequence, resources: Sequence,
                 contacts: Sequence[Contact], near_threshold: float) -> dict:
    """Flat channel map for one agent. Absent readings are stored as None."""
    suite = me.devices
    r: dict = {}
    pose = me.pose
    for t in suite.touch:
        hit = None
        for c in contacts:
            if read_touch(t, pose, c):
                if hit is None:
                    hit = c
                if c.other.kind == "agent":
                    hit = c
                    break
        r[t.name] = hit is not None
        r[t.name + ".agent"] = (agents_by_id(agents, hit.other.index).name
                                if hit is not None and hit.other.kind == "agent" else None)
    for p in suite.proximity:
        r[p.name] = read_proximity(p, pose, me.radius, world, agents, me.id)
    if suite.floor:
        r["floor"] = floor_brightness(world, pose.position)
    if me.odometry is not None:
        r["odo.L"], r["odo.R"] = me.odometry.reported
    if suite.scanner:
        report = scan_agents(me, agents, near_threshold)
        r["scan"] = report
        nearest = front = rear = None
        for e in report:
            r[f"scan.{e.name}.bearing"] = e.bearing
            r[f"scan.{e.name}.distance"] = e.distance
            if e.distance is None:
                continue
            if nearest is None or e.distance < nearest.distance:
                nearest = e
            if abs(e.bearing) <= math.pi / 2:
                if front is None or e.distance < front:
                    front = e.distance
            elif rear is None or e.distance < rear:
                rear = e.distance
        r["scan.nearest.distance"] = None if nearest is None else nearest.distance
        r["scan.nearest.bearing"] = None if nearest is None else nearest.bearing
        r["scan.front.distance"] = front
        r["scan.rear.distance"] = rear
    if suite.vision is not None:
        seen = scan_resources(me, resources, suite.vision)
        r["vision"] = seen
        r["vision.count"] = len(seen)
        first = seen[0] if seen else None
        r["vision.nearest.id"] = None if first is None else first.id
        r["vision.nearest.distance"] = None if first is None else first.distance
        r["vision.nearest.bearing"] = None if first is None else first.bearing
    if suite.pose:
        r["pose.x"], r["pose.y"] = pose.position
        r["pose.heading"] = pose.heading
    if suite.gripper:
        r["gripper.holding"] = me.holding is not None
    return r



def agents_by_id(agents: Sequence, agent_id: int):
    for a in agents:
        if a.id == agent_id:
            return a
    raise KeyError(agent_id)
