"""The layered agent: interpretation (thresholds + reflexes), operation (CSM), strategy.

:class:`AgentRuntime` is the abstract part of an agent. It never touches the
world; each tick it receives the device readings and the message inbox and
returns an :class:`AgentOutput`. The same object runs in-process or inside a
remote client (see :mod:`agentsim.server.wire`).
"""
from __future__ import annotations

import importlib
import math
import operator
import random
from dataclasses import dataclass, field
from typing import NamedTuple, Optional, Sequence

from .csm import (
    MSG,
    TICK,
    CsmDocument,
    CsmRuntimeError,
    EventInstance,
    csm_step,
    initial_memory,
    parse_csm,
)
from .devices import DeviceSuite, DriveState
from .geometry import Pose, Vec2, wrap_angle


class ConfigError(Exception):
    pass


class AgentError(Exception):
    """A behavior fault inside one agent; aborts the run."""

    def __init__(self, agent: str, tick: int, message: str):
        self.agent = agent
        self.tick = tick
        super().__init__(f"agent {agent!r} at tick {tick}: {message}")


# ---------------------------------------------------------------- declarations


@dataclass(frozen=True)
class ReflexRule:
    trigger: str
    command: tuple  # (vL, vR), constants
    priority: int = 0


_COMPARE = {
    "<": operator.lt,
    "<=": operator.le,
    ">": operator.gt,
    ">=": operator.ge,
    "==": operator.eq,
    "!=": operator.ne,
}
THRESHOLD_OPS = frozenset(_COMPARE) | {"present", "absent"}


@dataclass(frozen=True)
class ThresholdRule:
    """``source op value`` over one reading channel raises ``event``.

    ``payload`` is None (no payload), ``"value"`` (the reading itself) or the
    name of another channel whose value is passed along.
    """

    source: str
    op: str
    value: object
    event: str
    payload: Optional[str] = None

    def __post_init__(self):
        if self.op not in THRESHOLD_OPS:
            raise ConfigError(f"unknown threshold operator {self.op!r}")

    def holds(self, reading) -> bool:
        if self.op == "present":
            return reading is not None
        if self.op == "absent":
            return reading is None
        if reading is None or isinstance(reading, tuple):
            return False
        try:
            return bool(_COMPARE[self.op](reading, self.value))
        except TypeError:
            return False


@dataclass(frozen=True)
class StrategySpec:
    name: str = "null"
    params: dict = field(default_factory=dict)


@dataclass(frozen=True)
class AgentSpec:
    name: str
    color: str = "black"
    body_radius: float = 0.2
    initial_pose: Pose = Pose(Vec2(0.0, 0.0), 0.0)
    devices: DeviceSuite = field(default_factory=DeviceSuite)
    drive: DriveState = field(default_factory=DriveState)
    behavior: str = ""  # CSM document text
    behavior_ref: str = ""  # where the text came from, for diagnostics
    strategy: StrategySpec = field(default_factory=StrategySpec)
    reflexes: tuple = ()
    thresholds: tuple = ()
    memory_capacity: int = 32

    def __post_init__(self):
        if not self.body_radius > 0:
            raise ConfigError(f"agent {self.name!r}: body_radius must be positive")
        prios = [r.priority for r in self.reflexes]
        if len(prios) != len(set(prios)):
            raise ConfigError(f"agent {self.name!r}: reflex priorities must be unique")


class Message(NamedTuple):
    sender: int
    dest: str  # agent name, group name, or "*" for broadcast
    payload: object
    tick: int = 0


BROADCAST = "*"


class ResourceOp(NamedTuple):
    kind: str  # "pick" | "drop"
    resource: Optional[int] = None


@dataclass
class AgentOutput:
    drive: Optional[tuple] = None
    messages: list = field(default_factory=list)
    resource_ops: list = field(default_factory=list)
    events: list = field(default_factory=list)  # names, for the run log


# ---------------------------------------------------------------- layers


def interpret(readings: dict, rules: Sequence[ThresholdRule], inbox: Sequence[Message]) -> list:
    """Readings and inbox to events: TICK, then rule events in rule order, then MSG per message."""
    events = [EventInstance(TICK, None, "sensor")]
    for rule in rules:
        if rule.source not in readings:
            continue
        reading = readings[rule.source]
        if rule.holds(reading):
            if rule.payload is None:
                payload = None
            elif rule.payload == "value":
                payload = reading
            else:
                payload = readings.get(rule.payload)
            if isinstance(payload, bool):
                payload = float(payload)
            events.append(EventInstance(rule.event, payload, "sensor"))
    for msg in inbox:
        events.append(EventInstance(MSG, msg.payload, "message"))
    return events


def apply_reflexes(events: Sequence[EventInstance], reflexes: Sequence[ReflexRule]) -> Optional[tuple]:
    names = {e.name for e in events}
    best = None
    for r in reflexes:
        if r.trigger in names and (best is None or r.priority > best.priority):
            best = r
    return None if best is None else best.command


def steer_command(vx: float, vy: float, heading: float, drive: DriveState, dt: float) -> tuple:
    """Turn a world-frame velocity order into wheel speeds.

    Turns in place while the heading error exceeds ``drive.align_tol``, otherwise
    drives along the heading (backwards when that is the shorter turn).
    """
    speed = math.hypot(vx, vy)
    if speed <= 1e-12:
        return (0.0, 0.0)
    err = wrap_angle(math.atan2(vy, vx) - heading)
    direction = 1.0
    if abs(err) > math.pi / 2:
        err = wrap_angle(err + math.pi)
        direction = -1.0
    w_max = drive.max_turn_rate
    w = min(w_max, max(-w_max, err / dt))
    half = w * drive.wheel_base / 2.0
    if abs(err) > drive.align_tol:
        return (-half, half)
    v = direction * min(speed, drive.max_speed)
    return (v - half, v + half)


# ---------------------------------------------------------------- strategy


class StrategyContext(NamedTuple):
    tick: int
    memory: object
    events: list
    readings: dict
    rng: random.Random
    dt: float
    spec: AgentSpec


POLICIES: dict = {}


def register_policy(name: str):
    def deco(cls):
        cls.policy_name = name
        POLICIES[name] = cls
        return cls
    return deco


class Policy:
    """Strategy layer base: reads events and memory, injects events, updates memory."""

    events: tuple = ()

    def __init__(self, params: Optional[dict] = None):
        self.params = dict(params or {})

    def prestep(self, ctx: StrategyContext):
        return [], {}


@register_policy("null")
class NullPolicy(Policy):
    pass


def make_policy(name: str, params: Optional[dict] = None) -> Policy:
    if name not in POLICIES:
        # scenario policies register themselves on import
        importlib.import_module("agentsim.scenarios.policies")
    try:
        cls = POLICIES[name]
    except KeyError:
        raise ConfigError(f"unknown strategy policy {name!r}") from None
    return cls(params)


def strategy_prestep(policy: Policy, ctx: StrategyContext):
    """Run the strategy layer; returns (injected events, memory updates)."""
    injected, updates = policy.prestep(ctx)
    return ([EventInstance(e.name, e.payload, "strategy") for e in injected], dict(updates))


def produced_events(spec: AgentSpec, policy: Optional[Policy] = None) -> set:
    """Every event name an agent's external sources can raise."""
    out = {TICK, MSG}
    out.update(r.event for r in spec.thresholds)
    if policy is None:
        policy = make_policy(spec.strategy.name, spec.strategy.params)
    out.update(policy.events)
    return out


# ---------------------------------------------------------------- runtime


def rng_seed_for(seed: int, agent_id: int) -> int:
    """Per-agent stream seed: splitmix64 over the run seed mixed with the agent id."""
    z = (seed * 0x9E3779B97F4A7C15 + (agent_id + 1) * 0xBF58476D1CE4E5B9) & 0xFFFFFFFFFFFFFFFF
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & 0xFFFFFFFFFFFFFFFF
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & 0xFFFFFFFFFFFFFFFF
    return z ^ (z >> 31)


class AgentRuntime:
    """Abstract part of one agent: memory, CSM set, strategy policy, reflexes."""

    def __init__(self, spec: AgentSpec, rng_seed: int = 0, dt: float = 0.1):
        self.spec = spec
        self.dt = dt
        doc = parse_csm(spec.behavior) if spec.behavior.strip() else CsmDocument()
        self.document = doc
        self.builtins = {
            "wheel_base": spec.drive.wheel_base,
            "max_speed": spec.drive.max_speed,
            "dt": dt,
            "tick": 0,
            "pi": math.pi,
            "radius": spec.body_radius,
        }
        self.memory = initial_memory(doc, spec.memory_capacity, self.builtins)
        self.machines = doc.machines
        self.pending: list = []
        self.policy = make_policy(spec.strategy.name, spec.strategy.params)
        self.rng = random.Random(rng_seed)
        self.transition_count = 0

    @property
    def states(self) -> dict:
        return {m.name: m.current for m in self.machines}

    def step(self, tick: int, readings: dict, inbox: Sequence[Message] = ()) -> AgentOutput:
        spec = self.spec
        try:
            events = interpret(readings, spec.thresholds, inbox)
            events.extend(self.pending)
            ctx = StrategyContext(tick, self.memory, events, readings, self.rng, self.dt, spec)
            injected, updates = strategy_prestep(self.policy, ctx)
            if updates:
                values = dict(self.memory.values)
                values.update(updates)
                self.memory.values = values
            events.extend(injected)
            self.builtins["tick"] = tick
            res = csm_step(self.machines, events, self.memory, self.builtins)
        except CsmRuntimeError as exc:
            raise AgentError(spec.name, tick, str(exc)) from exc
        self.machines = res.machines
        self.pending = res.emitted
        self.transition_count += len(res.fired)

        out = AgentOutput(events=[e.name for e in events])
        for act in res.actions:
            kind = act[0]
            if kind == "set_wheels":
                out.drive = (act[1], act[2])
            elif kind == "steer":
                heading = readings.get("pose.heading")
                if heading is None:
                    raise AgentError(spec.name, tick, "steer() needs a pose sensor")
                out.drive = steer_command(act[1], act[2], heading, spec.drive, self.dt)
            elif kind == "send":
                out.messages.append(Message(-1, act[1], act[2], tick))
            elif kind == "pick":
                target = self._pick_target(readings)
                if target is not None:
                    out.resource_ops.append(ResourceOp("pick", target))
            elif kind == "drop":
                out.resource_ops.append(ResourceOp("drop", None))
        reflex = apply_reflexes(events, spec.reflexes)
        if reflex is not None:
            out.drive = (float(reflex[0]), float(reflex[1]))
        self.memory.record(tick, events)
        return out

    def _pick_target(self, readings: dict) -> Optional[int]:
        reach = self.spec.body_radius + 0.1
        for s in readings.get("vision", ()):
            if s[2] <= reach:
                return s[0]
        return None
