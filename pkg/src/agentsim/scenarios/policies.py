"""Strategy-layer policies used by the bundled scenarios.

A policy runs before the CSM each tick. It may inject events (visible to the
CSM in the same tick) and write memory. Random choices come only from the
per-agent stream in the context, so runs stay reproducible.
"""
from __future__ import annotations

import math

from ..agent import Policy, StrategyContext, register_policy
from ..csm import EventInstance
from ..geometry import Home, Vec2, wrap_angle
from .formation import ChainParams, CircleParams, chain_neighbors, chain_step, circle_step


def _f(params: dict, key: str, default: float) -> float:
    return float(params.get(key, default))


def _pose(readings: dict):
    return Vec2(readings["pose.x"], readings["pose.y"]), readings["pose.heading"]


def _bearing_to(target: Vec2, me: Vec2, heading: float) -> float:
    return wrap_angle(math.atan2(target.y - me.y, target.x - me.x) - heading)


def _ev(name, payload=None):
    return EventInstance(name, payload, "strategy")


class _Roaming(Policy):
    """Random walk: a fresh turn fraction every few ticks, raised as ROAM."""

    def __init__(self, params=None):
        super().__init__(params)
        self.every = int(_f(self.params, "turn_every", 10))
        self.turn = _f(self.params, "turn_max", 0.5)
        self.u = 0.0

    def roam(self, ctx: StrategyContext):
        if ctx.tick % self.every == 0:
            self.u = ctx.rng.uniform(-self.turn, self.turn)
        return _ev("ROAM", self.u)


@register_policy("wander")
class WanderPolicy(_Roaming):
    events = ("ROAM",)

    def prestep(self, ctx):
        return [self.roam(ctx)], {}


@register_policy("mushroom_random")
class MushroomRandom(_Roaming):
    """Forage at random; carry finds home; resume the walk after each deposit."""

    events = ("ROAM", "HOME_BEARING", "AT_HOME", "GOTO", "GOTO_REACHED")

    def __init__(self, params=None):
        super().__init__(params)
        p = self.params
        self.home = Home("", _f(p, "home_x", 0.0), _f(p, "home_y", 0.0),
                         _f(p, "home_w", 1.0), _f(p, "home_h", 1.0))
        self.margin = _f(p, "home_margin", 0.5)
        self.was_holding = False

    def prestep(self, ctx):
        me, heading = _pose(ctx.readings)
        holding = bool(ctx.readings["gripper.holding"])
        events, updates = [self.roam(ctx)], {}
        if holding and not self.was_holding:
            updates["last_find"] = me
        if not holding and self.was_holding:
            self.after_deposit(ctx, me)
        self.was_holding = holding
        if holding:
            events.append(_ev("HOME_BEARING", _bearing_to(self.home.center, me, heading)))
            if self.home.contains(me, self.margin):
                events.append(_ev("AT_HOME"))
        else:
            events.extend(self.travel(ctx, me, heading))
        return events, updates

    def after_deposit(self, ctx, me):
        pass

    def travel(self, ctx, me, heading):
        return []


@register_policy("mushroom_return")
class MushroomReturn(MushroomRandom):
    """After each deposit head straight back to where the last find was made."""

    def __init__(self, params=None):
        super().__init__(params)
        self.reach = _f(self.params, "return_reach", 0.3)
        self.returning = False

    def after_deposit(self, ctx, me):
        self.returning = "last_find" in ctx.memory.values

    def travel(self, ctx, me, heading):
        if not self.returning:
            return []
        target = ctx.memory.values["last_find"]
        if math.hypot(target.x - me.x, target.y - me.y) <= self.reach:
            self.returning = False
            return [_ev("GOTO_REACHED")]
        return [_ev("GOTO", _bearing_to(target, me, heading))]


def _known(readings: dict, k: int) -> list:
    """(bearing, distance) of the k nearest agents whose distance is disclosed."""
    seen = [(e[2], e[0], e[1]) for e in readings.get("scan", ()) if e[2] is not None]
    seen.sort()
    return [(b, d) for d, _, b in seen[:k]]


@register_policy("circle")
class CirclePolicy(Policy):
    """Raise TARGET with the world-frame velocity from the circle rule."""

    events = ("TARGET",)

    def __init__(self, params=None):
        super().__init__(params)
        p = self.params
        self.k = int(_f(p, "k", 1e9))
        self.rule = CircleParams(_f(p, "radius", 3.0), _f(p, "radial_gain", 1.0),
                                 _f(p, "tangential_gain", 1.0), _f(p, "max_speed", 0.5))

    def prestep(self, ctx):
        me, heading = _pose(ctx.readings)
        v = circle_step(me, _known(ctx.readings, self.k), self.rule, heading)
        return [_ev("TARGET", v)], {}


@register_policy("chain")
class ChainPolicy(Policy):
    """Raise TARGET with the velocity toward the midpoint of the chain neighbors."""

    events = ("TARGET",)

    def __init__(self, params=None):
        super().__init__(params)
        p = self.params
        self.rule = ChainParams(Vec2(_f(p, "ax", 0.0), _f(p, "ay", 0.0)),
                                Vec2(_f(p, "bx", 10.0), _f(p, "by", 0.0)),
                                _f(p, "gain", 2.0), _f(p, "max_speed", 0.5))
        if self.rule.anchor_a == self.rule.anchor_b:
            raise ValueError("chain anchors must differ")

    def prestep(self, ctx):
        me, heading = _pose(ctx.readings)
        others = []
        for e in ctx.readings.get("scan", ()):
            if e[2] is not None:
                a = e[1] + heading
                others.append(Vec2(me.x + e[2] * math.cos(a), me.y + e[2] * math.sin(a)))
        prev, nxt = chain_neighbors(me, others, self.rule.anchor_a, self.rule.anchor_b)
        return [_ev("TARGET", chain_step(me, prev, nxt, self.rule))], {}
