"""Synchronous interpreter for a set of concurrent state machines.

One call to :func:`csm_step` is one step of every machine:

* each machine independently fires at most one transition: the first one,
  in declaration order, leaving its current state whose trigger is among the
  step's events (``ANY`` matches any event when the set is nonempty) and whose
  guard holds for that event's payload;
* guards and action expressions read memory as it was when the step began;
  assignments land after every machine has fired, in declaration order;
* events raised with ``emit`` are returned and become visible on the next step only.
"""
from __future__ import annotations

from collections import deque
from functools import lru_cache
from typing import Iterable, NamedTuple, Optional, Sequence

from ..geometry import Vec2
from .evaluate import compile_expr, evaluate
from .model import ANY, CsmDocument, CsmRuntimeError


class EventInstance(NamedTuple):
    name: str
    payload: object = None
    origin: str = "sensor"  # sensor | machine | message | strategy


class Memory:
    """Agent memory: scalar and position variables plus a bounded event history."""

    def __init__(self, values: Optional[dict] = None, capacity: int = 32):
        if capacity < 0:
            raise ValueError("memory capacity must be non-negative")
        self.values = dict(values or {})
        self.capacity = capacity
        self.history: deque = deque(maxlen=capacity)

    def record(self, tick: int, events: Iterable[EventInstance]) -> None:
        for e in events:
            self.history.append((tick, e.name))

    def copy(self) -> "Memory":
        m = Memory(self.values, self.capacity)
        m.history.extend(self.history)
        return m

    def __eq__(self, other):
        return (isinstance(other, Memory) and self.values == other.values
                and self.capacity == other.capacity and list(self.history) == list(other.history))

    def __repr__(self):
        return f"Memory({self.values!r}, capacity={self.capacity})"


class StepResult(NamedTuple):
    machines: tuple
    actions: list
    emitted: list
    fired: list  # (machine name, transition index) per machine that fired


@lru_cache(maxsize=None)
def _compiled(node):
    return compile_expr(node)


def initial_memory(doc: CsmDocument, capacity: int = 32, builtins: Optional[dict] = None) -> Memory:
    values: dict = {}
    env_builtins = builtins or {}
    for v in doc.variables:
        values[v.name] = evaluate(_compiled(v.init), (values, None, env_builtins))
    return Memory(values, capacity)


def _number(v, what):
    if isinstance(v, Vec2) or not isinstance(v, (int, float)):
        raise CsmRuntimeError(f"{what} must be a number, got {v!r}")
    return float(v)


def _guard_holds(guard, env) -> bool:
    v = evaluate(_compiled(guard), env)
    if isinstance(v, Vec2):
        raise CsmRuntimeError("guard evaluated to a vector")
    return bool(v)


def csm_step(machines: Sequence, events: Sequence[EventInstance], memory: Memory,
             builtins: Optional[dict] = None) -> StepResult:
    builtins = builtins or {}
    snapshot = memory.values
    by_name: dict = {}
    for e in events:
        by_name.setdefault(e.name, []).append(e)
    any_events = list(events)

    new_machines = []
    actions: list = []
    emitted: list = []
    fired: list = []
    writes: list = []
    for m in machines:
        chosen = None
        for idx, t in m.by_source.get(m.current, ()):
            candidates = any_events if t.trigger == ANY else by_name.get(t.trigger)
            if not candidates:
                continue
            for ev in candidates:
                if t.guard is None or _guard_holds(t.guard, (snapshot, ev.payload, builtins)):
                    chosen = (idx, t, ev)
                    break
            if chosen:
                break
        if chosen is None:
            new_machines.append(m)
            continue
        idx, t, ev = chosen
        fired.append((m.name, idx))
        env = (snapshot, ev.payload, builtins)
        for a in t.actions:
            k = a.kind
            if k == "assign":
                writes.append((a.args[0], evaluate(_compiled(a.args[1]), env)))
            elif k == "emit":
                emitted.append(EventInstance(a.args[0], None, "machine"))
            elif k == "set_wheels" or k == "steer":
                x = _number(evaluate(_compiled(a.args[0]), env), f"{k} first argument")
                y = _number(evaluate(_compiled(a.args[1]), env), f"{k} second argument")
                actions.append((k, x, y))
            elif k == "send":
                payload = evaluate(_compiled(a.args[1]), env)
                if isinstance(payload, bool):
                    payload = float(payload)
                actions.append(("send", a.args[0], payload))
            else:
                actions.append((k,))
        new_machines.append(m.at(t.target))

    if writes:
        values = dict(snapshot)
        for name, v in writes:
            values[name] = v
        memory.values = values
    return StepResult(tuple(new_machines), actions, emitted, fired)
