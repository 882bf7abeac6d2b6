"""The bundled experiments: config builders, termination predicates and metrics.

Each scenario registers a :class:`ScenarioDef`. A run looks up the monitor for
``config.scenario.name``; the monitor decides termination after every tick
and produces the metrics that end up in the run report and the log.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

from .base import Monitor, builtin_agent, checked


@dataclass(frozen=True)
class ScenarioDef:
    name: str
    roles: tuple
    policies: dict  # role -> strategy policy name
    defaults: dict
    build: Callable  # (seed, **params) -> RunConfig
    monitor: Callable  # RunConfig -> Monitor
    notes: str = ""
    ranges: dict = field(default_factory=dict)


SCENARIOS: dict = {}


def register(defn: ScenarioDef) -> ScenarioDef:
    SCENARIOS[defn.name] = defn
    return defn


def _load_all():
    from . import chase, maze, mushrooms, swarm  # noqa: F401


def get(name: str) -> ScenarioDef:
    _load_all()
    try:
        return SCENARIOS[name]
    except KeyError:
        raise KeyError(f"unknown scenario {name!r}; known: {', '.join(sorted(SCENARIOS))}") from None


def monitor_for(config) -> Monitor:
    name = config.scenario.name
    if name in ("", "none"):
        return Monitor()
    return get(name).monitor(config)


__all__ = ["Monitor", "SCENARIOS", "ScenarioDef", "builtin_agent", "checked", "get", "monitor_for", "register"]
