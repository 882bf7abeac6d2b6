from __future__ import annotations

from ..agent import AgentSpec, ConfigError, ReflexRule, StrategySpec, ThresholdRule
from ..devices import DeviceSuite, DriveState
from ..geometry import Pose, Vec2


class Monitor:
    """Scenario hooks called by the run loop. The default never terminates."""

    def start(self, server) -> None:
        pass

    def after_tick(self, server) -> bool:
        return False

    def metrics(self, server) -> dict:
        return {}


def builtin_agent(name: str, csm: str, x: float, y: float, heading: float = 0.0, *,
                  radius: float = 0.2, color: str = "black", devices: DeviceSuite = DeviceSuite(),
                  drive: DriveState = DriveState(), strategy: str = "null", params: dict | None = None,
                  thresholds=(), reflexes=(), memory: int = 32) -> AgentSpec:
    """AgentSpec running one of the bundled automata."""
    from ..server.config import builtin_behavior

    return AgentSpec(
        name=name,
        color=color,
        body_radius=radius,
        initial_pose=Pose(Vec2(float(x), float(y)), float(heading)),
        devices=devices,
        drive=drive,
        behavior=builtin_behavior(csm),
        behavior_ref=f"builtin:{csm}",
        strategy=StrategySpec(strategy, {k: str(v) for k, v in (params or {}).items()}),
        reflexes=tuple(ReflexRule(*r) if not isinstance(r, ReflexRule) else r for r in reflexes),
        thresholds=tuple(ThresholdRule(*t) if not isinstance(t, ThresholdRule) else t for t in thresholds),
        memory_capacity=memory,
    )


def checked(config):
    """Run the loader's semantic checks on a programmatically built config."""
    from ..server.config import ConfigDiagnostics, validate_config

    diags = validate_config(config)
    if diags:
        raise ConfigDiagnostics(diags)
    return config


__all__ = ["ConfigError", "Monitor", "builtin_agent", "checked"]
