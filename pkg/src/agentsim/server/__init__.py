"""The environment server: configuration, peers, tick loop, logging and replay."""
from .config import ConfigDiagnostics, RunConfig, ScenarioSpec, config_digest, dump_config, load_config
from .directory import Directory, Peer, manage_group, route_messages
from .engine import (
    EnvServer,
    Mode,
    ModeError,
    RegistrationError,
    ReplayRefused,
    RunReport,
    Verdict,
    replay,
    run,
    run_to_text,
)

__all__ = [
    "ConfigDiagnostics", "Directory", "EnvServer", "Mode", "ModeError", "Peer",
    "RegistrationError", "ReplayRefused", "RunConfig", "RunReport", "ScenarioSpec",
    "Verdict", "config_digest", "dump_config", "load_config", "manage_group",
    "replay", "route_messages", "run", "run_to_text",
]
