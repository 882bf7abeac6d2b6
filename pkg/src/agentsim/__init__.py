"""agentsim: a deterministic, tick-based simulator for small teams of mobile agents.

Agents are differential-drive discs with sensors; their logic is a layered
runtime around concurrent state machines written in a small text language.
The server moves them, routes their messages, logs every run and can replay
a log to check it.
"""
from .server import RunConfig, load_config, replay, run

__version__ = "0.1.0"

__all__ = ["RunConfig", "__version__", "load_config", "replay", "run"]
