"""Concurrent state machines: the behavior language of an agent's operation layer."""
from .machine import EventInstance, Memory, StepResult, csm_step, initial_memory
from .model import (
    ANY,
    MSG,
    TICK,
    Action,
    CsmDocument,
    CsmError,
    CsmMachine,
    CsmRuntimeError,
    Diagnostic,
    Transition,
)
from .syntax import format_csm, format_expr, parse_csm
from .validate import validate_csm

__all__ = [
    "ANY", "MSG", "TICK", "Action", "CsmDocument", "CsmError", "CsmMachine",
    "CsmRuntimeError", "Diagnostic", "EventInstance", "Memory", "StepResult",
    "Transition", "csm_step", "format_csm", "format_expr", "initial_memory",
    "parse_csm", "validate_csm",
]
