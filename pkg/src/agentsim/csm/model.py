from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import NamedTuple, Optional

ANY = "ANY"
TICK = "TICK"
MSG = "MSG"
BUILTIN_EVENTS = frozenset({TICK, MSG})


class Diagnostic(NamedTuple):
    code: str
    message: str
    line: int = 0
    col: int = 0

    def __str__(self):
        loc = f"{self.line}:{self.col}: " if self.line else ""
        return f"{loc}{self.code}: {self.message}"


class CsmError(Exception):
    """Raised when a CSM document cannot be parsed; carries located diagnostics."""

    def __init__(self, diagnostics):
        self.diagnostics = list(diagnostics)
        super().__init__("; ".join(str(d) for d in self.diagnostics))


class CsmRuntimeError(Exception):
    pass


# ---------------------------------------------------------------- expressions
# Plain tuples-based nodes so documents compare and hash structurally.


class Num(NamedTuple):
    value: float


class Bool(NamedTuple):
    value: bool


class Name(NamedTuple):
    name: str


class Field(NamedTuple):
    base: object
    attr: str  # "x" | "y"


class Unary(NamedTuple):
    op: str  # "-" | "not"
    operand: object


class Binary(NamedTuple):
    op: str
    left: object
    right: object


class Call(NamedTuple):
    func: str
    args: tuple


# ---------------------------------------------------------------- automata


@dataclass(frozen=True)
class Action:
    kind: str  # set_wheels | steer | assign | emit | send | pick | drop
    args: tuple = ()


@dataclass(frozen=True)
class Transition:
    source: str
    trigger: str
    target: str
    guard: Optional[object] = None
    actions: tuple = ()
    line: int = field(default=0, compare=False)
    col: int = field(default=0, compare=False)


@dataclass(frozen=True)
class CsmMachine:
    name: str
    states: tuple
    initial: str
    transitions: tuple
    current: str = ""
    line: int = field(default=0, compare=False)

    def __post_init__(self):
        if not self.current:
            object.__setattr__(self, "current", self.initial)

    @cached_property
    def by_source(self) -> dict:
        table: dict = {s: [] for s in self.states}
        for i, t in enumerate(self.transitions):
            table.setdefault(t.source, []).append((i, t))
        return table

    def reset(self) -> "CsmMachine":
        return self.at(self.initial)

    def at(self, state: str) -> "CsmMachine":
        if state == self.current:
            return self
        m = CsmMachine(self.name, self.states, self.initial, self.transitions, state, self.line)
        # share the derived transition table
        m.__dict__["by_source"] = self.by_source
        return m


@dataclass(frozen=True)
class VarDecl:
    name: str
    init: object
    line: int = field(default=0, compare=False)
    col: int = field(default=0, compare=False)


@dataclass(frozen=True)
class CsmDocument:
    inputs: tuple = ()
    variables: tuple = ()
    machines: tuple = ()

    @property
    def variable_names(self) -> list:
        return [v.name for v in self.variables]

    def emitted_events(self) -> set:
        out = set()
        for m in self.machines:
            for t in m.transitions:
                for a in t.actions:
                    if a.kind == "emit":
                        out.add(a.args[0])
        return out
