from __future__ import annotations

from collections import deque
from typing import Iterable, Optional

from .evaluate import BUILTIN_NAMES, FUNCTIONS, expr_calls, expr_names
from .model import ANY, BUILTIN_EVENTS, CsmDocument, Diagnostic


def _check_expr(expr, declared, where, line, col, diags):
    for name in sorted(expr_names(expr)):
        if name not in declared and name not in BUILTIN_NAMES:
            diags.append(Diagnostic("undeclared-variable",
                                    f"{where} reads undeclared variable {name!r}", line, col))
    for call in expr_calls(expr):
        spec = FUNCTIONS.get(call.func)
        if spec is None:
            diags.append(Diagnostic("unknown-function", f"{where} calls unknown function {call.func!r}",
                                    line, col))
        elif len(call.args) != spec[0]:
            diags.append(Diagnostic("bad-arity",
                                    f"{call.func}() takes {spec[0]} arguments, got {len(call.args)}",
                                    line, col))


def validate_csm(doc: CsmDocument, produced: Optional[Iterable[str]] = None) -> list:
    """Static checks over a parsed document; returns diagnostics (empty when clean).

    ``produced`` names the events external sources can deliver (threshold rules,
    strategy policy). When omitted, the document's own ``input`` declarations are used.
    """
    diags = []
    declared = set()
    for v in doc.variables:
        if v.name in declared:
            diags.append(Diagnostic("duplicate-variable", f"variable {v.name!r} declared twice",
                                    v.line, v.col))
        _check_expr(v.init, declared, f"initializer of {v.name!r}", v.line, v.col, diags)
        declared.add(v.name)

    sources = set(BUILTIN_EVENTS) | doc.emitted_events()
    sources |= set(doc.inputs) if produced is None else set(produced)

    for m in doc.machines:
        # reachability from the initial state
        seen = {m.initial}
        queue = deque([m.initial])
        while queue:
            s = queue.popleft()
            for _, t in m.by_source.get(s, ()):
                if t.target not in seen:
                    seen.add(t.target)
                    queue.append(t.target)
        for s in m.states:
            if s not in seen:
                diags.append(Diagnostic("unreachable-state",
                                        f"state {s!r} of machine {m.name!r} is unreachable", m.line, 0))
        for t in m.transitions:
            where = f"transition {m.name}.{t.source} on {t.trigger}"
            if t.trigger != ANY and t.trigger not in sources:
                diags.append(Diagnostic("unproduced-trigger",
                                        f"{where}: no declared source produces event {t.trigger!r}",
                                        t.line, t.col))
            if t.guard is not None:
                _check_expr(t.guard, declared, where, t.line, t.col, diags)
            for a in t.actions:
                if a.kind == "assign":
                    if a.args[0] not in declared:
                        diags.append(Diagnostic("undeclared-variable",
                                                f"{where} assigns undeclared variable {a.args[0]!r}",
                                                t.line, t.col))
                    _check_expr(a.args[1], declared, where, t.line, t.col, diags)
                elif a.kind in ("set_wheels", "steer"):
                    _check_expr(a.args[0], declared, where, t.line, t.col, diags)
                    _check_expr(a.args[1], declared, where, t.line, t.col, diags)
                elif a.kind == "send":
                    _check_expr(a.args[1], declared, where, t.line, t.col, diags)
    return diags
