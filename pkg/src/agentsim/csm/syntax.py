"""Concrete syntax for CSM documents: lexer, recursive-descent parser, canonical printer.

Grammar::

    document   := { "input" IDENT {"," IDENT} ";" | "var" IDENT "=" expr ";" | machine }
    machine    := "machine" IDENT "{" { "initial" IDENT ";" | state } "}"
    state      := "state" IDENT "{" { transition } "}"
    transition := "on" (IDENT | "ANY") ["if" expr] "->" IDENT ["do" action {"," action}] [";"]
    action     := "set_wheels" "(" expr "," expr ")" | "steer" "(" expr "," expr ")"
                | "assign" "(" IDENT "," expr ")" | "emit" "(" IDENT ")"
                | "send" "(" STRING "," expr ")" | "pick" | "drop"

``#`` starts a comment running to the end of the line.
"""
from __future__ import annotations

import re
from typing import NamedTuple

from .model import (
    Action,
    Binary,
    Bool,
    Call,
    CsmDocument,
    CsmError,
    CsmMachine,
    Diagnostic,
    Field,
    Name,
    Num,
    Transition,
    Unary,
    VarDecl,
)

KEYWORDS = {"input", "var", "machine", "initial", "state", "on", "if", "do",
            "and", "or", "not", "true", "false"}
ACTION_ARITY = {"set_wheels": 2, "steer": 2, "assign": 2, "emit": 1, "send": 2,
                "pick": 0, "drop": 0}


class Token(NamedTuple):
    kind: str  # NUM STR IDENT OP EOF
    text: str
    line: int
    col: int


_TOKEN_RE = re.compile(
    r"""
    (?P<ws>[ \t\r]+)
  | (?P<nl>\n)
  | (?P<comment>\#[^\n]*)
  | (?P<num>(?:\d+\.\d*|\.\d+|\d+)(?:[eE][+-]?\d+)?)
  | (?P<str>"[^"\n]*")
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<op>->|<=|>=|==|!=|[-+*/%<>(){},;.=])
    """,
    re.VERBOSE,
)


def tokenize(text: str) -> list:
    tokens = []
    line, line_start = 1, 0
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        col = pos - line_start + 1
        if m is None:
            raise CsmError([Diagnostic("syntax", f"unexpected character {text[pos]!r}", line, col)])
        kind = m.lastgroup
        s = m.group()
        if kind == "nl":
            line += 1
            line_start = m.end()
        elif kind == "num":
            tokens.append(Token("NUM", s, line, col))
        elif kind == "str":
            tokens.append(Token("STR", s[1:-1], line, col))
        elif kind == "ident":
            tokens.append(Token("IDENT", s, line, col))
        elif kind == "op":
            tokens.append(Token("OP", s, line, col))
        pos = m.end()
    tokens.append(Token("EOF", "", line, pos - line_start + 1))
    return tokens


class _Parser:
    def __init__(self, text: str):
        self.toks = tokenize(text)
        self.i = 0

    # -- token helpers
    @property
    def tok(self) -> Token:
        return self.toks[self.i]

    def error(self, msg, tok=None):
        tok = tok or self.tok
        raise CsmError([Diagnostic("syntax", msg, tok.line, tok.col)])

    def at(self, kind, text=None) -> bool:
        t = self.tok
        return t.kind == kind and (text is None or t.text == text)

    def accept(self, kind, text=None):
        if self.at(kind, text):
            t = self.tok
            self.i += 1
            return t
        return None

    def expect(self, kind, text=None) -> Token:
        t = self.accept(kind, text)
        if t is None:
            want = text if text is not None else kind.lower()
            got = self.tok.text or "end of input"
            self.error(f"expected {want!r}, found {got!r}")
        return t

    def ident(self) -> Token:
        t = self.expect("IDENT")
        if t.text in KEYWORDS:
            self.error(f"keyword {t.text!r} cannot be used as a name", t)
        return t

    # -- document
    def document(self) -> CsmDocument:
        inputs, variables, machines = [], [], []
        while not self.at("EOF"):
            if self.accept("IDENT", "input"):
                inputs.append(self.ident().text)
                while self.accept("OP", ","):
                    inputs.append(self.ident().text)
                self.expect("OP", ";")
            elif self.at("IDENT", "var"):
                kw = self.expect("IDENT")
                name = self.ident().text
                self.expect("OP", "=")
                init = self.expr()
                self.expect("OP", ";")
                variables.append(VarDecl(name, init, kw.line, kw.col))
            elif self.at("IDENT", "machine"):
                machines.append(self.machine())
            else:
                self.error(f"expected 'input', 'var' or 'machine', found {self.tok.text!r}")
        return CsmDocument(tuple(inputs), tuple(variables), tuple(machines))

    def machine(self):
        kw = self.expect("IDENT", "machine")
        name = self.ident().text
        self.expect("OP", "{")
        initial = None
        states = []  # (name, token)
        transitions = []
        while not self.accept("OP", "}"):
            if self.at("IDENT", "initial"):
                t = self.expect("IDENT")
                if initial is not None:
                    self.error("initial state declared twice", t)
                initial = self.ident()
                self.expect("OP", ";")
            elif self.at("IDENT", "state"):
                self.expect("IDENT")
                st = self.ident()
                states.append(st)
                self.expect("OP", "{")
                while not self.accept("OP", "}"):
                    transitions.append(self.transition(st.text))
            else:
                self.error(f"expected 'initial' or 'state', found {self.tok.text or 'end of input'!r}")
        return _RawMachine(name, kw, initial, states, transitions)

    def transition(self, source: str) -> Transition:
        self.expect("IDENT", "on")
        trig = self.expect("IDENT")
        guard = None
        if self.accept("IDENT", "if"):
            guard = self.expr()
        self.expect("OP", "->")
        target = self.ident()
        actions = []
        if self.accept("IDENT", "do"):
            actions.append(self.action())
            while self.accept("OP", ","):
                actions.append(self.action())
        self.accept("OP", ";")
        return Transition(source, trig.text, target.text, guard, tuple(actions),
                          target.line, target.col)

    def action(self) -> Action:
        t = self.expect("IDENT")
        kind = t.text
        if kind not in ACTION_ARITY:
            self.error(f"unknown action {kind!r}", t)
        if ACTION_ARITY[kind] == 0:
            if self.accept("OP", "("):
                self.expect("OP", ")")
            return Action(kind)
        self.expect("OP", "(")
        if kind == "assign":
            args = (self.ident().text,)
            self.expect("OP", ",")
            args += (self.expr(),)
        elif kind == "emit":
            args = (self.ident().text,)
        elif kind == "send":
            args = (self.expect("STR").text,)
            self.expect("OP", ",")
            args += (self.expr(),)
        else:
            a = self.expr()
            self.expect("OP", ",")
            args = (a, self.expr())
        self.expect("OP", ")")
        return Action(kind, args)

    # -- expressions, lowest precedence first
    def expr(self):
        return self.or_expr()

    def or_expr(self):
        left = self.and_expr()
        while self.accept("IDENT", "or"):
            left = Binary("or", left, self.and_expr())
        return left

    def and_expr(self):
        left = self.not_expr()
        while self.accept("IDENT", "and"):
            left = Binary("and", left, self.not_expr())
        return left

    def not_expr(self):
        if self.accept("IDENT", "not"):
            return Unary("not", self.not_expr())
        return self.comparison()

    def comparison(self):
        left = self.additive()
        for op in ("<=", ">=", "==", "!=", "<", ">"):
            if self.accept("OP", op):
                return Binary(op, left, self.additive())
        return left

    def additive(self):
        left = self.term()
        while True:
            if self.accept("OP", "+"):
                left = Binary("+", left, self.term())
            elif self.accept("OP", "-"):
                left = Binary("-", left, self.term())
            else:
                return left

    def term(self):
        left = self.unary()
        while True:
            for op in ("*", "/", "%"):
                if self.accept("OP", op):
                    left = Binary(op, left, self.unary())
                    break
            else:
                return left

    def unary(self):
        if self.accept("OP", "-"):
            operand = self.unary()
            if isinstance(operand, Num):
                return Num(-operand.value)
            return Unary("-", operand)
        return self.postfix()

    def postfix(self):
        node = self.primary()
        while self.accept("OP", "."):
            attr = self.expect("IDENT")
            if attr.text not in ("x", "y"):
                self.error(f"unknown field {attr.text!r} (expected x or y)", attr)
            node = Field(node, attr.text)
        return node

    def primary(self):
        t = self.tok
        if self.accept("NUM"):
            return Num(float(t.text))
        if self.accept("OP", "("):
            e = self.expr()
            self.expect("OP", ")")
            return e
        if self.accept("IDENT", "true"):
            return Bool(True)
        if self.accept("IDENT", "false"):
            return Bool(False)
        if t.kind == "IDENT" and t.text not in KEYWORDS:
            self.i += 1
            if self.accept("OP", "("):
                args = []
                if not self.accept("OP", ")"):
                    args.append(self.expr())
                    while self.accept("OP", ","):
                        args.append(self.expr())
                    self.expect("OP", ")")
                return Call(t.text, tuple(args))
            return Name(t.text)
        self.error(f"expected an expression, found {t.text or 'end of input'!r}")


class _RawMachine(NamedTuple):
    name: str
    kw: Token
    initial: object
    states: list
    transitions: list


def parse_csm(text: str) -> CsmDocument:
    """Parse a CSM document, resolving state references.

    Raises :class:`CsmError` with every located diagnostic found.
    """
    p = _Parser(text)
    doc = p.document()
    diags = []
    machines = []
    seen_machines = set()
    for raw in doc.machines:
        if raw.name in seen_machines:
            diags.append(Diagnostic("duplicate-machine", f"machine {raw.name!r} declared twice",
                                    raw.kw.line, raw.kw.col))
        seen_machines.add(raw.name)
        names = []
        for st in raw.states:
            if st.text in names:
                diags.append(Diagnostic("duplicate-state",
                                        f"state {st.text!r} declared twice in machine {raw.name!r}",
                                        st.line, st.col))
            else:
                names.append(st.text)
        if raw.initial is None:
            diags.append(Diagnostic("missing-initial", f"machine {raw.name!r} has no initial state",
                                    raw.kw.line, raw.kw.col))
            initial = names[0] if names else ""
        else:
            initial = raw.initial.text
            if initial not in names:
                diags.append(Diagnostic("unknown-state", f"initial state {initial!r} is not declared",
                                        raw.initial.line, raw.initial.col))
        for t in raw.transitions:
            if t.target not in names:
                diags.append(Diagnostic("unknown-state",
                                        f"transition targets undeclared state {t.target!r}",
                                        t.line, t.col))
        machines.append(CsmMachine(raw.name, tuple(names), initial, tuple(raw.transitions),
                                   line=raw.kw.line))
    if diags:
        raise CsmError(diags)
    return CsmDocument(doc.inputs, doc.variables, tuple(machines))


# ---------------------------------------------------------------- printer

_PREC = {"or": 1, "and": 2, "not": 3, "<": 4, "<=": 4, ">": 4, ">=": 4, "==": 4, "!=": 4,
         "+": 5, "-": 5, "*": 6, "/": 6, "%": 6}
_UNARY_PREC = 7
_ATOM_PREC = 8


def _fmt_num(v: float) -> str:
    if v == int(v) and abs(v) < 1e15:
        return str(int(v))
    return repr(v)


def _prec(node) -> int:
    if isinstance(node, Binary):
        return _PREC[node.op]
    if isinstance(node, Unary):
        return _PREC["not"] if node.op == "not" else _UNARY_PREC
    if isinstance(node, Num) and node.value < 0:
        return _UNARY_PREC
    return _ATOM_PREC


def format_expr(node) -> str:
    if isinstance(node, Num):
        return _fmt_num(node.value)
    if isinstance(node, Bool):
        return "true" if node.value else "false"
    if isinstance(node, Name):
        return node.name
    if isinstance(node, Field):
        base = format_expr(node.base)
        if _prec(node.base) < _ATOM_PREC:
            base = f"({base})"
        return f"{base}.{node.attr}"
    if isinstance(node, Call):
        return f"{node.func}({', '.join(format_expr(a) for a in node.args)})"
    if isinstance(node, Unary):
        inner = format_expr(node.operand)
        if node.op == "not":
            if _prec(node.operand) < _PREC["not"]:
                inner = f"({inner})"
            return f"not {inner}"
        if _prec(node.operand) < _UNARY_PREC or (isinstance(node.operand, Num)):
            inner = f"({inner})"
        return f"-{inner}"
    if isinstance(node, Binary):
        p = _PREC[node.op]
        left = format_expr(node.left)
        right = format_expr(node.right)
        comparison = p == 4
        # left-associative: the left side may share precedence, the right may not
        if _prec(node.left) < p or (comparison and _prec(node.left) == p):
            left = f"({left})"
        if _prec(node.right) <= p:
            right = f"({right})"
        return f"{left} {node.op} {right}"
    raise TypeError(f"not an expression node: {node!r}")


def format_action(a: Action) -> str:
    if a.kind in ("pick", "drop"):
        return a.kind
    if a.kind == "emit":
        return f"emit({a.args[0]})"
    if a.kind == "assign":
        return f"assign({a.args[0]}, {format_expr(a.args[1])})"
    if a.kind == "send":
        return f'send("{a.args[0]}", {format_expr(a.args[1])})'
    return f"{a.kind}({format_expr(a.args[0])}, {format_expr(a.args[1])})"


def format_csm(doc: CsmDocument) -> str:
    """Canonical text for a document; parsing it yields an equal document."""
    out = []
    if doc.inputs:
        out.append(f"input {', '.join(doc.inputs)};")
    for v in doc.variables:
        out.append(f"var {v.name} = {format_expr(v.init)};")
    for m in doc.machines:
        if out:
            out.append("")
        out.append(f"machine {m.name} {{")
        out.append(f"  initial {m.initial};")
        for s in m.states:
            out.append(f"  state {s} {{")
            for t in m.transitions:
                if t.source != s:
                    continue
                line = f"    on {t.trigger}"
                if t.guard is not None:
                    line += f" if {format_expr(t.guard)}"
                line += f" -> {t.target}"
                if t.actions:
                    line += " do " + ", ".join(format_action(a) for a in t.actions)
                out.append(line + ";")
            out.append("  }")
        out.append("}")
    return "\n".join(out) + ("\n" if out else "")
