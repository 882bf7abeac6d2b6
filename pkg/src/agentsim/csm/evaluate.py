"""Compile expression trees into closures over an evaluation environment.

An environment is ``(values, payload, builtins)``: the agent's memory variables,
the payload of the event that triggered the transition, and read-only runtime
names such as ``wheel_base`` or ``dt``.
"""
from __future__ import annotations

import math
import operator

from ..geometry import Vec2, wrap_angle
from .model import Binary, Bool, Call, CsmRuntimeError, Field, Name, Num, Unary

BUILTIN_NAMES = frozenset({"payload", "wheel_base", "max_speed", "dt", "tick", "pi", "radius"})


def _clamp(x, lo, hi):
    return min(hi, max(lo, x))


def _sign(x):
    return (x > 0) - (x < 0)


FUNCTIONS = {
    "abs": (1, abs),
    "min": (2, min),
    "max": (2, max),
    "clamp": (3, _clamp),
    "sqrt": (1, math.sqrt),
    "sin": (1, math.sin),
    "cos": (1, math.cos),
    "atan2": (2, math.atan2),
    "hypot": (2, math.hypot),
    "wrap": (1, wrap_angle),
    "sign": (1, _sign),
    "floor": (1, math.floor),
    "vec": (2, lambda x, y: Vec2(float(x), float(y))),
    "norm": (1, lambda v: math.hypot(v[0], v[1])),
}

_BINOPS = {
    "+": operator.add,
    "-": operator.sub,
    "*": operator.mul,
    "/": operator.truediv,
    "%": math.fmod,
    "<": operator.lt,
    "<=": operator.le,
    ">": operator.gt,
    ">=": operator.ge,
    "==": operator.eq,
    "!=": operator.ne,
}


def _vec_mul(a, b):
    if isinstance(a, Vec2) and not isinstance(b, Vec2):
        return Vec2(a.x * b, a.y * b)
    if isinstance(b, Vec2) and not isinstance(a, Vec2):
        return Vec2(b.x * a, b.y * a)
    if isinstance(a, Vec2):
        raise TypeError("cannot multiply two vectors")
    return a * b


def _vec_div(a, b):
    if isinstance(b, Vec2):
        raise TypeError("cannot divide by a vector")
    if isinstance(a, Vec2):
        return Vec2(a.x / b, a.y / b)
    return a / b


def _scalar_only(fn, op):
    def checked(a, b):
        if isinstance(a, Vec2) or isinstance(b, Vec2):
            raise TypeError(f"operator {op!r} needs numbers")
        return fn(a, b)
    return checked


def compile_expr(node):
    """Return ``f(env) -> value`` for an expression tree."""
    if isinstance(node, Num):
        v = node.value
        return lambda env: v
    if isinstance(node, Bool):
        b = node.value
        return lambda env: b
    if isinstance(node, Name):
        name = node.name
        if name == "payload":
            def get_payload(env):
                if env[1] is None:
                    raise CsmRuntimeError("payload read on an event without payload")
                return env[1]
            return get_payload
        if name in BUILTIN_NAMES:
            return lambda env: env[2][name]
        def get_var(env):
            try:
                return env[0][name]
            except KeyError:
                raise CsmRuntimeError(f"variable {name!r} is not set") from None
        return get_var
    if isinstance(node, Field):
        base = compile_expr(node.base)
        idx = 0 if node.attr == "x" else 1
        def get_field(env):
            v = base(env)
            if not isinstance(v, tuple):
                raise CsmRuntimeError(f"field .{node.attr} read on a scalar")
            return v[idx]
        return get_field
    if isinstance(node, Unary):
        inner = compile_expr(node.operand)
        if node.op == "not":
            return lambda env: not inner(env)
        def neg(env):
            v = inner(env)
            if isinstance(v, Vec2):
                return Vec2(-v.x, -v.y)
            return -v
        return neg
    if isinstance(node, Binary):
        left = compile_expr(node.left)
        right = compile_expr(node.right)
        if node.op == "and":
            return lambda env: bool(left(env)) and bool(right(env))
        if node.op == "or":
            return lambda env: bool(left(env)) or bool(right(env))
        if node.op == "*":
            fn = _vec_mul
        elif node.op == "/":
            fn = _vec_div
        elif node.op in ("+", "-", "==", "!="):
            fn = _BINOPS[node.op]
        else:
            fn = _scalar_only(_BINOPS[node.op], node.op)
        if node.op in ("+", "-"):
            op = node.op
            def arith(env):
                a, b = left(env), right(env)
                if isinstance(a, Vec2) != isinstance(b, Vec2):
                    raise CsmRuntimeError(f"operator {op!r} mixes a vector and a number")
                return fn(a, b)
            return arith
        return lambda env: fn(left(env), right(env))
    if isinstance(node, Call):
        arity, fn = FUNCTIONS[node.func]
        args = [compile_expr(a) for a in node.args]
        if len(args) == 1:
            a0 = args[0]
            return lambda env: fn(a0(env))
        if len(args) == 2:
            a0, a1 = args
            return lambda env: fn(a0(env), a1(env))
        return lambda env: fn(*[a(env) for a in args])
    raise TypeError(f"not an expression node: {node!r}")


def evaluate(fn, env):
    """Run a compiled expression, turning evaluation faults into CsmRuntimeError."""
    try:
        return fn(env)
    except CsmRuntimeError:
        raise
    except (TypeError, ValueError, ZeroDivisionError, OverflowError, KeyError) as exc:
        raise CsmRuntimeError(str(exc)) from exc


def expr_names(node, out=None) -> set:
    """All bare names referenced by an expression."""
    if out is None:
        out = set()
    if isinstance(node, Name):
        out.add(node.name)
    elif isinstance(node, Field):
        expr_names(node.base, out)
    elif isinstance(node, Unary):
        expr_names(node.operand, out)
    elif isinstance(node, Binary):
        expr_names(node.left, out)
        expr_names(node.right, out)
    elif isinstance(node, Call):
        for a in node.args:
            expr_names(a, out)
    return out


def expr_calls(node, out=None) -> list:
    if out is None:
        out = []
    if isinstance(node, Call):
        out.append(node)
        for a in node.args:
            expr_calls(a, out)
    elif isinstance(node, Field):
        expr_calls(node.base, out)
    elif isinstance(node, Unary):
        expr_calls(node.operand, out)
    elif isinstance(node, Binary):
        expr_calls(node.left, out)
        expr_calls(node.right, out)
    return out
