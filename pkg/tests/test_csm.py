from importlib import resources

import pytest
from hypothesis import given
from hypothesis import strategies as st

from agentsim.csm import (
    CsmError,
    CsmRuntimeError,
    EventInstance,
    csm_step,
    format_csm,
    format_expr,
    initial_memory,
    parse_csm,
    validate_csm,
)
from agentsim.csm.syntax import _Parser


def ev(item):
    return EventInstance(*item) if isinstance(item, tuple) else EventInstance(item)


def run_trace(text, steps):
    """Drive a document through event sets the way an agent does: emits come back one step later."""
    doc = parse_csm(text)
    memory = initial_memory(doc)
    machines = doc.machines
    pending = []
    out = []
    for events in steps:
        batch = [ev(e) for e in events] + pending
        res = csm_step(machines, batch, memory)
        machines, pending = res.machines, res.emitted
        out.append(({m.name: m.current for m in machines}, res.actions, dict(memory.values)))
    return out


def states(trace):
    return [s for s, _, _ in trace]


# Each trace: (document, event sets per step, expected states per step) plus extra checks below.
TRACES = {
    "fires-on-trigger": (
        "input GO; machine m { initial A; state A { on GO -> B; } state B { } }",
        [[], ["GO"], ["GO"]],
        [{"m": "A"}, {"m": "B"}, {"m": "B"}],
    ),
    "one-transition-per-step": (
        "input E; machine m { initial A; state A { on E -> B; } state B { on E -> C; } state C { } }",
        [["E"], ["E"], ["E"]],
        [{"m": "B"}, {"m": "C"}, {"m": "C"}],
    ),
    "declaration-order-tie-break": (
        "input X, Y; machine m { initial A; state A { on Y -> Q; on X -> P; } state P { } state Q { } }",
        [["X", "Y"]],
        [{"m": "Q"}],
    ),
    "false-guard-falls-through": (
        "input E; var n = 0; machine m { initial A; state A { on E if n > 0 -> B; on E -> C; } "
        "state B { } state C { } }",
        [["E"]],
        [{"m": "C"}],
    ),
    "same-step-isolation": (
        "input E; var x = 0;"
        "machine w { initial A; state A { on E -> B do assign(x, 1); } state B { } }"
        "machine r { initial A; state A { on E if x == 1 -> SEEN; on E -> MISSED; } state SEEN { } state MISSED { } }",
        [["E"]],
        [{"w": "B", "r": "MISSED"}],
    ),
    "assignment-visible-next-step": (
        "input E; var x = 0;"
        "machine w { initial A; state A { on E -> B do assign(x, 1); } state B { } }"
        "machine r { initial A; state A { on E if x == 1 -> SEEN; } state SEEN { } }",
        [["E"], ["E"]],
        [{"w": "B", "r": "A"}, {"w": "B", "r": "SEEN"}],
    ),
    "emit-delayed-one-step": (
        "input GO; machine a { initial A; state A { on GO -> B do emit(PING); } state B { } }"
        "machine b { initial IDLE; state IDLE { on PING -> GOT; } state GOT { } }",
        [["GO"], [], []],
        [{"a": "B", "b": "IDLE"}, {"a": "B", "b": "GOT"}, {"a": "B", "b": "GOT"}],
    ),
    "any-needs-some-event": (
        "input E; machine m { initial A; state A { on ANY -> B; } state B { on ANY -> A; } }",
        [[], ["E"], [], ["E"]],
        [{"m": "A"}, {"m": "B"}, {"m": "B"}, {"m": "A"}],
    ),
    "tick-self-loop-counts": (
        "var n = 0; machine m { initial A; state A { on TICK -> A do assign(n, n + 1); } }",
        [["TICK"], ["TICK"], [], ["TICK"]],
        [{"m": "A"}] * 4,
    ),
    "guard-picks-matching-instance": (
        "input E; var got = 0; machine m { initial A; state A { on E if payload > 5 -> B do assign(got, payload); } "
        "state B { } }",
        [[("E", 1.0), ("E", 7.0), ("E", 9.0)]],
        [{"m": "B"}],
    ),
    "last-declared-write-wins": (
        "input E; var x = 0;"
        "machine p { initial A; state A { on E -> A do assign(x, 1); } }"
        "machine q { initial A; state A { on E -> A do assign(x, 2); } }",
        [["E"]],
        [{"p": "A", "q": "A"}],
    ),
    "actions-in-declaration-order": (
        "input E; machine m { initial A; state A { on E -> A do set_wheels(1, 2), steer(0.5, -0.5), pick; } }"
        "machine n { initial A; state A { on ANY -> A do drop, send(\"team\", 3); } }",
        [["E"]],
        [{"m": "A", "n": "A"}],
    ),
}


def check_trace(name):
    text, steps, expected = TRACES[name]
    assert not validate_csm(parse_csm(text))
    trace = run_trace(text, steps)
    assert states(trace) == expected
    memory = trace[-1][2]
    actions = [a for _, acts, _ in trace for a in acts]
    if name == "tick-self-loop-counts":
        assert memory["n"] == 3
    elif name == "guard-picks-matching-instance":
        assert memory["got"] == 7.0
    elif name == "last-declared-write-wins":
        assert memory["x"] == 2
    elif name == "actions-in-declaration-order":
        assert actions == [("set_wheels", 1.0, 2.0), ("steer", 0.5, -0.5), ("pick",), ("drop",), ("send", "team", 3)]


@pytest.mark.parametrize("name", sorted(TRACES))
def test_trace(name):
    check_trace(name)


def test_twelve_traces():
    assert len(TRACES) == 12


def test_runtime_type_error():
    doc = parse_csm("input E; machine m { initial A; state A { on E -> A do set_wheels(vec(1, 2), 0); } }")
    with pytest.raises(CsmRuntimeError):
        csm_step(doc.machines, [EventInstance("E")], initial_memory(doc))


# ---------------------------------------------------------------- parsing and validation


def test_syntax_error_has_position():
    with pytest.raises(CsmError) as info:
        parse_csm("machine m {\n  initial A;\n  state A { on E => B; }\n}")
    d = info.value.diagnostics[0]
    assert d.line == 3


@pytest.mark.parametrize("text, code", [
    ("machine m { initial A; state A { } state B { } }", "unreachable-state"),
    ("machine m { initial A; state A { on NOPE -> A; } }", "unproduced-trigger"),
    ("input E; machine m { initial A; state A { on E -> A do assign(z, 1); } }", "undeclared-variable"),
    ("var a = 1; var a = 2; machine m { initial A; state A { } }", "duplicate-variable"),
])
def test_validation_codes(text, code):
    assert code in {d.code for d in validate_csm(parse_csm(text))}


def test_parse_rejects_unknown_target():
    with pytest.raises(CsmError):
        parse_csm("input E; machine m { initial A; state A { on E -> Z; } }")


ASSETS = sorted(p.name for p in resources.files("agentsim.assets").iterdir() if p.name.endswith(".csm"))


@pytest.mark.parametrize("asset", ASSETS)
def test_print_parse_fixed_point(asset):
    text = resources.files("agentsim.assets").joinpath(asset).read_text()
    doc = parse_csm(text)
    printed = format_csm(doc)
    again = parse_csm(printed)
    assert again == doc
    assert format_csm(again) == printed


def _expr(text):
    return _Parser(text).expr()


names = st.sampled_from(["a", "b", "payload", "max_speed"])
numbers = st.integers(0, 99).map(str)
atoms = st.one_of(names, numbers)
exprs = st.recursive(
    atoms,
    lambda inner: st.one_of(
        st.tuples(inner, st.sampled_from(["+", "-", "*", "/", "<", "==", "and", "or"]), inner)
        .map(lambda t: f"({t[0]} {t[1]} {t[2]})"),
        inner.map(lambda e: f"-{e}"),
        inner.map(lambda e: f"(not {e})"),
        inner.map(lambda e: f"abs({e})"),
    ),
    max_leaves=8,
)


@given(exprs)
def test_expression_print_round_trip(text):
    node = _expr(text)
    assert _expr(format_expr(node)) == node
