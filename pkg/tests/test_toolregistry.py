import pytest
from hypothesis import given
from hypothesis import strategies as st

from fitagent.state import AgentState, Halt
from fitagent.toolregistry import Field, RegistryError, ToolRegistry, ToolSpec, fmt_num, validate_input


def spec(name="t", criticality="auxiliary", executor=None, schema=None, patterns=None):
    return ToolSpec(name, "does things", schema if schema is not None else {"n": Field("number", True)},
                    criticality, executor or (lambda inp, st: f"got {inp}"), patterns or {})


def test_register_and_lookup():
    r = ToolRegistry([spec("a"), spec("b")])
    assert r.names() == ["a", "b"] and len(r) == 2 and "a" in r
    with pytest.raises(RegistryError):
        r.register(spec("a"))
    with pytest.raises(RegistryError):
        r.get("zzz")
    assert '- a: does things Input schema: {"n": "number (required)"}' in r.describe()


def test_spec_validation():
    with pytest.raises(ValueError):
        spec("bad name")
    with pytest.raises(ValueError):
        spec(criticality="optional")
    with pytest.raises(ValueError):
        Field("date")


def test_validate_input_strict():
    s = spec(schema={"n": Field("number", True), "tag": Field("string"), "v": Field("object|array")},
             patterns={r"initial_[a-z]+": Field("number")})
    assert validate_input(s, {"n": 1, "v": [1], "initial_k": 2.0}) == []
    assert validate_input(s, {"n": 1, "v": {}}) == []
    problems = validate_input(s, {"tag": 3, "extra": 1, "initial_k": "x", "v": 1})
    assert "missing required field 'n'" in problems
    assert "unknown field 'extra'" in problems
    assert any("'tag' must be string" in p for p in problems)
    assert any("'v' must be object or array" in p for p in problems)
    assert any("'initial_k' must be number" in p for p in problems)
    assert validate_input(s, [1]) == ["input must be a JSON object"]


def test_types_are_strict():
    s = spec(schema={"i": Field("integer"), "n": Field("number"), "b": Field("boolean")})
    assert validate_input(s, {"i": 1, "n": 1.5, "b": False}) == []
    assert len(validate_input(s, {"i": True, "n": True, "b": 0})) == 3
    assert len(validate_input(s, {"i": 1.0, "n": float("nan")})) == 2


def test_dispatch_outcomes():
    state = AgentState()

    def fail(inp, st):
        raise RuntimeError("kaput")

    def halt(inp, st):
        raise Halt("halted_no_equation", "nothing")

    r = ToolRegistry([spec("ok"), spec("aux", executor=fail), spec("ess", "essential", fail),
                      spec("stop", "essential", halt)])
    res = r.dispatch("ok", {"n": 2}, state)
    assert (res.outcome, res.criticality, res.observation) == ("ok", "auxiliary", "got {'n': 2}")
    res = r.dispatch("aux", {"n": 2}, state)
    assert res.observation == "Warning: aux failed: kaput" and res.outcome == "tool_error"
    assert r.dispatch("ess", {"n": 2}, state).observation == "Error: ess failed: kaput"
    res = r.dispatch("stop", {"n": 2}, state)
    assert res.halt == "halted_no_equation"
    res = r.dispatch("nope", {}, state)
    assert res.criticality is None and "unknown tool" in res.observation
    res = r.dispatch("ok", {}, state)
    assert res.observation.startswith("Warning: invalid input for ok")


def test_invalid_input_never_runs_executor():
    calls = []
    r = ToolRegistry([spec(executor=lambda inp, st: calls.append(inp) or "x")])
    r.dispatch("t", {"n": "1"}, AgentState())
    assert calls == []


def test_fmt_num():
    assert fmt_num(38.4577) == "38.46"
    assert fmt_num(8.7102e-12) == "8.710e-12"
    assert fmt_num(0.0) == "0.000"
    assert fmt_num(12345.6) == "1.235e+04"
    assert fmt_num(None) == "n/a"


@given(st.floats(-1e300, 1e300))
def test_fmt_num_round_trips_to_four_digits(v):
    out = fmt_num(v)
    assert float(out) == pytest.approx(v, rel=1e-3, abs=0)
