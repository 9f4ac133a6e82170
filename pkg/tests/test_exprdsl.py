import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from exprgen import expressions, random_expr, richardson
from folicheck.errors import DomainError, ExprSyntaxError, UnboundName, UnknownFunction
from folicheck.exprdsl import Env, Name, Neg, Bin, Pow, eval_dual, evaluate, parse, to_string


def test_evaluate_examples():
    assert evaluate(parse("q*t"), {"t": 0.5, "q": 3}) == pytest.approx(1.5)
    assert evaluate(parse("sin(2*pi*t)"), {"t": 0.25}) == pytest.approx(1.0)
    assert evaluate(parse("(pi/2)*cos(pi*t)"), {"t": 0.0}) == pytest.approx(math.pi / 2)


def test_dual_examples():
    v, g = eval_dual(parse("p*t"), Env({"t": (0.3, [1.0])}, {"p": 2}))
    assert v == pytest.approx(0.6) and g[0] == pytest.approx(2.0)
    v, g = eval_dual(parse("sin(2*pi*t)"), Env({"t": (0.0, [1.0])}, {}))
    assert v == pytest.approx(0.0) and g[0] == pytest.approx(2 * math.pi)
    v, g = eval_dual(parse("(pi/2)*cos(pi*t)"), Env({"t": (0.0, [1.0])}, {}))
    assert v == pytest.approx(math.pi / 2) and g[0] == pytest.approx(0.0, abs=1e-15)


def test_precedence_and_associativity():
    assert parse("-x^2") == Neg(Pow(Name("x"), 2))
    assert parse("a - b - c") == Bin("-", Bin("-", Name("a"), Name("b")), Name("c"))
    assert evaluate(parse("2^3^2"), {}) == 64
    assert evaluate(parse("1 + 2*3"), {}) == 7
    assert parse(" sin( t )*2 ") == parse("sin(t)*2")


def test_syntax_error_location():
    with pytest.raises(ExprSyntaxError) as err:
        parse("1 + * 2")
    assert err.value.offset == 4
    assert err.value.expected
    with pytest.raises(ExprSyntaxError):
        parse("x^1.5")
    with pytest.raises(ExprSyntaxError):
        parse("(t + 1")


def test_unknown_function():
    with pytest.raises(UnknownFunction) as err:
        parse("tan(t)")
    assert err.value.offset == 0


def test_unbound_name():
    with pytest.raises(UnboundName):
        evaluate(parse("t + k"), {"t": 1.0})


@pytest.mark.parametrize("text", ["1/(t-t)", "sqrt(t-2)", "t^0"])
def test_domain_errors(text):
    with pytest.raises(DomainError):
        evaluate(parse(text), {"t": 0.0})


def test_array_evaluation_matches_scalar():
    e = parse("3*sin(2*pi*t) + t^2")
    ts = np.linspace(0, 1, 7)
    vec = evaluate(e, {"t": ts})
    assert np.allclose(vec, [evaluate(e, {"t": t}) for t in ts])


def test_dual_derivatives_against_richardson():
    for e, p in expressions(200, seed=7):
        env = Env({"t": (p["t"], [1.0, 0.0]), "a": (p["a"], [0.0, 1.0])}, {})
        _, g = eval_dual(e, env)
        for i, var in enumerate(("t", "a")):
            fd = richardson(lambda x: evaluate(e, {**p, var: x}), p[var])
            assert abs(g[i] - fd) <= 1e-6 * (1 + abs(g[i])), to_string(e)


@settings(max_examples=300, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_print_parse_round_trip(seed):
    e = random_expr(np.random.default_rng(seed))
    assert parse(to_string(e)) == e


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(-1, 1), st.floats(-1, 1))
def test_dual_value_equals_plain_value(seed, t, a):
    e = random_expr(np.random.default_rng(seed))
    v, _ = eval_dual(e, Env({"t": (t, [1.0, 0.0]), "a": (a, [0.0, 1.0])}, {}))
    assert v == pytest.approx(evaluate(e, {"t": t, "a": a}), rel=1e-12, abs=1e-12)
