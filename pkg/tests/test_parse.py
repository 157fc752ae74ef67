import pytest

from quintsym import expr as E
from quintsym.expr import Func, Param
from quintsym.parse import ParseError, assumptions_of, format_expr, parse_expr


@pytest.mark.parametrize("text, expected", [
    ("u[x]", E.jet("u", 0, 1)),
    ("u[2x]", E.jet("u", 0, 2)),
    ("u[t,2x]", E.jet("u", 1, 2)),
    ("u[x,x,t]", E.jet("u", 1, 2)),
    ("v[3x]", E.jet("v", 0, 3)),
    ("x^2/4", E.var("x") ** 2 * E.const(1) / 4),
    ("-(a - b)", E.param("b") - E.param("a")),
])
def test_parse_examples(text, expected):
    assert parse_expr(text) == expected


def test_unknown_functions_and_derivatives():
    e = parse_expr("phi''(x - t) + psi^(5)(z)")
    funcs = {(a.name, a.order) for a in e.atoms() if isinstance(a, Func)}
    assert funcs == {("phi", 2), ("psi", 5)}


def test_assumptions_attach_signs():
    e = parse_expr("sqrt(k)*x", {"k": 1})
    assert Param("k", 1) in e.atoms()
    assert assumptions_of(e) == {"k": 1}


@pytest.mark.parametrize("bad", ["1.5*u", "u[", "u[y]", "sin", "exp'(x)", "x(u)", "u +", "2 ^ ^ 3", "(u"])
def test_malformed_input(bad):
    with pytest.raises(ParseError):
        parse_expr(bad)


def test_error_points_at_position():
    with pytest.raises(ParseError) as info:
        parse_expr("u + 1.5")
    assert "position" in str(info.value)


def test_restricted_identifiers():
    with pytest.raises(ParseError):
        parse_expr("p1*u + zz", params={"p1"})


def test_format_is_deterministic_and_round_trips():
    for text in ["2*p1*u*u[x] + p3*u*u[3x]", "exp(-lam*x)*phi(exp(-lam*x)*t)", "u^(q1/q0 - 1)", "1/2*u[2x]^2"]:
        e = parse_expr(text)
        s = format_expr(e)
        assert format_expr(parse_expr(s)) == s
        assert parse_expr(s) == e
