"""Algebraic identities of the kernel over random expressions."""
from hypothesis import given, settings

from _strategies import exprs
from quintsym import expr as E
from quintsym.parse import assumptions_of, format_expr, parse_expr
from quintsym.sadj import euler_derivative

MANY = settings(max_examples=1000, deadline=None)


@MANY
@given(exprs())
def test_normalize_is_idempotent(e):
    n = E.normalize(e)
    assert E.normalize(n) == n == e


@MANY
@given(exprs())
def test_total_derivatives_commute(e):
    dx_dt = E.total_derivative(E.total_derivative(e, "t"), "x")
    dt_dx = E.total_derivative(E.total_derivative(e, "x"), "t")
    assert dx_dt == dt_dx


@MANY
@given(exprs(max_terms=3), exprs(max_terms=3))
def test_leibniz_rule(f, g):
    for v in ("x", "t"):
        assert E.total_derivative(f * g, v) == E.total_derivative(f, v) * g + f * E.total_derivative(g, v)


@MANY
@given(exprs())
def test_euler_operator_annihilates_total_x_derivatives(e):
    assert euler_derivative(E.total_derivative(e, "x"), "u").is_zero()


@MANY
@given(exprs())
def test_parser_round_trip(e):
    assert parse_expr(format_expr(e), assumptions_of(e)) == e
