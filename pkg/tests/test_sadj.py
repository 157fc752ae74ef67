import pytest

from quintsym import expr as E
from quintsym.model import PDESpec, instantiate_case, load_registry
from quintsym.parse import parse_expr as P
from quintsym.sadj import (Substitution, adjoint_equation, euler_derivative, formal_lagrangian,
                           higher_euler, selfadjointness_check)

KDV = PDESpec.from_rhs(P("u*u[x] + u[3x]"))


def test_euler_operator_examples():
    assert euler_derivative(P("u[x]^2/2")) == P("-u[2x]")
    assert euler_derivative(P("u^3")) == P("3*u^2")
    assert euler_derivative(P("u*u[t]")).is_zero()  # D_t(u^2/2)


def test_higher_euler_zero_index_is_euler():
    e = P("u^2*u[2x] + u[x]^3")
    assert higher_euler(e, (0, 0)) == euler_derivative(e)


def test_higher_euler_weights():
    e = P("u[2x]*u")
    # d/du_x - D_x d/du_xx ; with a single independent variable every weight is 1
    assert higher_euler(e, (0, 1)) == P("-u[x]")
    assert higher_euler(e, (0, 2)) == P("u")
    assert higher_euler(e, (0, 3)).is_zero()


def test_higher_euler_mixed_weights():
    # u_tx reached from u_x by one t-step: weight 1!/(2!/(1!1!)) = 1/2
    e = P("u*u[t,x]")
    assert higher_euler(e, (0, 1)) == P("-1/2*u[t]")
    assert higher_euler(e, (1, 0)) == P("-1/2*u[x]")
    # the leading term carries 1/multinomial(i) as well
    assert higher_euler(e, (1, 1)) == P("1/2*u")


def test_kdv_adjoint():
    # F* = -v_t + u v_x + v_3x
    assert adjoint_equation(KDV) == P("-v[t] + u*v[x] + v[3x]")
    assert formal_lagrangian(KDV) == P("v*u[t] - v*u*u[x] - v*u[3x]")


def test_kdv_strictly_self_adjoint():
    res = selfadjointness_check(KDV, Substitution(P("u")))
    assert res.holds and res.multiplier == E.const(-1)


def test_kdv_not_self_adjoint_with_u_squared():
    res = selfadjointness_check(KDV, Substitution(P("u^2")))
    assert not res.holds


def test_substitution_rules():
    with pytest.raises(ValueError):
        Substitution(E.ZERO)
    with pytest.raises(ValueError):
        Substitution(P("v"))
    s = Substitution(P("u^2"))
    assert s.derivative(0, 1) == P("2*u*u[x]")
    assert s.apply(P("v[x] + v")) == P("2*u*u[x] + u^2")


def test_table_two_quadratic_row():
    reg = load_registry()
    res = selfadjointness_check(instantiate_case(reg.find("T2-13")), reg.find("T2-13").substitution())
    assert res.holds
    assert res.multiplier == -P("c2")


def test_table_two_log_row_with_arbitrary_function():
    reg = load_registry()
    row = reg.find("T2-1")
    res = selfadjointness_check(instantiate_case(row), row.substitution())
    assert res.holds
    assert res.multiplier == -P("Phi'(u)")
