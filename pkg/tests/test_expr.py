from fractions import Fraction

import pytest
import sympy as sp

from quintsym import expr as E
from quintsym.expr import Jet, JetOrderError, KernelError, Param, Trans, Var
from quintsym.parse import parse_expr as P
from quintsym.sadj import euler_derivative

u, ux, uxx, ut = E.jet("u"), E.jet("u", 0, 1), E.jet("u", 0, 2), E.jet("u", 1, 0)
x, t = E.var("x"), E.var("t")


def test_atoms_are_interned():
    assert Jet("u", 0, 2) is Jet("u", 0, 2)
    assert Param("a", 1) is not Param("a")
    assert Var("x") is Var("x")


def test_like_terms_combine_and_cancel():
    assert (u * ux + 2 * ux * u).is_zero() is False
    assert u * ux + 2 * ux * u == 3 * u * ux
    assert (u - u).is_zero()
    assert len(u + ux + u) == 2


def test_power_rules():
    assert u ** 2 * u ** -2 == E.ONE
    assert (u * ux) ** 2 == u ** 2 * ux ** 2
    with pytest.raises(KernelError):
        ux ** -1  # derivatives are not assumed nonzero


def test_symbolic_exponents_merge():
    a = E.param("a")
    assert u ** a * u == P("u^(a + 1)")
    assert u ** (a - 1) * u == u ** a


def test_transcendental_rules():
    assert E.ln(E.exp(x)) == x
    assert E.ln(E.ONE).is_zero()
    assert E.exp(E.ZERO) == E.ONE
    assert E.exp(x) * E.exp(-x) == E.ONE
    assert E.sin(-x) == -E.sin(x)
    assert E.cos(-x) == E.cos(x)
    assert E.sqrt(E.const(Fraction(9, 4))) == E.const(Fraction(3, 2))


def test_sqrt_of_positive_parameter():
    k = E.param("k", 1)
    assert E.sqrt(k) ** 2 == k
    assert E.sign_of(E.sqrt(k)) == 1
    assert E.sign_of(-k) == -1


def test_invert():
    b = E.param("b", 1)
    assert E.invert(2 * b * u) == Fraction(1, 2) * b ** -1 * u ** -1
    with pytest.raises(KernelError):
        E.invert(u + 1)


def test_total_derivative_examples():
    assert E.total_derivative(u ** 2, "x") == 2 * u * ux
    assert E.total_derivative(x * u, "x") == u + x * ux
    assert E.total_derivative(E.ln(u), "x") == ux * u ** -1
    assert E.total_derivative(E.sin(x), "x", 2) == -E.sin(x)
    assert E.total_derivative(t * ux, "t") == ux + t * E.jet("u", 1, 1)


def test_function_chain_rule():
    phi = E.func("phi", x - t)
    assert E.total_derivative(phi, "t") == -E.func("phi", x - t, 1)
    assert E.total_derivative(phi, "x", 2) == E.func("phi", x - t, 2)


def test_jet_caps():
    with E.jet_caps(x=3):
        with pytest.raises(JetOrderError):
            E.total_derivative(E.jet("u", 0, 3), "x")
    assert E.get_caps() == (2, 8)


def test_partial_and_substitute():
    e = u ** 2 * uxx + x * ux
    assert E.partial(e, u) == 2 * u * uxx
    assert E.partial(e, x) == ux
    assert E.substitute_many(e, {Jet("u", 0, 0): x}) == x ** 2 * uxx + x * ux


def test_collect():
    a = E.param("a")
    e = a * u * ux + 3 * u * ux + a * ux
    parts = E.collect(e, lambda at: isinstance(at, Jet))
    assert parts[((Jet("u", 0, 0), 1), (Jet("u", 0, 1), 1))] == a + 3


# ---------------------------------------------------------------- sympy oracle

_X, _T = sp.symbols("x t")
_Uf = sp.Function("u")(_X, _T)


def to_sympy(e):
    out = 0
    for mono, c in e.terms():
        term = sp.Rational(c.numerator, c.denominator)
        for a, k in mono:
            if isinstance(a, Jet):
                base = _Uf
                if a.t:
                    base = sp.diff(base, _T, a.t)
                if a.x:
                    base = sp.diff(base, _X, a.x)
            elif isinstance(a, Var):
                base = {"x": _X, "t": _T}[a.name]
            elif isinstance(a, Param):
                base = sp.Symbol(a.name)
            elif isinstance(a, Trans):
                base = {"exp": sp.exp, "sin": sp.sin, "cos": sp.cos, "ln": sp.log,
                        "sqrt": sp.sqrt}[a.fn](to_sympy(a.arg))
            else:
                raise TypeError(a)
            kk = k if type(k) is int else to_sympy(k)
            term = term * base ** kk
        out = out + term
    return out


SAMPLES = [
    "u^2*u[2x] + a*x*u[x]^3",
    "exp(a*x)*u*u[t] - ln(u)*u[x]",
    "sin(x - t)*u^3 + u^-1*u[x]^2",
    "u^(b + 1)*u[3x] + t*u[t,x]",
]


@pytest.mark.parametrize("text", SAMPLES)
def test_total_derivative_matches_sympy(text):
    e = P(text)
    for var, sym in (("x", _X), ("t", _T)):
        ours = to_sympy(E.total_derivative(e, var))
        ref = sp.diff(to_sympy(e), sym)
        assert sp.simplify(ours - ref) == 0


@pytest.mark.parametrize("text", ["u^2*u[2x] + a*x*u[x]^3", "u^-1*u[x]^2 + sin(x)*u[3x]*u", "ln(u)*u[x]^2"])
def test_euler_operator_matches_sympy(text):
    e = P(text)
    ours = to_sympy(euler_derivative(e, "u"))
    ref = sp.euler_equations(to_sympy(e), _Uf, [_X, _T])[0].lhs
    assert sp.simplify(ours - ref) == 0
