"""Random expressions for property tests.

Kept inside the default jet caps: up to u_2x and u_t, so that a D_x D_t
round plus an Euler operator stays representable.
"""
from fractions import Fraction

from hypothesis import strategies as st

from quintsym import expr as E

_U = E.jet("u")
LEAVES = [
    _U, E.jet("u", 0, 1), E.jet("u", 0, 2), E.jet("u", 1, 0),
    E.var("x"), E.var("t"), E.param("a"), E.param("b", 1),
]

rationals = st.builds(Fraction, st.integers(-6, 6), st.integers(1, 4))


@st.composite
def monomials(draw):
    e = E.const(draw(rationals.filter(bool)))
    for leaf in draw(st.lists(st.sampled_from(LEAVES), max_size=3)):
        e = e * leaf
    # negative powers only on atoms that allow them
    if draw(st.booleans()):
        e = e * _U ** draw(st.sampled_from([-2, -1, 2, 3]))
    if draw(st.booleans()):
        e = e * E.param("b", 1) ** draw(st.sampled_from([-1, Fraction(1, 2), 2]))
    return e


@st.composite
def transcendental(draw):
    arg = draw(st.sampled_from([E.var("x"), E.param("a") * E.var("x"), _U, E.var("t") + E.var("x")]))
    kind = draw(st.sampled_from(["exp", "sin", "cos", "ln"]))
    if kind == "ln":
        return E.ln(_U)
    return getattr(E, kind)(arg)


@st.composite
def exprs(draw, max_terms=4):
    out = E.ZERO
    for _ in range(draw(st.integers(1, max_terms))):
        term = draw(monomials())
        if draw(st.integers(0, 3)) == 0:
            term = term * draw(transcendental())
        out = out + term
    return out
