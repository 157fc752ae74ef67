"""Similarity ansatze: invariance under a generator and reduction to an ODE."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

from . import expr as E
from .expr import Expr, Func, Jet, KernelError, Param, Trans, Var
from .jets import VectorField
from .model import PDESpec
from .parse import parse_expr

__all__ = ["Ansatz", "ReducedODE", "ReductionError", "invariance_check", "reduce_to_ode",
           "constant_solution_check"]


class ReductionError(ValueError):
    """The substituted equation is not a function of the similarity variable."""


_X, _T = Var("x"), Var("t")
_Z = E.var("z")


@dataclass(frozen=True, eq=False)
class Ansatz:
    """``u = G(x, t, phi(zeta))`` plus a chart ``{x: ..., t: ...}`` in terms of ``z``.

    The chart picks one point on every level set of ``zeta`` so that a
    function of ``zeta`` can be written as a function of ``z``.
    """

    G: Expr
    zeta: Expr
    chart: Mapping[str, Expr] = field(default_factory=dict)
    func: str = "phi"

    def __post_init__(self):
        if not self.zeta.has(lambda a: isinstance(a, Var) and a.name in ("x", "t")):
            raise ValueError("similarity variable must depend on x or t")
        if self.G.jets():
            raise ValueError("ansatz must not contain jet variables")

    @classmethod
    def parse(cls, form: str, zeta: str, chart: Mapping[str, str] | None = None,
              assumptions=None, func: str = "phi") -> "Ansatz":
        ch = {k: parse_expr(v, assumptions) for k, v in (chart or {}).items()}
        return cls(parse_expr(form, assumptions), parse_expr(zeta, assumptions), ch, func)

    def derivative(self, t: int, x: int) -> Expr:
        e = self.G
        if t:
            e = E.total_derivative(e, "t", t)
        if x:
            e = E.total_derivative(e, "x", x)
        return e


@dataclass(frozen=True)
class ReducedODE:
    residual: Expr       # in z, phi(z), phi'(z), ...
    prefactor: Expr      # in x, t
    zeta: Expr

    def __str__(self):
        return f"{self.residual} = 0"


def invariance_check(ansatz: Ansatz, vf: VectorField) -> bool:
    """``eta - xi_x G_x - xi_t G_t`` vanishes on ``u = G``."""
    on = {Jet("u", 0, 0): ansatz.G}
    w = (E.substitute_many(vf.eta, on)
         - E.substitute_many(vf.xi_x, on) * ansatz.derivative(0, 1)
         - E.substitute_many(vf.xi_t, on) * ansatz.derivative(1, 0))
    return w.is_zero()


def _substitute_ansatz(pde: PDESpec, ansatz: Ansatz) -> Expr:
    mapping = {a: ansatz.derivative(a.t, a.x) for a in pde.delta.jets("u")}
    return E.substitute_many(pde.delta, mapping)


def _candidates(e: Expr):
    seen = []
    for mono, _ in e.terms():
        p = tuple((a, k) for a, k in mono
                  if isinstance(a, Var) or (isinstance(a, Trans) and a.fn == "exp"
                                            and a.arg.has(lambda b: isinstance(b, Var))))
        if p not in seen:
            seen.append(p)
    # the trivial prefactor last: it only works when nothing needs dividing out
    seen.sort(key=lambda p: not p)
    return seen


def _along_orbit(e: Expr, zeta: Expr) -> Expr:
    # V = zeta_t d/dx - zeta_x d/dt annihilates exactly the functions of zeta
    zt = E.total_derivative(zeta, "t")
    zx = E.total_derivative(zeta, "x")
    return zt * E.total_derivative(e, "x") - zx * E.total_derivative(e, "t")


def reduce_to_ode(pde: PDESpec, ansatz: Ansatz) -> ReducedODE:
    """Substitute the ansatz, divide out an (x, t) prefactor, express in ``z``."""
    sub = _substitute_ansatz(pde, ansatz)
    if sub.is_zero():
        return ReducedODE(E.ZERO, E.ONE, ansatz.zeta)
    chart = {Var(k): v for k, v in ansatz.chart.items()}
    if not chart:
        raise ReductionError("ansatz has no chart for the similarity variable")
    z_of_chart = E.substitute_many(ansatz.zeta, chart)
    if z_of_chart != _Z:
        raise ReductionError(f"chart maps zeta to {z_of_chart}, not z")
    for mono in _candidates(sub):
        pre = Expr(dict(E._canon(dict(mono)))) if mono else E.ONE
        try:
            ratio = sub * E.invert(pre)
        except KernelError:
            continue
        if not _along_orbit(ratio, ansatz.zeta).is_zero():
            continue
        residual = E.substitute_many(ratio, chart)
        if residual.has(lambda a: isinstance(a, Var) and a.name in ("x", "t")):
            continue
        return ReducedODE(residual, pre, ansatz.zeta)
    raise ReductionError("substituted equation is not a function of the similarity variable")


def constant_solution_check(pde: PDESpec) -> bool:
    """Constant functions solve the equation."""
    c = E.param("c_const")
    return E.substitute_many(pde.delta, {a: (c if a.x == 0 and a.t == 0 else E.ZERO)
                                         for a in pde.delta.jets("u")}).is_zero()
