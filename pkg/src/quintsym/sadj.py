"""Formal Lagrangian, Euler operators and self-adjointness."""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from math import factorial

from . import expr as E
from .expr import Expr, Jet
from .model import PDESpec
from .parse import format_expr

__all__ = [
    "Substitution", "SelfAdjointnessResult", "formal_lagrangian",
    "euler_derivative", "higher_euler", "adjoint_equation", "selfadjointness_check",
]

# headroom for the extra derivatives taken by the Euler operators
_WIDE = dict(t=3, x=14)


def formal_lagrangian(pde: PDESpec) -> Expr:
    """``L = v * delta``."""
    return E.jet("v") * pde.delta


def _dmul(e: Expr, t: int, x: int) -> Expr:
    if t:
        e = E.total_derivative(e, "t", t)
    if x:
        e = E.total_derivative(e, "x", x)
    return e


def _jets_of(e: Expr, wrt: str) -> list[Jet]:
    return e.jets(wrt)


def euler_derivative(e: Expr, wrt: str = "u") -> Expr:
    """``sum_J (-D)_J dE/d(wrt)_J`` over the jets of ``wrt`` present in ``e``."""
    out = E.ZERO
    for a in _jets_of(e, wrt):
        term = _dmul(E.partial(e, Expr.atom(a)), a.t, a.x)
        out = out + (term if (a.t + a.x) % 2 == 0 else -term)
    return out


def _multinomial(*ks: int) -> int:
    r = factorial(sum(ks))
    for k in ks:
        r //= factorial(k)
    return r


def higher_euler(e: Expr, index: tuple[int, int], wrt: str = "u") -> Expr:
    """Higher Euler operator at multi-index ``(i_t, i_x)``.

    ``sum_j (-1)^|j| [multinomial(|j|; j) / multinomial(|i+j|; i+j)] D_j d/d(wrt)_{i+j}``
    """
    it, ix = index
    out = E.ZERO
    for a in _jets_of(e, wrt):
        jt, jx = a.t - it, a.x - ix
        if jt < 0 or jx < 0:
            continue
        w = Fraction(_multinomial(jt, jx), _multinomial(a.t, a.x))
        if (jt + jx) % 2:
            w = -w
        out = out + _dmul(E.partial(e, Expr.atom(a)), jt, jx) * w
    return out


def adjoint_equation(pde: PDESpec) -> Expr:
    """``F* = delta(v * delta)/delta u``."""
    with E.jet_caps(**_WIDE):
        return euler_derivative(formal_lagrangian(pde), "u")


@dataclass
class Substitution:
    """``v = phi`` with ``phi`` a function of (x, t, u, u_x, ...)."""

    phi: Expr
    text: str = ""
    _cache: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        if self.phi.is_zero():
            raise ValueError("substitution must not vanish identically")
        if self.phi.jets("v"):
            raise ValueError("substitution may not involve v")
        if not self.text:
            self.text = format_expr(self.phi)

    def derivative(self, t: int, x: int) -> Expr:
        key = (t, x)
        hit = self._cache.get(key)
        if hit is None:
            if key == (0, 0):
                hit = self.phi
            elif x:
                hit = E.total_derivative(self.derivative(t, x - 1), "x")
            else:
                hit = E.total_derivative(self.derivative(t - 1, 0), "t")
            self._cache[key] = hit
        return hit

    def apply(self, e: Expr) -> Expr:
        """Replace every ``v_J`` by ``D_J phi``."""
        vs = e.jets("v")
        if not vs:
            return e
        return E.substitute_many(e, {a: self.derivative(a.t, a.x) for a in vs})


@dataclass(frozen=True)
class SelfAdjointnessResult:
    holds: bool
    multiplier: Expr | None
    residual: Expr
    raw: Expr

    def __bool__(self):
        return self.holds


def selfadjointness_check(pde: PDESpec, phi: Substitution) -> SelfAdjointnessResult:
    """Substitute ``v = phi`` into the adjoint equation and reduce on solutions."""
    with E.jet_caps(**_WIDE):
        raw = phi.apply(adjoint_equation(pde))
        residual = pde.eliminate(raw)
        multiplier = None
        if residual.is_zero():
            lam = E.partial(raw, E.jet("u", 1, 0))
            if (raw - lam * pde.delta).is_zero():
                multiplier = lam
    return SelfAdjointnessResult(residual.is_zero(), multiplier, residual, raw)
