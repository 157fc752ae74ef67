"""Point vector fields, prolongation, brackets and the symmetry test."""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping, Sequence

from . import expr as E
from .expr import Expr, Func, Jet, KernelError, Param, Trans, Var
from .model import PDESpec
from .parse import format_expr, parse_expr

__all__ = [
    "VectorField", "ProlongedVF", "SymmetryResult", "ClosureResult",
    "prolong", "characteristic", "lie_bracket", "eliminate_t_derivatives",
    "symmetry_check", "bracket_closure", "span_coefficients",
]

_X, _T, _U = E.var("x"), E.var("t"), E.jet("u")
_DX, _DT, _DU = Param("Dx"), Param("Dt"), Param("Du")


@dataclass(frozen=True, eq=False)
class VectorField:
    """``xi_x d/dx + xi_t d/dt + eta d/du`` with coefficients in (x, t, u)."""

    xi_x: Expr = E.ZERO
    xi_t: Expr = E.ZERO
    eta: Expr = E.ZERO

    def __post_init__(self):
        for c in (self.xi_x, self.xi_t, self.eta):
            for a in c.atoms():
                if isinstance(a, Jet) and (a.dep != "u" or a.t or a.x):
                    raise ValueError(f"point field coefficient {c} depends on {a!r}")
                if isinstance(a, Param) and a in (_DX, _DT, _DU):
                    raise ValueError("coefficient contains an operator symbol")

    @classmethod
    def parse(cls, text: str, assumptions: Mapping[str, int] | None = None) -> "VectorField":
        """Read ``"x*Dx + 5*u*Du"``-style text (linear in Dx, Dt, Du)."""
        e = parse_expr(text, assumptions)
        parts = [E.partial(e, Expr.atom(d)) for d in (_DX, _DT, _DU)]
        rest = e - parts[0] * Expr.atom(_DX) - parts[1] * Expr.atom(_DT) - parts[2] * Expr.atom(_DU)
        if not rest.is_zero() or any(p.has(lambda a: a in (_DX, _DT, _DU)) for p in parts):
            raise ValueError(f"vector field {text!r} is not linear in Dx, Dt, Du")
        return cls(*parts)

    def apply(self, f: Expr) -> Expr:
        """Action on a function of (x, t, u)."""
        return (self.xi_x * E.partial(f, _X) + self.xi_t * E.partial(f, _T)
                + self.eta * E.partial(f, _U))

    def components(self) -> tuple[Expr, Expr, Expr]:
        return self.xi_x, self.xi_t, self.eta

    def __add__(self, other: "VectorField") -> "VectorField":
        return VectorField(*(a + b for a, b in zip(self.components(), other.components())))

    def __sub__(self, other: "VectorField") -> "VectorField":
        return VectorField(*(a - b for a, b in zip(self.components(), other.components())))

    def scale(self, c) -> "VectorField":
        c = E._as_expr(c)
        return VectorField(*(c * a for a in self.components()))

    def is_zero(self) -> bool:
        return all(a.is_zero() for a in self.components())

    def __eq__(self, other):
        return isinstance(other, VectorField) and self.components() == other.components()

    __hash__ = None

    def __str__(self):
        parts = []
        for c, d in zip(self.components(), ("Dx", "Dt", "Du")):
            if c.is_zero():
                continue
            s = format_expr(c)
            if c == E.ONE:
                parts.append(d)
            elif c == -E.ONE:
                parts.append("-" + d)
            else:
                parts.append(f"({s})*{d}" if len(c) > 1 else f"{s}*{d}")
        return " + ".join(parts).replace("+ -", "- ") if parts else "0"

    __repr__ = lambda self: f"VectorField({str(self)!r})"


def characteristic(vf: VectorField) -> Expr:
    """``W = eta - xi_x u_x - xi_t u_t``."""
    return vf.eta - vf.xi_x * E.jet("u", 0, 1) - vf.xi_t * E.jet("u", 1, 0)


@dataclass
class ProlongedVF:
    """Prolongation coefficients ``eta^J`` keyed by ``(t_order, x_order)``."""

    base: VectorField
    coeffs: dict = field(default_factory=dict)

    def coefficient(self, t: int, x: int) -> Expr:
        key = (t, x)
        hit = self.coeffs.get(key)
        if hit is not None:
            return hit
        if key == (0, 0):
            r = self.base.eta
        elif x > 0:
            r = _prolong_step(self, t, x - 1, "x")
        else:
            r = _prolong_step(self, t - 1, x, "t")
        self.coeffs[key] = r
        return r

    def apply(self, f: Expr) -> Expr:
        """``pr X(f)`` for ``f`` in (x, t, u-jets)."""
        vf = self.base
        out = vf.xi_x * E.partial(f, _X) + vf.xi_t * E.partial(f, _T)
        for a in f.jets("u"):
            out = out + self.coefficient(a.t, a.x) * E.partial(f, Expr.atom(a))
        return out


def _prolong_step(p: ProlongedVF, t: int, x: int, i: str) -> Expr:
    # eta^{J,i} = D_i eta^J - u_{J,x} D_i xi_x - u_{J,t} D_i xi_t
    prev = p.coefficient(t, x)
    vf = p.base
    r = E.total_derivative(prev, i)
    dxi_x = E.total_derivative(vf.xi_x, i)
    dxi_t = E.total_derivative(vf.xi_t, i)
    if not dxi_x.is_zero():
        r = r - E.jet("u", t, x + 1) * dxi_x
    if not dxi_t.is_zero():
        r = r - E.jet("u", t + 1, x) * dxi_t
    return r


def prolong(vf: VectorField, order_t: int, order_x: int) -> ProlongedVF:
    """All prolongation coefficients up to the given orders (caps apply)."""
    p = ProlongedVF(vf)
    for t in range(order_t + 1):
        for x in range(order_x + 1):
            p.coefficient(t, x)
    return p


def lie_bracket(a: VectorField, b: VectorField) -> VectorField:
    """``[a, b] = a(b) - b(a)`` componentwise."""
    return VectorField(*(a.apply(cb) - b.apply(ca) for ca, cb in zip(a.components(), b.components())))


def eliminate_t_derivatives(e: Expr, pde: PDESpec) -> Expr:
    """Rewrite every ``u_{t^a x^b}`` with ``a > 0`` through the equation."""
    return pde.eliminate(e)


@dataclass(frozen=True)
class SymmetryResult:
    holds: bool
    residual: Expr
    raw: Expr

    def __bool__(self):
        return self.holds


def symmetry_check(vf: VectorField, pde: PDESpec) -> SymmetryResult:
    """Apply ``pr X`` to the equation and reduce on its solutions.

    ``raw`` is ``pr X(delta)`` before elimination.
    """
    ct, cx = E.get_caps()
    order = max((a.x for a in pde.delta.jets("u")), default=0)
    with E.jet_caps(t=max(ct, 2), x=max(cx, 2 * order + 2)):
        raw = ProlongedVF(vf).apply(pde.delta)
        residual = pde.eliminate(raw)
    return SymmetryResult(residual.is_zero(), residual, raw)


# --------------------------------------------------------------------------
# span membership and structure constants

def _depends(a) -> bool:
    if isinstance(a, (Var, Jet)):
        return True
    if isinstance(a, (Trans, Func)):
        return a.arg.has(lambda b: isinstance(b, (Var, Jet)))
    return False


def _is_invertible(c: Expr) -> bool:
    if len(c) != 1:
        return False
    try:
        E.invert(c)
    except KernelError:
        return False
    return True


def span_coefficients(target: VectorField, basis: Sequence[VectorField]) -> list[Expr] | None:
    """Constants ``c_k`` with ``target = sum c_k basis_k``, or None if outside the span.

    Coefficients may involve parameters but not x, t or u.  The linear
    system is solved by elimination with monomial pivots and the answer is
    re-checked exactly.
    """
    n = len(basis)
    rows: dict[tuple, list[Expr]] = {}
    for comp in range(3):
        cols = [E.collect(b.components()[comp], _depends) for b in basis]
        rhs = E.collect(target.components()[comp], _depends)
        keys = set(rhs).union(*cols) if cols else set(rhs)
        for key in keys:
            rows[(comp, key)] = [c.get(key, E.ZERO) for c in cols] + [rhs.get(key, E.ZERO)]
    eqs = list(rows.values())
    solution: list[Expr | None] = [None] * n
    pivots = []
    for k in range(n):
        idx = next((i for i, r in enumerate(eqs) if _is_invertible(r[k])), None)
        if idx is None:
            if any(not r[k].is_zero() for r in eqs):
                # non-monomial coefficient: leave the unknown free only if it is absent
                return None
            continue
        piv = eqs.pop(idx)
        inv = E.invert(piv[k])
        piv = [c * inv for c in piv]
        eqs = [[ri - r[k] * pi for ri, pi in zip(r, piv)] if not r[k].is_zero() else r for r in eqs]
        pivots.append((k, piv))
    if any(not r[-1].is_zero() or any(not c.is_zero() for c in r[:-1]) for r in eqs):
        return None
    for k, piv in reversed(pivots):
        val = piv[-1]
        for j in range(k + 1, n):
            if not piv[j].is_zero():
                val = val - piv[j] * (solution[j] if solution[j] is not None else E.ZERO)
        solution[k] = val
    sol = [s if s is not None else E.ZERO for s in solution]
    check = VectorField()
    for c, b in zip(sol, basis):
        check = check + b.scale(c)
    if not (check - target).is_zero():
        return None
    return sol


@dataclass
class ClosureResult:
    closed: bool
    constants: dict          # (name_a, name_b) -> {name: Expr}
    failures: list           # (name_a, name_b, bracket)

    @property
    def rational(self) -> bool:
        return all(c.is_const() for d in self.constants.values() for c in d.values())


def bracket_closure(gens: Sequence[tuple[str, VectorField]]) -> ClosureResult:
    """Check that every pairwise bracket lies in the span of ``gens``."""
    names = [n for n, _ in gens]
    basis = [v for _, v in gens]
    constants, failures = {}, []
    for i in range(len(gens)):
        for j in range(i + 1, len(gens)):
            br = lie_bracket(basis[i], basis[j])
            sol = span_coefficients(br, basis)
            if sol is None:
                failures.append((names[i], names[j], br))
            else:
                constants[(names[i], names[j])] = {n: c for n, c in zip(names, sol) if not c.is_zero()}
    return ClosureResult(not failures, constants, failures)
