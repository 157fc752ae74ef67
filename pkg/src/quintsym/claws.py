"""Conserved vectors from the Noether identity, total-derivative tests and a
numeric jet oracle.

The oracle evaluates expressions over truncated Taylor series instead of
reusing the symbolic total derivative, so it is an independent check of
``D_t T + D_x F = 0`` on solutions.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from . import expr as E
from .expr import Expr, Func, Jet, KernelError, Param, Trans, Var
from .jets import ProlongedVF, VectorField, characteristic, symmetry_check
from .model import PDESpec
from .sadj import (Substitution, euler_derivative, formal_lagrangian, higher_euler,
                   selfadjointness_check, _multinomial)

__all__ = [
    "ConservedVector", "TotalDerivativeResult", "PreconditionError",
    "noether_flux", "noether_identity_residual", "divergence_residual",
    "total_x_derivative_test", "integrate_x", "trivial_normalize", "is_conserved_density",
    "density_ratio", "numeric_jet_residual", "evaluate", "TaylorSeries",
]

WIDE_CAPS = dict(t=3, x=14)


class PreconditionError(ValueError):
    """noether_flux called on a triple that is not verified."""


@dataclass
class ConservedVector:
    T: Expr
    F: Expr
    provenance: dict = field(default_factory=dict)
    verified: bool = False

    def __str__(self):
        return f"T = {self.T}\nF = {self.F}"


# --------------------------------------------------------------------------
# Noether operator identity

def _flux_component(L: Expr, W: Expr, xi: Expr, k: str) -> Expr:
    """``xi^k L + sum_I multinomial(|I|; I) D_I(W) delta*L/delta*u_{k+I}``."""
    dk = (1, 0) if k == "t" else (0, 1)
    jets = L.jets("u")
    mt = max((a.t for a in jets), default=0)
    mx = max((a.x for a in jets), default=0)
    out = xi * L
    dw_t = W
    for a in range(0, mt - dk[0] + 1):
        dw = dw_t
        for b in range(0, mx - dk[1] + 1):
            h = higher_euler(L, (a + dk[0], b + dk[1]), "u")
            if not h.is_zero():
                out = out + _multinomial(a, b) * dw * h
            if b < mx - dk[1]:
                dw = E.total_derivative(dw, "x")
        if a < mt - dk[0]:
            dw_t = E.total_derivative(dw_t, "t")
    return out


def _formal_flux(pde: PDESpec, vf: VectorField) -> tuple[Expr, Expr]:
    L = formal_lagrangian(pde)
    W = characteristic(vf)
    return _flux_component(L, W, vf.xi_t, "t"), _flux_component(L, W, vf.xi_x, "x")


def noether_identity_residual(pde: PDESpec, vf: VectorField) -> Expr:
    """Residual of the operator identity with ``v`` kept formal.

    ``D_t N^t + D_x N^x - [pr X(L) + L D_i xi^i - W dL/du + xi^j v_j delta]``
    vanishes identically for a correct flux formula, whether or not ``vf``
    is a symmetry.
    """
    with E.jet_caps(**WIDE_CAPS):
        Nt, Nx = _formal_flux(pde, vf)
        L = formal_lagrangian(pde)
        W = characteristic(vf)
        div_xi = E.total_derivative(vf.xi_t, "t") + E.total_derivative(vf.xi_x, "x")
        rhs = (ProlongedVF(vf).apply(L) + L * div_xi - W * euler_derivative(L, "u")
               + (vf.xi_t * E.jet("v", 1, 0) + vf.xi_x * E.jet("v", 0, 1)) * pde.delta)
        return E.total_derivative(Nt, "t") + E.total_derivative(Nx, "x") - rhs


def noether_flux(pde: PDESpec, vf: VectorField, phi: Substitution, *, check: bool = True,
                 provenance: dict | None = None) -> ConservedVector:
    """Conserved vector for a symmetry and a self-adjointness substitution.

    ``T = N^t`` and ``F = N^x`` after ``v -> phi`` and elimination of
    t-derivatives.  With ``check`` the preconditions are verified first and
    the divergence is certified.
    """
    if check:
        if not symmetry_check(vf, pde).holds:
            raise PreconditionError(f"{vf} is not a symmetry")
        if not selfadjointness_check(pde, phi).holds:
            raise PreconditionError(f"v = {phi.text} does not make the equation self-adjoint")
    with E.jet_caps(**WIDE_CAPS):
        Nt, Nx = _formal_flux(pde, vf)
        T = pde.eliminate(phi.apply(Nt))
        F = pde.eliminate(phi.apply(Nx))
    cv = ConservedVector(T, F, dict(provenance or {}, generator=str(vf), phi=phi.text))
    if check:
        cv.verified = divergence_residual(cv, pde).is_zero()
    return cv


def divergence_residual(cv: ConservedVector, pde: PDESpec) -> Expr:
    """``D_t T + D_x F`` on solutions."""
    with E.jet_caps(**WIDE_CAPS):
        return pde.eliminate(E.total_derivative(cv.T, "t") + E.total_derivative(cv.F, "x"))


def is_conserved_density(T: Expr, pde: PDESpec) -> bool:
    """``T`` is a conserved density iff ``d/du[D_t T on solutions]`` vanishes."""
    with E.jet_caps(**WIDE_CAPS):
        return euler_derivative(pde.eliminate(E.total_derivative(T, "t")), "u").is_zero()


# --------------------------------------------------------------------------
# integration by parts in x

def _order(mono) -> int:
    best = -1
    for a, _ in mono:
        if isinstance(a, Jet):
            best = max(best, a.x)
        elif isinstance(a, (Trans, Func)):
            for b in a.arg.atoms():
                if isinstance(b, Jet):
                    best = max(best, b.x)
    return best


_LN_U = Trans("ln", E.jet("u"))


def _integrate_power(var: Jet, a, b: int) -> Expr | None:
    """``int var^a ln(var)^b d var``; logarithms only occur for ``var = u``."""
    if b and var.x != 0:
        return None
    if type(a) is int and a == -1:
        return Expr.atom(_LN_U, b + 1) * Fraction(1, b + 1) if var.x == 0 else None
    a1 = E._eadd(a, 1)
    if not var.invertible and (type(a1) is not int or a1 < 0):
        return None
    try:
        inv = E.invert(E._as_expr(a1))
    except KernelError:
        return None
    head = Expr.atom(var, a1) * inv
    if not b:
        return head
    rest = _integrate_power(var, a, b - 1)
    if rest is None:
        return None
    return head * Expr.atom(_LN_U, b) - rest * inv * b


def _integrate_in(g: Expr, var: Jet) -> Expr | None:
    """Antiderivative of ``g`` in the jet coordinate ``var`` (others held fixed)."""
    out = E.ZERO
    for mono, c in g._t.items():
        a, b = 0, 0
        rest = []
        for atom, k in mono:
            if atom is var:
                a = k
            elif atom is _LN_U and var.x == 0:
                if type(k) is not int or k < 0:
                    return None
                b = k
            else:
                if isinstance(atom, (Trans, Func)) and atom.arg.has(lambda z: z is var):
                    return None
                rest.append((atom, k))
        piece = _integrate_power(var, a, b)
        if piece is None:
            return None
        out = out + Expr(dict(E._canon(dict(rest)))) * c * piece
    return out


def _integrate_x_pure(term: Expr) -> Expr | None:
    # term free of u: handle c * x^n
    (mono, c), = term._t.items()
    n, rest = 0, []
    for a, k in mono:
        if isinstance(a, Var) and a.name == "x":
            n = k
        elif isinstance(a, Var) or (isinstance(a, (Trans, Func)) and a.arg.has(lambda z: isinstance(z, Var))):
            return None
        else:
            rest.append((a, k))
    if type(n) is int and n == -1:
        return None
    n1 = E._eadd(n, 1)
    try:
        inv = E.invert(E._as_expr(n1))
    except KernelError:
        return None
    return Expr(dict(E._canon(dict(rest)))) * c * E.var("x") ** n1 * inv


def _reduce(e: Expr, full: bool, max_steps: int = 10_000):
    """Integrate by parts on the top jet of each term.

    Returns ``(S, rem)`` with ``e = D_x S + rem``.  With ``full`` the
    remainder must vanish (returns None on failure); otherwise terms that
    cannot be lowered are kept in the remainder.
    """
    S = E.ZERO
    rem = e
    stuck: dict = {}
    for _ in range(max_steps):
        todo = [(m, c) for m, c in rem._t.items() if m not in stuck]
        if not todo:
            break
        mono, c = max(todo, key=lambda mc: (_order(mc[0]), E._mono_key(mc[0])))
        term = Expr({mono: c})
        k = _order(mono)
        G = None
        if k < 0:
            G = _integrate_x_pure(term)
        elif k >= 1:
            top = Jet("u", 0, k)
            power = dict(mono).get(top)
            inside = any(isinstance(a, (Trans, Func)) and a.arg.has(lambda z: z is top) for a, _ in mono)
            if power == 1 and not inside:
                g = E.partial(term, Expr.atom(top))
                G = _integrate_in(g, Jet("u", 0, k - 1))
        if G is None:
            if full:
                return None
            stuck[mono] = c
            continue
        S = S + G
        rem = rem - E.total_derivative(G, "x")
    else:
        raise RuntimeError("integration by parts did not terminate")
    return S, rem


def integrate_x(e: Expr) -> Expr | None:
    """``Lambda`` with ``D_x Lambda = e``, or None if the construction gives up."""
    with E.jet_caps(**WIDE_CAPS):
        out = _reduce(e, full=True)
        if out is None:
            return None
        S, rem = out
        if not rem.is_zero() or not (E.total_derivative(S, "x") - e).is_zero():
            return None
        return S


@dataclass(frozen=True)
class TotalDerivativeResult:
    is_total: bool
    antiderivative: Expr | None

    def __bool__(self):
        return self.is_total


def total_x_derivative_test(e: Expr) -> TotalDerivativeResult:
    """Decide whether ``e`` is ``D_x`` of something and build the antiderivative."""
    if any(a.t for a in e.jets()):
        raise ValueError("expression contains t-derivatives")
    with E.jet_caps(**WIDE_CAPS):
        if e.has(lambda a: isinstance(a, Var) and a.name == "x"):
            # the Euler operator alone misses explicit x; rely on the construction
            lam = integrate_x(e)
            return TotalDerivativeResult(lam is not None, lam)
        if not euler_derivative(e, "u").is_zero():
            return TotalDerivativeResult(False, None)
        return TotalDerivativeResult(True, integrate_x(e))


def trivial_normalize(cv: ConservedVector, pde: PDESpec | None = None) -> ConservedVector:
    """Strip total x-derivatives from the density.

    ``T' = T - D_x S`` and ``F' = F + D_t S`` (reduced on solutions when
    ``pde`` is given), so the divergence is unchanged.
    """
    with E.jet_caps(**WIDE_CAPS):
        S, T = _reduce(cv.T, full=False)
        F = cv.F + E.total_derivative(S, "t")
        if pde is not None:
            F = pde.eliminate(F)
    return ConservedVector(T, F, dict(cv.provenance), cv.verified)


def density_ratio(T1: Expr, T2: Expr) -> Expr | None:
    """Constant ``c`` with ``T1 = c * T2`` (after normalization), else None."""
    if T1.is_zero() or T2.is_zero():
        return E.ONE if T1.is_zero() and T2.is_zero() else None
    m, c2 = next(T2.terms())
    c1 = T1._t.get(m)
    if c1 is None:
        return None
    ratio = E.const(c1 / c2)
    return ratio if (T1 - ratio * T2).is_zero() else None


# --------------------------------------------------------------------------
# numeric jet oracle

class TaylorSeries:
    """Truncated power series ``sum_k c_k s^k`` (coefficients, not derivatives)."""

    __slots__ = ("c",)

    def __init__(self, c):
        self.c = np.asarray(c, dtype=float)

    @property
    def n(self):
        return len(self.c)

    @classmethod
    def const(cls, v, n):
        c = np.zeros(n)
        c[0] = v
        return cls(c)

    def _lift(self, o):
        return o if isinstance(o, TaylorSeries) else TaylorSeries.const(o, self.n)

    def __add__(self, o):
        return TaylorSeries(self.c + self._lift(o).c)

    __radd__ = __add__

    def __neg__(self):
        return TaylorSeries(-self.c)

    def __sub__(self, o):
        return TaylorSeries(self.c - self._lift(o).c)

    def __mul__(self, o):
        if not isinstance(o, TaylorSeries):
            return TaylorSeries(self.c * o)
        return TaylorSeries(np.convolve(self.c, o.c)[: self.n])

    __rmul__ = __mul__

    def reciprocal(self):
        a = self.c
        if a[0] == 0:
            raise ZeroDivisionError("series with zero constant term")
        b = np.zeros(self.n)
        b[0] = 1 / a[0]
        for k in range(1, self.n):
            b[k] = -np.dot(a[1: k + 1], b[k - 1:: -1][:k]) / a[0]
        return TaylorSeries(b)

    def deriv(self):
        """Series of d/ds."""
        k = np.arange(1, self.n)
        return TaylorSeries(np.append(self.c[1:] * k, 0.0))

    def integ(self, c0):
        k = np.arange(1, self.n)
        return TaylorSeries(np.concatenate(([c0], self.c[:-1] / k)))

    def exp(self):
        # y' = y a'
        a = self.c
        y = np.zeros(self.n)
        y[0] = math.exp(a[0])
        da = a[1:] * np.arange(1, self.n)
        for k in range(1, self.n):
            y[k] = np.dot(da[:k], y[k - 1:: -1][:k]) / k
        return TaylorSeries(y)

    def log(self):
        if self.c[0] <= 0:
            raise ValueError("log of a non-positive series")
        return (self.deriv() * self.reciprocal()).integ(math.log(self.c[0]))

    def sin_cos(self):
        a = self.c
        s, co = np.zeros(self.n), np.zeros(self.n)
        s[0], co[0] = math.sin(a[0]), math.cos(a[0])
        da = a[1:] * np.arange(1, self.n)
        for k in range(1, self.n):
            s[k] = np.dot(da[:k], co[k - 1:: -1][:k]) / k
            co[k] = -np.dot(da[:k], s[k - 1:: -1][:k]) / k
        return TaylorSeries(s), TaylorSeries(co)

    def __pow__(self, k):
        if isinstance(k, int):
            if k < 0:
                return self.reciprocal() ** (-k)
            out = TaylorSeries.const(1.0, self.n)
            base = self
            while k:
                if k & 1:
                    out = out * base
                base = base * base
                k >>= 1
            return out
        return (self.log() * float(k)).exp()


def _fn_series(fn: str, x: TaylorSeries) -> TaylorSeries:
    if fn == "exp":
        return x.exp()
    if fn == "ln":
        return x.log()
    if fn == "sqrt":
        return x ** 0.5
    s, c = x.sin_cos()
    return s if fn == "sin" else c


def _exponent_value(k, env) -> float | int:
    if type(k) is int:
        return k
    v = evaluate(k, env, n=1)
    return float(v.c[0])


def evaluate(e: Expr, env: dict, n: int = 1, funcs: dict | None = None) -> TaylorSeries:
    """Evaluate ``e`` with atoms mapped to series (or floats) by ``env``.

    ``env`` maps Jet/Var atoms to TaylorSeries and parameter names to floats.
    ``funcs`` maps unknown-function names to ``f(order, series) -> series``.
    """
    total = TaylorSeries.const(0.0, n)
    cache: dict = {}

    def atom_value(a):
        if a in cache:
            return cache[a]
        if isinstance(a, Param):
            try:
                v = TaylorSeries.const(env[a.name], n)
            except KeyError:
                raise KeyError(f"no numeric value for parameter {a.name!r}") from None
        elif isinstance(a, (Jet, Var)):
            v = env[a]
            if not isinstance(v, TaylorSeries):
                v = TaylorSeries.const(v, n)
        elif isinstance(a, Trans):
            v = _fn_series(a.fn, evaluate(a.arg, env, n, funcs))
        elif isinstance(a, Func):
            if not funcs or a.name not in funcs:
                raise KeyError(f"no numeric value for function {a.name!r}")
            v = funcs[a.name](a.order, evaluate(a.arg, env, n, funcs))
        else:  # pragma: no cover
            raise TypeError(a)
        cache[a] = v
        return v

    for mono, c in e._t.items():
        term = TaylorSeries.const(float(c), n)
        for a, k in mono:
            term = term * (atom_value(a) ** _exponent_value(k, env))
        total = total + term
    return total


def _needs_positive_u(*es: Expr) -> bool:
    def bad(a):
        return (isinstance(a, Trans) and a.fn in ("ln", "sqrt")) or False
    for e in es:
        for mono in e._t:
            for a, k in mono:
                if isinstance(a, Jet) and a.dep == "u" and a.x == 0 and (type(k) is not int or k < 0):
                    return True
        if e.has(bad):
            return True
    return False


def sample_params(names, rng, assumptions=None) -> dict[str, float]:
    assumptions = assumptions or {}
    return {n: rng.uniform(0.5, 1.5) * (-1 if assumptions.get(n, 0) < 0 else 1) for n in names}


def numeric_jet_residual(cv: ConservedVector, pde: PDESpec, samples: int = 100, seed: int = 0,
                         params: dict | None = None, depth: int = 24) -> float:
    """Max ``|D_t T + D_x F|`` over random jets on the solution manifold.

    Each sample draws a random Taylor polynomial ``U0`` at a random point;
    ``D_x`` is taken by first-order series propagation and the t-derivatives
    of the jets come from the series of the right-hand side of the equation.
    """
    if cv.T.is_zero() and cv.F.is_zero():
        return 0.0
    rng = np.random.default_rng(seed)
    names = sorted({a.name for e in (cv.T, cv.F, pde.delta) for a in e.atoms() if isinstance(a, Param)})
    sign = {a.name: a.sign for e in (cv.T, cv.F, pde.delta) for a in e.atoms() if isinstance(a, Param)}
    positive = _needs_positive_u(cv.T, cv.F, pde.delta)
    x_atom, t_atom = Var("x"), Var("t")
    rhs = pde.rhs
    k_t = max((a.x for a in cv.T.jets("u")), default=0)
    k_f = max((a.x for a in cv.F.jets("u")), default=0)
    if any(a.t for e in (cv.T, cv.F) for a in e.jets("u")):
        raise ValueError("conserved vector still contains t-derivatives")
    worst = 0.0
    for _ in range(samples):
        env: dict = sample_params(names, rng, sign)
        if params:
            env.update(params)
        a = rng.uniform(-1.0, 1.0, depth)
        if positive:
            a[0] = rng.uniform(0.5, 1.5)
        x0, t0 = rng.uniform(0.5, 1.5, 2)

        def jet_series(j, n):
            # Taylor coefficients of U0^{(j)}(x0 + s)
            c = np.zeros(n)
            for i in range(n):
                if i + j < depth:
                    c[i] = a[i + j] / math.factorial(i)
            return TaylorSeries(c)

        # D_x F with dual numbers
        envx = dict(env)
        envx[x_atom] = TaylorSeries([x0, 1.0])
        envx[t_atom] = TaylorSeries([t0, 0.0])
        for j in range(k_f + 1):
            envx[Jet("u", 0, j)] = TaylorSeries([a[j], a[j + 1]])
        dF = evaluate(cv.F, envx, 2).c[1]
        # u_{t, jx} = D_x^j RHS from the series of RHS(U0)
        n = k_t + 1
        envr = dict(env)
        xs = np.zeros(n)
        xs[0] = x0
        if n > 1:
            xs[1] = 1.0
        envr[x_atom] = TaylorSeries(xs)
        envr[t_atom] = TaylorSeries.const(t0, n)
        for j in range(max((b.x for b in rhs.jets("u")), default=0) + 1):
            envr[Jet("u", 0, j)] = jet_series(j, n)
        rs = evaluate(rhs, envr, n).c
        envt = dict(env)
        envt[x_atom] = TaylorSeries([x0, 0.0])
        envt[t_atom] = TaylorSeries([t0, 1.0])
        for j in range(k_t + 1):
            envt[Jet("u", 0, j)] = TaylorSeries([a[j], rs[j] * math.factorial(j)])
        dT = evaluate(cv.T, envt, 2).c[1]
        worst = max(worst, abs(dT + dF))
    return worst
