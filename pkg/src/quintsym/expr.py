"""Exact symbolic kernel.

Expressions are Laurent polynomials with rational coefficients over a small
set of atoms: jet coordinates of the dependent variables ``u`` and ``v``,
independent variables, parameters, unknown functions ``phi^(k)(arg)`` and
the transcendental functions exp, sin, cos, ln and sqrt.  Every ``Expr`` is
kept in canonical form, so equality of expressions is equality of their
term dictionaries.

Canonicalization rules beyond polynomial arithmetic are deliberately few:

* ``exp(a)*exp(b) -> exp(a+b)`` (at most one exp atom per monomial),
* ``cos(a)^2 -> 1 - sin(a)^2``,
* ``sqrt(a)^2 -> a`` when ``a`` is known to be positive,
* odd/even argument normalization of sin and cos.
"""
from __future__ import annotations

import contextvars
from contextlib import contextmanager
from fractions import Fraction
from functools import lru_cache
from numbers import Rational
from typing import Callable, Iterable, Iterator, Mapping

__all__ = [
    "Atom", "Jet", "Var", "Param", "Func", "Trans", "Expr",
    "KernelError", "JetOrderError",
    "jet", "var", "param", "func", "exp", "sin", "cos", "ln", "sqrt",
    "const", "ZERO", "ONE", "U", "V", "X", "T",
    "jet_caps", "get_caps",
    "normalize", "substitute", "substitute_many", "total_derivative",
    "partial", "zero_test", "collect", "sign_of", "invert",
]


class KernelError(ValueError):
    """Raised for expressions outside the Laurent-polynomial kernel."""


class JetOrderError(KernelError):
    """A jet coordinate exceeds the configured order caps."""


_CAPS: contextvars.ContextVar[tuple[int, int]] = contextvars.ContextVar("jet_caps", default=(2, 8))


def get_caps() -> tuple[int, int]:
    """Current ``(t_order, x_order)`` caps for jet coordinates."""
    return _CAPS.get()


@contextmanager
def jet_caps(t: int | None = None, x: int | None = None):
    """Temporarily change the jet order caps.

    >>> with jet_caps(x=12):
    ...     e = total_derivative(jet("u", x=8), "x")
    """
    ct, cx = _CAPS.get()
    token = _CAPS.set((ct if t is None else t, cx if x is None else x))
    try:
        yield
    finally:
        _CAPS.reset(token)


# --------------------------------------------------------------------------
# atoms

_INTERN: dict[tuple, "Atom"] = {}


class Atom:
    __slots__ = ("key", "_hash")
    kind = -1

    def __new__(cls, key):
        try:
            return _INTERN[key]
        except KeyError:
            obj = object.__new__(cls)
            obj.key = key
            obj._hash = hash(key)
            _INTERN[key] = obj
            return obj

    def __hash__(self):
        return self._hash

    def __eq__(self, other):
        return self is other or (isinstance(other, Atom) and self.key == other.key)

    def __lt__(self, other):
        return self.key < other.key

    def __reduce__(self):
        raise TypeError("atoms are process-local; serialize expressions with format_expr")

    def __repr__(self):
        from .parse import format_expr
        return f"{type(self).__name__}({format_expr(Expr.atom(self))})"

    # an atom may carry a negative or symbolic exponent only if reciprocals are harmless
    invertible = False


class Jet(Atom):
    """Jet coordinate ``dep_{t^a x^b}``."""
    __slots__ = ()
    kind = 4

    def __new__(cls, dep: str, t: int, x: int):
        return super().__new__(cls, (4, dep, t, x))

    dep = property(lambda self: self.key[1])
    t = property(lambda self: self.key[2])
    x = property(lambda self: self.key[3])

    @property
    def invertible(self):
        return self.key[1:] == ("u", 0, 0)


class Var(Atom):
    """Independent variable (x, t, or a similarity variable z)."""
    __slots__ = ()
    kind = 2
    invertible = True

    def __new__(cls, name: str):
        return super().__new__(cls, (2, name))

    name = property(lambda self: self.key[1])


class Param(Atom):
    """Constant parameter, optionally with a sign assumption ``+1``/``-1``."""
    __slots__ = ()
    kind = 0
    invertible = True

    def __new__(cls, name: str, sign: int = 0):
        return super().__new__(cls, (0, name, sign))

    name = property(lambda self: self.key[1])
    sign = property(lambda self: self.key[2])


class Trans(Atom):
    """Transcendental function applied to a canonical expression."""
    __slots__ = ("arg",)
    kind = 1
    KINDS = ("exp", "sin", "cos", "ln", "sqrt")

    def __new__(cls, fn: str, arg: "Expr"):
        key = (1, fn, arg.key)
        obj = _INTERN.get(key)
        if obj is None:
            obj = super().__new__(cls, key)
            obj.arg = arg
        return obj

    fn = property(lambda self: self.key[1])


class Func(Atom):
    """Unknown function ``name^(order)(arg)``."""
    __slots__ = ("arg",)
    kind = 3

    def __new__(cls, name: str, order: int, arg: "Expr"):
        key = (3, name, order, arg.key)
        obj = _INTERN.get(key)
        if obj is None:
            obj = super().__new__(cls, key)
            obj.arg = arg
        return obj

    name = property(lambda self: self.key[1])
    order = property(lambda self: self.key[2])


# --------------------------------------------------------------------------
# exponents are ints, or constant Exprs for rational/symbolic powers

def _ekey(e):
    return (0, e) if type(e) is int else (1, e.key)


def _ecanon(e):
    if type(e) is int:
        return e
    if e.is_const():
        c = e.as_const()
        if c.denominator == 1:
            return int(c)
    return e


def _eadd(a, b):
    if type(a) is int and type(b) is int:
        return a + b
    return _ecanon(Expr.const(a) + b if type(a) is int else a + b)


def _emul(a, b):
    if type(a) is int and type(b) is int:
        return a * b
    return _ecanon(_as_expr(a) * _as_expr(b))


def _epositive_int(e):
    return type(e) is int and e > 0


# --------------------------------------------------------------------------
# monomials: tuples of (atom, exponent) sorted by atom key

def _sorted_mono(d: Mapping) -> tuple:
    return tuple(sorted(((a, e) for a, e in d.items() if not (type(e) is int and e == 0)),
                        key=lambda p: p[0].key))


def _check_exponent(a: Atom, e) -> None:
    if type(e) is int and e > 0:
        return
    if a.invertible:
        return
    if isinstance(a, Trans) and a.fn in ("exp", "sqrt"):
        return
    raise KernelError(f"atom {a!r} cannot carry exponent {e!r}")


@lru_cache(maxsize=400_000)
def _mono_mul(m1: tuple, m2: tuple) -> tuple:
    """Product of two canonical monomials as a tuple of (mono, coeff) terms."""
    if not m1:
        return ((m2, Fraction(1)),)
    if not m2:
        return ((m1, Fraction(1)),)
    d = dict(m1)
    for a, e in m2:
        if a in d:
            d[a] = _eadd(d[a], e)
        else:
            d[a] = e
    return _canon(d)


def _canon(d: dict) -> tuple:
    plain = {}
    extra: list[Expr] = []
    exp_arg = None
    for a, e in d.items():
        if type(e) is int and e == 0:
            continue
        if isinstance(a, Trans):
            fn = a.fn
            if fn == "exp":
                contrib = a.arg * e
                exp_arg = contrib if exp_arg is None else exp_arg + contrib
                continue
            if fn == "cos" and type(e) is int and e >= 2:
                s = Expr.atom(Trans("sin", a.arg))
                extra.append((ONE - s * s) ** (e // 2))
                if e % 2:
                    plain[a] = 1
                continue
            if fn == "sqrt" and e != 1:
                if type(e) is not int:
                    raise KernelError("symbolic powers of sqrt are not supported")
                radicand = a.arg
                if sign_of(radicand) != 1:
                    if e > 1:
                        plain[a] = e
                        continue
                    raise KernelError(f"cannot invert sqrt of {radicand!r} without a positivity assumption")
                half, odd = divmod(e, 2)
                extra.append(radicand ** half)
                if odd:
                    plain[a] = 1
                continue
        _check_exponent(a, e)
        plain[a] = e
    mono = _sorted_mono(plain)
    if exp_arg is not None and not exp_arg.is_zero():
        if not extra:
            # single exp atom with exponent one is canonical
            ea = Trans("exp", exp_arg)
            plain[ea] = 1
            return ((_sorted_mono(plain), Fraction(1)),)
        extra.append(Expr.atom(Trans("exp", exp_arg)))
    if not extra:
        return ((mono, Fraction(1)),)
    out = Expr({mono: Fraction(1)})
    for x in extra:
        out = out * x
    return tuple(out._t.items())


# --------------------------------------------------------------------------
# expressions

def _as_expr(obj) -> "Expr":
    if isinstance(obj, Expr):
        return obj
    if isinstance(obj, Atom):
        return Expr.atom(obj)
    if isinstance(obj, (int, Fraction)) or isinstance(obj, Rational):
        return Expr.const(obj)
    raise TypeError(f"cannot convert {type(obj).__name__} to Expr")


def _add_into(acc: dict, mono, c) -> None:
    v = acc.get(mono)
    if v is None:
        acc[mono] = c
    else:
        v = v + c
        if v:
            acc[mono] = v
        else:
            del acc[mono]


class Expr:
    """Immutable canonical expression (sum of rational multiples of monomials)."""

    __slots__ = ("_t", "_hash", "_key", "_atoms")

    def __init__(self, terms: dict | None = None):
        # terms must already be canonical: {monomial: nonzero Fraction}
        self._t = terms if terms is not None else {}
        self._hash = None
        self._key = None
        self._atoms = None

    # construction ----------------------------------------------------------
    @staticmethod
    def const(c) -> "Expr":
        c = Fraction(c)
        return Expr({(): c}) if c else Expr()

    @staticmethod
    def atom(a: Atom, e=1) -> "Expr":
        e = _ecanon(e)
        if type(e) is int and e == 0:
            return ONE
        if type(e) is int and e == 1 and not isinstance(a, Trans):
            return Expr({((a, 1),): Fraction(1)})
        return Expr(dict(_canon({a: e})))

    # inspection ------------------------------------------------------------
    def is_zero(self) -> bool:
        return not self._t

    def is_const(self) -> bool:
        return not self._t or (len(self._t) == 1 and () in self._t)

    def as_const(self) -> Fraction:
        if not self._t:
            return Fraction(0)
        if self.is_const():
            return self._t[()]
        raise KernelError(f"{self!r} is not a rational constant")

    def terms(self) -> Iterator[tuple[tuple, Fraction]]:
        """Yield ``(monomial, coefficient)`` pairs in canonical order."""
        for m in sorted(self._t, key=_mono_key):
            yield m, self._t[m]

    def __len__(self):
        return len(self._t)

    @property
    def key(self) -> tuple:
        if self._key is None:
            self._key = tuple(sorted((_mono_key(m), c) for m, c in self._t.items()))
        return self._key

    def atoms(self, deep: bool = True) -> frozenset:
        """Atoms occurring in the expression (inside function arguments too if ``deep``)."""
        if not deep:
            return frozenset(a for m in self._t for a, _ in m)
        if self._atoms is None:
            out = set()
            for m in self._t:
                for a, e in m:
                    out.add(a)
                    if isinstance(a, (Trans, Func)):
                        out |= a.arg.atoms()
                    if type(e) is not int:
                        out |= e.atoms()
            self._atoms = frozenset(out)
        return self._atoms

    def has(self, pred: Callable[[Atom], bool]) -> bool:
        return any(pred(a) for a in self.atoms())

    def jets(self, dep: str | None = None) -> list[Jet]:
        return sorted((a for a in self.atoms() if isinstance(a, Jet) and (dep is None or a.dep == dep)),
                      key=lambda a: a.key)

    # arithmetic ------------------------------------------------------------
    def __add__(self, other):
        other = _as_expr(other)
        if not other._t:
            return self
        if not self._t:
            return other
        out = dict(self._t)
        for m, c in other._t.items():
            _add_into(out, m, c)
        return Expr(out)

    __radd__ = __add__

    def __neg__(self):
        return Expr({m: -c for m, c in self._t.items()})

    def __sub__(self, other):
        return self + (-_as_expr(other))

    def __rsub__(self, other):
        return _as_expr(other) - self

    def __mul__(self, other):
        if isinstance(other, (int, Fraction)):
            if not other:
                return ZERO
            f = Fraction(other)
            return Expr({m: c * f for m, c in self._t.items()})
        other = _as_expr(other)
        if not self._t or not other._t:
            return ZERO
        a, b = (self._t, other._t) if len(self._t) <= len(other._t) else (other._t, self._t)
        out: dict = {}
        for m1, c1 in a.items():
            for m2, c2 in b.items():
                c = c1 * c2
                for m, k in _mono_mul(m1, m2):
                    _add_into(out, m, c * k)
        return Expr(out)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, (int, Fraction)):
            return self * (1 / Fraction(other))
        return self * invert(_as_expr(other))

    def __rtruediv__(self, other):
        return _as_expr(other) * invert(self)

    def __pow__(self, k):
        if isinstance(k, Expr):
            k = _ecanon(k)
        if type(k) is int:
            if k < 0:
                return invert(self) ** (-k)
            result, base = ONE, self
            while k:
                if k & 1:
                    result = result * base
                k >>= 1
                if k:
                    base = base * base
            return result
        if isinstance(k, Fraction):
            k = _ecanon(Expr.const(k))
            if type(k) is int:
                return self ** k
        if not isinstance(k, Expr):
            raise TypeError(f"unsupported exponent {k!r}")
        if k.atoms() and any(isinstance(a, (Jet, Var)) for a in k.atoms()):
            raise KernelError("exponents must be constant")
        if len(self._t) != 1:
            raise KernelError(f"symbolic power of a sum: ({self!r})^({k!r})")
        (m, c), = self._t.items()
        if c != 1:
            raise KernelError("symbolic power of a non-unit coefficient")
        d = {a: _emul(e, k) for a, e in m}
        for a, e in d.items():
            if type(e) is not int and not a.invertible and not (isinstance(a, Trans) and a.fn == "exp"):
                raise KernelError(f"atom {a!r} cannot carry symbolic exponent")
        return Expr(dict(_canon(d)))

    # comparison ------------------------------------------------------------
    def __eq__(self, other):
        if isinstance(other, Expr):
            return self._t == other._t
        if isinstance(other, (int, Fraction)):
            return self._t == Expr.const(other)._t
        return NotImplemented

    def __hash__(self):
        if self._hash is None:
            self._hash = hash(frozenset(self._t.items()))
        return self._hash

    def __bool__(self):
        raise TypeError("truth value of Expr is ambiguous; use is_zero()")

    def __repr__(self):
        from .parse import format_expr
        return f"Expr({format_expr(self)!r})"

    def __str__(self):
        from .parse import format_expr
        return format_expr(self)

    def __reduce__(self):
        from .parse import format_expr
        raise TypeError(f"Expr is process-local; pickle format_expr(...) instead: {format_expr(self)}")


def _mono_key(m: tuple) -> tuple:
    return tuple((a.key, _ekey(e)) for a, e in m)


ZERO = Expr()
ONE = Expr({(): Fraction(1)})


def const(c) -> Expr:
    return Expr.const(c)


# --------------------------------------------------------------------------
# constructors

def jet(dep: str = "u", t: int = 0, x: int = 0) -> Expr:
    """Expression for the jet coordinate ``dep_{t^t x^x}``; enforces the caps."""
    if dep not in ("u", "v"):
        raise KernelError(f"unknown dependent variable {dep!r}")
    if t < 0 or x < 0:
        raise KernelError("negative jet order")
    ct, cx = _CAPS.get()
    if t > ct or x > cx:
        raise JetOrderError(f"jet {dep}[t^{t} x^{x}] exceeds caps (t<={ct}, x<={cx})")
    return Expr({((Jet(dep, t, x), 1),): Fraction(1)})


def var(name: str) -> Expr:
    return Expr({((Var(name), 1),): Fraction(1)})


def param(name: str, sign: int = 0) -> Expr:
    if sign not in (-1, 0, 1):
        raise ValueError("sign must be -1, 0 or +1")
    return Expr({((Param(name, sign), 1),): Fraction(1)})


def func(name: str, arg, order: int = 0) -> Expr:
    return Expr.atom(Func(name, order, _as_expr(arg)))


def _leading_negative(e: Expr) -> bool:
    m, c = next(e.terms())
    return c < 0


def exp(arg) -> Expr:
    arg = _as_expr(arg)
    if arg.is_zero():
        return ONE
    return Expr.atom(Trans("exp", arg))


def sin(arg) -> Expr:
    arg = _as_expr(arg)
    if arg.is_zero():
        return ZERO
    if _leading_negative(arg):
        return -Expr.atom(Trans("sin", -arg))
    return Expr.atom(Trans("sin", arg))


def cos(arg) -> Expr:
    arg = _as_expr(arg)
    if arg.is_zero():
        return ONE
    if _leading_negative(arg):
        arg = -arg
    return Expr.atom(Trans("cos", arg))


def ln(arg) -> Expr:
    arg = _as_expr(arg)
    if arg == ONE:
        return ZERO
    if len(arg) == 1:
        (m, c), = arg._t.items()
        if c == 1 and len(m) == 1 and isinstance(m[0][0], Trans) and m[0][0].fn == "exp" and m[0][1] == 1:
            return m[0][0].arg
    return Expr.atom(Trans("ln", arg))


def _rational_sqrt(c: Fraction) -> Fraction | None:
    from math import isqrt
    if c < 0:
        return None
    n, d = c.numerator, c.denominator
    rn, rd = isqrt(n), isqrt(d)
    if rn * rn == n and rd * rd == d:
        return Fraction(rn, rd)
    return None


def sqrt(arg) -> Expr:
    arg = _as_expr(arg)
    if arg.is_const():
        r = _rational_sqrt(arg.as_const())
        if r is not None:
            return Expr.const(r)
    return Expr.atom(Trans("sqrt", arg))


U = jet("u")
V = jet("v")
X = var("x")
T = var("t")


# --------------------------------------------------------------------------
# sign assumptions and inversion

def sign_of(e: Expr) -> int | None:
    """+1/-1 when the sign of ``e`` follows from parameter assumptions, else None."""
    e = _as_expr(e)
    if len(e._t) != 1:
        return None
    (m, c), = e._t.items()
    s = 1 if c > 0 else -1
    for a, k in m:
        if isinstance(a, Param):
            if type(k) is int and k % 2 == 0:
                continue
            if a.sign == 0 or type(k) is not int:
                return None
            s *= a.sign
        elif isinstance(a, Trans) and a.fn == "exp":
            continue
        elif isinstance(a, Trans) and a.fn == "sqrt":
            if sign_of(a.arg) != 1:
                return None
        else:
            return None
    return s


def invert(e: Expr) -> Expr:
    """Reciprocal of a single-term expression whose atoms admit negative powers."""
    e = _as_expr(e)
    if len(e._t) != 1:
        raise KernelError(f"cannot invert the sum {e!r}")
    (m, c), = e._t.items()
    d = {}
    extra = ONE
    for a, k in m:
        if isinstance(a, Trans) and a.fn == "exp":
            extra = extra * exp(-a.arg)
            continue
        if isinstance(a, Trans) and a.fn == "sqrt":
            # 1/sqrt(r) = sqrt(r)/r
            extra = extra * Expr.atom(a) * invert(a.arg)
            if type(k) is int and k > 1:
                extra = extra * invert(Expr.atom(a)) ** (k - 1)
            continue
        if not a.invertible:
            raise KernelError(f"cannot invert atom {a!r}")
        d[a] = _emul(k, -1)
    return Expr(dict(_canon(d))) * extra * (1 / c)


# --------------------------------------------------------------------------
# differentiation

def _derive(e: Expr, rule: Callable[[Atom], Expr | None], memo: dict) -> Expr:
    out: dict = {}
    for mono, c in e._t.items():
        for i, (a, k) in enumerate(mono):
            da = _atom_derivative(a, rule, memo)
            if da is None:
                continue
            k1 = _eadd(k, -1)
            if type(k1) is int and k1 == 0:
                rest = mono[:i] + mono[i + 1:]
            else:
                rest = mono[:i] + ((a, k1),) + mono[i + 1:]
            if type(k) is int:
                scale = c * k
                factor = da
            else:
                scale = c
                factor = da * k
            for dm, dc in factor._t.items():
                for pm, pc in _mono_mul(rest, dm):
                    _add_into(out, pm, scale * dc * pc)
    return Expr(out)


def _atom_derivative(a: Atom, rule, memo: dict) -> Expr | None:
    if a in memo:
        return memo[a]
    if isinstance(a, Trans):
        darg = _derive(a.arg, rule, memo)
        if darg.is_zero():
            r = None
        elif a.fn == "exp":
            r = Expr.atom(a) * darg
        elif a.fn == "sin":
            r = cos(a.arg) * darg
        elif a.fn == "cos":
            r = -sin(a.arg) * darg
        elif a.fn == "ln":
            r = darg * invert(a.arg)
        elif a.fn == "sqrt":
            r = Expr.atom(a) * invert(a.arg) * darg * Fraction(1, 2)
        else:  # pragma: no cover
            raise KernelError(a.fn)
    elif isinstance(a, Func):
        darg = _derive(a.arg, rule, memo)
        r = None if darg.is_zero() else Expr.atom(Func(a.name, a.order + 1, a.arg)) * darg
    else:
        r = rule(a)
        if r is not None and r.is_zero():
            r = None
    memo[a] = r
    return r


def total_derivative(e: Expr, var_name: str, times: int = 1) -> Expr:
    """Total derivative ``D_x`` or ``D_t`` (Leibniz and chain rule over all atoms)."""
    if var_name not in ("x", "t"):
        raise ValueError("total derivatives are taken with respect to 'x' or 't'")
    dt = var_name == "t"

    def rule(a: Atom):
        if isinstance(a, Jet):
            return jet(a.dep, a.t + dt, a.x + (not dt))
        if isinstance(a, Var):
            return ONE if a.name == var_name else None
        return None

    for _ in range(times):
        e = _derive(_as_expr(e), rule, {})
    return e


def partial(e: Expr, wrt) -> Expr:
    """Partial derivative with respect to one atom (jets, x and t are independent)."""
    if isinstance(wrt, Expr):
        atoms = wrt.atoms(deep=False)
        if len(wrt) != 1 or len(atoms) != 1:
            raise KernelError("partial derivatives are taken with respect to a single atom")
        (wrt,) = atoms
    target = wrt
    return _derive(_as_expr(e), lambda a: ONE if a is target else None, {})


# --------------------------------------------------------------------------
# substitution

def substitute(e: Expr, target, replacement) -> Expr:
    """Replace every occurrence of one atom by an expression."""
    if isinstance(target, Expr):
        (target,) = target.atoms(deep=False)
    return substitute_many(e, {target: _as_expr(replacement)})


def _rebuild(a: Atom, arg: Expr) -> Expr:
    if isinstance(a, Func):
        return Expr.atom(Func(a.name, a.order, arg))
    return {"exp": exp, "sin": sin, "cos": cos, "ln": ln, "sqrt": sqrt}[a.fn](arg)


def substitute_many(e: Expr, mapping: Mapping[Atom, Expr]) -> Expr:
    """Simultaneous substitution of atoms (also inside function arguments)."""
    e = _as_expr(e)
    mapping = {(next(iter(k.atoms(deep=False))) if isinstance(k, Expr) else k): _as_expr(v)
               for k, v in mapping.items()}
    keys = frozenset(mapping)
    if not keys & e.atoms():
        return e
    cache: dict = {}

    def image(a: Atom):
        if a in cache:
            return cache[a]
        if a in mapping:
            r = mapping[a]
        elif isinstance(a, (Trans, Func)) and keys & a.arg.atoms():
            r = _rebuild(a, substitute_many(a.arg, mapping))
        else:
            r = None
        cache[a] = r
        return r

    acc: dict = {}
    for mono, c in e._t.items():
        plain = []
        factors = []
        for a, k in mono:
            img = image(a)
            if type(k) is not int and keys & k.atoms():
                k = _ecanon(substitute_many(k, mapping))
            if img is None:
                plain.append((a, k))
            else:
                factors.append(img ** k)
        if not factors:
            for m, kk in _canon(dict(plain)):
                _add_into(acc, m, c * kk)
            continue
        term = Expr(dict(_canon(dict(plain)))) * c
        for f in factors:
            term = term * f
            if term.is_zero():
                break
        for m, kk in term._t.items():
            _add_into(acc, m, kk)
    return Expr(acc)


# --------------------------------------------------------------------------
# misc

def normalize(e: Expr) -> Expr:
    """Rebuild ``e`` from its atoms, re-applying every canonicalization rule."""
    e = _as_expr(e)
    out = ZERO
    for mono, c in e._t.items():
        term = Expr.const(c)
        for a, k in mono:
            if isinstance(a, Jet):
                base = jet(a.dep, a.t, a.x)
            elif isinstance(a, (Trans, Func)):
                base = _rebuild(a, normalize(a.arg))
            else:
                base = Expr.atom(a)
            term = term * (base ** (k if type(k) is int else normalize(k)))
        out = out + term
    return out


def zero_test(e) -> bool:
    return _as_expr(e).is_zero()


def collect(e: Expr, select: Callable[[Atom], bool]) -> dict[tuple, Expr]:
    """Split ``e`` as ``sum_k key_k * coeff_k``.

    The key of a term is the sub-monomial of atoms for which ``select`` is
    true; the coefficient collects everything else.
    """
    out: dict[tuple, dict] = {}
    for mono, c in e._t.items():
        key = tuple(p for p in mono if select(p[0]))
        rest = tuple(p for p in mono if not select(p[0]))
        _add_into(out.setdefault(key, {}), rest, c)
    return {k: Expr(v) for k, v in out.items() if v}


def depends_on(e: Expr, names: Iterable[str] = ("x", "t")) -> bool:
    names = set(names)
    return e.has(lambda a: (isinstance(a, Var) and a.name in names) or isinstance(a, Jet))
