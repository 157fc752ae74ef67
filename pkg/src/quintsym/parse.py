"""Text syntax for expressions.

Grammar (whitespace is insignificant)::

    expr     := ["+"|"-"] term (("+"|"-") term)*
    term     := factor (("*"|"/") factor)*
    factor   := base ["^" exponent]
    exponent := ["-"] int | "(" expr ")"
    base     := int | jet | call | ident | "(" expr ")"
    jet      := ("u"|"v") ["[" spec ("," spec)* "]"]
    spec     := [int] ("x"|"t")
    call     := ident ("'"* | "^(" int ")") "(" expr ")"

``x``, ``t`` and ``z`` are independent variables; ``exp``, ``sin``, ``cos``,
``ln`` (alias ``log``) and ``sqrt`` are the transcendental functions; any other
identifier followed by parentheses is an unknown function, and every remaining
identifier is a parameter.  Decimal literals are rejected.
"""
from __future__ import annotations

import re
from dataclasses import dataclass
from fractions import Fraction
from typing import Mapping

from . import expr as E
from .expr import Expr, Func, Jet, Param, Trans, Var

__all__ = ["ParseError", "parse_expr", "format_expr", "SourceExpr"]

VARIABLES = ("x", "t", "z")
TRANSCENDENTAL = {"exp": E.exp, "sin": E.sin, "cos": E.cos, "ln": E.ln, "log": E.ln, "sqrt": E.sqrt}


class ParseError(ValueError):
    def __init__(self, msg: str, text: str, pos: int):
        self.msg, self.text, self.pos = msg, text, pos
        super().__init__(f"{msg} at position {pos}: {text[:pos]}‸{text[pos:]}")


@dataclass(frozen=True)
class SourceExpr:
    text: str
    expr: Expr


_TOKEN = re.compile(r"\s*(?:(\d+\.\d*|\.\d+)|(\d+)|([A-Za-z_][A-Za-z0-9_]*)|(.))")


def _tokenize(text: str) -> list[tuple[str, str, int]]:
    toks = []
    pos = 0
    n = len(text)
    while pos < n:
        m = _TOKEN.match(text, pos)
        if m is None or m.end() == pos:
            break
        if m.group(1):
            raise ParseError("decimal literals are not allowed; use a ratio a/b", text, m.start(1))
        if m.group(2):
            toks.append(("int", m.group(2), m.start(2)))
        elif m.group(3):
            toks.append(("id", m.group(3), m.start(3)))
        elif m.group(4):
            ch = m.group(4)
            if ch not in "+-*/^()[],'":
                raise ParseError(f"unexpected character {ch!r}", text, m.start(4))
            toks.append(("op", ch, m.start(4)))
        pos = m.end()
    toks.append(("end", "", len(text)))
    return toks


class _Parser:
    def __init__(self, text: str, assumptions: Mapping[str, int], params):
        self.text = text
        self.toks = _tokenize(text)
        self.i = 0
        self.assumptions = dict(assumptions or {})
        self.params = None if params is None else set(params)

    # helpers
    def peek(self, k=0):
        return self.toks[min(self.i + k, len(self.toks) - 1)]

    def take(self):
        tok = self.toks[self.i]
        self.i += 1
        return tok

    def error(self, msg, tok=None):
        tok = tok or self.peek()
        raise ParseError(msg, self.text, tok[2])

    def expect(self, value):
        tok = self.peek()
        if tok[1] != value or tok[0] not in ("op", "id"):
            self.error(f"expected {value!r}")
        return self.take()

    def at(self, value):
        tok = self.peek()
        return tok[0] == "op" and tok[1] == value

    # grammar
    def parse(self) -> Expr:
        if self.peek()[0] == "end":
            self.error("empty expression")
        e = self.expr()
        if self.peek()[0] != "end":
            self.error("unexpected token")
        return e

    def expr(self) -> Expr:
        sign = 1
        if self.at("+") or self.at("-"):
            sign = -1 if self.take()[1] == "-" else 1
        e = self.term() * sign
        while self.at("+") or self.at("-"):
            op = self.take()[1]
            t = self.term()
            e = e + t if op == "+" else e - t
        return e

    def term(self) -> Expr:
        e = self.factor()
        while self.at("*") or self.at("/"):
            op = self.take()
            f = self.factor()
            if op[1] == "*":
                e = e * f
            else:
                try:
                    e = e / f
                except (E.KernelError, ZeroDivisionError) as exc:
                    raise ParseError(f"invalid division: {exc}", self.text, op[2]) from None
        return e

    def factor(self) -> Expr:
        base = self.base()
        if self.at("^"):
            tok = self.take()
            k = self.exponent()
            try:
                return base ** k
            except (E.KernelError, ZeroDivisionError) as exc:
                raise ParseError(f"invalid power: {exc}", self.text, tok[2]) from None
        return base

    def exponent(self):
        if self.at("("):
            self.take()
            k = self.expr()
            self.expect(")")
            return k
        neg = False
        if self.at("-"):
            self.take()
            neg = True
        tok = self.peek()
        if tok[0] != "int":
            self.error("expected integer exponent")
        self.take()
        return -int(tok[1]) if neg else int(tok[1])

    def base(self) -> Expr:
        tok = self.peek()
        if tok[0] == "int":
            self.take()
            return E.const(int(tok[1]))
        if tok[0] == "op" and tok[1] == "(":
            self.take()
            e = self.expr()
            self.expect(")")
            return e
        if tok[0] == "op" and tok[1] == "-":
            self.take()
            return -self.factor()
        if tok[0] != "id":
            self.error("expected an operand")
        name = tok[1]
        self.take()
        if name in ("u", "v") and not self.at("("):
            return self.jet(name, tok)
        order = None
        if self.at("'"):
            order = 0
            while self.at("'"):
                self.take()
                order += 1
        elif (self.at("^") and self.peek(1)[1] == "(" and self.peek(2)[0] == "int"
              and self.peek(3)[1] == ")" and self.peek(4)[1] == "("):
            self.take(), self.take()
            order = int(self.take()[1])
            self.take()
        if order is not None or self.at("("):
            if not self.at("("):
                self.error("expected '(' after function derivative")
            self.take()
            arg = self.expr()
            self.expect(")")
            if name in TRANSCENDENTAL:
                if order:
                    self.error(f"derivative ticks are not allowed on {name}", tok)
                try:
                    return TRANSCENDENTAL[name](arg)
                except E.KernelError as exc:
                    raise ParseError(str(exc), self.text, tok[2]) from None
            if name in VARIABLES or name in ("u", "v"):
                self.error(f"{name!r} is not a function", tok)
            return E.func(name, arg, order or 0)
        if name in VARIABLES:
            return E.var(name)
        if name in TRANSCENDENTAL:
            self.error(f"{name} needs an argument", tok)
        if self.params is not None and name not in self.params:
            self.error(f"unknown identifier {name!r}", tok)
        return E.param(name, self.assumptions.get(name, 0))

    def jet(self, dep, tok) -> Expr:
        t = x = 0
        if self.at("["):
            self.take()
            while True:
                count = 1
                if self.peek()[0] == "int":
                    count = int(self.take()[1])
                nt = self.peek()
                if nt[0] != "id" or nt[1] not in ("x", "t"):
                    self.error("malformed jet index")
                self.take()
                if nt[1] == "x":
                    x += count
                else:
                    t += count
                if self.at(","):
                    self.take()
                    continue
                if not self.at("]"):
                    self.error("malformed jet index")
                self.take()
                break
        try:
            return E.jet(dep, t, x)
        except E.KernelError as exc:
            raise ParseError(str(exc), self.text, tok[2]) from None


def parse_expr(text: str, assumptions: Mapping[str, int] | None = None, params=None) -> Expr:
    """Parse ``text`` into a canonical :class:`Expr`.

    ``assumptions`` maps parameter names to a sign (+1 or -1).  When
    ``params`` is given, identifiers outside it are rejected.
    """
    if isinstance(text, Expr):
        return text
    return _Parser(text, assumptions or {}, params).parse()


# --------------------------------------------------------------------------
# printing

def _format_jet(a: Jet) -> str:
    parts = []
    if a.t:
        parts.append("t" if a.t == 1 else f"{a.t}t")
    if a.x:
        parts.append("x" if a.x == 1 else f"{a.x}x")
    return a.dep + (f"[{','.join(parts)}]" if parts else "")


def _format_atom(a) -> str:
    if isinstance(a, Jet):
        return _format_jet(a)
    if isinstance(a, (Var, Param)):
        return a.name
    if isinstance(a, Trans):
        return f"{a.fn}({format_expr(a.arg)})"
    if isinstance(a, Func):
        k = a.order
        mark = "'" * k if k <= 4 else f"^({k})"
        return f"{a.name}{mark}({format_expr(a.arg)})"
    raise TypeError(a)


def _format_factor(a, k) -> str:
    s = _format_atom(a)
    if type(k) is int:
        return s if k == 1 else f"{s}^{k}"
    return f"{s}^({format_expr(k)})"


def _format_term(mono, c: Fraction) -> str:
    body = "*".join(_format_factor(a, k) for a, k in mono)
    if not body:
        return str(c)
    if c == 1:
        return body
    if c == -1:
        return "-" + body
    return f"{c}*{body}"


def format_expr(e: Expr) -> str:
    """Deterministic text form; ``parse_expr(format_expr(e)) == e``."""
    if e.is_zero():
        return "0"
    out = []
    for i, (m, c) in enumerate(e.terms()):
        if i == 0:
            out.append(_format_term(m, c))
        elif c < 0:
            out.append(" - " + _format_term(m, -c))
        else:
            out.append(" + " + _format_term(m, c))
    return "".join(out)


def assumptions_of(e: Expr) -> dict[str, int]:
    """Sign assumptions carried by the parameters of ``e`` (for round trips)."""
    return {a.name: a.sign for a in e.atoms() if isinstance(a, Param) and a.sign}
