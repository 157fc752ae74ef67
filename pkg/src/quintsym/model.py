"""The equation family, its parameter constraints, the case registry and
point transformations.

The family is

    u_t = p1 (u^2)_x + h^2 p3 (u u_xx + beta u_x^2)_x
          + h^4 (q0 u u_5x + q1 u_x u_4x + q2 u_2x u_3x)

and every registry row specializes it through a list of constraints.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field
from fractions import Fraction
from importlib import resources
from pathlib import Path
from typing import Iterable, Mapping

import tomli

from . import expr as E
from .expr import Expr, Jet, KernelError, Param, Var
from .parse import parse_expr

__all__ = [
    "FAMILY_PARAMS", "ParameterSet", "PDESpec", "CaseRow", "Registry", "PointTransform",
    "TransformResult", "ConstraintError", "RegistryError",
    "family_rhs", "instantiate_case", "apply_point_transform", "load_registry", "identify_family",
]

FAMILY_PARAMS = ("p1", "p3", "beta", "q0", "q1", "q2", "h")


class ConstraintError(ValueError):
    """Constraints of a registry row cannot hold simultaneously."""


class RegistryError(ValueError):
    """Malformed registry or configuration file."""


def family_rhs(p1=None, p3=None, beta=None, q0=None, q1=None, q2=None, h=1) -> Expr:
    """Right-hand side of the family; omitted coefficients stay symbolic."""
    def sym(val, name):
        return E.param(name) if val is None else _expr(val)

    p1, p3, beta = sym(p1, "p1"), sym(p3, "p3"), sym(beta, "beta")
    q0, q1, q2, h = sym(q0, "q0"), sym(q1, "q1"), sym(q2, "q2"), sym(h, "h")
    u = [E.jet("u", 0, k) for k in range(6)]
    dx = lambda e: E.total_derivative(e, "x")
    return (p1 * dx(u[0] ** 2)
            + h ** 2 * p3 * dx(u[0] * u[2] + beta * u[1] ** 2)
            + h ** 4 * (q0 * u[0] * u[5] + q1 * u[1] * u[4] + q2 * u[2] * u[3]))


def _expr(val, assumptions=None) -> Expr:
    if isinstance(val, Expr):
        return val
    if isinstance(val, str):
        return parse_expr(val, assumptions)
    return E.const(Fraction(val))


@dataclass(frozen=True)
class ParameterSet:
    """Values (rational or symbolic) for the family coefficients."""

    values: Mapping[str, Expr]
    assumptions: Mapping[str, int] = field(default_factory=dict)
    nonzero: tuple = ()

    @classmethod
    def symbolic(cls, **given) -> "ParameterSet":
        vals = {name: E.param(name) for name in FAMILY_PARAMS}
        vals["h"] = E.ONE
        for k, v in given.items():
            if k not in FAMILY_PARAMS:
                raise KeyError(f"unknown family parameter {k!r}")
            vals[k] = _expr(v)
        return cls(vals)

    def __getitem__(self, name) -> Expr:
        return self.values[name]

    def is_numeric(self) -> bool:
        return all(v.is_const() for v in self.values.values())

    def numeric(self) -> dict[str, float]:
        out = {}
        for k, v in self.values.items():
            if not v.is_const():
                raise ValueError(f"parameter {k} is symbolic: {v}")
            out[k] = float(v.as_const())
        if out.get("h", 1.0) <= 0:
            raise ValueError("h must be positive")
        return out

    def rhs(self) -> Expr:
        return family_rhs(**{k: self.values[k] for k in FAMILY_PARAMS})


@dataclass(frozen=True, eq=False)
class PDESpec:
    """An evolution equation ``delta = u_t - rhs = 0``."""

    delta: Expr
    params: ParameterSet | None = None
    assumptions: Mapping[str, int] = field(default_factory=dict)
    case_id: str | None = None
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        ut = E.jet("u", 1, 0)
        if E.partial(self.delta, ut) != E.ONE:
            raise ValueError("u_t must appear with coefficient exactly 1")
        rhs = ut - self.delta
        if any(a.t > 0 for a in rhs.jets()):
            raise ValueError("right-hand side must not contain t-derivatives")

    @classmethod
    def from_rhs(cls, rhs: Expr, **kw) -> "PDESpec":
        return cls(E.jet("u", 1, 0) - rhs, **kw)

    @classmethod
    def family(cls, params: ParameterSet | None = None, **kw) -> "PDESpec":
        params = params or ParameterSet.symbolic()
        return cls(E.jet("u", 1, 0) - params.rhs(), params=params,
                   assumptions=dict(params.assumptions), **kw)

    @property
    def rhs(self) -> Expr:
        r = self._cache.get("rhs")
        if r is None:
            r = self._cache["rhs"] = E.jet("u", 1, 0) - self.delta
        return r

    def t_derivative(self, t_order: int, x_order: int) -> Expr:
        """``u_{t^a x^b}`` expressed on the solution manifold (no t-derivatives)."""
        key = ("elim", t_order, x_order)
        hit = self._cache.get(key)
        if hit is not None:
            return hit
        if t_order == 0:
            r = E.jet("u", 0, x_order)
        elif x_order > 0:
            r = E.total_derivative(self.t_derivative(t_order, x_order - 1), "x")
        elif t_order == 1:
            r = self.rhs
        else:
            r = self.eliminate(E.total_derivative(self.t_derivative(t_order - 1, 0), "t"))
        self._cache[key] = r
        return r

    def eliminate(self, e: Expr) -> Expr:
        """Rewrite every t-derivative of ``u`` through the equation."""
        jets = [a for a in e.atoms() if isinstance(a, Jet) and a.dep == "u" and a.t > 0]
        if not jets:
            return e
        # innermost first: lower t-order, then ascending x-order
        jets.sort(key=lambda a: (a.t, a.x))
        return E.substitute_many(e, {a: self.t_derivative(a.t, a.x) for a in jets})

    def subs_params(self, mapping: Mapping[str, Expr]) -> "PDESpec":
        atoms = {a: _expr(mapping[a.name]) for a in self.delta.atoms()
                 if isinstance(a, Param) and a.name in mapping}
        return PDESpec(E.substitute_many(self.delta, atoms), assumptions=self.assumptions,
                       case_id=self.case_id)

    def free_params(self) -> list[str]:
        return sorted({a.name for a in self.delta.atoms() if isinstance(a, Param)})

    def __str__(self):
        from .parse import format_expr
        return f"u[t] = {format_expr(self.rhs)}"


# --------------------------------------------------------------------------
# constraints and registry rows

_CONSTRAINT = re.compile(r"^\s*(.+?)\s*(!=|=|>|<)\s*(.+?)\s*$")


def parse_constraints(items: Iterable[str]):
    """Split constraint strings into (assumptions, equalities, inequalities)."""
    assumptions: dict[str, int] = {}
    eqs, neqs = [], []
    for raw in items:
        m = _CONSTRAINT.match(raw)
        if not m:
            raise RegistryError(f"malformed constraint {raw!r}")
        lhs, op, rhs = m.groups()
        if op in "<>":
            if rhs != "0" or not re.fullmatch(r"[A-Za-z_]\w*", lhs):
                raise RegistryError(f"sign constraints must read 'name > 0' or 'name < 0': {raw!r}")
            assumptions[lhs] = 1 if op == ">" else -1
        elif op == "=":
            eqs.append((lhs, rhs))
        else:
            neqs.append((lhs, rhs))
    return assumptions, eqs, neqs


@dataclass
class CaseRow:
    table: str
    case: str
    constraints: list[str] = field(default_factory=list)
    generators: list[tuple[str, str]] = field(default_factory=list)
    phi: str | None = None
    form: str | None = None
    notes: str = ""
    flag: str | None = None
    inherit_base: bool = True

    @property
    def id(self) -> str:
        return f"{self.table}-{self.case}"

    def assumptions(self) -> dict[str, int]:
        return parse_constraints(self.constraints)[0]

    def parse(self, text: str) -> Expr:
        return parse_expr(text, self.assumptions())

    def vector_fields(self):
        from .jets import VectorField
        gens = list(self.generators)
        if self.table == "T1" and self.inherit_base:
            names = {n for n, _ in gens}
            gens = [g for g in BASE_GENERATORS if g[0] not in names] + gens
        return [(name, VectorField.parse(text, self.assumptions())) for name, text in gens]

    def substitution(self):
        from .sadj import Substitution
        if self.phi is None:
            raise RegistryError(f"row {self.id} has no substitution")
        return Substitution(self.parse(self.phi), text=self.phi)


BASE_GENERATORS = [("X1", "Dx"), ("X2", "Dt"), ("X3", "t*Dt - u*Du")]


def resolve_constraints(constraints: Iterable[str]):
    """Return (parameter substitution, assumptions, nonzero expressions)."""
    assumptions, eqs, neqs = parse_constraints(constraints)
    mapping: dict[str, Expr] = {}

    def apply(e: Expr) -> Expr:
        atoms = {a: mapping[a.name] for a in e.atoms() if isinstance(a, Param) and a.name in mapping}
        return E.substitute_many(e, atoms) if atoms else e

    for lhs, rhs in eqs:
        if not re.fullmatch(r"[A-Za-z_]\w*", lhs):
            raise RegistryError(f"left side of an equality must be a parameter: {lhs!r}")
        value = apply(parse_expr(rhs, assumptions))
        if lhs in mapping:
            if not (mapping[lhs] - value).is_zero():
                raise ConstraintError(f"{lhs} constrained to both {mapping[lhs]} and {value}")
            continue
        if value.has(lambda a: isinstance(a, Param) and a.name == lhs):
            raise ConstraintError(f"constraint {lhs} = {rhs} is not a substitution")
        sub = {Param(lhs, assumptions.get(lhs, 0)): value}
        mapping = {k: E.substitute_many(v, sub) for k, v in mapping.items()}
        mapping[lhs] = value
    nonzero = []
    for lhs, rhs in neqs:
        diff = apply(parse_expr(lhs, assumptions) - parse_expr(rhs, assumptions))
        if diff.is_zero():
            raise ConstraintError(f"constraint {lhs} != {rhs} is violated by the equalities")
        nonzero.append(diff)
    for name, value in mapping.items():
        s = assumptions.get(name)
        if s and value.is_const() and (value.as_const() > 0) != (s > 0):
            raise ConstraintError(f"{name} = {value} contradicts its sign assumption")
    return mapping, assumptions, tuple(nonzero)


def instantiate_case(row: CaseRow, h=1) -> PDESpec:
    """Specialize the family to a registry row (h = 1 unless given)."""
    mapping, assumptions, nonzero = resolve_constraints(row.constraints)
    vals = {}
    for name in FAMILY_PARAMS:
        if name == "h":
            vals[name] = _expr(mapping.get("h", h))
        else:
            vals[name] = mapping.get(name, E.param(name, assumptions.get(name, 0)))
    params = ParameterSet(vals, assumptions, nonzero)
    return PDESpec(E.jet("u", 1, 0) - params.rhs(), params=params, assumptions=assumptions,
                   case_id=row.id)


def identify_family(pde: PDESpec) -> dict[str, Expr] | None:
    """Read the family coefficients (h = 1) back off an equation, if it is a member."""
    u = [E.jet("u", 0, k) for k in range(6)]
    basis = {"uux": u[0] * u[1], "uu3": u[0] * u[3], "u1u2": u[1] * u[2],
             "uu5": u[0] * u[5], "u1u4": u[1] * u[4], "u2u3": u[2] * u[3]}
    rhs = pde.rhs
    coeffs = {}
    rest = rhs
    jet_atom = lambda a: isinstance(a, Jet)
    parts = E.collect(rhs, jet_atom)
    for name, b in basis.items():
        (m, _), = b._t.items()
        coeffs[name] = parts.pop(m, E.ZERO)
    if parts:
        return None
    p3 = coeffs["uu3"]
    if p3.is_zero():
        beta = E.param("beta") if coeffs["u1u2"].is_zero() else None
        if beta is None:
            return None
    else:
        try:
            beta = (coeffs["u1u2"] / p3 - 1) * Fraction(1, 2)
        except KernelError:
            return None
    return {"p1": coeffs["uux"] * Fraction(1, 2), "p3": p3, "beta": beta,
            "q0": coeffs["uu5"], "q1": coeffs["u1u4"], "q2": coeffs["u2u3"]}


# --------------------------------------------------------------------------
# registry

@dataclass
class AnsatzRow:
    id: str
    equation: str
    generator: str
    form: str
    zeta: str
    chart: dict[str, str]
    label: str = ""
    notes: str = ""
    flag: str | None = None
    expect_invariant: bool = True


@dataclass
class ClawRow:
    """A (generator, substitution) pair whose Noether density is compared to ``expect``."""
    id: str
    equation: str
    generator: str
    phi: str
    expect: str
    flag: str | None = None
    notes: str = ""


@dataclass
class DensityRow:
    """A claimed conserved density on a (possibly further constrained) row."""
    id: str
    equation: str
    density: str
    constraints: list[str] = field(default_factory=list)
    expect: bool = True
    flag: str | None = None
    notes: str = ""


@dataclass
class Registry:
    rows: list[CaseRow]
    ansatz: list[AnsatzRow]
    source: str = ""
    claws: list[ClawRow] = field(default_factory=list)
    densities: list[DensityRow] = field(default_factory=list)

    def case(self, row_id: str, extra: Iterable[str] = ()) -> CaseRow:
        """Row by id, optionally with additional constraints appended."""
        r = self.find(row_id)
        extra = list(extra)
        if not extra:
            return r
        return CaseRow(r.table, r.case, r.constraints + extra, r.generators, r.phi, r.form,
                       r.notes, r.flag, r.inherit_base)

    def get(self, table: str, case: str) -> CaseRow:
        for r in self.rows:
            if r.table == table and r.case == str(case):
                return r
        raise KeyError(f"no registry row {table}-{case}")

    def table(self, table: str) -> list[CaseRow]:
        return [r for r in self.rows if r.table == table]

    def find(self, case_id: str) -> CaseRow:
        """Look a row up by ``T1-5a`` style id or by a bare case name."""
        for r in self.rows:
            if r.id == case_id:
                return r
        hits = [r for r in self.rows if r.case == case_id]
        if len(hits) == 1:
            return hits[0]
        raise KeyError(f"no unique registry row for {case_id!r}")


def load_registry(path: str | Path | None = None) -> Registry:
    """Load and validate the case registry (the bundled one by default)."""
    if path is None:
        raw = resources.files("quintsym").joinpath("data/registry.toml").read_text()
        source = "bundled"
    else:
        raw = Path(path).read_text()
        source = str(path)
    try:
        data = tomli.loads(raw)
    except tomli.TOMLDecodeError as exc:
        raise RegistryError(f"registry is not valid TOML: {exc}") from None
    rows = []
    for item in data.get("row", []):
        try:
            gens = [(g["name"], g["field"]) for g in item.get("generators", [])]
            row = CaseRow(table=item["table"], case=str(item["case"]),
                          constraints=list(item.get("constraints", [])), generators=gens,
                          phi=item.get("phi"), form=item.get("form"), notes=item.get("notes", ""),
                          flag=item.get("flag"), inherit_base=item.get("inherit_base", True))
        except (KeyError, TypeError) as exc:
            raise RegistryError(f"malformed registry row {item!r}: {exc}") from None
        if row.table not in ("T1", "T2", "S"):
            raise RegistryError(f"unknown table {row.table!r}")
        # payload expressions must parse
        try:
            resolve_constraints(row.constraints)
            row.vector_fields()
            if row.phi:
                row.parse(row.phi)
        except Exception as exc:  # surfaced as a registry error with the row id
            raise RegistryError(f"row {row.id}: {exc}") from None
        rows.append(row)
    ansatz = []
    for item in data.get("ansatz", []):
        try:
            ansatz.append(AnsatzRow(id=item["id"], equation=item["equation"], generator=item["generator"],
                                    form=item["form"], zeta=item["zeta"], chart=dict(item["chart"]),
                                    label=item.get("label", ""), notes=item.get("notes", ""),
                                    flag=item.get("flag"),
                                    expect_invariant=item.get("expect_invariant", True)))
        except (KeyError, TypeError) as exc:
            raise RegistryError(f"malformed ansatz row {item!r}: {exc}") from None
    claws = [_load_item(ClawRow, item, "claw") for item in data.get("claw", [])]
    densities = [_load_item(DensityRow, item, "density") for item in data.get("density", [])]
    ids = [r.id for r in rows]
    if len(ids) != len(set(ids)):
        raise RegistryError("duplicate registry row ids")
    reg = Registry(rows, ansatz, source, claws, densities)
    for item in [*ansatz, *claws, *densities]:
        try:
            reg.find(item.equation)
        except KeyError:
            raise RegistryError(f"{item.id}: unknown equation {item.equation!r}") from None
    return reg


def _load_item(cls, item, kind):
    try:
        return cls(**item)
    except TypeError as exc:
        raise RegistryError(f"malformed {kind} row {item!r}: {exc}") from None


# --------------------------------------------------------------------------
# point transformations

@dataclass(frozen=True)
class PointTransform:
    """Diagonal affine change of variables ``(x, t, u) -> (X, T, U)``.

    ``X = a x + e``, ``T = b t + f``, ``U = c u + d`` with constant
    coefficients; ``a``, ``b`` and ``c`` must be invertible monomials.
    """

    X: Expr
    T: Expr
    U: Expr

    @classmethod
    def parse(cls, X: str, T: str, U: str, assumptions=None) -> "PointTransform":
        return cls(parse_expr(X, assumptions), parse_expr(T, assumptions), parse_expr(U, assumptions))

    def _affine(self, image: Expr, own: Expr):
        scale = E.partial(image, own)
        offset = image - scale * own
        for a in scale.atoms() | offset.atoms():
            if isinstance(a, (Var, Jet)):
                raise ValueError(f"transform component {image} is not diagonal affine")
        return scale, offset

    def coefficients(self):
        x, t, u = E.var("x"), E.var("t"), E.jet("u")
        a, e = self._affine(self.X, x)
        b, f = self._affine(self.T, t)
        c, d = self._affine(self.U, u)
        if (a * b).is_zero():
            raise ValueError("vanishing Jacobian")
        if c.is_zero():
            raise ValueError("transform does not determine u")
        return a, b, c, e, f, d

    def inverse(self) -> "PointTransform":
        a, b, c, e, f, d = self.coefficients()
        x, t, u = E.var("x"), E.var("t"), E.jet("u")
        return PointTransform((x - e) / a, (t - f) / b, (u - d) / c)


@dataclass(frozen=True)
class TransformResult:
    pde: PDESpec
    factor: Expr


def apply_point_transform(pde: PDESpec, tr: PointTransform) -> TransformResult:
    """Rewrite ``pde`` in the new variables and rescale so u_t has coefficient 1.

    ``factor`` is the nonzero multiplier that was divided out.
    """
    a, b, c, e, f, d = tr.coefficients()
    ia, ib, ic = E.invert(a), E.invert(b), E.invert(c)
    mapping = {}
    for atom in pde.delta.atoms():
        if isinstance(atom, Jet) and atom.dep == "u":
            if atom.t == 0 and atom.x == 0:
                mapping[atom] = (E.jet("u") - d) * ic
            else:
                mapping[atom] = b ** atom.t * a ** atom.x * ic * E.jet("u", atom.t, atom.x)
        elif isinstance(atom, Var) and atom.name == "x":
            mapping[atom] = (E.var("x") - e) * ia
        elif isinstance(atom, Var) and atom.name == "t":
            mapping[atom] = (E.var("t") - f) * ib
    new = E.substitute_many(pde.delta, mapping)
    factor = E.partial(new, E.jet("u", 1, 0))
    if len(factor) != 1 or factor.has(lambda at: isinstance(at, (Jet, Var))):
        raise ValueError(f"u_t coefficient {factor} is not an invertible constant")
    new = new * E.invert(factor)
    return TransformResult(PDESpec(new, assumptions=pde.assumptions, case_id=pde.case_id), factor)
