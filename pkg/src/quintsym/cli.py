"""Command-line driver: registry verification suites, simulation, flux derivation.

Exit codes: 0 success, 1 a check failed or a run aborted, 2 bad input.
"""
from __future__ import annotations

import argparse
import json
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

from . import expr as E
from .claws import (PreconditionError, density_ratio, divergence_residual, is_conserved_density,
                    noether_flux, numeric_jet_residual, total_x_derivative_test, trivial_normalize)
from .jets import VectorField, bracket_closure, symmetry_check
from .model import (ConstraintError, PDESpec, ParameterSet, PointTransform, Registry, RegistryError,
                    apply_point_transform, instantiate_case, load_registry)
from .numerics import ConfigError, SimulationAborted, integrate, load_config, write_csv
from .parse import format_expr, parse_expr
from .reduce import Ansatz, ReductionError, constant_solution_check, invariance_check, reduce_to_ode
from .sadj import Substitution, selfadjointness_check

SCHEMA_VERSION = "1.0"
SUITES = ("symmetries", "brackets", "selfadjoint", "claws", "reductions", "structure")
NUMERIC_TOL = 1e-10

EXIT_OK, EXIT_FAIL, EXIT_INPUT = 0, 1, 2


class InputError(Exception):
    """Bad command-line input (exit code 2)."""


@dataclass
class Check:
    id: str
    inputs: dict
    holds: bool
    flag: str | None = None
    residual: str | None = None
    details: dict = field(default_factory=dict)
    elapsed: float = 0.0

    @property
    def outcome(self) -> str:
        if self.flag:
            return "flagged"
        return "pass" if self.holds else "fail"

    def to_dict(self) -> dict:
        d = {"id": self.id, "inputs": self.inputs, "outcome": self.outcome,
             "computed": "pass" if self.holds else "fail", "elapsed_s": round(self.elapsed, 4)}
        if self.flag:
            d["flag"] = self.flag
        if self.residual is not None:
            d["residual"] = self.residual
        if self.details:
            d["details"] = self.details
        return d


def _text(e) -> str:
    return format_expr(e) if e is not None else None


def _timed(fn: Callable[[], Check]) -> Check:
    t0 = time.perf_counter()
    c = fn()
    c.elapsed = time.perf_counter() - t0
    return c


# --------------------------------------------------------------------------
# suites

def _generator_rows(reg: Registry):
    return [r for r in reg.rows if r.table == "T1" or r.generators]


def _select_rows(rows, case, row_no, *, attr="id"):
    if row_no is not None:
        rows = [r for r in rows if getattr(r, "table", None) == "T2" and r.case == str(row_no)]
    if case is not None:
        rows = [r for r in rows if case in (r.id, getattr(r, "case", None))]
    return rows


def suite_symmetries(reg, case=None, row=None):
    def one(r):
        def run():
            pde = instantiate_case(r)
            gens = []
            ok = True
            for name, vf in r.vector_fields():
                res = symmetry_check(vf, pde)
                ok &= res.holds
                gens.append({"name": name, "field": str(vf), "holds": res.holds,
                             **({} if res.holds else {"residual": _text(res.residual)})})
            bad = [g for g in gens if not g["holds"]]
            return Check(r.id, {"case": r.id, "constraints": r.constraints}, ok, r.flag,
                         "; ".join(f"{g['name']}: {g['residual']}" for g in bad) or None,
                         {"generators": gens})
        return run
    return [_timed(one(r)) for r in _select_rows(_generator_rows(reg), case, row)]


def suite_brackets(reg, case=None, row=None):
    def one(r):
        def run():
            gens = r.vector_fields()
            res = bracket_closure(gens)
            consts = {f"[{a},{b}]": " + ".join(f"({format_expr(c)})*{n}" for n, c in d.items()) or "0"
                      for (a, b), d in res.constants.items()}
            fails = {f"[{a},{b}]": str(br) for a, b, br in res.failures}
            return Check(r.id, {"case": r.id, "generators": [n for n, _ in gens]}, res.closed, r.flag,
                         "; ".join(f"{k} = {v} not in span" for k, v in fails.items()) or None,
                         {"structure_constants": consts, "rational": res.rational})
        return run
    return [_timed(one(r)) for r in _select_rows(_generator_rows(reg), case, row)]


def suite_selfadjoint(reg, case=None, row=None):
    def one(r):
        def run():
            pde = instantiate_case(r)
            res = selfadjointness_check(pde, r.substitution())
            det = {}
            if res.holds:
                det["multiplier"] = _text(res.multiplier) if res.multiplier is not None else None
            return Check(r.id, {"case": r.id, "constraints": r.constraints, "phi": r.phi}, res.holds,
                         r.flag, None if res.holds else _text(res.residual), det)
        return run
    rows = [r for r in reg.rows if r.phi is not None]
    return [_timed(one(r)) for r in _select_rows(rows, case, row)]


def _claw(reg, c) -> Check:
    base = reg.find(c.equation)
    pde = instantiate_case(base)
    a = base.assumptions()
    vf = VectorField.parse(c.generator, a)
    phi = Substitution(parse_expr(c.phi, a), text=c.phi)
    inputs = {"case": base.id, "generator": c.generator, "phi": c.phi}
    try:
        cv = noether_flux(pde, vf, phi, provenance={"case": base.id})
    except PreconditionError as exc:
        return Check(f"claw:{c.id}", inputs, False, c.flag, str(exc))
    div = divergence_residual(cv, pde)
    num = numeric_jet_residual(cv, pde, samples=100, seed=0)
    norm = trivial_normalize(cv, pde)
    expect = parse_expr(c.expect, a)
    ratio = density_ratio(norm.T, expect)
    matches = ratio is not None and (not ratio.is_zero() or expect.is_zero())
    ok = div.is_zero() and num < NUMERIC_TOL and matches
    det = {"T": _text(cv.T), "F": _text(cv.F), "density": _text(norm.T), "expected": c.expect,
           "ratio": _text(ratio), "numeric_residual": num, "divergence_residual": _text(div)}
    if c.notes:
        det["notes"] = c.notes
    resid = None if ok else (f"density {_text(norm.T)} is not a multiple of {c.expect}" if not matches
                             else f"divergence {_text(div)}, numeric {num:.3g}")
    return Check(f"claw:{c.id}", inputs, ok, c.flag, resid, det)


def _density(reg, d) -> Check:
    row = reg.case(d.equation, d.constraints)
    pde = instantiate_case(row)
    T = parse_expr(d.density, row.assumptions())
    conserved = is_conserved_density(T, pde)
    inputs = {"case": row.id, "extra_constraints": d.constraints, "density": d.density,
              "expect_conserved": d.expect}
    det = {"conserved": conserved}
    if d.notes:
        det["notes"] = d.notes
    return Check(f"density:{d.id}", inputs, conserved == d.expect, d.flag,
                 None if conserved == d.expect else f"conserved = {conserved}", det)


def suite_claws(reg, case=None, row=None):
    items = [(c, _claw) for c in reg.claws] + [(d, _density) for d in reg.densities]
    if row is not None:
        items = [(i, f) for i, f in items if i.equation == f"T2-{row}"]
    if case is not None:
        items = [(i, f) for i, f in items if case in (i.id, i.equation) or reg.find(i.equation).id == case]
    return [_timed(lambda i=i, f=f: f(reg, i)) for i, f in items]


def suite_reductions(reg, case=None, row=None):
    def one(a):
        def run():
            base = reg.find(a.equation)
            pde = instantiate_case(base)
            assume = base.assumptions()
            vf = VectorField.parse(a.generator, assume)
            ans = Ansatz.parse(a.form, a.zeta, a.chart, assume)
            inputs = {"case": base.id, "generator": a.generator, "label": a.label, "form": a.form,
                      "zeta": a.zeta}
            inv = invariance_check(ans, vf)
            det = {"invariant": inv, "expect_invariant": a.expect_invariant}
            if not inv:
                return Check(f"ansatz:{a.id}", inputs, inv == a.expect_invariant, a.flag,
                             None if not a.expect_invariant else "ansatz is not invariant", det)
            try:
                ode = reduce_to_ode(pde, ans)
            except ReductionError as exc:
                det["ode"] = None
                return Check(f"ansatz:{a.id}", inputs, False, a.flag, str(exc), det)
            det["ode"] = f"{_text(ode.residual)} = 0"
            det["prefactor"] = _text(ode.prefactor)
            return Check(f"ansatz:{a.id}", inputs, a.expect_invariant, a.flag, None, det)
        return run
    rows = reg.ansatz
    if row is not None:
        rows = []
    if case is not None:
        rows = [a for a in rows if case in (a.id, a.equation) or reg.find(a.equation).id == case]
    out = [_timed(one(a)) for a in rows]
    if case is None and row is None:
        def const():
            pde = PDESpec.family()
            return Check("constant-solutions", {"case": "family"}, constant_solution_check(pde))
        out.append(_timed(const))
    return out


def structure_checks(reg) -> list[tuple[str, dict, Callable[[], tuple[bool, str | None, dict]]]]:
    """Identities about the family itself: rescaling, discrete symmetry, factorizations."""
    def h_elimination():
        h = E.param("h", 1)
        pde = PDESpec.family(ParameterSet.symbolic(h=h))
        res = apply_point_transform(pde, PointTransform.parse("x/h", "t", "u/h", {"h": 1}))
        target = PDESpec.family()
        ok = (res.pde.delta - target.delta).is_zero()
        return ok, None if ok else _text(res.pde.delta - target.delta), {"factor": _text(res.factor)}

    def reflection(name):
        def run():
            pde = instantiate_case(reg.find(name))
            res = apply_point_transform(pde, PointTransform.parse("x", "-t", "-u"))
            diff = res.pde.delta - pde.delta
            return diff.is_zero(), None if diff.is_zero() else _text(diff), {"factor": _text(res.factor)}
        return run

    def square_form():
        k = E.param("kappa")
        u = [E.jet("u", 0, j) for j in range(3)]
        rhs = E.total_derivative((u[2] + k * u[0]) ** 2, "x")
        eq13 = instantiate_case(reg.case("eq13", ["b = kappa^2"]))
        diff = rhs - eq13.rhs
        generic = instantiate_case(reg.find("eq13"))
        return (diff.is_zero(), None if diff.is_zero() else _text(diff),
                {"differs_for_generic_b": not (rhs - generic.rhs).is_zero()})

    def total_derivative():
        rhs = PDESpec.family().rhs
        res = total_x_derivative_test(rhs)
        ok = res.is_total and res.antiderivative is not None and \
            (E.total_derivative(res.antiderivative, "x") - rhs).is_zero()
        return ok, None, {"antiderivative": _text(res.antiderivative)}

    def case5(src, tgt, root):
        def run():
            row = reg.find(src)
            tr = PointTransform.parse(f"{root}*x", "kappa^2*t", f"q2*{root}*u", row.assumptions())
            res = apply_point_transform(instantiate_case(row), tr)
            diff = res.pde.delta - instantiate_case(reg.find(tgt)).delta
            return diff.is_zero(), None if diff.is_zero() else _text(diff), \
                {"image": f"u_t = {_text(res.pde.rhs)}", "factor": _text(res.factor)}
        return run

    return [
        ("h-elimination", {"transform": "(x, t, u) -> (x/h, t, u/h)"}, h_elimination),
        ("reflection:eq221p", {"case": "S-eq221p", "transform": "(t, u) -> (-t, -u)"}, reflection("eq221p")),
        ("reflection:eq221m", {"case": "S-eq221m", "transform": "(t, u) -> (-t, -u)"}, reflection("eq221m")),
        ("square-form", {"case": "S-eq13", "constraint": "b = kappa^2"}, square_form),
        ("total-x-derivative", {"case": "family"}, total_derivative),
        ("case5-normalization:5a", {"case": "T1-5a", "target": "S-eq221p"},
         case5("T1-5a", "eq221p", "sqrt(kappa)")),
        ("case5-normalization:5b", {"case": "T1-5b", "target": "S-eq221m"},
         case5("T1-5b", "eq221m", "sqrt(-kappa)")),
    ]


def suite_structure(reg, case=None, row=None):
    out = []
    for cid, inputs, fn in structure_checks(reg):
        if case is not None and case != cid and case != inputs.get("case"):
            continue
        if row is not None:
            continue

        def run(cid=cid, inputs=inputs, fn=fn):
            ok, resid, det = fn()
            return Check(cid, inputs, ok, None, resid, det)
        out.append(_timed(run))
    return out


RUNNERS = {
    "symmetries": suite_symmetries, "brackets": suite_brackets, "selfadjoint": suite_selfadjoint,
    "claws": suite_claws, "reductions": suite_reductions, "structure": suite_structure,
}


def run_verification_suite(suite: str, registry: Registry, case=None, row=None) -> dict:
    """Run one suite and return the JSON-ready report."""
    if suite not in RUNNERS:
        raise InputError(f"unknown suite {suite!r}")
    checks = RUNNERS[suite](registry, case, row)
    if not checks:
        raise InputError(f"selector matched nothing in suite {suite!r}")
    checks.sort(key=lambda c: c.id)
    summary = {k: sum(c.outcome == k for c in checks) for k in ("pass", "fail", "flagged")}
    return {"schema_version": SCHEMA_VERSION, "suite": suite, "registry": registry.source,
            "selector": {"case": case, "row": row}, "summary": summary,
            "checks": [c.to_dict() for c in checks]}


# --------------------------------------------------------------------------
# commands

def _print_report(report: dict, out):
    for c in report["checks"]:
        line = f"{c['outcome'].upper():8s} {c['id']}"
        if c["outcome"] == "flagged":
            line += f"  (computed {c['computed']}: {c['flag']})"
        elif c.get("residual"):
            line += f"  residual: {c['residual']}"
        print(line, file=out)
    s = report["summary"]
    print(f"{report['suite']}: {s['pass']} pass, {s['fail']} fail, {s['flagged']} flagged", file=out)


def cmd_verify(args) -> int:
    reg = load_registry(args.registry)
    report = run_verification_suite(args.suite, reg, args.case, args.row)
    _print_report(report, sys.stdout)
    if args.report:
        Path(args.report).write_text(json.dumps(report, indent=2) + "\n")
    return EXIT_FAIL if report["summary"]["fail"] else EXIT_OK


def cmd_simulate(args) -> int:
    cfg = load_config(args.config)
    try:
        _, series = integrate(cfg)
    except SimulationAborted as exc:
        write_csv(exc.series, args.out)
        print(f"aborted: {exc}; partial series written to {args.out}", file=sys.stderr)
        return EXIT_FAIL
    write_csv(series, args.out)
    for m in series.monitors:
        print(f"{m}: initial {series.values[m][0]:.12g}, max relative drift {series.max_drift(m):.3e}")
    print(f"{len(series.t)} rows written to {args.out}")
    return EXIT_OK


def cmd_derive_claw(args) -> int:
    reg = load_registry(args.registry)
    try:
        row = reg.find(args.case)
    except KeyError as exc:
        raise InputError(str(exc.args[0])) from None
    pde = instantiate_case(row)
    a = row.assumptions()
    vf = VectorField.parse(args.symmetry, a)
    phi = Substitution(parse_expr(args.phi, a), text=args.phi)
    try:
        cv = noether_flux(pde, vf, phi, provenance={"case": row.id})
    except PreconditionError as exc:
        print(f"precondition failed: {exc}", file=sys.stderr)
        return EXIT_FAIL
    norm = trivial_normalize(cv, pde)
    num = numeric_jet_residual(cv, pde, samples=100, seed=0)
    print(f"equation: {pde}")
    print(f"T = {_text(cv.T)}")
    print(f"F = {_text(cv.F)}")
    print(f"normalized density: {_text(norm.T)}")
    print(f"normalized flux: {_text(norm.F)}")
    print(f"divergence residual: {_text(divergence_residual(cv, pde))}; numeric {num:.3g}")
    return EXIT_OK if cv.verified and num < NUMERIC_TOL else EXIT_FAIL


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="quintsym", description=__doc__.splitlines()[0])
    p.add_argument("--registry", help="registry TOML (defaults to the bundled one)")
    sub = p.add_subparsers(dest="command", required=True)

    v = sub.add_parser("verify", help="run a verification suite over the registry")
    v.add_argument("suite", choices=SUITES)
    v.add_argument("--case", help="registry row id (e.g. T1-5a) or case name")
    v.add_argument("--row", type=int, help="row number within registry table T2")
    v.add_argument("--report", help="write a JSON report here")
    v.set_defaults(func=cmd_verify)

    s = sub.add_parser("simulate", help="integrate the equation and monitor constants of motion")
    s.add_argument("--config", required=True)
    s.add_argument("--out", required=True, help="CSV output path")
    s.set_defaults(func=cmd_simulate)

    d = sub.add_parser("derive-claw", help="Noether flux for a symmetry and a substitution")
    d.add_argument("--case", required=True)
    d.add_argument("--symmetry", required=True, help='e.g. "t*Dt - u*Du"')
    d.add_argument("--phi", required=True, help='e.g. "ln(u)"')
    d.set_defaults(func=cmd_derive_claw)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code else EXIT_OK
    try:
        return args.func(args)
    except (InputError, RegistryError, ConstraintError, ConfigError, ValueError, KeyError, OSError) as exc:
        msg = exc.args[0] if isinstance(exc, KeyError) and exc.args else exc
        print(f"error: {msg}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
