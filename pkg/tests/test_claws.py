import math

import numpy as np
import pytest

from quintsym import expr as E
from quintsym.claws import (ConservedVector, PreconditionError, TaylorSeries, _flux_component, density_ratio,
                            divergence_residual, evaluate, integrate_x, is_conserved_density,
                            noether_flux, noether_identity_residual, numeric_jet_residual,
                            total_x_derivative_test, trivial_normalize)
from quintsym.jets import ProlongedVF, VectorField, characteristic
from quintsym.model import PDESpec, instantiate_case, load_registry
from quintsym.parse import parse_expr as P
from quintsym.sadj import Substitution, euler_derivative

KDV = PDESpec.from_rhs(P("u*u[x] + u[3x]"))


def test_identity_holds_for_any_field():
    # the operator identity does not require a symmetry
    for f in ["Dx", "t*Dt - u*Du", "x*Dx + u^2*Du"]:
        assert noether_identity_residual(PDESpec.family(), VectorField.parse(f)).is_zero()


@pytest.mark.parametrize("L", ["u*u[t,x]^2", "u^2*u[t,x] + u[x]^2*u[t]", "u*u[2t,x]"])
def test_flux_identity_with_mixed_derivatives(L):
    L = P(L)
    with E.jet_caps(t=4, x=8):
        for f in ["Dx", "x*Dx + t*Dt + u*Du"]:
            vf = VectorField.parse(f)
            W = characteristic(vf)
            Nt, Nx = _flux_component(L, W, vf.xi_t, "t"), _flux_component(L, W, vf.xi_x, "x")
            lhs = E.total_derivative(Nt, "t") + E.total_derivative(Nx, "x")
            div = E.total_derivative(vf.xi_t, "t") + E.total_derivative(vf.xi_x, "x")
            rhs = ProlongedVF(vf).apply(L) + L * div - W * euler_derivative(L, "u")
            assert (lhs - rhs).is_zero()


def test_kdv_densities_with_phi_u():
    v = Substitution(P("u"))
    # translations only give trivial vectors; the boost gives mass, the scaling momentum
    for f in ["Dx", "Dt"]:
        cv = noether_flux(KDV, VectorField.parse(f), v)
        assert cv.verified and trivial_normalize(cv, KDV).T.is_zero()
    cv = noether_flux(KDV, VectorField.parse("t*Dx - Du"), v)
    assert trivial_normalize(cv, KDV).T == P("-u")
    cv = noether_flux(KDV, VectorField.parse("x*Dx + 3*t*Dt - 2*u*Du"), v)
    assert density_ratio(trivial_normalize(cv, KDV).T, P("u^2")) == E.const(-1.5)


def test_precondition_failures():
    with pytest.raises(PreconditionError):
        noether_flux(KDV, VectorField.parse("u*Du"), Substitution(P("u")))
    with pytest.raises(PreconditionError):
        noether_flux(KDV, VectorField.parse("Dx"), Substitution(P("u^3")))


def test_divergence_residual_of_wrong_vector():
    cv = ConservedVector(P("u"), P("u^2"))
    assert not divergence_residual(cv, KDV).is_zero()
    assert numeric_jet_residual(cv, KDV, samples=5) > 1e-3


def test_conserved_densities():
    assert is_conserved_density(P("u"), KDV)
    assert is_conserved_density(P("u^2"), KDV)
    assert is_conserved_density(P("u^3 - 3*u[x]^2"), KDV)
    assert not is_conserved_density(P("u^3"), KDV)


def test_total_x_derivative_test():
    res = total_x_derivative_test(P("2*u*u[x] + u[x]*u[2x]"))
    assert res and res.antiderivative == P("u^2 + 1/2*u[x]^2")
    assert not total_x_derivative_test(P("u[x]^3"))
    with pytest.raises(ValueError):
        total_x_derivative_test(P("u[t]"))


def test_integrate_x_with_logs_and_explicit_x():
    for text in ["ln(u)*u[x]", "u^-1*u[x]", "x*u[x] + u", "ln(u)^2*u^2*u[x]"]:
        F = integrate_x(P(text))
        assert F is not None and E.total_derivative(F, "x") == P(text)
    assert integrate_x(P("u[2x]^2")) is None
    # a symbolic exponent might be -1, so no power rule is applied
    assert integrate_x(P("u^(a)*u[x]")) is None


def test_trivial_normalize_keeps_divergence():
    cv = ConservedVector(P("u + u[2x]"), P("-1/2*u^2 - u[2x] - u*u[3x] - u[5x]"))
    n = trivial_normalize(cv, KDV)
    assert n.T == P("u")
    assert divergence_residual(n, KDV).is_zero() == divergence_residual(cv, KDV).is_zero()


def test_density_ratio():
    assert density_ratio(P("-2*u*ln(u)"), P("u*ln(u)")) == E.const(-2)
    assert density_ratio(P("u + u^2"), P("u")) is None
    assert density_ratio(E.ZERO, E.ZERO) == E.ONE


def test_taylor_series_arithmetic():
    s = TaylorSeries([0.3, 1.0, 0.0, 0.0, 0.0, 0.0])
    ex = s.exp()
    assert math.isclose(ex.c[0], math.exp(0.3))
    assert math.isclose(ex.c[3], math.exp(0.3) / 6)
    lg = (s + 1).log()
    assert math.isclose(lg.c[2], -0.5 / 1.3 ** 2)
    sn, cs = s.sin_cos()
    assert math.isclose(sn.c[1], math.cos(0.3)) and math.isclose(cs.c[1], -math.sin(0.3))
    rec = (s + 1).reciprocal()
    assert np.allclose(((s + 1) * rec).c, [1, 0, 0, 0, 0, 0], atol=1e-14)
    p = (s + 1) ** 0.5
    assert np.allclose((p * p).c, (s + 1).c)


def test_evaluate_matches_closed_form():
    e = P("exp(a*x)*u^2 + ln(u)")
    env = {E.Var("x"): TaylorSeries([0.5, 1.0]), "a": 2.0, E.Jet("u", 0, 0): TaylorSeries([1.5, 0.0])}
    val = evaluate(e, env, 2)
    assert math.isclose(val.c[0], math.exp(1.0) * 2.25 + math.log(1.5))
    assert math.isclose(val.c[1], 2 * math.exp(1.0) * 2.25)


def test_numeric_oracle_on_registry_flux():
    reg = load_registry()
    row = reg.find("gnsa")
    pde = instantiate_case(row)
    cv = noether_flux(pde, VectorField.parse("t*Dt - u*Du"), row.substitution())
    assert numeric_jet_residual(cv, pde, samples=20, seed=3) < 1e-10
