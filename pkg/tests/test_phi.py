import math

import numpy as np
import pytest

from finsler_ab import phi as P
from finsler_ab.jets import Jet
from finsler_ab.phi import (
    BerwaldFamilySpec,
    ExpressionError,
    PhiDomainError,
    PositivityError,
    QuadratureError,
    SingularScalarError,
    berwald_family_model,
    construct_berwald_phi,
    fit_integration_constants,
    parse_expression,
    phi_partials,
    scalar_pack,
)

from conftest import example1_plain, example2_printed, richardson_derivative


def test_riemannian_partials():
    t = phi_partials(P.riemannian(), 1.0, 0.3).table
    assert t[0, 0] == 1.0
    assert not np.nan_to_num(t).ravel()[1:].any()


def test_randers_partials():
    p = phi_partials(P.randers(), 0.5, -0.2)
    assert (p.phi, p.phi2, p.phi22, p.phi1) == (0.8, 1.0, 0.0, 0.0)


def test_example1_value_frozen():
    # ((0.25(e^0.5 - 1) + 1) e^0.25 0.5) / 0.75, evaluated by hand
    want = 0.9948460444459831
    assert example1_plain(1.0, 0.5) == pytest.approx(want, rel=1e-15)
    assert phi_partials(P.example1(1.0), 1.0, 0.5).phi == pytest.approx(want, rel=1e-14)


def test_example2_matches_printed_form():
    m = P.example2(1.0, 1.0, 1.0)
    for b2, frac in [(0.6, 0.3), (1.0, 0.5), (1.4, 0.25)]:
        s = frac * math.sqrt(b2)
        assert m.value(b2, s) == pytest.approx(example2_printed(b2, s), rel=1e-13)
    m2 = P.example2(0.7, 2.0, 0.5)
    assert m2.value(1.1, 0.4) == pytest.approx(example2_printed(1.1, 0.4, 0.7, 2.0, 0.5), rel=1e-13)


def _fd_partial(model, b2, s, p, q):
    if p == 0:
        return richardson_derivative(lambda v: model.value(b2, v), s, q)
    # nested differences: both steps widened so inner roundoff is not amplified by the outer one
    h = 1e-4 if q == 0 else 1e-3
    g = lambda u: model.value(u, s) if q == 0 else richardson_derivative(lambda v: model.value(u, v), s, q, 1e-3)  # noqa: E731
    return richardson_derivative(g, b2, 1, h)


@pytest.mark.parametrize("name", ["riemannian", "randers", "example1", "example2"])
def test_partials_agree_with_finite_differences(name):
    m = P.builtin_model(name)
    (lo, hi), (slo, shi) = m.domain.b2_range, m.domain.s_range
    for b2, frac in [(lo + 0.3 * (hi - lo), slo + 0.4 * (shi - slo)), (lo + 0.8 * (hi - lo), slo + 0.9 * (shi - slo))]:
        s = frac * math.sqrt(b2)
        t = phi_partials(m, b2, s).table
        for p, q in [(0, 1), (0, 2), (0, 3), (1, 0), (1, 1), (1, 2)]:
            fd = _fd_partial(m, b2, s, p, q)
            assert abs(t[p, q] - fd) <= 1e-5 * max(1.0, abs(t[p, q])), (p, q)


def test_domain_errors_name_the_constraint():
    with pytest.raises(PhiDomainError, match="b0"):
        phi_partials(P.randers(), 1.2, 0.1)
    with pytest.raises(PhiDomainError, match=r"\|s\|"):
        phi_partials(P.example1(), 1.0, 0.97)
    with pytest.raises(PhiDomainError, match="s > 0"):
        phi_partials(P.example1(), 1.0, -0.5)


def test_scalar_pack_riemannian():
    sp = scalar_pack(P.riemannian(), 0.8, 0.4)
    for k in ("Q", "R", "Theta", "Psi", "Pi", "Omega", "E", "H", "eta", "eta0", "eta1"):
        assert getattr(sp, k) == 0.0, k
    assert sp.rho == 1.0


def test_scalar_pack_randers_by_hand():
    # formal evaluation at the edge b^2 = 1, outside the b < 1 working domain
    sp = scalar_pack(P.randers(), 1.0, 0.0, check=False)
    assert (sp.rho, sp.rho0, sp.rho1, sp.Q, sp.Theta, sp.Psi, sp.H) == (1.0, 1.0, 1.0, 1.0, 0.5, 0.0, 0.0)
    assert sp.E == 0.5 and sp.E22 == 1.0
    weak = (sp.E - sp.s * sp.E2) * sp.phi2 + (sp.H2 - sp.s * sp.H22) * sp.Lam
    assert weak == 0.5


def test_scalar_pack_randers_e_derivatives():
    s = 0.3
    sp = scalar_pack(P.randers(), 0.5, s)
    assert sp.E == pytest.approx(0.5 / (1 + s))
    assert sp.E2 == pytest.approx(-0.5 / (1 + s) ** 2)
    assert sp.E22 == pytest.approx(1 / (1 + s) ** 3)
    assert sp.E222 == pytest.approx(-3 / (1 + s) ** 4)


@pytest.mark.parametrize("name", ["randers", "example1", "example2"])
def test_omega_identity_and_eh_derivatives(name):
    m = P.builtin_model(name)
    b2 = sum(m.domain.b2_range) / 2
    s = sum(m.domain.s_range) / 2 * math.sqrt(b2)
    sp = scalar_pack(m, b2, s)
    omega = 2 * sp.phi1 / sp.phi - sp.Lam * sp.Pi / sp.phi
    assert abs(sp.Omega - omega) <= 1e-12 * max(1.0, abs(omega))
    # E and H are themselves cancellation-heavy, so the second difference uses a wider step,
    # and derivatives that vanish are measured against the size of the function
    steps = {1: 1e-4, 2: 1e-3, 3: 2e-3}
    for base, ders in (("E", ("E2", "E22", "E222")), ("H", ("H2", "H22", "H222"))):
        for k, dname in enumerate(ders, start=1):
            fd = richardson_derivative(lambda v: getattr(scalar_pack(m, b2, v), base), s, k, steps[k])
            want = getattr(sp, dname)
            assert abs(want - fd) <= 1e-6 * max(1.0, abs(want), abs(getattr(sp, base))), dname


def test_closed_conformal_spray_scalars_consistent():
    # E = Theta (1 + 2 R b^2) + s Omega and H = Psi (1 + 2 R b^2) + s Pi - R
    m = P.example2(1.0, 2.0, 0.5)
    sp = scalar_pack(m, 0.9, 0.4)
    assert sp.E == pytest.approx(sp.Theta * (1 + 2 * sp.R * sp.b2) + sp.s * sp.Omega, rel=1e-12)
    assert sp.H == pytest.approx(sp.Psi * (1 + 2 * sp.R * sp.b2) + sp.s * sp.Pi - sp.R, rel=1e-12)


def test_singular_scalar_error_names_denominator():
    m = P.PhiModel("flat-cone", lambda b2, s: s + 0.0 * b2, P.Domain(positive_s=True))
    with pytest.raises(SingularScalarError, match="phi - s\\*phi_2"):
        scalar_pack(m, 1.0, 0.5)


def test_parse_expression():
    f = parse_expression("1/(1+t) + exp(-t)*sqrt(t) - ln(2)", "t")
    assert f(0.25) == pytest.approx(1 / 1.25 + math.exp(-0.25) * 0.5 - math.log(2))
    assert f(Jet.variable(0.25, 2)).coeffs[0] == pytest.approx(f(0.25))
    for bad in ("__import__('os')", "t.real", "(lambda: 1)()", "x + 1", "open('f')", "t if t else 1", "[t]"):
        with pytest.raises(ExpressionError):
            parse_expression(bad, "t")


def test_constructed_family_is_berwald(example1_spec, example2_spec):
    for spec in (example1_spec, example2_spec, example1_spec.with_constants(0.7, -0.3, 2.0)):
        m = berwald_family_model(spec)
        for b2, s in m.domain.grid(6, 6):
            sp = scalar_pack(m, b2, s)
            assert abs(sp.E - s * sp.E2) <= 1e-7
            assert abs(sp.H2 - s * sp.H22) <= 1e-7


def test_constructed_b2_derivatives_are_exact(example2_spec):
    cb = P.ConstructedBerwald(example2_spec)
    u = 0.9
    a, b, c = cb.abc(Jet.variable(u, 2))
    for jet, idx in ((a, 0), (b, 1), (c, 2)):
        fd1 = richardson_derivative(lambda v: cb.abc(v)[idx], u, 1, 1e-3)
        assert jet.coeffs[1] == pytest.approx(fd1, rel=1e-8)
    theta = 1 / (1 + u)
    assert a.coeffs[1] == pytest.approx((1 / u - u * theta) * a.coeffs[0], rel=1e-13)
    assert b.coeffs[1] == pytest.approx(theta * a.coeffs[0], rel=1e-13)
    assert c.coeffs[1] == pytest.approx((0.5 * u * theta - 1 / u) * c.coeffs[0], rel=1e-13)


def test_constructed_quadrature_against_closed_antiderivatives(example1_spec):
    # theta = 1: A = u e^{-u^2/2}, B = -e^{-u^2/2}, C = e^{u^2/4}/u up to constants fixed at 0.25
    cb = P.ConstructedBerwald(example1_spec)
    r = 0.25
    for u in (0.5, 1.0, 1.5):
        a, b, c = cb.abc(u)
        assert a == pytest.approx(u * math.exp(-u * u / 2) / (r * math.exp(-r * r / 2)), rel=1e-10)
        assert b == pytest.approx((math.exp(-r * r / 2) - math.exp(-u * u / 2)) / (r * math.exp(-r * r / 2)), rel=1e-9)
        assert c == pytest.approx(math.exp(u * u / 4) / u * r / math.exp(r * r / 4), rel=1e-10)


def test_fit_recovers_example_constants(example1_spec, example2_spec):
    pts = [(u, f * math.sqrt(u)) for u in (0.6, 0.9, 1.2, 1.45) for f in (0.25, 0.4, 0.55)]
    fit = fit_integration_constants(example1_spec, P.example1().value, pts)
    assert fit.a_ref == pytest.approx(0.25 * math.exp(-1 / 32), rel=1e-9)
    assert fit.b_ref == pytest.approx(-math.exp(-1 / 32), rel=1e-9)
    assert fit.c_ref == pytest.approx(4 * math.exp(1 / 64), rel=1e-9)
    w = 0.25 - math.log(1.25)
    fit2 = fit_integration_constants(example2_spec, P.example2().value, pts)
    assert fit2.a_ref == pytest.approx(0.25 * math.exp(-w), rel=1e-9)
    assert fit2.b_ref == pytest.approx(-math.exp(-w), rel=1e-9)
    assert fit2.c_ref == pytest.approx(4 * math.exp(w / 2), rel=1e-9)


def test_construct_berwald_phi_errors(example1_spec):
    neg = BerwaldFamilySpec(parse_expression("t - 10", "t"), parse_expression("1", "b2"))
    with pytest.raises(PositivityError):
        construct_berwald_phi(neg, 1.0, 0.5)
    pole = BerwaldFamilySpec(parse_expression("1+t", "t"), parse_expression("1/(b2-0.7)", "b2"))
    with pytest.raises(QuadratureError):
        construct_berwald_phi(pole, 1.0, 0.5)
    p = construct_berwald_phi(example1_spec, 1.0, 0.5)
    assert p.phi > 0
