import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from magcontact import surface as S
from magcontact.errors import InfeasibleParams, InfeasibleSpec, NonEvaluable


def quad_area(profile):
    v, _ = integrate.quad(lambda t: float(profile.eval(t)[0]), 0.0, profile.ell,
                          epsabs=1e-13, epsrel=1e-13, limit=400)
    return v


def test_round_sphere_validates(sphere):
    rep = S.validate(sphere)
    assert rep.passed, rep.failed()
    assert abs(quad_area(sphere) - 2.0) < 1e-10
    t = np.linspace(0, np.pi, 7)
    assert np.allclose(sphere.eval(t)[0], np.sin(t), atol=1e-15)


def test_truncated_sphere_fails_boundary():
    p = S.Profile(np.pi / 2, lambda t: (np.sin(t), np.cos(t), -np.sin(t), -np.cos(t)))
    rep = S.validate(p)
    assert not rep.passed
    assert "gamma(ell)=0" in rep.failed()


def test_nonfinite_evaluator_raises():
    def ev(t):
        return np.where(t > 1.0, np.nan, np.sin(t)), np.cos(t), -np.sin(t), -np.cos(t)

    p = S.Profile(np.pi, ev)
    with pytest.raises(NonEvaluable):
        S.validate(p)


def test_normalize_examples(sphere):
    assert S.normalize(sphere) is sphere
    half = S.Profile(np.pi / 2, lambda t: (0.5 * np.sin(2 * t), np.cos(2 * t),
                                           -2 * np.sin(2 * t), -4 * np.cos(2 * t)))
    p = S.normalize(half)
    assert p.kind["scale"] == pytest.approx(2.0, abs=1e-12)
    t = np.linspace(0, np.pi, 9)
    assert np.allclose(p.eval(t)[0], np.sin(t), atol=1e-12)


def test_ellipsoid_normalized_area_and_length():
    p = S.ellipsoid(1.0, 2.0)
    assert abs(quad_area(p) - 2.0) < 1e-8
    raw = S.ellipsoid(1.0, 2.0, normalize_area=False)
    arc, _ = integrate.quad(lambda u: np.hypot(np.cos(u), 2 * np.sin(u)), 0, np.pi, epsabs=1e-13)
    assert raw.ell == pytest.approx(arc, rel=1e-12)
    assert S.validate(p).passed


@pytest.mark.parametrize("a,c", [(2.0, 1.0), (1.0, 3.0)])
def test_ellipsoid_curvature_pole_and_equator(a, c):
    raw = S.ellipsoid(a, c, normalize_area=False)
    # principal radii a^2/c at the pole, a and c^2/a at the equator
    assert S.curvature(raw, 0.0) == pytest.approx(c * c / a ** 4, rel=1e-6)
    assert S.curvature(raw, raw.ell / 2) == pytest.approx(1 / (c * c), rel=1e-9)


def test_scalars_round_sphere(sphere):
    s = S.scalars(sphere, None, np.pi / 2)
    assert abs(s.Gamma) < 1e-14 and s.K == pytest.approx(1.0) and abs(s.beta_theta) < 1e-14
    s0 = S.scalars(sphere, None, 0.0)
    assert s0.Gamma == pytest.approx(-1.0, abs=1e-14) and s0.K == pytest.approx(1.0)
    t = np.linspace(0, np.pi, 11)
    assert np.allclose(sphere.primitive(t), -np.cos(t), atol=1e-14)


def test_primitive_matches_quadrature(oblate):
    for t in (0.3, 1.0, oblate.ell * 0.8):
        v, _ = integrate.quad(lambda x: float(oblate.eval(x)[0]), 0, t, epsabs=1e-14)
        assert oblate.primitive(t) == pytest.approx(v - 1.0, abs=1e-12)
        assert oblate.primitive(t, base=0.0) == pytest.approx(v, abs=1e-12)


def brute_m_gamma(profile, n=20001):
    t = np.linspace(0, profile.ell, n)[1:-1]
    g, g1, _, _ = profile.eval(t)
    G = integrate.cumulative_trapezoid(profile.eval(np.linspace(0, profile.ell, 200001))[0],
                                       np.linspace(0, profile.ell, 200001), initial=0.0) - 1.0
    Gi = np.interp(t, np.linspace(0, profile.ell, 200001), G)
    return float(np.max(np.abs((Gi + g1) / g)))


def test_m_gamma_round_sphere(sphere):
    assert S.m_gamma(sphere) < 1e-10
    cb = S.contact_bounds(sphere)
    assert cb.full_ray and cb.interval == "full-ray"


def test_m_gamma_against_brute_force(oblate, prolate):
    for p in (oblate, prolate):
        assert S.m_gamma(p) == pytest.approx(brute_m_gamma(p), rel=1e-5)


def test_contact_interval_examples():
    assert S.contact_interval(0.0).full_ray
    cb = S.contact_interval(2.0)
    assert cb.m_minus == pytest.approx(1.0) and cb.m_plus == pytest.approx(1.0)
    cb = S.contact_interval(2.5)
    assert (cb.m_minus, cb.m_plus) == (pytest.approx(0.5), pytest.approx(2.0))
    assert cb.contains(0.4) and not cb.contains(1.0) and cb.contains(2.5)


@given(st.floats(2.0, 50.0))
def test_contact_interval_roots(mg):
    cb = S.contact_interval(mg)
    r = np.sort(np.roots([1.0, -mg, 1.0]).real)
    assert cb.m_minus * cb.m_plus == pytest.approx(1.0, abs=1e-12)
    assert cb.m_plus == pytest.approx(r[1], rel=1e-7)


def test_km_positive_examples(sphere):
    for m in (0.0, 0.3, 2.0):
        ok, margin = S.km_positive(sphere, None, m)
        assert ok and margin == pytest.approx(1 + m * m, abs=1e-6)
    assert S.magnetic_curvature(-4.0, 1.0, 0.0, 0.4) == pytest.approx(0.36)
    assert S.magnetic_curvature(-4.0, 1.0, 0.0, 0.6) == pytest.approx(-0.44)


def test_stretched_sphere_family():
    p = S.stretched_sphere(0.5, 0.3, eps=0.9)
    assert S.validate(p).passed
    g1 = float(p.eval(0.3)[1])
    assert g1 == pytest.approx(np.cos(0.6), rel=1e-10) and g1 < 0.9
    with pytest.raises(InfeasibleSpec):
        S.stretched_sphere(0.5, 0.3, eps=0.5)


def test_stretched_sphere_large_c_exceeds_two(stretched):
    assert S.validate(stretched).passed
    assert S.m_gamma(stretched) > 2


def test_dip_profile(dip):
    assert S.validate(dip).passed
    assert float(dip.eval(0.1)[1]) < -0.5
    assert abs(quad_area(dip) - 2.0) < 1e-8


def test_cosine_strength_flux(sphere, oblate):
    for p in (sphere, oblate):
        f = S.cosine_strength(p, 0.3)
        v, _ = integrate.quad(lambda t: float(p.eval(t)[0] * f.eval(t)[0]), 0, p.ell,
                              epsabs=1e-13, limit=200)
        assert v == pytest.approx(2.0, abs=1e-10)
        assert S.validate(p, f).passed
    with pytest.raises(InfeasibleParams):
        S.cosine_strength(sphere, 1.5)


def test_rigid_strength_constant_case(sphere):
    f = S.rigid_strength(sphere, 0.0, 1.0)
    t = np.linspace(0, np.pi, 9)
    assert np.allclose(f.eval(t)[0], 1.0) and f.normalized
    with pytest.raises(InfeasibleParams):
        S.rigid_strength(sphere, -1.0, 1.0)


def test_profile_text_roundtrip(oblate):
    q = S.profile_from_text(S.profile_to_text(oblate))
    t = np.linspace(0, oblate.ell, 17)
    assert q.ell == pytest.approx(oblate.ell, rel=1e-15)
    assert np.allclose(q.eval(t)[0], oblate.eval(t)[0], atol=1e-15)
    f = S.cosine_strength(oblate, 0.2)
    g = S.strength_from_text(S.strength_to_text(f), oblate)
    assert np.allclose(g.eval(t)[0], f.eval(t)[0], atol=1e-15)


def test_sampled_profile_close_to_source(sphere):
    t = np.linspace(0, np.pi, 801)
    p = S.sampled_profile(t, np.sin(t))
    x = np.linspace(0.01, 3.1, 50)
    assert np.max(np.abs(p.eval(x)[0] - np.sin(x))) < 1e-10


@settings(max_examples=25, deadline=None)
@given(st.floats(0.2, 5.0))
def test_scaling_properties(lam):
    p = S.scale_profile(S.round_sphere(), lam)
    assert p.ell == pytest.approx(lam * np.pi)
    assert p.area == pytest.approx(2 * lam * lam, rel=1e-10)
    t = 0.37 * p.ell
    assert float(p.eval(t)[1]) == pytest.approx(np.cos(0.37 * np.pi), abs=1e-13)
    n = S.normalize(p)
    assert n.area == pytest.approx(2.0, rel=1e-12)
