import json

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from magcontact import dynamics as D
from magcontact import index as X
from magcontact import surface as S
from magcontact.errors import NonContactSample, UnderResolved


@pytest.mark.parametrize("theta,lu", [(0.3, (1, 1)), (1.0, (1, 3)), (1.5, (3, 3))])
def test_rotation_oracle(theta, lu):
    md = X.maslov(X.rotation_path(theta))
    assert (md.mu_lower, md.mu_upper) == lu
    assert md.interval == (pytest.approx(theta), pytest.approx(theta))


def test_hyperbolic_interval():
    S2 = np.array([np.diag([np.exp(t), np.exp(-t)]) for t in np.linspace(0, 2, 2001)])
    a, b = X.winding_interval(X.SymplecticPath(2.0, np.linspace(0, 2, 2001), S2))
    assert a <= 0 <= b and b - a < 0.5 and -0.25 < a and b < 0.25


def brute_windings(path, n=4000):
    # dense direction sweep without refinement or eigen snapping
    return [X.winding(path, a) for a in np.linspace(0, np.pi, n, endpoint=False)]


def test_interval_contains_brute_force():
    B = np.array([[0.3, 1.2], [-0.9, -0.3]])
    path = X.SymplecticPath.exponential(B, 7.0, 4001)
    a, b = X.winding_interval(path)
    w = brute_windings(path)
    assert a <= min(w) + 1e-9 and max(w) <= b + 1e-9
    assert min(w) - a < 1e-4 and b - max(w) < 1e-4 and b - a < 0.5


def test_case_table():
    md = X.maslov_from_interval(1.0, 1.3)
    assert (md.mu_lower, md.mu_upper) == (2, 3)
    md = X.maslov_from_interval(0.7, 1.0)
    assert (md.mu_lower, md.mu_upper, md.degenerate) == (1, 2, True)
    md = X.maslov_from_interval(0.8, 1.2)
    assert (md.mu_lower, md.mu_upper, md.degenerate) == (2, 2, False)


def test_under_resolved():
    with pytest.raises(UnderResolved):
        X.winding(X.rotation_path(5.0, n=11), 0.0)


@settings(max_examples=20, deadline=None)
@given(st.floats(0.05, 4.0), st.integers(1, 4))
def test_iterates_of_rotation(theta, k):
    assume(abs(k * theta - round(k * theta)) > 1e-3)
    md = X.maslov(X.rotation_path(k * theta, n=int(64 * k * theta) + 65))
    assert md.mu_lower == md.mu_upper == 2 * int(np.floor(k * theta)) + 1


@settings(max_examples=10, deadline=None)
@given(st.floats(0.1, 2.0), st.floats(0.05, 1.0))
def test_lower_index_monotone_under_rotation(theta, extra):
    a = X.maslov(X.rotation_path(theta)).mu_lower
    b = X.maslov(X.rotation_path(theta + extra, n=257)).mu_lower
    assert b >= a


def test_det_error_and_csv():
    p = X.rotation_path(0.7)
    assert p.det_error < 1e-8 and np.array_equal(p.samples[0], np.eye(2))
    assert p.to_csv().splitlines()[0] == "t,a11,a12,a21,a22"


def test_latitude_generator_substitution(sphere):
    m = 0.1
    lat = D.latitude_orbits(m, sphere)[0]
    B = X.latitude_generator(m, sphere, None, lat)
    # h = 1 + m^2 is constant on the round sphere, so b = f/h
    assert B == pytest.approx(np.array([[0, 1 / (1 + m * m)], [-1, 0]]), abs=1e-12)
    ev, real = X.transverse_spectrum(B)
    assert not real


@pytest.mark.parametrize("eps", [0.0, 0.3])
def test_latitude_generator_matches_fd(sphere, eps):
    f = S.cosine_strength(sphere, eps) if eps else S.ONE
    m = 0.2
    for lat in D.latitude_orbits(m, sphere, f):
        Ba = X.latitude_generator(m, sphere, f, lat)
        Bf = X.fd_generator(m, sphere, f, lat.state())
        assert np.max(np.abs(Ba - Bf)) < 1e-6


def test_hyperbolic_harness():
    _, real = X.transverse_spectrum(X.hyperbolic_generator(-0.5))
    assert real


def test_integrated_matches_analytic(sphere):
    m = 0.1
    lat = D.latitude_orbits(m, sphere)[0]
    Pa = X.linearized_path(m, sphere, None, lat, 2)
    Pi = X.linearized_path(m, sphere, None, (lat.state(), lat.reeb_period), 2)
    assert np.max(np.abs(Pa.samples[-1] - Pi.samples[-1])) < 1e-7
    assert X.maslov(Pi).mu_lower >= 3 and Pi.det_error < 1e-8


def test_dynconvex_round_sphere(sphere):
    rep = X.dynconvex_report([0.05, 0.1, 0.2], sphere, samples=8)
    assert rep.exponent >= 0.95 and rep.convex
    assert json.loads(rep.to_json())["schema"] == "dynconvex/1"


def test_dynconvex_noncontact(dip):
    with pytest.raises(NonContactSample):
        X.dynconvex_report([0.0424413181578], dip, samples=2)


def test_quaternion_cover():
    assert X.quaternion_cover_check(1000, seed=0) <= 1e-10
    a = X.quaternion_cover_check(200, seed=3, project=True)
    b = X.quaternion_cover_check(200, seed=3, project=False)
    assert a <= 1e-10 and b <= 1e-10
    assert X.cover_base_point(1.0, 0.3) == (pytest.approx(-2.0), pytest.approx(0.5))


def test_quaternion_product_rules():
    i, j, k = np.eye(4)[1], np.eye(4)[2], np.eye(4)[3]
    assert np.allclose(X.qmul(i, j), k) and np.allclose(X.qmul(j, i), -k)
    assert np.allclose(X.qmul(i, i), -np.eye(4)[0])
