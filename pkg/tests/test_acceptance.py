"""Acceptance criteria 1-14, one test each; every test prints an ACCEPTANCE line."""
import time

import numpy as np
import pytest

from magcontact import action as A
from magcontact import dynamics as D
from magcontact import index as X
from magcontact import poincare as P
from magcontact import surface as S


def test_acceptance_01_round_sphere(sphere, report):
    t0 = time.perf_counter()
    mg = S.m_gamma(sphere)
    cb = S.contact_bounds(sphere)
    worst, verdicts = 0.0, []
    for m in (0.5, 1.0, 2.0):
        c = A.certify_contact(m, sphere, grid_size=256)
        verdicts.append(c.verdict)
        acts = [r.action for r in c.levels] + [o["action"] for o in c.latitude_actions]
        worst = max(worst, max(abs(a - (m * m + 1)) for a in acts))
    dt = time.perf_counter() - t0
    ok = abs(mg) < 1e-8 and cb.full_ray and set(verdicts) == {"Positive"} and worst < 1e-8 \
        and dt < 10
    report(1, ok, f"m_gamma={mg:.2e} full_ray={cb.full_ray} verdicts={verdicts} "
                  f"max|A-(m^2+1)|={worst:.2e} runtime={dt:.1f}s")
    assert ok


def test_acceptance_02_oblate(oblate, report):
    t = np.linspace(0, oblate.ell / 2, 401)
    K = S.curvature(oblate, t)
    increasing = bool(np.all(np.diff(K) > 0))
    mg = S.m_gamma(oblate)
    ok = increasing and mg <= 1 + 1e-6
    report(2, ok, f"ellipsoid(2,1) K increasing={increasing} m_gamma={mg:.6f}")
    assert ok


def test_acceptance_03_stretch_sweep(report):
    rows = []
    for C in (0.0, 0.5, 1.0, 2.0, 3.0, 5.0, 10.0):
        p = S.stretched_sphere(0.3, 0.05, C=C)
        cb = S.contact_bounds(p)
        rows.append((C, cb))
    below = [C for C, cb in rows if cb.m_gamma < 2]
    gaps = [(C, cb) for C, cb in rows if not cb.full_ray]
    crossed = bool(below) and bool(gaps) and max(below) < min(C for C, _ in gaps)
    prod_err = 0.0
    for _, cb in gaps:
        # independent oracle: roots of m^2 - m_gamma m + 1
        r = np.sort(np.roots([1.0, -cb.m_gamma, 1.0]).real)
        prod_err = max(prod_err, abs(cb.m_minus * cb.m_plus - 1.0),
                       abs(cb.m_minus - r[0]) / r[0], abs(cb.m_plus - r[1]) / r[1])
    ok = crossed and prod_err <= 1e-10
    sweep = ", ".join(f"C={C:g}:{cb.m_gamma:.3f}" for C, cb in rows)
    report(3, ok, f"sweep [{sweep}] max product/root error={prod_err:.1e}")
    assert ok


def test_acceptance_04_counterexample(dip, report):
    g, g1, _, _ = dip.eval(0.1)
    m = float(g / abs(g1))
    lats = D.latitude_orbits(m, dip)
    lat_min = min(o.action for o in lats)
    c = A.certify_contact(m, dip, grid_size=256)
    ok = lat_min <= -0.485 and c.verdict == "Negative"
    report(4, ok, f"m={m:.10f} min latitude action={lat_min:.4f} verdict={c.verdict}")
    assert ok


def test_acceptance_05_ellipsoid_scan(thin, report):
    t0 = time.perf_counter()
    cb = S.contact_bounds(thin)
    ms = np.linspace(cb.m_minus, cb.m_plus, 18)[1:-1]
    mins, verdicts = [], []
    for m in ms:
        c = A.certify_contact(float(m), thin, grid_size=256)
        mins.append(c.min_action)
        verdicts.append(c.verdict)
    dt = time.perf_counter() - t0
    ok = cb.m_gamma > 2 and min(mins) > 0 and set(verdicts) == {"Positive"} and dt < 300
    report(5, ok, f"ellipsoid(1,6) gap=({cb.m_minus:.4f},{cb.m_plus:.4f}) 16x256 "
                  f"min action={min(mins):.4f} runtime={dt:.1f}s")
    assert ok


def test_acceptance_06_momentum_drift(sphere, oblate, prolate, thin, stretched, dip, report):
    rng = np.random.default_rng(0)
    cases = {"round": (sphere, None), "oblate": (oblate, None), "prolate": (prolate, None),
             "thin": (thin, None), "stretched": (stretched, None), "dip": (dip, None),
             "round+cosine": (sphere, S.cosine_strength(sphere, 0.3)),
             "prolate+rigid": (prolate, S.rigid_strength(prolate, 1.0, 2.0))}
    worst = {}
    for name, (p, f) in cases.items():
        w = 0.0
        for _ in range(100):
            z = D.FullState(float(rng.uniform(0.01, 0.99) * p.ell), float(rng.uniform(-np.pi, np.pi)),
                            float(rng.uniform(0, 2 * np.pi)))
            w = max(w, D.integrate(0.5, p, f, z, 1000.0).drift)
        worst[name] = w
    ok = max(worst.values()) <= 1e-8
    report(6, ok, "max drift " + " ".join(f"{k}={v:.1e}" for k, v in worst.items()))
    assert ok


def test_acceptance_07_period_expansion(sphere, report):
    strengths = {"constant": S.ONE, "cosine+0.3": S.cosine_strength(sphere, 0.3),
                 "cosine-0.4": S.cosine_strength(sphere, -0.4)}
    ms = [0.08, 0.04, 0.02]
    out, ok = [], True
    for name, f in strengths.items():
        fp = float(f.eval(0.0)[0])
        ratios = []
        for m in ms:
            lat = min(D.latitude_orbits(m, sphere, f), key=lambda o: o.t0)
            # exact oracle for the period of the latitude
            g = float(sphere.eval(lat.t0)[0])
            assert lat.reeb_period == pytest.approx(lat.action * 2 * np.pi * g / m, rel=1e-13)
            ratios.append((lat.reeb_period - 2 * np.pi) / (np.pi * m * m))
        lim = P.neville(np.square(ms), ratios)[-1][0]
        err = abs(lim - 1 / fp)
        ok &= err <= 0.02
        out.append(f"{name}: f(pole)={fp:.3f} limit={lim:.6f} 1/f={1 / fp:.6f}")
    m = 0.1
    T = D.latitude_orbits(m, sphere)[0].reeb_period
    ok &= abs(T - 2 * np.pi * np.sqrt(1 + m * m)) < 1e-12
    report(7, ok, "; ".join(out))
    assert ok


def test_acceptance_08_twist_expansion(sphere, report):
    f = S.cosine_strength(sphere, 0.3)
    us = [-0.75, -0.5, -1 / 3, 0.25, 0.5]
    worst = 0.0
    for fr in us:
        u = fr * sphere.ell
        fit = P.twist_fit(sphere, f, u, [0.08, 0.04, 0.02, 0.01], variable="m")
        target = 0.5 * np.pi * P.omega_f(sphere, f, abs(u))
        worst = max(worst, abs(fit.limit - target) / abs(target))
    flat = max(abs(P.theta_m(0.1, sphere, None, fr * sphere.ell)) for fr in us)
    ok = worst <= 0.02 and flat <= 1e-9
    report(8, ok, f"cosine 0.3: max relative error={worst:.2e}; round sphere max|theta_m|={flat:.1e}")
    assert ok


def test_acceptance_09_rigid_family(sphere, report):
    f = P.rigid_family(sphere, 1.0, 2.0)
    lims = [P.twist_fit(sphere, f, fr * sphere.ell, [0.08, 0.04, 0.02, 0.01], variable="m").limit
            for fr in (-0.75, -0.5, -0.25, 0.25, 0.5)]
    spread = (max(lims) - min(lims)) / abs(np.mean(lims))
    ok = spread <= 0.02
    report(9, ok, f"(k,h)=(1,2) limits {min(lims):.6f}..{max(lims):.6f} spread={spread:.1e} "
                  f"(pi/4={np.pi / 4:.6f})")
    assert ok


def test_acceptance_10_period_bound(sphere, report):
    f = S.cosine_strength(sphere, 0.2)
    m = 0.05
    om_lo, om_hi = P.omega_bounds(sphere, f)
    bound = 0.9 * 2 / (om_lo * m * m)
    orbits = P.find_resonances(m, sphere, f, n_grid=64, max_orbits=3)
    periods = [o.reeb_period for o in orbits]
    closure = max((o.closure for o in orbits), default=np.inf)
    ok = om_lo > 0 and len(orbits) > 0 and min(periods) >= bound and closure < 1e-6
    report(10, ok, f"Omega-={om_lo:.4f} bound={bound:.1f} orbits q={[o.q for o in orbits]} "
                   f"periods={[round(p, 1) for p in periods]} closure={closure:.1e}")
    assert ok


def test_acceptance_11_maslov_table(report):
    got = {}
    for th in (0.3, 1.0, 1.5):
        md = X.maslov(X.rotation_path(th))
        got[th] = (md.mu_lower, md.mu_upper)
    ts = np.linspace(0, 2, 2001)
    hyp = X.SymplecticPath(2.0, ts, np.array([np.diag([np.exp(t), np.exp(-t)]) for t in ts]))
    a, b = X.winding_interval(hyp)
    ok = got == {0.3: (1, 1), 1.0: (1, 3), 1.5: (3, 3)} and a <= 0 <= b and b - a < 0.5
    report(11, ok, f"rotations {got}; hyperbolic interval=({a:.4f},{b:.4f})")
    assert ok


def test_acceptance_12_generator_fit(sphere, report):
    ms = [0.025, 0.05, 0.1, 0.2]
    out, ok = [], True
    for name, f in (("constant", S.ONE), ("cosine 0.3", S.cosine_strength(sphere, 0.3))):
        rng = np.random.default_rng(1)
        states = X.sample_states(sphere, 16, rng)
        norms = [X.generator_deviation(m, sphere, f, states) for m in ms]
        expo = float(np.polyfit(np.log(ms), np.log(norms), 1)[0])
        ok &= expo >= 0.95
        out.append(f"{name}: exponent={expo:.3f}")
    report(12, ok, "; ".join(out))
    assert ok


def test_acceptance_13_dynamical_convexity(sphere, report):
    out, ok = [], True
    for name, f in (("constant", S.ONE), ("cosine 0.3", S.cosine_strength(sphere, 0.3))):
        mus = []
        for m in (0.025, 0.05, 0.1):
            for lat in D.latitude_orbits(m, sphere, f):
                mu_a = X.maslov(X.linearized_path(m, sphere, f, lat, k_iterates=2)).mu_lower
                mu_i = X.maslov(X.linearized_path(m, sphere, f, (lat.state(), lat.reeb_period),
                                                  k_iterates=2)).mu_lower
                mus += [mu_a, mu_i]
        ok &= min(mus) >= 3
        out.append(f"{name}: min mu_lower={min(mus)} over {len(mus)} paths")
    report(13, ok, "; ".join(out))
    assert ok


def test_acceptance_14_quaternion_cover(report):
    r = X.quaternion_cover_check(1000, seed=0)
    tau, lam = X.cover_base_point(1.0, 0.4)
    ok = r <= 1e-10 and tau == pytest.approx(-2.0) and lam == pytest.approx(0.5)
    report(14, ok, f"max residual={r:.1e}; base point tau={tau:.6f} lambda={lam:.6f}")
    assert ok
