"""Magnetic flow on a surface of revolution in (t, phi, theta) coordinates.

``t`` is arclength along the meridian, ``phi`` the angle of the velocity
from ``d/dt`` and ``theta`` the longitude. The flow of the magnetic field at
energy parameter ``m`` reads

    t' = m cos(phi),  phi' = f - m gamma' sin(phi)/gamma,  theta' = m sin(phi)/gamma

and conserves the momentum ``I = m gamma sin(phi) - Gamma_f``.
"""
from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np
from scipy import optimize

from . import _kernels as K
from ._geometry import count_crossings
from .errors import (ChartBreakdown, CriticalLevel, IntegrationFailure, MultiBand,
                     NonClosed, NonContactSample, PoleChart)
from .surface import BG, F, G, G1, GF, ONE, Profile, Strength, scan_grid

POLE_MARGIN = 1e-3
RTOL, ATOL = 1e-11, 1e-13


@dataclass(frozen=True)
class FullState:
    t: float
    phi: float
    theta: float = 0.0

    def as_array(self):
        return np.array([self.t, self.phi, self.theta], dtype=float)


@dataclass(frozen=True)
class ReducedState:
    t: float
    phi: float


@dataclass
class Event:
    kind: str  # "phi+", "phi-" (phi crossing +-pi/2) or "lat"
    s: float
    state: FullState
    target: Optional[float] = None


@dataclass
class LatitudeOrbit:
    """Periodic orbit running along the latitude ``t = t0``.

    ``sign`` is +1 when the velocity is ``+d/dtheta`` direction (phi = pi/2).
    """

    t0: float
    sign: int
    m_t0: float
    action: float
    momentum: float
    xm_period: float
    reeb_period: float
    elliptic: bool = True
    m: float = float("nan")

    def state(self):
        return FullState(self.t0, self.sign * np.pi / 2, 0.0)


@dataclass
class MomentumBand:
    I: float
    t_lo: float
    t_hi: float
    regular: bool = True
    lo_sign: int = -1
    hi_sign: int = 1


def _par(m, profile):
    return np.array([float(m), float(profile.ell), POLE_MARGIN])


def _tab(profile, strength):
    tab = profile.tables(strength)
    return tab.breaks, tab.coef


# --------------------------------------------------------------------------
# pointwise quantities


def vector_field(m: float, profile: Profile, strength: Strength = None):
    """Return the field ``s -> (dt, dphi, dtheta)`` in the (t, phi, theta) chart."""
    strength = ONE if strength is None else strength
    ell = profile.ell

    def X(s):
        t, phi = (s.t, s.phi) if isinstance(s, FullState) else (s[0], s[1])
        if not (POLE_MARGIN * ell < t < (1 - POLE_MARGIN) * ell):
            raise PoleChart(f"t={t} is inside the polar margin")
        g, g1, _, _ = profile.eval(t)
        f = strength.eval(t)[0]
        sp, cp = np.sin(phi), np.cos(phi)
        return (float(m * cp), float(f - m * g1 * sp / g), float(m * sp / g))

    return X


def momentum(m, profile, strength, s) -> float:
    strength = ONE if strength is None else strength
    t, phi = (s.t, s.phi) if isinstance(s, FullState) else (s[0], s[1])
    br, cf = _tab(profile, strength)
    return float(K.momentum(float(t), np.sin(phi), float(m), br, cf))


def contact_h(m, profile, strength, t, phi):
    """``h = m^2 - m beta_theta sin(phi)/gamma + f`` (vectorized)."""
    tab = profile.tables(strength)
    t = np.asarray(t, dtype=float)
    return m * m - m * tab(BG, t) * np.sin(phi) + tab(F, t)


def momentum_hat(m, profile, strength, t, sign):
    """``+-m gamma - Gamma_f``, the momentum of the direction phi = +-pi/2."""
    tab = profile.tables(strength)
    return sign * m * tab(G, t) - tab(GF, t)


# --------------------------------------------------------------------------
# trajectories


@dataclass
class Trajectory:
    """Dense-output solution of the magnetic flow over ``[0, T]``."""

    m: float
    profile: Profile = field(repr=False)
    strength: Strength = field(repr=False)
    T: float
    start: FullState
    end: FullState
    steps: tuple = field(repr=False)
    stats: dict = field(default_factory=dict)
    events: list = field(default_factory=list)
    drift: float = 0.0
    h_min: float = float("nan")
    tau_end: float = float("nan")
    rtol: float = RTOL
    atol: float = ATOL

    def _raw(self, s):
        s = np.atleast_1d(np.asarray(s, dtype=float))
        S_s, S_h, S_y, S_F, S_c, S_t = self.steps
        return K.dense_eval(S_s, S_h, S_y, S_F, S_c, S_t, float(self.profile.ell), s)

    def __call__(self, s):
        """States (t, phi, theta) at flow times ``s`` as an array of shape (n, 3)."""
        return self._raw(s)[:, :3]

    def reeb_time(self, s):
        return self._raw(s)[:, 3]

    def sample(self, n: int = 2000, per_step: int = 8):
        n = max(n, per_step * len(self.steps[0]))
        s = np.linspace(0.0, self.T, n + 1)
        return s, self._raw(s)

    @property
    def length(self) -> float:
        """Length of the projected curve (the speed is m)."""
        return abs(self.m * self.T)

    def momentum_series(self, s):
        y = self(s)
        tab = self.profile.tables(self.strength)
        return self.m * tab(G, y[:, 0]) * np.sin(y[:, 1]) - tab(GF, y[:, 0])

    def to_csv(self, n: int = 1000) -> str:
        s = np.linspace(0.0, self.T, n + 1)
        y = self._raw(s)
        I = self.momentum_series(s)
        h = contact_h(self.m, self.profile, self.strength, y[:, 0], y[:, 1])
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["s", "tau_reeb", "t", "phi", "theta", "I", "h"])
        for k in range(len(s)):
            w.writerow([repr(float(v)) for v in (s[k], y[k, 3], y[k, 0], y[k, 1], y[k, 2], I[k], h[k])])
        return buf.getvalue()


def _run(mode, m, profile, strength, y0, s0, s1, rtol, atol, store=False, ev_code=0,
         ev_dir=0, ev_count=1, ev_target=0.0, max_steps=10 ** 7, max_step=np.inf):
    br, cf = _tab(profile, strength)
    out = K.solve(mode, _par(m, profile), br, cf, np.asarray(y0, dtype=float), float(s0),
                  float(s1), float(rtol), float(atol), int(max_steps), bool(store), int(ev_code),
                  int(ev_dir), int(ev_count), float(ev_target), float(max_step))
    return out


def _status_check(status, what="integration"):
    if status == K.MAXSTEPS:
        raise IntegrationFailure(f"{what}: step budget exhausted")
    if status == K.BREAKDOWN:
        raise ChartBreakdown(f"{what}: step size underflow or chart failure")


def integrate(m: float, profile: Profile, strength: Strength, s0, T: float,
              rtol: float = RTOL, atol: float = ATOL, t_targets: Sequence[float] = (),
              max_steps: int = 10 ** 7) -> Trajectory:
    """Integrate the magnetic flow from ``s0`` for flow time ``T`` (either sign).

    Near the poles the solver switches to a regularized polar chart and
    returns to the (t, phi, theta) chart on exit.
    """
    strength = ONE if strength is None else strength
    s0 = s0 if isinstance(s0, FullState) else FullState(*s0)
    ell = profile.ell
    if not (0.0 < s0.t < ell):
        raise PoleChart("initial state must be off the poles")
    y0 = np.array([s0.t, s0.phi, s0.theta, 0.0])
    out = _run(K.FLOW, m, profile, strength, y0, 0.0, T, rtol, atol, store=True,
               max_steps=max_steps)
    status, s_end, y_end = out[0], out[1], out[2]
    _status_check(status)
    steps = tuple(np.ascontiguousarray(a) for a in (out[7], out[8], out[9], out[10], out[11], out[12]))
    traj = Trajectory(m=float(m), profile=profile, strength=strength, T=float(T), start=s0,
                      end=FullState(*map(float, y_end[:3])), steps=steps,
                      stats={"nfev": int(out[4]), "naccept": int(out[5]), "nreject": int(out[6])},
                      h_min=float(out[14]), tau_end=float(y_end[3]), rtol=rtol, atol=atol)
    # momentum drift at step boundaries
    sb = np.append(steps[0], T)
    I = traj.momentum_series(sb)
    traj.drift = float(np.max(np.abs(I - I[0])))
    traj.events = _locate_events(traj, sb, t_targets)
    return traj


def _bisect(fun, a, b, fa, tol):
    for _ in range(200):
        if abs(b - a) <= tol:
            break
        mid = 0.5 * (a + b)
        fm = fun(mid)
        if (fm > 0) == (fa > 0) and fm != 0:
            a, fa = mid, fm
        else:
            b = mid
    return b


def _locate_events(traj, sb, t_targets):
    y = traj(sb)
    evs = []
    tol = 1e-12 * max(1.0, abs(traj.T))

    def cphi(s):
        return float(np.cos(traj(s)[0, 1]))

    c = np.cos(y[:, 1])
    for k in np.nonzero(np.sign(c[:-1]) * np.sign(c[1:]) < 0)[0]:
        s = _bisect(cphi, sb[k], sb[k + 1], c[k], tol)
        st = traj(s)[0]
        evs.append(Event("phi+" if np.sin(st[1]) > 0 else "phi-", float(s), FullState(*map(float, st))))
    for tg in t_targets:
        d = y[:, 0] - tg
        for k in np.nonzero(np.sign(d[:-1]) * np.sign(d[1:]) < 0)[0]:
            s = _bisect(lambda u: float(traj(u)[0, 0] - tg), sb[k], sb[k + 1], d[k], tol)
            evs.append(Event("lat", float(s), FullState(*map(float, traj(s)[0])), float(tg)))
    evs.sort(key=lambda e: e.s)
    return evs


@dataclass
class ReebArc:
    """A trajectory with Reeb time attached."""

    traj: Trajectory
    tau: float
    h_min: float
    h_max: float
    beta_choice: str = "rotational"

    def tau_at(self, s):
        return self.traj.reeb_time(s)

    def s_at(self, tau):
        """Flow time at which the Reeb time ``tau`` is reached."""
        T = self.traj.T
        return optimize.brentq(lambda s: float(self.traj.reeb_time(s)[0]) - tau,
                               min(0.0, T), max(0.0, T), xtol=1e-14, rtol=1e-15)

    @property
    def length(self):
        return self.traj.length

    def pinching_bounds(self):
        """``(m T / h_max, m T / h_min)``; the length must lie in between."""
        m, tau = self.traj.m, abs(self.tau)
        return m * tau / self.h_max, m * tau / self.h_min

    @property
    def events(self):
        return [(e, float(self.traj.reeb_time(e.s)[0])) for e in self.traj.events]


def reeb_reparametrize(traj: Trajectory, beta_choice: str = "rotational",
                       samples_per_step: int = 16) -> ReebArc:
    """Attach Reeb time ``d tau = h ds`` for the rotationally invariant primitive."""
    if beta_choice != "rotational":
        raise ValueError("only the rotationally invariant primitive is supported")
    n = max(2000, samples_per_step * len(traj.steps[0]))
    s = np.linspace(0.0, traj.T, n + 1)
    y = traj(s)
    h = contact_h(traj.m, traj.profile, traj.strength, y[:, 0], y[:, 1])
    hmin = min(float(h.min()), traj.h_min)
    if not hmin > 0:
        raise NonContactSample(f"h reaches {hmin:.3e} along the trajectory")
    return ReebArc(traj, traj.tau_end, hmin, float(h.max()), beta_choice)


# --------------------------------------------------------------------------
# latitudes and momentum bands


def _roots(fun, grid, vals):
    out = []
    for k in range(len(grid) - 1):
        a, b = vals[k], vals[k + 1]
        if a == 0.0:
            out.append(grid[k])
        elif a * b < 0:
            out.append(optimize.brentq(fun, grid[k], grid[k + 1], xtol=1e-15, rtol=1e-15))
    out.sort()
    merged = []
    for r in out:
        if not merged or r - merged[-1] > 1e-9:
            merged.append(r)
    return merged


def latitude_orbits(m: float, profile: Profile, strength: Strength = None,
                    n_scan: int = 2048) -> List[LatitudeOrbit]:
    """All latitudes carrying periodic orbits, with actions and periods."""
    strength = ONE if strength is None else strength
    if m <= 0:
        return []
    tab = profile.tables(strength)
    ell = profile.ell
    grid = scan_grid(profile, n_scan, strength, interior=True)
    g, g1, f = tab(G, grid), tab(G1, grid), tab(F, grid)
    out = []
    for sign in (1, -1):
        def P(t, sign=sign):
            return sign * m * tab(G1, t) - tab(F, t) * tab(G, t)
        vals = sign * m * g1 - f * g
        for t0 in _roots(P, grid, vals):
            gg, gg1, ff = tab(G, t0), tab(G1, t0), tab(F, t0)
            h = m * m - m * tab(BG, t0) * sign + ff
            I = sign * m * gg - tab(GF, t0)
            # curvature of the momentum curve decides the local phase portrait
            d = 1e-6 * ell
            dP = (P(t0 + d) - P(t0 - d)) / (2 * d)
            elliptic = (dP < 0) if sign > 0 else (dP > 0)
            xm = 2 * np.pi * gg / m
            out.append(LatitudeOrbit(t0=float(t0), sign=sign, m_t0=float(abs(gg / gg1)),
                                     action=float(h), momentum=float(I), xm_period=float(xm),
                                     reeb_period=float(h * xm), elliptic=bool(elliptic),
                                     m=float(m)))
    out.sort(key=lambda o: o.t0)
    return out


def latitude_action_formula(profile: Profile, t0: float) -> float:
    """Action ``(gamma^2 - gamma' Gamma)/gamma'^2`` of a latitude for f = 1."""
    g, g1, _, _ = profile.eval(t0)
    Gam = profile.primitive(t0)
    return float((g * g - g1 * Gam) / (g1 * g1))


def momentum_range(m: float, profile: Profile, strength: Strength = None, n_scan: int = 4096):
    strength = ONE if strength is None else strength
    ell = profile.ell
    tt = scan_grid(profile, n_scan, strength)
    lats = latitude_orbits(m, profile, strength)
    tp = np.concatenate([tt, [o.t0 for o in lats if o.sign > 0]])
    tm = np.concatenate([tt, [o.t0 for o in lats if o.sign < 0]])
    Imax = float(np.max(momentum_hat(m, profile, strength, tp, 1)))
    Imin = float(np.min(momentum_hat(m, profile, strength, tm, -1)))
    return Imin, Imax


def momentum_bands(m: float, profile: Profile, strength: Strength, I: float,
                   n_scan: int = 2048, lats=None) -> List[MomentumBand]:
    """All maximal intervals of t on which the level ``I`` is accessible."""
    strength = ONE if strength is None else strength
    tab = profile.tables(strength)
    ell = profile.ell
    lats = latitude_orbits(m, profile, strength) if lats is None else lats
    grid = np.unique(np.concatenate([scan_grid(profile, n_scan, strength), [o.t0 for o in lats]]))

    def Dp(t):
        return m * tab(G, t) - tab(GF, t) - I

    def Dm(t):
        return I - (-m * tab(G, t) - tab(GF, t))

    dp, dm = Dp(grid), Dm(grid)
    ok = (dp >= 0) & (dm >= 0)
    bands = []
    k = 0
    n = len(grid)
    while k < n:
        if not ok[k]:
            k += 1
            continue
        j = k
        while j + 1 < n and ok[j + 1]:
            j += 1
        # left end
        if k == 0:
            lo, lo_sign = 0.0, (1 if dp[0] <= dm[0] else -1)
        else:
            fn, lo_sign = (Dp, 1) if dp[k - 1] < 0 else (Dm, -1)
            lo = optimize.brentq(fn, grid[k - 1], grid[k], xtol=1e-15, rtol=1e-15)
        if j == n - 1:
            hi, hi_sign = ell, (1 if dp[-1] <= dm[-1] else -1)
        else:
            fn, hi_sign = (Dp, 1) if dp[j + 1] < 0 else (Dm, -1)
            hi = optimize.brentq(fn, grid[j], grid[j + 1], xtol=1e-15, rtol=1e-15)
        bands.append(MomentumBand(float(I), float(lo), float(hi), True, lo_sign, hi_sign))
        k = j + 1
    return bands


def critical_distance(I, lats):
    if not lats:
        return np.inf, None
    d = [abs(I - o.momentum) for o in lats]
    k = int(np.argmin(d))
    return d[k], lats[k]


def turning_latitudes(m: float, profile: Profile, strength: Strength, I: float,
                      crit_tol: float = 1e-9) -> MomentumBand:
    """Turning latitudes ``t_lo < t_hi`` of the accessible band at level ``I``."""
    strength = ONE if strength is None else strength
    lats = latitude_orbits(m, profile, strength)
    dist, lat = critical_distance(I, lats)
    if dist < crit_tol:
        raise CriticalLevel(f"level {I} is within {dist:.2e} of a latitude momentum", dist,
                            np.inf if not lat.elliptic else lat.xm_period / 2)
    bands = momentum_bands(m, profile, strength, I, lats=lats)
    if not bands:
        raise CriticalLevel(f"level {I} is outside the momentum range", np.nan)
    if len(bands) > 1:
        raise MultiBand(f"{len(bands)} accessible bands at level {I}", bands)
    return bands[0]


# --------------------------------------------------------------------------
# orbit geometry


def _planar_chart(t, theta, ell):
    """Homeomorphic planar image of the sphere minus the pole farther from the curve."""
    if t.min() >= ell - t.max():
        r = np.tan(0.5 * np.pi * t / ell)  # north pole sent to infinity
    else:
        r = np.tan(0.5 * np.pi * (ell - t) / ell)
    return np.column_stack([r * np.cos(theta), r * np.sin(theta)])


@dataclass
class OrbitClass:
    count: int
    classification: str
    length: float
    short_window: tuple


def self_intersections(traj: Trajectory, eps: float = 0.5, n_per_step: int = 24,
                       min_angle: float = 1e-7, close_tol: float = 1e-6) -> OrbitClass:
    """Count transverse self-intersections of the projection of a closed orbit."""
    a, b = traj.start, traj.end
    dphi = np.angle(np.exp(1j * (b.phi - a.phi)))
    dth = np.angle(np.exp(1j * (b.theta - a.theta)))
    if abs(b.t - a.t) + abs(dphi) + abs(dth) > close_tol:
        raise NonClosed(f"endpoints differ by {abs(b.t - a.t) + abs(dphi) + abs(dth):.2e}")
    nsteps = len(traj.steps[0])
    s = np.linspace(0.0, traj.T, max(4000, n_per_step * nsteps) + 1)[:-1]
    y = traj(s)
    P = _planar_chart(y[:, 0], y[:, 2], traj.profile.ell)
    count = int(count_crossings(np.ascontiguousarray(P), float(min_angle)))
    f = traj.strength.eval(np.linspace(0, traj.profile.ell, 2049))[0]
    m = traj.m
    lo, hi = (2 * np.pi - eps) * m / f.max(), (2 * np.pi + eps) * m / f.min()
    L = traj.length
    short = count == 0 and lo <= L <= hi
    return OrbitClass(count, "short" if short else "long", float(L), (float(lo), float(hi)))


def latitude_table_json(m, lats: List[LatitudeOrbit]) -> str:
    return json.dumps({"schema": "latitudes/1", "m": m,
                       "orbits": [o.__dict__ for o in lats]}, indent=2, sort_keys=True)
