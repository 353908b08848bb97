"""Return map of the low-energy flow on the annulus section ``cos(phi) = 0``.

A section point is encoded by a signed coordinate ``u``: ``t = |u|`` and
``phi = -pi/2`` for ``u < 0``, ``phi = +pi/2`` for ``u > 0``; ``psi`` is the
longitude. Between two consecutive crossings ``phi`` sweeps an interval of
length pi, so with ``phi`` as the independent variable the half return is a
plain initial value problem.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from typing import List, Sequence

import numpy as np
from scipy import optimize

from . import _kernels as K
from .dynamics import FullState, _run, _status_check, integrate, reeb_reparametrize
from .errors import InfeasibleParams, NonClosedOrbit, NonMonotone
from .surface import ONE, Profile, Strength, rigid_strength

TWIST_RTOL, TWIST_ATOL = 1e-11, 1e-14


@dataclass
class HalfReturn:
    u: float
    u_next: float
    theta: float
    flow_time: float
    reeb_time: float


def _phi_span(u):
    return (-0.5 * np.pi, 0.5 * np.pi) if u < 0 else (0.5 * np.pi, 1.5 * np.pi)


def half_return(m: float, profile: Profile, strength: Strength, u: float,
                rtol: float = TWIST_RTOL, atol: float = TWIST_ATOL) -> HalfReturn:
    """Integrate from the section point ``u`` to the next crossing with phi as time."""
    strength = ONE if strength is None else strength
    if u == 0 or not abs(u) < profile.ell:
        raise ValueError("u must lie in (-ell, ell) without 0")
    p0, p1 = _phi_span(u)
    y0 = np.array([abs(u), 0.0, 0.0, 0.0])
    out = _run(K.TWIST, m, profile, strength, y0, p0, p1, rtol, atol)
    status, y = out[0], out[2]
    if status == K.NONMONO:
        raise NonMonotone(f"phi is not monotone along the arc from u={u} at m={m}")
    _status_check(status, "half return")
    if not (0.0 < y[0] < profile.ell):
        raise NonMonotone(f"arc from u={u} leaves the chart at m={m}")
    sgn = 1.0 if u < 0 else -1.0
    return HalfReturn(float(u), float(sgn * y[0]), float(y[1]), float(y[2]), float(y[3]))


def theta_m(m: float, profile: Profile, strength: Strength, u: float,
            tol: float = TWIST_RTOL) -> float:
    """Longitude increment between the section point ``u`` and the next crossing."""
    return half_return(m, profile, strength, u, rtol=tol).theta


def psi_m(m, profile, strength, u, tol=TWIST_RTOL) -> float:
    return theta_m(m, profile, strength, u, tol) + np.pi


def _wrap2pi(a):
    return float(np.mod(a, 2 * np.pi))


@dataclass
class ReturnCheck:
    u_error: float
    psi_error: float
    symmetry_error: float
    reeb_time: float


def return_map_squared(m: float, profile: Profile, strength: Strength, u: float, psi: float,
                       verify: bool = False, tol: float = TWIST_RTOL):
    """Square of the return map; ``u`` is preserved by the reflection symmetry.

    With ``verify=True`` the full flow is integrated through two crossings
    and a :class:`ReturnCheck` is returned as a third element.
    """
    th = theta_m(m, profile, strength, u, tol)
    psi2 = _wrap2pi(psi + 2.0 * (th + np.pi))
    if not verify:
        return float(u), psi2
    return float(u), psi2, verify_return(m, profile, strength, u, psi, th)


def _flow_crossings(m, profile, strength, u, psi, count, rtol=1e-12, atol=1e-14):
    # start slightly on the correct side of cos(phi) = 0 so the start is not an event
    phi0 = -0.5 * np.pi if u < 0 else -1.5 * np.pi
    y0 = np.array([abs(u), phi0, psi, 0.0])
    horizon = 1e3 * count * (2 * np.pi + profile.ell / m)
    out = _run(K.FLOW, m, profile, strength, y0, 0.0, horizon, rtol, atol, ev_code=1,
               ev_dir=0, ev_count=count)
    _status_check(out[0], "return map flow")
    if out[0] != K.EVENT:
        raise NonClosedOrbit("section not reached")
    return float(out[1]), out[2]


def verify_return(m, profile, strength, u, psi, th=None) -> ReturnCheck:
    """Direct-flow check of the squared return map and of the symmetry identity."""
    strength = ONE if strength is None else strength
    th = theta_m(m, profile, strength, u) if th is None else th
    _, y1 = _flow_crossings(m, profile, strength, u, psi, 1)
    _, y2 = _flow_crossings(m, profile, strength, u, psi, 2)
    first = y1[2] - psi
    second = y2[2] - y1[2]
    d = np.angle(np.exp(1j * (y2[2] - (psi + 2 * th))))
    return ReturnCheck(float(abs(y2[0] - abs(u))), float(abs(d)),
                       float(abs(np.angle(np.exp(1j * (first - second))))), float(y2[3]))


# --------------------------------------------------------------------------
# twist coefficient


def omega_f(profile: Profile, strength: Strength, t):
    """Twist density ``-f'/(gamma f^3)``; near the poles ``f'/gamma -> f''/gamma'``."""
    strength = ONE if strength is None else strength
    t = np.asarray(t, dtype=float)
    ell = profile.ell
    g, g1, _, _ = profile.eval(t)
    f, f1, f2 = strength.eval(t)
    near = (t < 1e-4 * ell) | (t > (1 - 1e-4) * ell)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(near, f2 / g1, f1 / g)
    out = -ratio / f ** 3
    return out if out.ndim else float(out)


def omega_bounds(profile, strength, n=4096):
    t = np.linspace(0.0, profile.ell, n + 1)
    w = omega_f(profile, strength, t)
    return float(w.min()), float(w.max())


@dataclass
class TwistFit:
    u: float
    limit: float
    order: float
    ratios: List[float]
    ms: List[float]
    table: list = field(default_factory=list, repr=False)


def neville(xs, ys, x=0.0):
    """Neville tableau of the interpolating polynomial, evaluated at ``x``."""
    xs = list(map(float, xs))
    P = [list(map(float, ys))]
    for k in range(1, len(xs)):
        prev = P[-1]
        P.append([((x - xs[i + k]) * prev[i] + (xs[i] - x) * prev[i + 1]) / (xs[i] - xs[i + k])
                  for i in range(len(prev) - 1)])
    return P


def twist_fit(profile: Profile, strength: Strength, u: float, m_sequence: Sequence[float],
              variable: str = "m") -> TwistFit:
    """Extrapolate ``theta_m(u)/m^2`` to ``m = 0``.

    ``variable`` selects the extrapolation variable: ``"m"`` (default; the
    ratio carries an odd term) or ``"m2"``. The empirical order is the slope of
    ``log|r(m) - limit|`` against ``log m``.
    """
    ms = np.asarray(m_sequence, dtype=float)
    if np.any(np.diff(ms) >= 0):
        raise ValueError("m_sequence must be strictly decreasing")
    r = np.array([theta_m(m, profile, strength, u) / (m * m) for m in ms])
    x = ms ** 2 if variable == "m2" else ms
    tab = neville(x, r)
    limit = tab[-1][0]
    err = np.abs(r - limit)
    good = err > 0
    if good.sum() >= 2:
        order = float(np.polyfit(np.log(ms[good]), np.log(err[good]), 1)[0])
    else:
        order = float("inf")
    return TwistFit(float(u), float(limit), order, r.tolist(), ms.tolist(), tab)


def rigid_family(profile: Profile, k: float, h: float) -> Strength:
    """Strength ``(k Gamma0 + h)^(-1/2)`` whose twist density is the constant ``k/2``."""
    return rigid_strength(profile, k, h)


# --------------------------------------------------------------------------
# resonances


@dataclass
class TwistProfile:
    m: float
    u_grid: List[float]
    theta_m: List[float]
    psi_m: List[float]
    omega_fit: List[float]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["u", "m", "theta_m", "psi_m", "fit"])
        for row in zip(self.u_grid, self.theta_m, self.psi_m, self.omega_fit):
            w.writerow([repr(row[0]), repr(self.m), repr(row[1]), repr(row[2]), repr(row[3])])
        return buf.getvalue()


def twist_profile(m, profile, strength, u_grid) -> TwistProfile:
    th = [theta_m(m, profile, strength, u) for u in u_grid]
    return TwistProfile(float(m), list(map(float, u_grid)), th, [x + np.pi for x in th],
                        [x / (m * m) for x in th])


@dataclass
class ResonantOrbit:
    u: float
    p: int
    q: int
    reeb_period: float
    flow_time: float
    closure: float
    theta_m: float


def find_resonances(m: float, profile: Profile, strength: Strength, n_grid: int = 64,
                    max_orbits: int = 3, margin: float = 0.1) -> List[ResonantOrbit]:
    """Periodic points of the squared return map with rotation ``2 theta_m = 2 pi p/q``.

    Only ``p = 1`` is searched; each periodic point is closed by direct
    integration of the full flow over ``q`` squared returns.
    """
    strength = ONE if strength is None else strength
    ell = profile.ell
    us = -ell * np.linspace(margin, 1 - margin, n_grid)
    rot = np.array([2 * theta_m(m, profile, strength, u) for u in us])
    found = []
    for i in range(n_grid - 1):
        a, b = rot[i], rot[i + 1]
        if a <= 0 or b <= 0:
            continue
        qa, qb = 2 * np.pi / a, 2 * np.pi / b
        for q in range(int(np.ceil(min(qa, qb))), int(np.floor(max(qa, qb))) + 1):
            target = 2 * np.pi / q
            u = optimize.brentq(lambda v: 2 * theta_m(m, profile, strength, v) - target,
                                us[i], us[i + 1], xtol=1e-13)
            found.append((u, q))
            break
        if len(found) >= max_orbits:
            break
    out = []
    for u, q in found:
        out.append(close_resonant_orbit(m, profile, strength, u, q))
    return out


def close_resonant_orbit(m, profile, strength, u, q, rtol=1e-12, atol=1e-14) -> ResonantOrbit:
    """Integrate ``q`` squared returns from the section point ``u`` and measure closure."""
    s, y = _flow_crossings(m, profile, strength, u, 0.0, 2 * q, rtol, atol)
    closure = abs(y[0] - abs(u)) + abs(np.angle(np.exp(1j * y[2])))
    th = theta_m(m, profile, strength, u)
    return ResonantOrbit(float(u), 1, int(q), float(y[3]), float(s), float(closure), float(th))


def resonant_trajectory(m, profile, strength, orbit: ResonantOrbit):
    phi0 = -0.5 * np.pi if orbit.u < 0 else 0.5 * np.pi
    return integrate(m, profile, strength, FullState(abs(orbit.u), phi0, 0.0), orbit.flow_time,
                     rtol=1e-12, atol=1e-14)
