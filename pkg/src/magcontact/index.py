"""Maslov intervals and Conley-Zehnder indices of 2x2 symplectic paths.

Conventions
-----------
``J_ST = [[0, 1], [-1, 0]]`` generates positive rotation and angles are
measured as ``atan2(-y, x)``, so ``exp(2 pi v J_ST t)`` on ``[0, 1]`` winds
by ``v``.

The contact structure is framed by ``(X - alpha(X) V, H + beta(H) V) / sqrt(h)``
with dual coframe ``sqrt(h) (lambda, eta)``, where ``X`` is the geodesic
spray, ``H`` its horizontal rotation, ``V`` the fibre rotation and

    lambda = cos(phi) dt + gamma sin(phi) dtheta
    eta    = -sin(phi) dt + gamma cos(phi) dtheta
    alpha  = m lambda + dphi + (gamma' - beta_theta) dtheta.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np
from scipy import linalg, optimize

from . import _kernels as K
from .dynamics import FullState, LatitudeOrbit, _par, _tab, latitude_orbits
from .errors import ChartBreakdown, IntegrationFailure, NonClosedOrbit, NonContactSample, UnderResolved
from .surface import BG, BG1, F, F1, G, G1, ONE, Profile, Strength, scan_grid

J_ST = np.array([[0.0, 1.0], [-1.0, 0.0]])


# --------------------------------------------------------------------------
# paths and winding


@dataclass
class SymplecticPath:
    """Sampled path ``Psi(t)`` in Sp(2) with ``Psi(0) = Id``."""

    T: float
    times: np.ndarray = field(repr=False)
    samples: np.ndarray = field(repr=False)
    provenance: str = "integrated"

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.samples = np.asarray(self.samples, dtype=float)
        if not np.array_equal(self.samples[0], np.eye(2)):
            raise ValueError("path must start at the identity")

    @property
    def det_error(self) -> float:
        d = self.samples[:, 0, 0] * self.samples[:, 1, 1] - self.samples[:, 0, 1] * self.samples[:, 1, 0]
        return float(np.max(np.abs(d - 1.0)))

    @classmethod
    def exponential(cls, B, T: float, n: int = 2001) -> "SymplecticPath":
        """``exp(t B)`` on ``[0, T]`` for a traceless generator ``B``."""
        B = np.asarray(B, dtype=float)
        ts = np.linspace(0.0, T, n)
        S = np.array([linalg.expm(t * B) for t in ts])
        S[0] = np.eye(2)
        return cls(float(T), ts, S, "analytic-exponential")

    def to_csv(self) -> str:
        rows = ["t,a11,a12,a21,a22"]
        for t, M in zip(self.times, self.samples):
            rows.append(",".join(repr(float(v)) for v in (t, M[0, 0], M[0, 1], M[1, 0], M[1, 1])))
        return "\n".join(rows) + "\n"


def rotation_path(theta: float, T: float = 1.0, n: int = 2001) -> SymplecticPath:
    return SymplecticPath.exponential(2 * np.pi * theta * J_ST / T, T, n)


def _angles(V):
    return np.arctan2(-V[..., 1], V[..., 0])


def winding(path: SymplecticPath, alpha: float) -> float:
    """Normalized winding of ``Psi(t) v`` for the direction ``v = (cos a, sin a)``."""
    v = np.array([np.cos(alpha), np.sin(alpha)])
    a = _angles(path.samples @ v)
    d = np.diff(a)
    d = (d + np.pi) % (2 * np.pi) - np.pi
    if d.size and np.max(np.abs(d)) > 0.5 * np.pi:
        raise UnderResolved("rotation between consecutive samples exceeds pi/2")
    return float(d.sum() / (2 * np.pi))


def _eigen_candidates(path):
    """Windings of the real eigen-directions of ``Psi(T)``."""
    w, V = np.linalg.eig(path.samples[-1])
    out = []
    for k in range(2):
        if abs(w[k].imag) < 1e-12:
            v = V[:, k].real
            out.append(winding(path, float(np.arctan2(v[1], v[0]))))
    return out


@dataclass
class MaslovData:
    interval: tuple
    mu_lower: int
    mu_upper: int
    degenerate: bool

    def to_dict(self):
        return {"interval": list(self.interval), "mu_lower": self.mu_lower,
                "mu_upper": self.mu_upper, "degenerate": self.degenerate}


def winding_interval(path: SymplecticPath, n_dirs: int = 720, snap_tol: float = 1e-9):
    """The closed interval of normalized windings over all directions."""
    al = np.pi * np.arange(n_dirs) / n_dirs
    w = np.array([winding(path, a) for a in al])
    h = np.pi / n_dirs

    def refine(i, sgn):
        r = optimize.minimize_scalar(lambda a: sgn * winding(path, a), bounds=(al[i] - h, al[i] + h),
                                     method="bounded", options={"xatol": 1e-12})
        return sgn * r.fun

    lo = min(w.min(), refine(int(np.argmin(w)), 1.0))
    hi = max(w.max(), refine(int(np.argmax(w)), -1.0))
    cands = _eigen_candidates(path)
    for c in cands:
        lo, hi = min(lo, c), max(hi, c)
    cands += [float(np.round(lo)), float(np.round(hi))]
    for c in cands:
        if abs(lo - c) < snap_tol:
            lo = c
        if abs(hi - c) < snap_tol:
            hi = c
    if hi - lo < snap_tol:
        mid = 0.5 * (lo + hi)
        lo = hi = float(np.round(mid)) if abs(mid - np.round(mid)) < snap_tol else mid
    return float(lo), float(hi)


def maslov_from_interval(a: float, b: float) -> MaslovData:
    """Lower and upper Conley-Zehnder indices from the winding interval."""
    def isint(x):
        return float(x).is_integer()

    if a == b:
        if isint(a):
            k = int(a)
            return MaslovData((a, b), 2 * k - 1, 2 * k + 1, True)
        k = int(np.floor(a))
        return MaslovData((a, b), 2 * k + 1, 2 * k + 1, False)
    if isint(a):
        k = int(a)
        return MaslovData((a, b), 2 * k, 2 * k + 1, True)
    if isint(b):
        k = int(b)
        return MaslovData((a, b), 2 * k - 1, 2 * k, True)
    ka, kb = int(np.floor(a)), int(np.floor(b))
    if kb > ka:
        return MaslovData((a, b), 2 * kb, 2 * kb, False)
    return MaslovData((a, b), 2 * ka + 1, 2 * ka + 1, False)


def maslov(path: SymplecticPath, n_dirs: int = 720) -> MaslovData:
    return maslov_from_interval(*winding_interval(path, n_dirs))


# --------------------------------------------------------------------------
# contact frame


def _scalars(m, profile, strength, t):
    tab = profile.tables(strength)
    return (tab(G, t), tab(G1, t), tab(F, t), tab(F1, t), tab(BG, t), tab(BG1, t))


def contact_h(m, profile, strength, t, phi):
    tab = profile.tables(strength)
    return m * m - m * tab(BG, t) * np.sin(phi) + tab(F, t)


def coframe(m, profile, strength, t, phi):
    """Rows ``sqrt(h) lambda`` and ``sqrt(h) eta`` in (t, phi, theta) coordinates."""
    g, g1, f, _, bg, _ = _scalars(m, profile, strength, t)
    h = m * m - m * bg * np.sin(phi) + f
    sp, cp = np.sin(phi), np.cos(phi)
    r = np.sqrt(h)
    return r * np.array([[cp, 0.0, g * sp], [-sp, 0.0, g * cp]])


def frame(m, profile, strength, t, phi):
    """Columns ``(X - alpha(X) V)/sqrt(h)`` and ``(H + beta(H) V)/sqrt(h)``.

    This order makes the generator along latitudes ``[[0, b], [-1, 0]]``
    and its small-m limit ``J_ST``.
    """
    g, g1, f, _, bg, _ = _scalars(m, profile, strength, t)
    h = m * m - m * bg * np.sin(phi) + f
    sp, cp = np.sin(phi), np.cos(phi)
    Hv = np.array([-sp, -g1 * cp / g, cp / g])
    Xv = np.array([cp, -g1 * sp / g, sp / g])
    Vv = np.array([0.0, 1.0, 0.0])
    bH = bg * cp  # beta(H) with beta = beta_theta dtheta
    aX = m - bg * sp  # alpha(X)
    return np.column_stack([Xv - aX * Vv, Hv + bH * Vv]) / np.sqrt(h)


def _h_min(m, profile, strength):
    tab = profile.tables(strength)
    t = scan_grid(profile, 2048, strength)
    return float(np.min(m * m - m * np.abs(tab(BG, t)) + tab(F, t)))


def variational_path(m: float, profile: Profile, strength: Strength, z0: FullState, T: float,
                     n: int = 2001, rtol: float = 1e-12, atol: float = 1e-14):
    """Linearized Reeb flow along ``z0`` over Reeb time ``T`` in the contact frame.

    Returns the path and the end state.
    """
    strength = ONE if strength is None else strength
    br, cf = _tab(profile, strength)
    y0 = np.zeros(13)
    y0[:3] = z0.t, z0.phi, z0.theta
    y0[4:] = np.eye(3).ravel()
    out = K.solve(K.VAR, _par(m, profile), br, cf, y0, 0.0, float(T), rtol, atol, 10 ** 7, True,
                  0, 0, 1, 0.0, np.inf)
    status = out[0]
    if status == K.BREAKDOWN:
        raise ChartBreakdown("variational integration reached the polar margin")
    if status != K.OK:
        raise IntegrationFailure(f"variational integration failed (status {status})")
    steps = tuple(np.ascontiguousarray(a) for a in out[7:13])
    ts = np.linspace(0.0, T, n)
    Y = K.dense_eval(*steps, float(profile.ell), ts)
    Y[-1] = out[2]
    E0 = frame(m, profile, strength, z0.t, z0.phi)
    S = np.empty((n, 2, 2))
    for k in range(n):
        C = coframe(m, profile, strength, Y[k, 0], Y[k, 1])
        S[k] = C @ Y[k, 4:].reshape(3, 3) @ E0
    S[0] = np.eye(2)
    end = FullState(float(out[2][0]), float(out[2][1]), float(out[2][2]))
    return SymplecticPath(float(T), ts, S, "integrated"), end


def latitude_generator(m, profile, strength, lat: LatitudeOrbit):
    """Constant generator ``[[0, b], [-1, 0]]`` of the linearized flow along a latitude.

    ``b = f/h - m H(h)/h^2`` with ``H(h) = -sign * dh/dt`` at ``phi = sign pi/2``.
    """
    strength = ONE if strength is None else strength
    g, g1, f, f1, bg, bg1 = _scalars(m, profile, strength, lat.t0)
    s = lat.sign
    h = m * m - m * bg * s + f
    dh = -m * bg1 * s + f1
    b = f / h - m * (-s * dh) / h ** 2
    return np.array([[0.0, b], [-1.0, 0.0]])


def fd_generator(m, profile, strength, z: FullState, delta: float = 1e-3):
    """``B = Psi'(0)`` at ``z`` by Richardson-extrapolated central differences."""
    def central(d):
        P, _ = variational_path(m, profile, strength, z, d, n=2)
        M, _ = variational_path(m, profile, strength, z, -d, n=2)
        return (P.samples[-1] - M.samples[-1]) / (2 * d)

    return (4 * central(delta / 2) - central(delta)) / 3


def linearized_path(m: float, profile: Profile, strength: Strength, orbit, k_iterates: int = 1,
                    n_per_period: int = 2000, close_tol: float = 1e-6) -> SymplecticPath:
    """Linearized Reeb flow along a closed orbit, iterated ``k_iterates`` times.

    ``orbit`` is a :class:`LatitudeOrbit` (analytic generator) or a pair
    ``(FullState, reeb_period)`` (integrated variational flow).
    """
    strength = ONE if strength is None else strength
    if isinstance(orbit, LatitudeOrbit):
        B = latitude_generator(m, profile, strength, orbit)
        return SymplecticPath.exponential(B, k_iterates * orbit.reeb_period,
                                          k_iterates * n_per_period + 1)
    z0, T = orbit
    path, end = variational_path(m, profile, strength, z0, k_iterates * T,
                                 k_iterates * n_per_period + 1)
    err = abs(end.t - z0.t) + abs(np.angle(np.exp(1j * (end.phi - z0.phi)))) + \
        abs(np.angle(np.exp(1j * (end.theta - z0.theta))))
    if err > close_tol:
        raise NonClosedOrbit(f"orbit does not close (mismatch {err:.2e})")
    return path


def hyperbolic_generator(b: float):
    """Synthetic generator ``[[0, b], [-1, 0]]``; real spectrum when ``b < 0``."""
    return np.array([[0.0, b], [-1.0, 0.0]])


def transverse_spectrum(B):
    ev = np.linalg.eigvals(np.asarray(B, dtype=float))
    return ev, bool(np.all(np.abs(ev.imag) < 1e-14))


# --------------------------------------------------------------------------
# dynamical convexity


@dataclass
class DynConvexReport:
    m_values: List[float]
    norms: List[float]
    exponent: float
    C: float
    latitudes: List[dict]
    inequality: List[dict]
    proxy: str = "T0 is the shortest doubled latitude Reeb period"

    @property
    def convex(self) -> bool:
        return all(r["mu_lower"] >= 3 for r in self.latitudes)

    def to_json(self) -> str:
        d = dict(self.__dict__)
        d["schema"] = "dynconvex/1"
        d["convex"] = self.convex
        return json.dumps(d, indent=2, sort_keys=True)


def sample_states(profile, n, rng, margin=0.1):
    ell = profile.ell
    return [FullState(float(rng.uniform(margin, 1 - margin) * ell),
                      float(rng.uniform(-np.pi, np.pi)), 0.0) for _ in range(n)]


def generator_deviation(m, profile, strength, states, delta=1e-3):
    return max(float(np.linalg.norm(fd_generator(m, profile, strength, z, delta) - J_ST, 2))
               for z in states)


def dynconvex_report(m_values: Sequence[float], profile: Profile, strength: Strength = None,
                     samples: int = 16, seed: int = 0) -> DynConvexReport:
    """Deviation of the generator from ``J_ST``, doubled-latitude indices and the period test."""
    strength = ONE if strength is None else strength
    ms = np.asarray(sorted(m_values), dtype=float)
    for m in ms:
        if not _h_min(m, profile, strength) > 0:
            raise NonContactSample(f"h is not positive at m={m}")
    rng = np.random.default_rng(seed)
    states = sample_states(profile, samples, rng)
    norms = [generator_deviation(m, profile, strength, states) for m in ms]
    if len(ms) >= 2:
        exponent = float(np.polyfit(np.log(ms), np.log(norms), 1)[0])
    else:
        exponent = float("nan")
    C = float(max(n / m for n, m in zip(norms, ms)))
    lats, ineq = [], []
    for m in ms:
        T0 = np.inf
        for lat in latitude_orbits(m, profile, strength):
            md = maslov(linearized_path(m, profile, strength, lat, k_iterates=2))
            lats.append({"m": float(m), "t0": lat.t0, "sign": lat.sign, "mu_lower": md.mu_lower,
                         "mu_upper": md.mu_upper, "interval": list(md.interval)})
            T0 = min(T0, 2 * lat.reeb_period)
        lhs = 2 * np.pi / T0
        ineq.append({"m": float(m), "lhs": float(lhs), "rhs": float(1 - C * m),
                     "holds": bool(lhs < 1 - C * m)})
    return DynConvexReport(ms.tolist(), norms, exponent, C, lats, ineq)


# --------------------------------------------------------------------------
# quaternionic cover


def qmul(a, b):
    """Hamilton product of quaternion arrays ``(..., 4)`` stored as (w, x, y, z)."""
    aw, ax, ay, az = np.moveaxis(a, -1, 0)
    bw, bx, by, bz = np.moveaxis(b, -1, 0)
    return np.stack([aw * bw - ax * bx - ay * by - az * bz,
                     aw * bx + ax * bw + ay * bz - az * by,
                     aw * by - ax * bz + ay * bw + az * bx,
                     aw * bz + ax * by - ay * bx + az * bw], axis=-1)


def qconj(a):
    return a * np.array([1.0, -1.0, -1.0, -1.0])


QI = np.array([0.0, 1.0, 0.0, 0.0])
QJ = np.array([0.0, 0.0, 1.0, 0.0])


def cover_forms(U, W):
    """``((p0^* tau0)(W), (lambda_st)(W))`` for unit ``U`` and ``W`` in R^4.

    ``p0(U) = (U^-1 i U, U^-1 j U)``; ``tau0`` evaluates ``g(v2, u1 x u2)``
    and ``lambda_st(W) = g(i U, W) / 2``.
    """
    Ui = qconj(U)
    u1 = qmul(qmul(Ui, QI), U)[..., 1:]
    u2 = qmul(qmul(Ui, QJ), U)[..., 1:]
    dUi = -qmul(qmul(Ui, W), Ui)
    v2 = (qmul(qmul(dUi, QJ), U) + qmul(qmul(Ui, QJ), W))[..., 1:]
    tau = np.sum(v2 * np.cross(u1, u2), axis=-1)
    lam = 0.5 * np.sum(qmul(QI, U) * W, axis=-1)
    return tau, lam


def quaternion_cover_check(n_samples: int = 1000, seed: int = 0, project: bool = True) -> float:
    """Maximum of ``|p0^* tau0 + 4 lambda_st|`` over random unit ``U`` and vectors ``W``."""
    rng = np.random.default_rng(seed)
    U = rng.normal(size=(n_samples, 4))
    U /= np.linalg.norm(U, axis=1, keepdims=True)
    W = rng.normal(size=(n_samples, 4))
    if project:
        W = W - np.sum(W * U, axis=1, keepdims=True) * U
    tau, lam = cover_forms(U, W)
    return float(np.max(np.abs(tau + 4 * lam)))


def cover_base_point(s: float = 1.0, w: float = 0.0):
    """``(tau side, lambda side)`` at ``U = 1`` with ``W = s i + w j``; expected ``(-2s, s/2)``."""
    tau, lam = cover_forms(np.array([1.0, 0.0, 0.0, 0.0]), np.array([0.0, s, w, 0.0]))
    return float(tau), float(lam)
