"""Profile functions of surfaces of revolution and magnetic strengths.

A profile ``gamma`` on ``[0, ell]`` is the arclength-parametrized generator of
a rotationally symmetric sphere: ``gamma(0) = gamma(ell) = 0``,
``gamma'(0) = 1``, ``gamma'(ell) = -1`` and ``int gamma = 2`` (area 4 pi).
A strength ``f`` is a positive rotationally invariant function with
``f'(0) = f'(ell) = 0``.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
import yaml
from scipy import integrate, interpolate, optimize, special

from . import _cheb
from .errors import DegenerateProfile, InfeasibleParams, InfeasibleSpec, NonEvaluable

# table slots, shared with the compiled kernels
G, G1, G2, F, F1, GF, BG, BG1, RS, RN, KS, KN, G3, F2, GAM = range(15)
NTAB = 15

POLE_SERIES = 1e-4
# relative tail tolerances for gamma, gamma', gamma'', f, f'
_TABLE_TOL = (2e-14, 2e-14, 1e-10, 2e-14, 1e-10)


# --------------------------------------------------------------------------
# core types


@dataclass(frozen=True, eq=False)
class Profile:
    """Generator curve of a surface of revolution.

    Parameters
    ----------
    ell : float
        Arclength of the generator.
    evaluator : callable
        ``t -> (gamma, gamma', gamma'', gamma''')`` on arrays.
    kind : dict
        Family tag and parameters; round-trips through :func:`profile_to_text`.
    """

    ell: float
    evaluator: Callable = field(repr=False)
    kind: dict = field(default_factory=lambda: {"family": "custom"})
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def eval(self, t):
        t = np.asarray(t, dtype=float)
        out = self.evaluator(t)
        return tuple(np.asarray(v, dtype=float) * np.ones_like(t) for v in out)

    def tables(self, strength: "Strength" = None) -> _cheb.Table:
        strength = ONE if strength is None else strength
        hit = self._cache.get(id(strength))
        if hit is None or hit[0] is not strength:
            hit = (strength, _build_tables(self, strength))
            self._cache[id(strength)] = hit
        return hit[1]

    @property
    def area(self) -> float:
        """Integral of gamma over [0, ell] (a quarter of 2/pi times the area)."""
        return self.tables()(GAM, self.ell) + 1.0

    def primitive(self, t, base: float = -1.0):
        """Primitive of gamma with value ``base`` at t=0.

        The default ``base=-1`` is the convention in which the primitive
        runs from -1 to 1; ``base=0`` is used by the rigid family.
        """
        return self.tables()(GAM, t) + 1.0 + base


@dataclass(frozen=True, eq=False)
class Strength:
    """Rotationally invariant magnetic strength ``f(t) > 0``.

    ``evaluator`` maps ``t -> (f, f', f'')``.
    """

    evaluator: Callable = field(repr=False)
    kind: dict = field(default_factory=lambda: {"family": "custom"})
    normalized: bool = False

    def eval(self, t):
        t = np.asarray(t, dtype=float)
        out = self.evaluator(t)
        return tuple(np.asarray(v, dtype=float) * np.ones_like(t) for v in out)


def _const_eval(c):
    def ev(t):
        z = np.zeros_like(t)
        return (c + z, z, z)
    return ev


ONE = Strength(_const_eval(1.0), {"family": "constant", "value": 1.0}, True)


def constant_strength(value: float = 1.0) -> Strength:
    if value == 1.0:
        return ONE
    if not value > 0:
        raise InfeasibleParams("constant strength must be positive")
    return Strength(_const_eval(float(value)), {"family": "constant", "value": float(value)},
                    False)


@dataclass
class GeometryScalars:
    t: float
    Gamma: float
    Gamma0: float
    K: float
    beta_theta: float
    Gamma_f: float
    beta_theta_f: float


@dataclass
class Check:
    name: str
    passed: bool
    residual: float
    tol: float


@dataclass
class ValidationReport:
    checks: list
    passed: bool

    def failed(self):
        return [c.name for c in self.checks if not c.passed]

    def to_dict(self):
        return {"schema": "validation/1", "passed": self.passed,
                "checks": [{"name": c.name, "passed": c.passed,
                            "residual": c.residual, "tol": c.tol} for c in self.checks]}

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


@dataclass(frozen=True)
class ContactBounds:
    m_gamma: float
    full_ray: bool
    m_minus: Optional[float] = None
    m_plus: Optional[float] = None

    @property
    def interval(self):
        return "full-ray" if self.full_ray else ("gap", self.m_minus, self.m_plus)

    def contains(self, m: float) -> bool:
        """True when m lies in the contact range guaranteed by the bound."""
        if self.full_ray:
            return m >= 0
        return m < self.m_minus or m > self.m_plus


# --------------------------------------------------------------------------
# tables


def _build_tables(profile: Profile, strength: Strength) -> _cheb.Table:
    ell = profile.ell

    def check(t):
        g, g1, g2, _ = profile.eval(t)
        f, f1, _ = strength.eval(t)
        return np.stack([g, g1, g2, f, f1])

    try:
        br = _cheb.adaptive_breaks(check, 5, 0.0, ell, tol=_TABLE_TOL)
    except FloatingPointError as exc:
        raise NonEvaluable(str(exc)) from exc

    def nodal(t):
        g, g1, g2, g3 = profile.eval(t)
        f, f1, f2 = strength.eval(t)
        return np.stack([g, g1, g2, g3, f, f1, f2, g * f])

    cf = _cheb.fit_panels(nodal, br, 8)
    g_c, g1_c, g2_c, g3_c, f_c, f1_c, f2_c, gf_c = cf
    gam_c = _cheb.antiderivative(g_c, br, -1.0)
    gamf_c = _cheb.antiderivative(gf_c, br, -1.0)

    # ratio functions sampled at nodes from accurate pieces
    a, b = br[:-1], br[1:]
    tn = 0.5 * (a + b)[:, None] + 0.5 * (b - a)[:, None] * _cheb._X[None, :]
    V = np.polynomial.chebyshev.chebvander(_cheb._X, _cheb.DEG + 1)
    gamf_n = gamf_c @ V.T
    g, g1, _, _ = profile.eval(tn)
    south = tn < 0.5 * ell
    with np.errstate(divide="ignore", invalid="ignore"):
        bg = (gamf_n + g1) / g
        rs = np.where(south, tn / g, 0.0)
        rn = np.where(south, 0.0, (ell - tn) / g)
        ks = np.where(south, (1.0 - g1) / g, 0.0)
        kn = np.where(south, 0.0, (1.0 + g1) / g)
    M = _cheb._M
    bg_c, rs_c, rn_c, ks_c, kn_c = (v @ M.T for v in (bg, rs, rn, ks, kn))
    bg1_c = _cheb.derivative(bg_c, br)

    width = _cheb.DEG + 2
    slots = [None] * NTAB
    slots[G], slots[G1], slots[G2], slots[G3] = g_c, g1_c, g2_c, g3_c
    slots[F], slots[F1], slots[F2] = f_c, f1_c, f2_c
    slots[GF], slots[GAM] = gamf_c, gam_c
    slots[BG], slots[BG1] = bg_c, bg1_c
    slots[RS], slots[RN], slots[KS], slots[KN] = rs_c, rn_c, ks_c, kn_c
    coef = np.stack([_cheb.pad(s, width) for s in slots])
    if not np.all(np.isfinite(coef)):
        raise NonEvaluable("non-finite table coefficients")
    return _cheb.Table(br, coef)


# --------------------------------------------------------------------------
# families


def round_sphere() -> Profile:
    def ev(t):
        s, c = np.sin(t), np.cos(t)
        return s, c, -s, -c
    return Profile(np.pi, ev, {"family": "round_sphere"})


def ellipsoid(a: float, c: float, normalize_area: bool = True) -> Profile:
    """Spheroid with equatorial radius ``a`` and polar half-axis ``c``.

    The meridian ``u -> (a sin u, -c cos u)`` is reparametrized by arclength
    through the incomplete elliptic integral of the second kind.
    """
    if not (a > 0 and c > 0):
        raise InfeasibleSpec("ellipsoid semi-axes must be positive")
    mpar = 1.0 - (c / a) ** 2
    ell = a * special.ellipeinc(np.pi, mpar)

    def u_of_t(t):
        u = np.pi * np.clip(t, 0.0, ell) / ell
        for _ in range(30):
            L = np.sqrt(a * a * np.cos(u) ** 2 + c * c * np.sin(u) ** 2)
            du = (a * special.ellipeinc(u, mpar) - t) / L
            u = u - du
            if np.max(np.abs(du), initial=0.0) < 1e-15:
                break
        return u

    def ev(t):
        u = u_of_t(t)
        su, cu = np.sin(u), np.cos(u)
        L2 = a * a * cu * cu + c * c * su * su
        L = np.sqrt(L2)
        g = a * su
        g1 = a * cu / L
        g2 = -a * c * c * su / (L2 * L2)
        g3 = (3 * a * c * c * (c * c - a * a) * su * su * cu - a ** 3 * c * c * cu) / (L2 ** 3 * L)
        return g, g1, g2, g3

    p = Profile(ell, ev, {"family": "ellipsoid", "a": float(a), "c": float(c),
                          "normalize": bool(normalize_area)})
    return normalize(p, keep_kind=True) if normalize_area else p


class _Step:
    """Smooth monotone step 0 -> 1 on [0, 1] with a unimodal derivative.

    The derivative is proportional to ``exp(-1/(y(1-y)))``.
    """

    def __init__(self):
        def bump(y):
            return np.stack([self._b(y)[0]])
        br = _cheb.adaptive_breaks(bump, 1, 0.0, 1.0)
        cf = _cheb.fit_panels(bump, br, 1)[0]
        self.br = br
        self.prim = _cheb.pad(_cheb.antiderivative(cf, br, 0.0), _cheb.DEG + 2)[None]
        self.Z = _cheb.tab1(br, self.prim, 0, 1.0)

    @staticmethod
    def _b(y):
        y = np.asarray(y, dtype=float)
        inside = (y > 0) & (y < 1)
        yy = np.where(inside, y, 0.5)
        q = 1.0 / (yy * (1.0 - yy))
        ok = inside & (q < 700.0)
        b = np.where(ok, np.exp(-np.minimum(q, 700.0)), 0.0)
        s = 1.0 - 2.0 * yy
        q2 = np.where(ok, q * q, 0.0)
        b1 = s * q2 * b
        b2 = b * q2 * (-2.0 - 2.0 * s * s * q + s * s * q2)
        return b, b1, b2

    def __call__(self, y):
        """Return (S, S', S'', S''') at y."""
        y = np.asarray(y, dtype=float)
        yc = np.clip(y, 0.0, 1.0)
        S = _cheb._eval_many(self.br, self.prim, 0, np.atleast_1d(yc).ravel()).reshape(y.shape)
        b, b1, b2 = self._b(y)
        return S / self.Z, b / self.Z, b1 / self.Z, b2 / self.Z


_STEP = None


def _step():
    global _STEP
    if _STEP is None:
        _STEP = _Step()
    return _STEP


def _stretched(a, x0, W, S):
    """Sphere of radius ``a`` with the base interval [x0, x0+W] stretched by S.

    The stretching diffeomorphism is ``F(x) = x + S*step((x-x0)/W)``.
    """
    step = _step()
    xs = np.linspace(0.0, np.pi * a, 4001)
    Fs = xs + S * step((xs - x0) / W)[0]
    ell = np.pi * a + S

    def Fmap(x):
        s0, s1, s2, s3 = step((x - x0) / W)
        return x + S * s0, 1.0 + S * s1 / W, S * s2 / W ** 2, S * s3 / W ** 3

    def ev(t):
        t = np.clip(np.asarray(t, dtype=float), 0.0, ell)
        x = np.interp(t, Fs, xs)
        for _ in range(50):
            F0, F1, _, _ = Fmap(x)
            dx = (F0 - t) / F1
            x = np.clip(x - dx, 0.0, np.pi * a)
            if np.max(np.abs(dx), initial=0.0) < 1e-15 * max(1.0, ell):
                break
        _, F1, F2, F3 = Fmap(x)
        G1 = 1.0 / F1
        G2 = -F2 * G1 ** 3
        G3 = -F3 * G1 ** 4 - 3.0 * F2 * G1 ** 2 * G2
        s, c = np.sin(x / a), np.cos(x / a)
        h0, h1, h2, h3 = a * s, c, -s / a, -c / a ** 2
        g = h0
        g1 = h1 * G1
        g2 = h2 * G1 ** 2 + h1 * G2
        g3 = h3 * G1 ** 3 + 3.0 * h2 * G1 * G2 + h1 * G3
        return g, g1, g2, g3

    return ell, ev


def _stretch_area_rate(a, x0, W):
    step = _step()
    val, _ = integrate.quad(lambda x: a * np.sin(x / a) * float(step(np.array((x - x0) / W))[1]) / W,
                            x0, x0 + W, epsabs=1e-14, epsrel=1e-13, limit=200)
    return val


def stretched_sphere(a: float, delta: float, C: Optional[float] = None,
                     eps: Optional[float] = None) -> Profile:
    """Sphere of radius ``a`` stretched symmetrically about its equator.

    The base interval ``[delta, pi*a - delta]`` is stretched by a total
    length ``2*C``. With ``C=None`` the stretch is chosen so that the area
    condition holds exactly; otherwise the result is rescaled by a homothety.
    """
    if not (0 < delta and 2 * delta / np.pi < a < 1):
        raise InfeasibleSpec("need a in (2*delta/pi, 1) and delta > 0")
    if eps is not None and not np.cos(delta / a) < eps:
        raise InfeasibleSpec("need cos(delta/a) < eps")
    x0, W = delta, np.pi * a - 2 * delta
    if C is None:
        S = (2.0 - 2.0 * a * a) / _stretch_area_rate(a, x0, W)
        C2 = 0.5 * S
    else:
        if C < 0:
            raise InfeasibleSpec("C must be nonnegative")
        S, C2 = 2.0 * C, None
    ell, ev = _stretched(a, x0, W, S)
    kind = {"family": "stretched_sphere", "a": float(a), "delta": float(delta),
            "C": None if C is None else float(C), "eps": None if eps is None else float(eps)}
    p = Profile(ell, ev, kind)
    if C2 is not None:
        p.kind["C2"] = float(C2)
        return p
    return normalize(p, keep_kind=True)


def dip_profile(delta: float, eps: float) -> Profile:
    """Small sphere whose profile slope drops below ``-eps`` at ``t = delta``.

    The radius ``a`` is chosen so that ``delta/a`` lies past the angle where
    ``cos = -eps``; the area is restored by stretching a window between
    ``delta`` and the north pole.
    """
    if not (0 < eps < 1 and delta > 0):
        raise InfeasibleSpec("need 0 < eps < 1 and delta > 0")
    th0 = np.arccos(-eps)
    th = th0 + 0.25 * (np.pi - th0)
    a = delta / th
    if not (delta / np.pi < a < 2 * delta / np.pi) or not np.cos(delta / a) < -eps:
        raise InfeasibleSpec("no admissible radius")
    if 2 * a * a >= 2:
        raise InfeasibleSpec("base sphere already too large")
    D = np.pi * a - delta
    x0, W = delta + 0.05 * D, 0.4 * D
    S = (2.0 - 2.0 * a * a) / _stretch_area_rate(a, x0, W)
    ell, ev = _stretched(a, x0, W, S)
    return Profile(ell, ev, {"family": "dip", "delta": float(delta), "eps": float(eps),
                             "a": float(a), "stretch": float(S)})


def sampled_profile(t, gamma) -> Profile:
    """Profile from dense samples through a quintic interpolating spline."""
    t = np.asarray(t, dtype=float)
    g = np.asarray(gamma, dtype=float)
    if t.ndim != 1 or t.shape != g.shape or len(t) < 8 or np.any(np.diff(t) <= 0):
        raise InfeasibleSpec("samples must be increasing 1-D arrays of equal length >= 8")
    sp = interpolate.make_interp_spline(t - t[0], g, k=5)
    d1, d2, d3 = sp.derivative(1), sp.derivative(2), sp.derivative(3)

    def ev(x):
        return sp(x), d1(x), d2(x), d3(x)

    return Profile(float(t[-1] - t[0]), ev,
                   {"family": "sampled", "t": (t - t[0]).tolist(), "gamma": g.tolist()})


def build_profile(spec: dict) -> Profile:
    """Build a profile from a family specification mapping."""
    spec = dict(spec)
    fam = spec.pop("family", None)
    norm = spec.pop("normalize", None)
    try:
        if fam == "round_sphere":
            p = round_sphere()
        elif fam == "ellipsoid":
            p = ellipsoid(float(spec["a"]), float(spec["c"]), normalize_area=norm is not False)
            norm = None
        elif fam == "stretched_sphere":
            p = stretched_sphere(float(spec["a"]), float(spec["delta"]),
                                 None if spec.get("C") is None else float(spec["C"]),
                                 None if spec.get("eps") is None else float(spec["eps"]))
        elif fam == "dip":
            p = dip_profile(float(spec["delta"]), float(spec["eps"]))
        elif fam == "sampled":
            p = sampled_profile(spec["t"], spec["gamma"])
        elif fam == "scaled":
            base = build_profile(spec["base"])
            p = scale_profile(base, float(spec["scale"]))
        else:
            raise InfeasibleSpec(f"unknown profile family {fam!r}")
    except KeyError as exc:
        raise InfeasibleSpec(f"missing parameter {exc.args[0]!r} for family {fam!r}") from None
    if norm:
        p = normalize(p)
    return p


def profile_to_text(profile: Profile) -> str:
    return yaml.safe_dump({"profile": _plain(profile.kind)}, sort_keys=True)


def profile_from_text(text: str) -> Profile:
    data = yaml.safe_load(text)
    if not isinstance(data, dict) or "profile" not in data:
        raise InfeasibleSpec("text block must contain a 'profile' mapping")
    return build_profile(data["profile"])


def _plain(obj):
    if isinstance(obj, dict):
        return {k: _plain(v) for k, v in obj.items() if k != "C2"}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    return obj


# --------------------------------------------------------------------------
# strengths


def cosine_strength(profile: Profile, eps: float) -> Strength:
    """``f = c (1 + eps cos(pi t / ell))`` with ``c`` fixing the total flux."""
    if not abs(eps) < 1:
        raise InfeasibleParams("need |eps| < 1 for positivity")
    ell = profile.ell
    k = np.pi / ell
    I1 = _panel_integral(profile, lambda t: profile.eval(t)[0] * np.cos(k * t))
    cst = 2.0 / (profile.area + eps * I1)

    def ev(t):
        c, s = np.cos(k * t), np.sin(k * t)
        return cst * (1 + eps * c), -cst * eps * k * s, -cst * eps * k * k * c

    return Strength(ev, {"family": "cosine", "eps": float(eps), "scale": float(cst)}, True)


def rigid_strength(profile: Profile, k: float, h: float) -> Strength:
    """``f = (k*Gamma0 + h)**-0.5`` with ``Gamma0(0) = 0``; its twist density is k/2."""
    G0end = float(profile.primitive(profile.ell, base=0.0))
    if not (h > 0 and h + k * G0end > 0):
        raise InfeasibleParams("k*Gamma0 + h must stay positive on [0, ell]")

    def ev(t):
        g, g1, _, _ = profile.eval(t)
        P = k * profile.primitive(t, base=0.0) + h
        f = P ** -0.5
        f1 = -0.5 * k * g * P ** -1.5
        f2 = -0.5 * k * g1 * P ** -1.5 + 0.75 * k * k * g * g * P ** -2.5
        return f, f1, f2

    flux = _panel_integral(profile, lambda t: profile.eval(t)[0] * ev(t)[0])
    return Strength(ev, {"family": "rigid", "k": float(k), "h": float(h)},
                    abs(flux - 2.0) < 1e-10)


def sampled_strength(t, f, normalized=False) -> Strength:
    t = np.asarray(t, dtype=float)
    sp = interpolate.make_interp_spline(t - t[0], np.asarray(f, dtype=float), k=5)
    d1, d2 = sp.derivative(1), sp.derivative(2)
    return Strength(lambda x: (sp(x), d1(x), d2(x)),
                    {"family": "sampled", "t": (t - t[0]).tolist(), "f": list(map(float, f))},
                    bool(normalized))


def build_strength(spec: Optional[dict], profile: Profile) -> Strength:
    if spec is None:
        return ONE
    spec = dict(spec)
    fam = spec.pop("family", "constant")
    try:
        if fam == "constant":
            return constant_strength(float(spec.get("value", 1.0)))
        if fam == "cosine":
            return cosine_strength(profile, float(spec["eps"]))
        if fam == "rigid":
            return rigid_strength(profile, float(spec["k"]), float(spec["h"]))
        if fam == "sampled":
            return sampled_strength(spec["t"], spec["f"], spec.get("normalized", False))
    except KeyError as exc:
        raise InfeasibleParams(f"missing parameter {exc.args[0]!r} for strength {fam!r}") from None
    raise InfeasibleParams(f"unknown strength family {fam!r}")


def strength_to_text(strength: Strength) -> str:
    kind = {k: v for k, v in strength.kind.items() if k != "scale"}
    return yaml.safe_dump({"strength": _plain(kind)}, sort_keys=True)


def strength_from_text(text: str, profile: Profile) -> Strength:
    return build_strength(yaml.safe_load(text)["strength"], profile)


# --------------------------------------------------------------------------
# operations


def scale_profile(profile: Profile, lam: float) -> Profile:
    base = profile.evaluator

    def ev(t):
        g, g1, g2, g3 = base(np.asarray(t) / lam)
        return lam * g, g1, g2 / lam, g3 / lam ** 2

    return Profile(lam * profile.ell, ev, {"family": "scaled", "scale": float(lam),
                                           "base": profile.kind})


def normalize(profile: Profile, keep_kind: bool = False) -> Profile:
    """Rescale so that the integral of gamma equals 2."""
    area = profile.area
    if not area > 0:
        raise DegenerateProfile("integral of gamma must be positive")
    lam = float(np.sqrt(2.0 / area))
    if abs(lam - 1.0) < 1e-15:
        return profile
    p = scale_profile(profile, lam)
    if keep_kind:
        kind = dict(profile.kind)
        kind["scale"] = lam
        return Profile(p.ell, p.evaluator, kind)
    return p


def scan_grid(profile: Profile, n: int = 4096, strength: Strength = None,
              per_panel: int = 16, interior: bool = False):
    """Uniform grid merged with equispaced points inside every table panel.

    The panel points resolve features that are narrow compared with ``ell``.
    """
    br = profile.tables(strength).breaks
    a, b = br[:-1], br[1:]
    x = np.arange(per_panel) / per_panel
    tt = np.unique(np.concatenate([np.linspace(0.0, profile.ell, n + 1),
                                   (a[:, None] + (b - a)[:, None] * x[None, :]).ravel(),
                                   [profile.ell]]))
    return tt[1:-1] if interior else tt


def validate(profile: Profile, strength: Strength = None, tol: float = 1e-8) -> ValidationReport:
    strength = ONE if strength is None else strength
    ell = profile.ell
    try:
        tt = np.linspace(0.0, ell, 4097)
        g, g1, g2, g3 = profile.eval(tt)
        if all(np.all(np.isfinite(a)) for a in (g, g1, g2, g3)):
            tt = scan_grid(profile, 4096, strength)
            g, g1, g2, g3 = profile.eval(tt)
        f, f1, f2 = strength.eval(tt)
        arrs = (g, g1, g2, g3, f, f1, f2)
        if not all(np.all(np.isfinite(a)) for a in arrs):
            raise NonEvaluable("evaluator returned non-finite values")
        area, flux = _panel_quadrature(profile, strength)
    except NonEvaluable:
        raise
    except Exception as exc:
        raise NonEvaluable(f"evaluator failed: {exc}") from exc
    inner = slice(1, -1)
    checks = []

    def add(name, res, passed=None):
        res = float(res)
        checks.append(Check(name, bool(res <= tol) if passed is None else bool(passed), res, tol))

    add("gamma(0)=0", abs(g[0]))
    add("gamma(ell)=0", abs(g[-1]))
    add("gamma>0 inside", -g[inner].min(), g[inner].min() > 0)
    add("gamma'(0)=1", abs(g1[0] - 1.0))
    add("gamma'(ell)=-1", abs(g1[-1] + 1.0))
    add("|gamma'|<1 inside", np.abs(g1[inner]).max() - 1.0, np.abs(g1[inner]).max() < 1.0)
    add("gamma''(0)=0", abs(g2[0]))
    add("gamma''(ell)=0", abs(g2[-1]))
    add("area", abs(area - 2.0))
    add("f>0", -f.min(), f.min() > 0)
    add("f'(0)=0", abs(f1[0]))
    add("f'(ell)=0", abs(f1[-1]))
    if strength.normalized:
        add("flux", abs(flux - 2.0))
    return ValidationReport(checks, all(c.passed for c in checks))


def _panel_integral(profile, func):
    """Gauss-Legendre integral of ``func(t)`` over [0, ell] on the profile table panels."""
    x, w = np.polynomial.legendre.leggauss(40)
    br = profile.tables().breaks
    a, b = br[:-1, None], br[1:, None]
    t = 0.5 * (a + b) + 0.5 * (b - a) * x[None, :]
    wt = 0.5 * (b - a) * w[None, :]
    return float(np.sum(wt * func(t)))


def _panel_quadrature(profile, strength):
    """Integrals of gamma and gamma*f on the table panels."""
    return (_panel_integral(profile, lambda t: profile.eval(t)[0]),
            _panel_integral(profile, lambda t: profile.eval(t)[0] * strength.eval(t)[0]))


def curvature(profile: Profile, t):
    """Gaussian curvature ``-gamma''/gamma`` with pole limits."""
    t = np.asarray(t, dtype=float)
    ell = profile.ell
    g, _, g2, _ = profile.eval(t)
    _, _, _, g3s = profile.eval(np.array(0.0))
    _, _, _, g3n = profile.eval(np.array(ell))
    with np.errstate(divide="ignore", invalid="ignore"):
        K = -g2 / g
    K = np.where(t < POLE_SERIES * ell, -g3s, K)
    K = np.where(t > (1 - POLE_SERIES) * ell, g3n, K)
    return K if K.ndim else float(K)


def scalars(profile: Profile, strength: Strength, t: float) -> GeometryScalars:
    strength = ONE if strength is None else strength
    t = float(t)
    tab = profile.tables(strength)
    Gam = float(profile.primitive(t))
    g1 = float(profile.eval(t)[1])
    Gf = tab(GF, t)
    return GeometryScalars(t=t, Gamma=Gam, Gamma0=Gam + 1.0, K=float(curvature(profile, t)),
                           beta_theta=Gam + g1, Gamma_f=Gf, beta_theta_f=Gf + g1)


def beta_ratio(profile: Profile, t, strength: Strength = None):
    """``(Gamma_f + gamma')/gamma``, the scaled primitive coefficient."""
    return profile.tables(strength)(BG, t)


def m_gamma(profile: Profile, n_grid: int = 4096) -> float:
    """Supremum over (0, ell) of |(Gamma + gamma')/gamma|."""
    tab = profile.tables()
    ell = profile.ell
    tt = scan_grid(profile, n_grid, interior=True)
    v = np.abs(tab(BG, tt))
    # local maxima of the grid values, best three
    idx = [i for i in range(len(v)) if (i == 0 or v[i] >= v[i - 1]) and
           (i == len(v) - 1 or v[i] >= v[i + 1])]
    idx = sorted(idx, key=lambda i: -v[i])[:3]
    best = float(v.max()) if len(v) else 0.0
    for i in idx:
        lo = tt[i - 1] if i > 0 else 1e-12 * ell
        hi = tt[i + 1] if i + 1 < len(tt) else ell * (1 - 1e-12)
        r = optimize.minimize_scalar(lambda t: -abs(tab(BG, t)), bounds=(lo, hi),
                                     method="bounded", options={"xatol": 1e-10})
        best = max(best, -float(r.fun))
    return best


def contact_interval(mg: float, zero_tol: float = 1e-12) -> ContactBounds:
    """Contact bounds from the value of m_gamma."""
    if mg < 2.0:
        return ContactBounds(float(mg), True)
    disc = np.sqrt(max(mg * mg - 4.0, 0.0))
    m_plus = 0.5 * (mg + disc)
    m_minus = 1.0 / m_plus  # product of the roots is one
    return ContactBounds(float(mg), False, float(m_minus), float(m_plus))


def contact_bounds(profile: Profile) -> ContactBounds:
    return contact_interval(m_gamma(profile))


def km_positive(profile: Profile, strength: Strength, m: float, n_grid: int = 4096):
    """Return ``(inf K_m > 0, inf K_m)`` with the worst case over directions."""
    strength = ONE if strength is None else strength
    tt = scan_grid(profile, n_grid, strength)
    K = curvature(profile, tt)
    f, f1, _ = strength.eval(tt)
    margin = float(np.min(magnetic_curvature(K, f, f1, m)))
    return margin > 0, margin


def magnetic_curvature(K, f, fdot, m):
    """Worst-case magnetic curvature ``m^2 K + f - m |f'|``."""
    return m * m * np.asarray(K) + np.asarray(f) - m * np.abs(fdot)
