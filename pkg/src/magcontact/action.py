"""Actions of the rotationally invariant ergodic measures and contact certificates.

On a regular momentum level the reduced motion oscillates between two
turning latitudes. The action of the invariant torus is the time average of

    h = m^2 - m beta_theta sin(phi) / gamma + f

over one passage from the lower to the upper turning latitude; the
reflection ``(t, phi) -> (t, pi - phi)`` maps the return passage onto the
first one, so half an oscillation already gives the full average.
"""
from __future__ import annotations

import csv
import io
import json
import logging
from dataclasses import asdict, dataclass, field
from typing import List, Optional

import numpy as np

from . import _kernels as K
from .dynamics import (ATOL, RTOL, LatitudeOrbit, MomentumBand, _par, _run, _status_check,
                       critical_distance, latitude_orbits, momentum_bands, momentum_range)
from .errors import CriticalLevel, MultiBand, NotNormalized
from .surface import BG, F, G, GF, ONE, Profile, Strength, km_positive, scan_grid

log = logging.getLogger(__name__)

CRIT_TOL = 1e-9


@dataclass
class ActionResult:
    I: float
    action: float
    u: float
    t_lo: float
    t_hi: float
    nfev: int = 0


def _start_phi(band: MomentumBand) -> float:
    return band.lo_sign * np.pi / 2


def band_action(m: float, profile: Profile, strength: Strength, band: MomentumBand,
                rtol: float = RTOL, atol: float = ATOL) -> ActionResult:
    """Average of ``h`` over the passage from ``t_lo`` to ``t_hi`` on one band."""
    strength = ONE if strength is None else strength
    y0 = np.array([band.t_lo, _start_phi(band), 0.0, 0.0])
    # generous horizon; the passage ends at the first decreasing zero of cos(phi)
    horizon = 1e6 * (1.0 + profile.ell / max(m, 1e-300))
    out = _run(K.FLOW, m, profile, strength, y0, 0.0, horizon, rtol, atol, ev_code=1,
               ev_dir=-1, ev_count=1)
    status = out[0]
    _status_check(status, "action passage")
    if status != K.EVENT:
        raise CriticalLevel(f"no turning point reached at level {band.I}", np.nan, np.inf)
    u = float(out[1])
    tau = float(out[2][3])
    return ActionResult(band.I, tau / u, u, band.t_lo, band.t_hi, int(out[4]))


def ergodic_action(m: float, profile: Profile, strength: Strength, I: float,
                   tol: float = CRIT_TOL, rtol: float = RTOL, atol: float = ATOL,
                   lats: Optional[List[LatitudeOrbit]] = None):
    """Action ``A(I)`` and passage time ``u(I)`` of the torus at momentum ``I``.

    Raises
    ------
    CriticalLevel
        When ``I`` is within ``tol`` of a latitude momentum. ``estimate`` is
        the logarithmic growth factor ``-log(distance)`` of the passage time.
    MultiBand
        When the level splits into several bands; use :func:`level_actions`.
    """
    strength = ONE if strength is None else strength
    lats = latitude_orbits(m, profile, strength) if lats is None else lats
    dist, lat = critical_distance(I, lats)
    if dist < tol:
        raise CriticalLevel(f"level {I} is {dist:.2e} from a latitude momentum", dist,
                            -np.log(max(dist, 1e-300)))
    bands = momentum_bands(m, profile, strength, I, lats=lats)
    if not bands:
        raise CriticalLevel(f"level {I} is outside the momentum range", np.nan, np.nan)
    if len(bands) > 1:
        raise MultiBand(f"{len(bands)} bands at level {I}", bands)
    r = band_action(m, profile, strength, bands[0], rtol, atol)
    return r.action, r.u


def level_actions(m, profile, strength, I, lats=None, rtol=RTOL, atol=ATOL) -> List[ActionResult]:
    """Actions of every band of the level ``I``."""
    strength = ONE if strength is None else strength
    lats = latitude_orbits(m, profile, strength) if lats is None else lats
    return [band_action(m, profile, strength, b, rtol, atol)
            for b in momentum_bands(m, profile, strength, I, lats=lats)]


def action_quadrature(m: float, profile: Profile, strength: Strength, band: MomentumBand,
                      n: int = 400):
    """Independent evaluation of ``(A, u)`` by quadrature in the turning angle.

    With ``t = c - r cos(v)`` the passage integrals ``int ds = int dt/(m cos phi)``
    and ``int h ds`` have smooth integrands on ``v in [0, pi]``.
    """
    strength = ONE if strength is None else strength
    tab = profile.tables(strength)
    c, r = 0.5 * (band.t_lo + band.t_hi), 0.5 * (band.t_hi - band.t_lo)
    x, w = np.polynomial.legendre.leggauss(n)
    v = 0.5 * np.pi * (x + 1.0)
    w = 0.5 * np.pi * w
    t = c - r * np.cos(v)
    sphi = (band.I + tab(GF, t)) / (m * tab(G, t))
    cphi = np.sqrt(np.clip(1.0 - sphi * sphi, 0.0, None))
    jac = r * np.sin(v) / (m * cphi)
    h = m * m - m * tab(BG, t) * sphi + tab(F, t)
    u = float(np.sum(w * jac))
    return float(np.sum(w * jac * h)) / u, u


def liouville_action(m: float, strength: Strength = None) -> float:
    """Action of the normalized Liouville measure, ``m^2 + 1``."""
    strength = ONE if strength is None else strength
    if not strength.normalized:
        raise NotNormalized("strength must satisfy the flux normalization")
    return float(m * m + 1.0)


# --------------------------------------------------------------------------
# certificates


@dataclass
class LevelRecord:
    I: float
    action: float
    u: float
    kind: str  # "torus" or "latitude"
    band: int = 0
    t_lo: float = float("nan")
    t_hi: float = float("nan")
    nfev: int = 0


@dataclass
class ContactCertificate:
    """Outcome of the action scan at a fixed energy parameter ``m``.

    A Positive verdict is numerical evidence on the sampled measures, not
    a proof.
    """

    m: float
    levels: List[LevelRecord]
    latitude_actions: List[dict]
    min_action: float
    verdict: str
    tol: float
    grid_size: int
    km_positive: bool
    km_margin: float
    h_min: float
    skipped: List[float] = field(default_factory=list)

    @property
    def h_positive(self) -> bool:
        return self.h_min > 0

    def to_dict(self):
        d = asdict(self)
        d["schema"] = "certificate/1"
        d["h_positive"] = self.h_positive
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["m", "I", "action", "u", "kind", "band", "t_lo", "t_hi"])
        for r in self.levels:
            w.writerow([repr(self.m), repr(r.I), repr(r.action), repr(r.u), r.kind, r.band,
                        repr(r.t_lo), repr(r.t_hi)])
        return buf.getvalue()


def verdict_of(min_action: float, tol: float) -> str:
    if min_action > tol:
        return "Positive"
    if min_action < -tol:
        return "Negative"
    return "Indeterminate"


def _h_min(m, profile, strength, n=2048):
    tab = profile.tables(strength)
    t = scan_grid(profile, n, strength)
    bg = np.abs(tab(BG, t))
    return float(np.min(m * m - m * bg + tab(F, t)))


def certify_contact(m: float, profile: Profile, strength: Strength = None,
                    grid_size: int = 256, tol: float = 1e-6, crit_frac: float = 1e-3,
                    rtol: float = RTOL, atol: float = ATOL) -> ContactCertificate:
    """Sample ``A(I)`` on a regular grid of momentum levels and decide the sign."""
    strength = ONE if strength is None else strength
    lats = latitude_orbits(m, profile, strength)
    Imin, Imax = momentum_range(m, profile, strength)
    span = Imax - Imin
    grid = Imin + (np.arange(grid_size) + 0.5) / grid_size * span
    levels: List[LevelRecord] = []
    skipped = []
    for I in grid:
        dist, lat = critical_distance(I, lats)
        if dist < crit_frac * span:
            levels.append(LevelRecord(float(I), lat.action, np.inf, "latitude", 0, lat.t0, lat.t0))
            continue
        try:
            for j, r in enumerate(level_actions(m, profile, strength, I, lats, rtol, atol)):
                levels.append(LevelRecord(float(I), r.action, r.u, "torus", j, r.t_lo, r.t_hi,
                                          r.nfev))
        except CriticalLevel as exc:
            log.warning("skipping level %r: %s", I, exc)
            skipped.append(float(I))
    lat_rows = [{"t0": o.t0, "sign": o.sign, "action": o.action, "momentum": o.momentum,
                 "elliptic": o.elliptic} for o in lats]
    actions = [r.action for r in levels] + [o.action for o in lats]
    min_action = float(min(actions)) if actions else float("nan")
    ok, margin = km_positive(profile, strength, m)
    return ContactCertificate(float(m), levels, lat_rows, min_action, verdict_of(min_action, tol),
                              tol, int(grid_size), bool(ok), float(margin),
                              _h_min(m, profile, strength), skipped)
