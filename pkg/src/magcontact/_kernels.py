"""Compiled field evaluation and an adaptive DOP853 integrator with dense output.

The Runge-Kutta coefficients are the published Dormand-Prince 8(5,3) tableau
as shipped with SciPy; stepping, error control and dense output follow the
same scheme as ``scipy.integrate.DOP853`` but run entirely in compiled code
with chart switching near the poles and terminal event location.

State layouts
-------------
FLOW/REEB : (c0, c1, c2, acc) where (c0, c1, c2) is (t, phi, theta) in chart 0
            and (x, y, alpha) in the polar charts 1 (south) and 2 (north).
            ``acc`` is Reeb time for FLOW and flow time for REEB.
TWIST     : (t, theta, s, tau) with phi as the independent variable.
VAR       : (t, phi, theta, s, M[9]) Reeb flow plus its 3x3 variational matrix.
"""
from __future__ import annotations

import numpy as np
from numba import njit
from scipy.integrate._ivp import dop853_coefficients as _dc

from ._cheb import clenshaw, panel_index

FLOW, REEB, TWIST, VAR = 0, 1, 2, 3

# table slots (mirrors surface)
G, G1, G2, F, F1, GF, BG, BG1, RS, RN, KS, KN = range(12)

NST = _dc.N_STAGES
NSTX = _dc.N_STAGES_EXTENDED
A = np.ascontiguousarray(_dc.A, dtype=np.float64)
B = np.ascontiguousarray(_dc.B, dtype=np.float64)
Cc = np.ascontiguousarray(_dc.C, dtype=np.float64)
E3 = np.ascontiguousarray(_dc.E3, dtype=np.float64)
E5 = np.ascontiguousarray(_dc.E5, dtype=np.float64)
D = np.ascontiguousarray(_dc.D, dtype=np.float64)
NPOW = _dc.INTERPOLATOR_POWER

# status codes
OK, EVENT, MAXSTEPS, BREAKDOWN, NONMONO = 0, 1, 2, 3, 4

# par layout
P_M, P_ELL, P_EPS = 0, 1, 2


@njit(cache=True)
def _loc(br, t):
    i = panel_index(br, t)
    a = br[i]
    b = br[i + 1]
    return i, (2.0 * t - a - b) / (b - a)


@njit(cache=True)
def _ev(cf, k, i, x):
    return clenshaw(cf[k, i], x)


@njit(cache=True)
def tphi(y, chart, ell):
    """Return (t, phi, theta_wrapped) for any chart."""
    if chart == 0:
        return y[0], y[1], y[2]
    r = np.hypot(y[0], y[1])
    th = np.arctan2(y[1], y[0]) if r > 0.0 else 0.0
    if chart == 1:
        return r, y[2] - th, th
    return ell - r, th + np.pi - y[2], th


@njit(cache=True)
def hval(t, sphi, m, br, cf):
    i, x = _loc(br, t)
    return m * m - m * _ev(cf, BG, i, x) * sphi + _ev(cf, F, i, x)


@njit(cache=True)
def momentum(t, sphi, m, br, cf):
    i, x = _loc(br, t)
    return m * _ev(cf, G, i, x) * sphi - _ev(cf, GF, i, x)


@njit(cache=True)
def _xm(y, chart, par, br, cf, out):
    """Magnetic field in the given chart; returns h."""
    m = par[P_M]
    ell = par[P_ELL]
    if chart == 0:
        t = y[0]
        sp = np.sin(y[1])
        cp = np.cos(y[1])
        i, x = _loc(br, t)
        g = _ev(cf, G, i, x)
        g1 = _ev(cf, G1, i, x)
        f = _ev(cf, F, i, x)
        bg = _ev(cf, BG, i, x)
        out[0] = m * cp
        out[1] = f - m * g1 * sp / g
        out[2] = m * sp / g
        return m * m - m * bg * sp + f
    r = np.hypot(y[0], y[1])
    if r > 0.0:
        ct = y[0] / r
        st = y[1] / r
    else:
        ct = 1.0
        st = 0.0
    ca = np.cos(y[2])
    sa = np.sin(y[2])
    if chart == 1:
        t = r
        cp = ca * ct + sa * st
        sp = sa * ct - ca * st
        i, x = _loc(br, t)
        rr = _ev(cf, RS, i, x) if r > 0.0 else 1.0
        kk = _ev(cf, KS, i, x) if r > 0.0 else 0.0
        f = _ev(cf, F, i, x)
        bg = _ev(cf, BG, i, x)
        out[0] = m * (cp * ct - rr * sp * st)
        out[1] = m * (cp * st + rr * sp * ct)
        out[2] = f + m * sp * kk
        return m * m - m * bg * sp + f
    t = ell - r
    cp = -(ct * ca + st * sa)
    sp = -(st * ca - ct * sa)
    i, x = _loc(br, t)
    rr = _ev(cf, RN, i, x) if r > 0.0 else 1.0
    kk = _ev(cf, KN, i, x) if r > 0.0 else 0.0
    f = _ev(cf, F, i, x)
    bg = _ev(cf, BG, i, x)
    out[0] = -m * cp * ct - rr * m * sp * st
    out[1] = -m * cp * st + rr * m * sp * ct
    out[2] = -f + m * sp * kk
    return m * m - m * bg * sp + f


@njit(cache=True)
def rhs(mode, s, y, chart, par, br, cf, out):
    """Evaluate the derivative; returns False when the field is not admissible."""
    if mode == FLOW or mode == REEB:
        h = _xm(y, chart, par, br, cf, out)
        if mode == FLOW:
            out[3] = h
        else:
            out[0] /= h
            out[1] /= h
            out[2] /= h
            out[3] = 1.0 / h
        return True
    m = par[P_M]
    if mode == TWIST:
        phi = s
        sp = np.sin(phi)
        cp = np.cos(phi)
        i, x = _loc(br, y[0])
        g = _ev(cf, G, i, x)
        g1 = _ev(cf, G1, i, x)
        f = _ev(cf, F, i, x)
        bg = _ev(cf, BG, i, x)
        den = f - m * g1 * sp / g  # dphi/ds
        if not den > 0.0:
            return False
        out[0] = m * cp / den
        out[1] = m * sp / (g * f - g1 * m * sp)
        out[2] = 1.0 / den
        out[3] = (m * m - m * bg * sp + f) / den
        return True
    # VAR: Reeb flow with variational matrix in chart 0
    t = y[0]
    sp = np.sin(y[1])
    cp = np.cos(y[1])
    i, x = _loc(br, t)
    g = _ev(cf, G, i, x)
    g1 = _ev(cf, G1, i, x)
    g2 = _ev(cf, G2, i, x)
    f = _ev(cf, F, i, x)
    f1 = _ev(cf, F1, i, x)
    bg = _ev(cf, BG, i, x)
    bg1 = _ev(cf, BG1, i, x)
    h = m * m - m * bg * sp + f
    q = g1 / g
    X0 = m * cp
    X1 = f - m * q * sp
    X2 = m * sp / g
    out[0] = X0 / h
    out[1] = X1 / h
    out[2] = X2 / h
    out[3] = 1.0 / h
    # Jacobian of X (columns t, phi; theta column vanishes)
    dq = g2 / g - q * q
    J00 = 0.0
    J01 = -m * sp
    J10 = f1 - m * sp * dq
    J11 = -m * q * cp
    J20 = -m * sp * g1 / (g * g)
    J21 = m * cp / g
    ht = -m * bg1 * sp + f1
    hp = -m * bg * cp
    ih = 1.0 / h
    ih2 = ih * ih
    R00 = J00 * ih - X0 * ht * ih2
    R01 = J01 * ih - X0 * hp * ih2
    R10 = J10 * ih - X1 * ht * ih2
    R11 = J11 * ih - X1 * hp * ih2
    R20 = J20 * ih - X2 * ht * ih2
    R21 = J21 * ih - X2 * hp * ih2
    for c in range(3):
        m0 = y[4 + c]
        m1 = y[7 + c]
        out[4 + c] = R00 * m0 + R01 * m1
        out[7 + c] = R10 * m0 + R11 * m1
        out[10 + c] = R20 * m0 + R21 * m1
    return True


@njit(cache=True)
def _event_value(code, y, chart, ell, target):
    t, phi, _ = tphi(y, chart, ell)
    if code == 1:
        return np.cos(phi)
    return t - target


@njit(cache=True)
def _dense(y_old, Fm, x, out):
    n = y_old.size
    for j in range(n):
        acc = 0.0
        for k in range(NPOW - 1, -1, -1):
            acc += Fm[k, j]
            if (NPOW - 1 - k) % 2 == 0:
                acc *= x
            else:
                acc *= 1.0 - x
        out[j] = acc + y_old[j]


@njit(cache=True)
def _make_dense(mode, s_old, y_old, f_old, y_new, f_new, hstep, K, chart, par, br, cf, Fm):
    n = y_old.size
    ytmp = np.empty(n)
    ktmp = np.empty(n)
    K[NST] = f_new
    for st in range(NST + 1, NSTX):
        for j in range(n):
            acc = 0.0
            for r in range(st):
                acc += K[r, j] * A[st, r]
            ytmp[j] = y_old[j] + hstep * acc
        rhs(mode, s_old + Cc[st] * hstep, ytmp, chart, par, br, cf, ktmp)
        K[st] = ktmp
    for j in range(n):
        dy = y_new[j] - y_old[j]
        Fm[0, j] = dy
        Fm[1, j] = hstep * f_old[j] - dy
        Fm[2, j] = 2.0 * dy - hstep * (f_new[j] + f_old[j])
        for r in range(4):
            acc = 0.0
            for st in range(NSTX):
                acc += D[r, st] * K[st, j]
            Fm[3 + r, j] = hstep * acc


@njit(cache=True)
def _wrap(a):
    return (a + np.pi) % (2.0 * np.pi) - np.pi


@njit(cache=True)
def _to_chart0(y, chart, ell, theta_unw):
    t, phi, th = tphi(y, chart, ell)
    z = y.copy()
    z[0] = t
    z[1] = phi
    z[2] = theta_unw
    return z


@njit(cache=True)
def _to_polar(y, chart, ell):
    z = y.copy()
    t = y[0]
    th = y[2]
    phi = y[1]
    if chart == 1:
        z[0] = t * np.cos(th)
        z[1] = t * np.sin(th)
        z[2] = th + phi
    else:
        r = ell - t
        z[0] = r * np.cos(th)
        z[1] = r * np.sin(th)
        z[2] = th - phi + np.pi
    return z


@njit(cache=True)
def _mag(mode, j, v):
    """Error-scale magnitude; position and angle components are capped at 1."""
    if mode != TWIST and j <= 2 and v > 1.0:
        return 1.0
    return v


@njit(cache=True)
def solve(mode, par, br, cf, y0, s0, s1, rtol, atol, max_steps, store,
          ev_code, ev_dir, ev_count, ev_target, max_step):
    """Integrate from s0 towards s1.

    Returns
    -------
    status, s_end, y_end (chart 0 when possible), chart_end, nfev, nacc, nrej,
    steps_s, steps_h, steps_y, steps_F, steps_chart, steps_theta, nstored, hmin
    """
    n = y0.size
    ell = par[P_ELL]
    eps_pole = par[P_EPS] * ell
    direction = 1.0 if s1 >= s0 else -1.0
    y = y0.copy()
    chart = 0
    theta_unw = y0[2] if (mode == FLOW or mode == REEB) else 0.0
    theta_w = 0.0
    K = np.zeros((NSTX, n))
    f = np.empty(n)
    ytmp = np.empty(n)
    ktmp = np.empty(n)
    y_new = np.empty(n)
    f_new = np.empty(n)
    Fm = np.empty((NPOW, n))
    yd = np.empty(n)
    cap = 64 if store else 1
    S_s = np.empty(cap)
    S_h = np.empty(cap)
    S_y = np.empty((cap, n))
    S_F = np.empty((cap, NPOW, n))
    S_c = np.empty(cap, dtype=np.int64)
    S_t = np.empty(cap)
    nst = 0
    nfev = 0
    nacc = 0
    nrej = 0
    hmin = np.inf
    s = s0
    polar_ok = mode == FLOW or mode == REEB

    if not rhs(mode, s, y, chart, par, br, cf, f):
        return (NONMONO, s, y, chart, nfev, nacc, nrej, S_s[:0], S_h[:0], S_y[:0], S_F[:0],
                S_c[:0], S_t[:0], 0, hmin)
    nfev += 1
    if mode == FLOW or mode == REEB:
        t0_, p0_, _ = tphi(y, chart, ell)
        hmin = min(hmin, hval(t0_, np.sin(p0_), par[P_M], br, cf))
    # initial step (Hairer-Wanner)
    d0 = 0.0
    d1 = 0.0
    for j in range(n):
        sc = atol + _mag(mode, j, abs(y[j])) * rtol
        d0 += (y[j] / sc) ** 2
        d1 += (f[j] / sc) ** 2
    d0 = np.sqrt(d0 / n)
    d1 = np.sqrt(d1 / n)
    h0 = 1e-6 if (d0 < 1e-5 or d1 < 1e-5) else 0.01 * d0 / d1
    h0 = min(h0, abs(s1 - s0))
    for j in range(n):
        ytmp[j] = y[j] + direction * h0 * f[j]
    rhs(mode, s + direction * h0, ytmp, chart, par, br, cf, ktmp)
    nfev += 1
    d2 = 0.0
    for j in range(n):
        sc = atol + _mag(mode, j, abs(y[j])) * rtol
        d2 += ((ktmp[j] - f[j]) / sc) ** 2
    d2 = np.sqrt(d2 / n) / h0
    if d1 <= 1e-15 and d2 <= 1e-15:
        h1 = max(1e-6, h0 * 1e-3)
    else:
        h1 = (0.01 / max(d1, d2)) ** (1.0 / 8.0)
    h_abs = min(100 * h0, h1, max_step)
    ev_seen = 0
    g_old = 0.0
    if ev_code > 0:
        g_old = _event_value(ev_code, y, chart, ell, ev_target)
    status = OK
    while True:
        if direction * (s - s1) >= 0.0:
            break
        if nacc + nrej >= max_steps:
            status = MAXSTEPS
            break
        min_step = 10.0 * abs(np.nextafter(s, direction * np.inf) - s)
        h_abs = min(h_abs, max_step)
        accepted = False
        rejected = False
        hstep = 0.0
        while not accepted:
            if h_abs < min_step:
                status = BREAKDOWN
                break
            hstep = h_abs * direction
            s_new = s + hstep
            if direction * (s_new - s1) > 0.0:
                s_new = s1
            hstep = s_new - s
            h_abs = abs(hstep)
            # stages
            K[0] = f
            good = True
            for st in range(1, NST):
                for j in range(n):
                    acc = 0.0
                    for r in range(st):
                        acc += K[r, j] * A[st, r]
                    ytmp[j] = y[j] + hstep * acc
                if not rhs(mode, s + Cc[st] * hstep, ytmp, chart, par, br, cf, ktmp):
                    good = False
                K[st] = ktmp
            nfev += NST - 1
            for j in range(n):
                acc = 0.0
                for r in range(NST):
                    acc += K[r, j] * B[r]
                y_new[j] = y[j] + hstep * acc
            if not rhs(mode, s_new, y_new, chart, par, br, cf, f_new):
                good = False
            nfev += 1
            K[NST] = f_new
            if not good and mode == TWIST:
                status = NONMONO
                break
            e5 = 0.0
            e3 = 0.0
            for j in range(n):
                sc = atol + _mag(mode, j, max(abs(y[j]), abs(y_new[j]))) * rtol
                a5 = 0.0
                a3 = 0.0
                for r in range(NST + 1):
                    a5 += K[r, j] * E5[r]
                    a3 += K[r, j] * E3[r]
                e5 += (a5 / sc) ** 2
                e3 += (a3 / sc) ** 2
            if e5 == 0.0 and e3 == 0.0:
                err = 0.0
            else:
                err = h_abs * e5 / np.sqrt((e5 + 0.01 * e3) * n)
            if not good or not np.isfinite(err):
                h_abs *= 0.2
                rejected = True
                nrej += 1
                continue
            if err < 1.0:
                if err == 0.0:
                    fac = 10.0
                else:
                    fac = min(10.0, 0.9 * err ** (-1.0 / 8.0))
                if rejected:
                    fac = min(1.0, fac)
                accepted = True
                h_next = h_abs * fac
            else:
                h_abs *= max(0.2, 0.9 * err ** (-1.0 / 8.0))
                rejected = True
                nrej += 1
        if status != OK:
            break
        nacc += 1
        have_dense = False
        # event check
        if ev_code > 0:
            g_new = _event_value(ev_code, y_new, chart, ell, ev_target)
            hit = False
            if ev_dir <= 0 and g_old > 0.0 and g_new <= 0.0:
                hit = True
            if ev_dir >= 0 and g_old < 0.0 and g_new >= 0.0:
                hit = True
            if hit:
                ev_seen += 1
            if hit and ev_seen >= ev_count:
                _make_dense(mode, s, y, f, y_new, f_new, hstep, K, chart, par, br, cf, Fm)
                have_dense = True
                lo = 0.0
                hi = 1.0
                for _ in range(200):
                    if (hi - lo) * h_abs <= 1e-13 * max(1.0, abs(s)):
                        break
                    mid = 0.5 * (lo + hi)
                    _dense(y, Fm, mid, yd)
                    gm = _event_value(ev_code, yd, chart, ell, ev_target)
                    if (gm > 0.0) == (g_old > 0.0) and gm != 0.0:
                        lo = mid
                    else:
                        hi = mid
                _dense(y, Fm, hi, yd)
                if store:
                    if nst >= S_s.size:
                        S_s, S_h, S_y, S_F, S_c, S_t = _grow(S_s, S_h, S_y, S_F, S_c, S_t)
                    S_s[nst] = s
                    S_h[nst] = hstep
                    S_y[nst] = y
                    S_F[nst] = Fm
                    S_c[nst] = chart
                    S_t[nst] = theta_unw
                    nst += 1
                s_ev = s + hi * hstep
                if chart != 0:
                    _, _, thw = tphi(yd, chart, ell)
                    tu = theta_unw + _wrap(thw - theta_w)
                    yd = _to_chart0(yd, chart, ell, tu)
                    chart = 0
                return (EVENT, s_ev, yd, chart, nfev, nacc, nrej, S_s[:nst], S_h[:nst],
                        S_y[:nst], S_F[:nst], S_c[:nst], S_t[:nst], nst, hmin)
            g_old = g_new
        if store:
            if not have_dense:
                _make_dense(mode, s, y, f, y_new, f_new, hstep, K, chart, par, br, cf, Fm)
                nfev += NSTX - NST - 1
            if nst >= S_s.size:
                S_s, S_h, S_y, S_F, S_c, S_t = _grow(S_s, S_h, S_y, S_F, S_c, S_t)
            S_s[nst] = s
            S_h[nst] = hstep
            S_y[nst] = y
            S_F[nst] = Fm
            S_c[nst] = chart
            S_t[nst] = theta_unw
            nst += 1
        s = s + hstep
        y[:] = y_new
        f[:] = f_new
        h_abs = h_next
        if mode == FLOW or mode == REEB:
            tt, pp, thw = tphi(y, chart, ell)
            hmin = min(hmin, hval(tt, np.sin(pp), par[P_M], br, cf))
            # chart bookkeeping
            if chart != 0:
                theta_unw += _wrap(thw - theta_w)
                theta_w = thw
            if polar_ok:
                if chart == 0 and (tt < eps_pole or tt > ell - eps_pole):
                    chart = 1 if tt < 0.5 * ell else 2
                    theta_unw = y[2]
                    y = _to_polar(y, chart, ell)
                    theta_w = tphi(y, chart, ell)[2]
                    rhs(mode, s, y, chart, par, br, cf, f)
                    nfev += 1
                    if ev_code > 0:
                        g_old = _event_value(ev_code, y, chart, ell, ev_target)
                elif chart != 0 and eps_pole * 2.0 < tt < ell - eps_pole * 2.0:
                    y = _to_chart0(y, chart, ell, theta_unw)
                    chart = 0
                    rhs(mode, s, y, chart, par, br, cf, f)
                    nfev += 1
                    if ev_code > 0:
                        g_old = _event_value(ev_code, y, chart, ell, ev_target)
        elif mode == VAR:
            if y[0] < eps_pole or y[0] > ell - eps_pole:
                status = BREAKDOWN
                break
    yout = y.copy()
    if chart != 0:
        yout = _to_chart0(y, chart, ell, theta_unw)
    return (status, s, yout, 0, nfev, nacc, nrej, S_s[:nst], S_h[:nst], S_y[:nst], S_F[:nst],
            S_c[:nst], S_t[:nst], nst, hmin)


@njit(cache=True)
def _grow(S_s, S_h, S_y, S_F, S_c, S_t):
    cap = 2 * S_s.size
    a = np.empty(cap)
    a[: S_s.size] = S_s
    b = np.empty(cap)
    b[: S_h.size] = S_h
    c = np.empty((cap,) + S_y.shape[1:])
    c[: S_y.shape[0]] = S_y
    d = np.empty((cap,) + S_F.shape[1:])
    d[: S_F.shape[0]] = S_F
    e = np.empty(cap, dtype=np.int64)
    e[: S_c.size] = S_c
    g = np.empty(cap)
    g[: S_t.size] = S_t
    return a, b, c, d, e, g


@njit(cache=True)
def dense_eval(S_s, S_h, S_y, S_F, S_c, S_t, ell, qs):
    """Evaluate stored dense output at sorted or unsorted query points (chart 0)."""
    nq = qs.size
    n = S_y.shape[1]
    out = np.empty((nq, n))
    yd = np.empty(n)
    nst = S_s.size
    for k in range(nq):
        q = qs[k]
        # locate step (steps may run backwards)
        if S_h[0] > 0:
            lo, hi = 0, nst
            while hi - lo > 1:
                mid = (lo + hi) >> 1
                if S_s[mid] <= q:
                    lo = mid
                else:
                    hi = mid
        else:
            lo, hi = 0, nst
            while hi - lo > 1:
                mid = (lo + hi) >> 1
                if S_s[mid] >= q:
                    lo = mid
                else:
                    hi = mid
        x = (q - S_s[lo]) / S_h[lo]
        _dense(S_y[lo], S_F[lo], x, yd)
        ch = S_c[lo]
        if ch != 0:
            _, _, thw = tphi(yd, ch, ell)
            _, _, th0 = tphi(S_y[lo], ch, ell)
            tu = S_t[lo] + _wrap(thw - th0)
            yd = _to_chart0(yd, ch, ell, tu)
        out[k] = yd
    return out
