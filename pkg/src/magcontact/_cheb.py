"""Piecewise Chebyshev tables on shared adaptive breakpoints.

All fast evaluation (root scans, the compiled integrator) goes through these
tables; the closed-form family evaluators are only sampled at Chebyshev
nodes while the tables are built.
"""
from __future__ import annotations

import numpy as np
from numpy.polynomial import chebyshev as C
from numba import njit

DEG = 20
_EPS = np.finfo(float).eps


def _nodes(n):
    k = np.arange(n + 1)
    return np.cos(np.pi * (k + 0.5) / (n + 1))


def _fit_matrix(n):
    x = _nodes(n)
    T = C.chebvander(x, n)  # (nodes, coeffs)
    M = (2.0 / (n + 1)) * T.T
    M[0] *= 0.5
    return x, M


_X, _M = _fit_matrix(DEG)


def fit_panels(func, breaks, nfun):
    """Interpolate ``func`` on every panel; returns coefficients (nfun, N, DEG+1)."""
    a, b = breaks[:-1], breaks[1:]
    t = 0.5 * (a + b)[:, None] + 0.5 * (b - a)[:, None] * _X[None, :]
    vals = np.asarray(func(t.ravel()), dtype=float).reshape(nfun, len(a), DEG + 1)
    return vals @ _M.T


def adaptive_breaks(func, nfun, a, b, tol=2e-14, n0=16, min_width=None,
                    max_panels=200000):
    """Bisect panels until the Chebyshev tails of every function are below ``tol``.

    ``func(t)`` must return an array of shape (nfun, len(t)); ``tol`` may be
    a per-function sequence.
    """
    tol = np.asarray(tol, dtype=float)
    if min_width is None:
        min_width = (b - a) * 1e-9
    pending = np.linspace(a, b, n0 + 1)
    pend = np.stack([pending[:-1], pending[1:]], axis=1)
    done = []
    scale = None
    while len(pend):
        br = np.empty(2 * len(pend))
        br[0::2], br[1::2] = pend[:, 0], pend[:, 1]
        # fit each pending panel independently
        lo, hi = pend[:, 0], pend[:, 1]
        t = 0.5 * (lo + hi)[:, None] + 0.5 * (hi - lo)[:, None] * _X[None, :]
        vals = np.asarray(func(t.ravel()), dtype=float).reshape(nfun, len(lo), DEG + 1)
        if not np.all(np.isfinite(vals)):
            raise FloatingPointError("non-finite values while building table")
        vmax = np.abs(vals).max(axis=(1, 2))
        scale = np.maximum(vmax, 1.0) if scale is None else np.maximum(scale, vmax)
        cf = vals @ _M.T
        tail = np.abs(cf[:, :, -3:]).sum(axis=2)
        # rounding floor from the magnitude of t and of the values
        slope = np.abs(C.chebder(cf, axis=2)).sum(axis=2) * (2.0 / (hi - lo))[None, :]
        tmag = np.maximum(np.abs(lo), np.abs(hi))[None, :]
        floor = 100 * _EPS * (slope * tmag + np.abs(vals).max(axis=2))
        lim = np.maximum(np.broadcast_to(tol, (nfun,))[:, None] * scale[:, None], floor)
        ok = np.all(tail <= lim, axis=0) | ((hi - lo) <= min_width)
        done.extend(pend[ok].tolist())
        bad = pend[~ok]
        if len(done) + 2 * len(bad) > max_panels:
            raise FloatingPointError("table refinement exceeded panel budget")
        mid = 0.5 * (bad[:, 0] + bad[:, 1])
        pend = np.concatenate([np.stack([bad[:, 0], mid], 1),
                               np.stack([mid, bad[:, 1]], 1)])
    done = np.array(sorted(done, key=lambda p: p[0]))
    return np.concatenate([done[:, 0], [done[-1, 1]]])


def antiderivative(cf, breaks, value_at_start):
    """Panelwise integral of one function's coefficients, continuous across panels."""
    w = np.diff(breaks)
    ci = C.chebint(cf, lbnd=-1, axis=1) * (0.5 * w)[:, None]
    ends = C.chebval(1.0, ci.T)  # value at right end of each panel
    offs = value_at_start + np.concatenate([[0.0], np.cumsum(ends)[:-1]])
    ci[:, 0] += offs
    return ci


def derivative(cf, breaks):
    w = np.diff(breaks)
    cd = C.chebder(cf, axis=1) * (2.0 / w)[:, None]
    return cd


class Table:
    """A stack of piecewise Chebyshev interpolants sharing breakpoints."""

    def __init__(self, breaks, coef):
        self.breaks = np.ascontiguousarray(breaks, dtype=float)
        self.coef = np.ascontiguousarray(coef, dtype=float)

    @property
    def npanels(self):
        return len(self.breaks) - 1

    def __call__(self, k, t):
        t = np.asarray(t, dtype=float)
        out = _eval_many(self.breaks, self.coef, k, np.atleast_1d(t).ravel())
        return out.reshape(t.shape) if t.ndim else float(out[0])


def pad(cfs, width):
    out = np.zeros(cfs.shape[:-1] + (width,))
    out[..., : cfs.shape[-1]] = cfs
    return out


@njit(cache=True)
def panel_index(br, t):
    n = br.size - 1
    if t <= br[0]:
        return 0
    if t >= br[n]:
        return n - 1
    lo, hi = 0, n
    while hi - lo > 1:
        mid = (lo + hi) >> 1
        if br[mid] <= t:
            lo = mid
        else:
            hi = mid
    return lo


@njit(cache=True)
def clenshaw(c, x):
    n = c.size
    b1 = 0.0
    b2 = 0.0
    x2 = 2.0 * x
    for j in range(n - 1, 0, -1):
        b0 = c[j] + x2 * b1 - b2
        b2 = b1
        b1 = b0
    return c[0] + x * b1 - b2


@njit(cache=True)
def tab1(br, cf, k, t):
    i = panel_index(br, t)
    a = br[i]
    b = br[i + 1]
    return clenshaw(cf[k, i], (2.0 * t - a - b) / (b - a))


@njit(cache=True)
def _eval_many(br, cf, k, ts):
    out = np.empty(ts.size)
    for j in range(ts.size):
        out[j] = tab1(br, cf, k, ts[j])
    return out
