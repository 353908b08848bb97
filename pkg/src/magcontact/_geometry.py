"""Transverse self-intersection counting for closed planar polylines."""
from __future__ import annotations

import numpy as np
from numba import njit


@njit(cache=True)
def _orient(ax, ay, bx, by, cx, cy):
    return (bx - ax) * (cy - ay) - (by - ay) * (cx - ax)


@njit(cache=True)
def count_crossings(P, min_angle):
    """Number of transverse crossings of the closed polyline through the rows of P.

    Segments are bucketed on a uniform grid; each crossing is counted once,
    in the cell that contains the intersection point. Crossings whose angle
    is below ``min_angle`` are rejected as tangential.
    """
    n = P.shape[0]
    if n < 4:
        return 0
    xmin = P[:, 0].min()
    xmax = P[:, 0].max()
    ymin = P[:, 1].min()
    ymax = P[:, 1].max()
    span = max(xmax - xmin, ymax - ymin, 1e-300)
    ncell = max(1, min(4096, int(np.sqrt(n))))
    cs = span / ncell * 1.000001
    # pass 1: counts per cell
    counts = np.zeros(ncell * ncell + 1, dtype=np.int64)
    for k in range(n):
        j = (k + 1) % n
        x0 = min(P[k, 0], P[j, 0])
        x1 = max(P[k, 0], P[j, 0])
        y0 = min(P[k, 1], P[j, 1])
        y1 = max(P[k, 1], P[j, 1])
        i0 = int((x0 - xmin) / cs)
        i1 = int((x1 - xmin) / cs)
        j0 = int((y0 - ymin) / cs)
        j1 = int((y1 - ymin) / cs)
        for a in range(i0, i1 + 1):
            for b in range(j0, j1 + 1):
                counts[a * ncell + b + 1] += 1
    for c in range(1, counts.size):
        counts[c] += counts[c - 1]
    fill = counts[:-1].copy()
    segs = np.empty(counts[-1], dtype=np.int64)
    for k in range(n):
        j = (k + 1) % n
        x0 = min(P[k, 0], P[j, 0])
        x1 = max(P[k, 0], P[j, 0])
        y0 = min(P[k, 1], P[j, 1])
        y1 = max(P[k, 1], P[j, 1])
        i0 = int((x0 - xmin) / cs)
        i1 = int((x1 - xmin) / cs)
        j0 = int((y0 - ymin) / cs)
        j1 = int((y1 - ymin) / cs)
        for a in range(i0, i1 + 1):
            for b in range(j0, j1 + 1):
                c = a * ncell + b
                segs[fill[c]] = k
                fill[c] += 1
    sin_min = np.sin(min_angle)
    total = 0
    for c in range(ncell * ncell):
        lo = counts[c]
        hi = counts[c + 1]
        ci = c // ncell
        cj = c % ncell
        for p in range(lo, hi):
            s1 = segs[p]
            a0x = P[s1, 0]
            a0y = P[s1, 1]
            a1x = P[(s1 + 1) % n, 0]
            a1y = P[(s1 + 1) % n, 1]
            for q in range(p + 1, hi):
                s2 = segs[q]
                d = abs(s1 - s2)
                if d <= 1 or d == n - 1:
                    continue
                b0x = P[s2, 0]
                b0y = P[s2, 1]
                b1x = P[(s2 + 1) % n, 0]
                b1y = P[(s2 + 1) % n, 1]
                o1 = _orient(a0x, a0y, a1x, a1y, b0x, b0y)
                o2 = _orient(a0x, a0y, a1x, a1y, b1x, b1y)
                if o1 * o2 >= 0.0:
                    continue
                o3 = _orient(b0x, b0y, b1x, b1y, a0x, a0y)
                o4 = _orient(b0x, b0y, b1x, b1y, a1x, a1y)
                if o3 * o4 >= 0.0:
                    continue
                ux = a1x - a0x
                uy = a1y - a0y
                vx = b1x - b0x
                vy = b1y - b0y
                cr = abs(ux * vy - uy * vx)
                if cr < sin_min * np.hypot(ux, uy) * np.hypot(vx, vy):
                    continue
                lam = o1 / (o1 - o2)
                px = b0x + lam * vx
                py = b0y + lam * vy
                if int((px - xmin) / cs) == ci and int((py - ymin) / cs) == cj:
                    total += 1
    return total
