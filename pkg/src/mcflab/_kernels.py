"""Fused per-step kernels for the flow engine.

These mirror :func:`mcflab.geometry.quantities` vertex by vertex (tests pin
the agreement) but avoid numpy temporaries in the hot loop.  Reductions run
in index order so results do not depend on threading.
"""

import math

import numpy as np
from numba import njit

CLOSED_CURVE = 0
OPEN_CURVE = 1
AXIS_TO_AXIS = 2
OFF_AXIS_LOOP = 3


@njit(cache=True)
def _tri(ax, ay, px, py, bx, by):
    e1x = px - ax
    e1y = py - ay
    e2x = bx - px
    e2y = by - py
    h1 = math.sqrt(e1x * e1x + e1y * e1y)
    h2 = math.sqrt(e2x * e2x + e2y * e2y)
    e3x = bx - ax
    e3y = by - ay
    h3 = math.sqrt(e3x * e3x + e3y * e3y)
    cross = e1x * e2y - e1y * e2x
    kappa = 2.0 * cross / (h1 * h2 * h3)
    tx = (h1 / h2) * e2x + (h2 / h1) * e1x
    ty = (h1 / h2) * e2y + (h2 / h1) * e1y
    tn = math.sqrt(tx * tx + ty * ty)
    return kappa, ty / tn, -tx / tn, h1, h2


@njit(cache=True)
def field(P, n, mode, orbit, ball):
    """Mean curvature, outward normal and smallest principal curvature.

    Returns ``(H, nu, kappa, lam1, hmin, area, volume, h2)`` where ``kappa``
    is the curvature of the curve (profile); ``orbit`` is ``|S^(n-1)|``,
    ``ball`` is ``omega_n``, ``volume`` is ``nan`` for open curves and ``h2``
    is the integral of ``H^2`` with the same trapezoid weights as ``area``.
    """
    N = P.shape[0]
    H = np.empty(N)
    lam1 = np.empty(N)
    kap = np.empty(N)
    nu = np.empty((N, 2))
    hmin = np.inf
    area = 0.0
    volume = 0.0
    h2 = 0.0
    closed = mode == CLOSED_CURVE or mode == OFF_AXIS_LOOP
    for i in range(N):
        px = P[i, 0]
        py = P[i, 1]
        if closed:
            j = i - 1 if i > 0 else N - 1
            k = i + 1 if i < N - 1 else 0
            ax, ay, bx, by = P[j, 0], P[j, 1], P[k, 0], P[k, 1]
        elif mode == AXIS_TO_AXIS:
            if i == 0:
                ax, ay, bx, by = P[1, 0], -P[1, 1], P[1, 0], P[1, 1]
            elif i == N - 1:
                ax, ay, bx, by = P[N - 2, 0], P[N - 2, 1], P[N - 2, 0], -P[N - 2, 1]
            else:
                ax, ay, bx, by = P[i - 1, 0], P[i - 1, 1], P[i + 1, 0], P[i + 1, 1]
        else:
            if i == 0 or i == N - 1:
                continue
            ax, ay, bx, by = P[i - 1, 0], P[i - 1, 1], P[i + 1, 0], P[i + 1, 1]
        kappa, nx, ny, h1, h2 = _tri(ax, ay, px, py, bx, by)
        nu[i, 0] = nx
        nu[i, 1] = ny
        kap[i] = kappa
        if mode == CLOSED_CURVE or mode == OPEN_CURVE:
            H[i] = kappa
            lam1[i] = kappa
        else:
            if mode == AXIS_TO_AXIS and (i == 0 or i == N - 1):
                rot = kappa
            else:
                rot = ny / py
            H[i] = kappa + (n - 1) * rot
            lam1[i] = min(kappa, rot)
    if mode == OPEN_CURVE:
        e0 = math.hypot(P[1, 0] - P[0, 0], P[1, 1] - P[0, 1])
        e1 = math.hypot(P[2, 0] - P[1, 0], P[2, 1] - P[1, 1])
        H[0] = H[1] + (H[1] - H[2]) * e0 / e1
        lam1[0] = H[0]
        kap[0] = H[0]
        ux = (P[1, 0] - P[0, 0]) / e0
        uy = (P[1, 1] - P[0, 1]) / e0
        tx, ty = -nu[1, 1], nu[1, 0]
        d = tx * ux + ty * uy
        t0x = 2.0 * d * ux - tx
        t0y = 2.0 * d * uy - ty
        nu[0, 0] = t0y
        nu[0, 1] = -t0x
        f0 = math.hypot(P[N - 1, 0] - P[N - 2, 0], P[N - 1, 1] - P[N - 2, 1])
        f1 = math.hypot(P[N - 2, 0] - P[N - 3, 0], P[N - 2, 1] - P[N - 3, 1])
        H[N - 1] = H[N - 2] + (H[N - 2] - H[N - 3]) * f0 / f1
        lam1[N - 1] = H[N - 1]
        kap[N - 1] = H[N - 1]
        ux = (P[N - 2, 0] - P[N - 1, 0]) / f0
        uy = (P[N - 2, 1] - P[N - 1, 1]) / f0
        tx, ty = nu[N - 2, 1], -nu[N - 2, 0]
        d = tx * ux + ty * uy
        t0x = 2.0 * d * ux - tx
        t0y = 2.0 * d * uy - ty
        nu[N - 1, 0] = -t0y
        nu[N - 1, 1] = t0x
    nseg = N if closed else N - 1
    for i in range(nseg):
        k = i + 1 if i < N - 1 else 0
        x1, y1, x2, y2 = P[i, 0], P[i, 1], P[k, 0], P[k, 1]
        h = math.sqrt((x2 - x1) ** 2 + (y2 - y1) ** 2)
        if h < hmin:
            hmin = h
        if mode == CLOSED_CURVE or mode == OPEN_CURVE:
            area += h
            h2 += 0.5 * h * (H[i] ** 2 + H[k] ** 2)
            volume += 0.5 * (x1 * y2 - x2 * y1)
        else:
            w1 = y1 ** (n - 1)
            w2 = y2 ** (n - 1)
            area += 0.5 * h * orbit * (w1 + w2)
            h2 += 0.5 * h * orbit * (H[i] ** 2 * w1 + H[k] ** 2 * w2)
            s = 0.0
            for q in range(n + 1):
                s += y1**q * y2 ** (n - q)
            volume -= (x2 - x1) * s / (n + 1)
    if mode == OPEN_CURVE:
        volume = np.nan
    elif mode == AXIS_TO_AXIS or mode == OFF_AXIS_LOOP:
        volume *= ball
    return H, nu, kap, lam1, hmin, area, volume, h2


@njit(cache=True)
def euler_move(P, H, nu, dt, mode):
    """Move each vertex by ``dt * (-H nu)``; axis endpoints stay on the axis.

    The two ends of an open curve (a graph over the x-axis) move vertically
    at the vertical speed ``H / nu_y`` of their neighbours, so the domain of
    the graph is kept and translating graphs translate exactly.
    """
    N = P.shape[0]
    out = np.empty_like(P)
    for i in range(N):
        out[i, 0] = P[i, 0] - dt * H[i] * nu[i, 0]
        out[i, 1] = P[i, 1] - dt * H[i] * nu[i, 1]
    if mode == AXIS_TO_AXIS:
        out[0, 1] = 0.0
        out[N - 1, 1] = 0.0
    elif mode == OPEN_CURVE:
        for i, j in ((0, 1), (N - 1, N - 2)):
            ny = -nu[j, 1]
            if abs(ny) > 1e-3:
                out[i, 0] = P[i, 0]
                out[i, 1] = P[i, 1] + dt * H[j] / ny
    return out


@njit(cache=True)
def stats(P, H, kap, lam1, n, closed):
    """Reductions needed once per step, in index order.

    Returns ``(hmax, maxH, minH, max_abs_H, min_lam1_over_H, min_interior_r)``.
    ``min_lam1_over_H`` is taken over vertices with ``H > 0`` (``nan`` if
    none) and ``min_interior_r`` ignores the two ends of an open profile.
    """
    N = P.shape[0]
    hmax = 0.0
    nseg = N if closed else N - 1
    for i in range(nseg):
        k = i + 1 if i < N - 1 else 0
        h = math.sqrt((P[k, 0] - P[i, 0]) ** 2 + (P[k, 1] - P[i, 1]) ** 2)
        if not h <= hmax:
            hmax = h
    maxH = -np.inf
    minH = np.inf
    amax = 0.0
    ratio = np.inf
    for i in range(N):
        v = H[i]
        if not v <= maxH:
            maxH = v
        if not v >= minH:
            minH = v
        if not abs(v) <= amax:
            amax = abs(v)
        if v > 0.0:
            q = lam1[i] / v
            if q < ratio:
                ratio = q
    if ratio == np.inf:
        ratio = np.nan
    rmin = np.inf
    lo = 0 if closed else 1
    hi = N if closed else N - 1
    for i in range(lo, hi):
        if P[i, 1] < rmin:
            rmin = P[i, 1]
    return hmax, maxH, minH, amax, ratio, rmin


@njit(cache=True)
def _orient(ax, ay, bx, by, cx, cy):
    v = (bx - ax) * (cy - ay) - (by - ay) * (cx - ax)
    if v > 0.0:
        return 1
    if v < 0.0:
        return -1
    return 0


@njit(cache=True)
def _on_seg(ax, ay, bx, by, cx, cy):
    return min(ax, bx) <= cx <= max(ax, bx) and min(ay, by) <= cy <= max(ay, by)


@njit(cache=True)
def _cross(P, i, j, N):
    i2 = i + 1 if i < N - 1 else 0
    j2 = j + 1 if j < N - 1 else 0
    ax, ay, bx, by = P[i, 0], P[i, 1], P[i2, 0], P[i2, 1]
    cx, cy, dx, dy = P[j, 0], P[j, 1], P[j2, 0], P[j2, 1]
    if max(ax, bx) < min(cx, dx) or max(cx, dx) < min(ax, bx):
        return False
    if max(ay, by) < min(cy, dy) or max(cy, dy) < min(ay, by):
        return False
    o1 = _orient(ax, ay, bx, by, cx, cy)
    o2 = _orient(ax, ay, bx, by, dx, dy)
    o3 = _orient(cx, cy, dx, dy, ax, ay)
    o4 = _orient(cx, cy, dx, dy, bx, by)
    if o1 != o2 and o3 != o4:
        return True
    if o1 == 0 and _on_seg(ax, ay, bx, by, cx, cy):
        return True
    if o2 == 0 and _on_seg(ax, ay, bx, by, dx, dy):
        return True
    if o3 == 0 and _on_seg(cx, cy, dx, dy, ax, ay):
        return True
    if o4 == 0 and _on_seg(cx, cy, dx, dy, bx, by):
        return True
    return False


@njit(cache=True)
def is_simple(P, closed):
    """Exact segment-pair simplicity test accelerated by a hashed grid.

    The cell size is twice the longest edge, so every segment touches at most
    four cells and only segments sharing a bucket are compared.
    """
    N = P.shape[0]
    nseg = N if closed else N - 1
    cell = 0.0
    x0 = np.inf
    y0 = np.inf
    for i in range(nseg):
        k = i + 1 if i < N - 1 else 0
        h = max(abs(P[k, 0] - P[i, 0]), abs(P[k, 1] - P[i, 1]))
        cell = max(cell, h)
    for i in range(N):
        x0 = min(x0, P[i, 0])
        y0 = min(y0, P[i, 1])
    cell = 2.0 * cell + 1e-300
    size = 1
    while size < 8 * nseg:
        size *= 2
    mask = size - 1
    head = np.full(size, -1, dtype=np.int64)
    nxt = np.empty(4 * nseg, dtype=np.int64)
    seg = np.empty(4 * nseg, dtype=np.int64)
    box = np.empty((nseg, 4), dtype=np.int64)
    m = 0
    for i in range(nseg):
        k = i + 1 if i < N - 1 else 0
        box[i, 0] = int((min(P[i, 0], P[k, 0]) - x0) / cell)
        box[i, 1] = int((max(P[i, 0], P[k, 0]) - x0) / cell)
        box[i, 2] = int((min(P[i, 1], P[k, 1]) - y0) / cell)
        box[i, 3] = int((max(P[i, 1], P[k, 1]) - y0) / cell)
        for cx in range(box[i, 0], box[i, 1] + 1):
            for cy in range(box[i, 2], box[i, 3] + 1):
                bkt = ((cx * 73856093) ^ (cy * 19349663)) & mask
                seg[m] = i
                nxt[m] = head[bkt]
                head[bkt] = m
                m += 1
    for i in range(nseg):
        for cx in range(box[i, 0], box[i, 1] + 1):
            for cy in range(box[i, 2], box[i, 3] + 1):
                e = head[((cx * 73856093) ^ (cy * 19349663)) & mask]
                while e >= 0:
                    j = seg[e]
                    e = nxt[e]
                    if j <= i + 1:
                        continue
                    if closed and i == 0 and j == nseg - 1:
                        continue
                    if _cross(P, i, j, N):
                        return False
    return True
