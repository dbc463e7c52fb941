"""Compiled inner loops for the planner.

These mirror the vectorised numpy code in :mod:`aspire.world`,
:mod:`aspire.belief` and :mod:`aspire.info` (which remain the reference
implementation and are used to test these kernels). Random numbers are never
drawn here: callers pass pre-sampled standard normals and uniforms from their
own ``numpy.random.Generator`` so that seeding stays in one place.
"""
from __future__ import annotations

import math

import numpy as np
from numba import njit

_TWO_PI = 2.0 * math.pi
_SQRT2 = math.sqrt(2.0)

TARGET_CONTROLLED = 0
TARGET_AUTONOMOUS = 1


@njit(cache=True)
def wrap(a):
    return math.pi - ((math.pi - a) % _TWO_PI)


@njit(cache=True)
def seg_blocked(px, py, qx, qy, verts, normals):
    dx = qx - px
    dy = qy - py
    for i in range(verts.shape[0]):
        t0 = 0.0
        t1 = 1.0
        hit = True
        for e in range(verts.shape[1]):
            nx = normals[i, e, 0]
            ny = normals[i, e, 1]
            num = (px - verts[i, e, 0]) * nx + (py - verts[i, e, 1]) * ny
            den = dx * nx + dy * ny
            if den == 0.0:
                if num > 0.0:
                    hit = False
                    break
            else:
                t = -num / den
                if den < 0.0:
                    if t > t0:
                        t0 = t
                elif t < t1:
                    t1 = t
                if t0 > t1:
                    hit = False
                    break
        if hit:
            return True
    return False


@njit(cache=True)
def point_visible(rx, ry, rth, x, y, r_min, r_max, half, verts, normals):
    dx = x - rx
    dy = y - ry
    r2 = dx * dx + dy * dy
    if r2 < r_min * r_min or r2 > r_max * r_max:
        return False
    if half < math.pi:
        if abs(wrap(math.atan2(dy, dx) - rth)) > half:
            return False
    if verts.shape[0] > 0 and seg_blocked(rx, ry, x, y, verts, normals):
        return False
    return True


@njit(cache=True)
def point_clear(x, y, radius, bounds, verts, edges, normals):
    if (x - radius < bounds[0] or x + radius > bounds[2]
            or y - radius < bounds[1] or y + radius > bounds[3]):
        return False
    r2 = radius * radius
    for i in range(verts.shape[0]):
        inside = True
        best = np.inf
        for e in range(verts.shape[1]):
            rx = x - verts[i, e, 0]
            ry = y - verts[i, e, 1]
            if rx * normals[i, e, 0] + ry * normals[i, e, 1] > 0.0:
                inside = False
            ex = edges[i, e, 0]
            ey = edges[i, e, 1]
            ee = ex * ex + ey * ey
            t = 0.0
            if ee > 0.0:
                t = (rx * ex + ry * ey) / ee
                if t < 0.0:
                    t = 0.0
                elif t > 1.0:
                    t = 1.0
            cx = verts[i, e, 0] + t * ex - x
            cy = verts[i, e, 1] + t * ey - y
            d2 = cx * cx + cy * cy
            if d2 < best:
                best = d2
        if inside or best <= r2:
            return False
    return True


@njit(cache=True)
def primitive_ok(x, y, th, v, dt, radius, nsub, bounds, verts, edges, normals):
    c = math.cos(th)
    s = math.sin(th)
    for k in range(1, nsub + 2):
        step = v * dt * (k / (nsub + 1.0))
        if not point_clear(x + c * step, y + s * step, radius, bounds, verts, edges, normals):
            return False
    return True


@njit(cache=True)
def _simplify_subset(parts, w, idx, cell):
    """Cell-merge the particles ``idx``; returns (xy, weights) per cell."""
    n = idx.shape[0]
    kx = np.empty(n, dtype=np.int64)
    ky = np.empty(n, dtype=np.int64)
    for a in range(n):
        kx[a] = np.int64(math.floor(parts[idx[a], 0] / cell))
        ky[a] = np.int64(math.floor(parts[idx[a], 1] / cell))
    kx -= kx.min()
    ky -= ky.min()
    span = ky.max() + 1
    keys = kx * span + ky
    order = np.argsort(keys, kind="mergesort")
    xy = np.empty((n, 2))
    ws = np.empty(n)
    m = -1
    last = -1
    sx = 0.0
    sy = 0.0
    sw = 0.0
    for a in range(n):
        j = idx[order[a]]
        key = keys[order[a]]
        if key != last:
            if m >= 0:
                xy[m, 0] = sx / sw
                xy[m, 1] = sy / sw
                ws[m] = sw
            m += 1
            last = key
            sx = 0.0
            sy = 0.0
            sw = 0.0
        sw += w[j]
        sx += w[j] * parts[j, 0]
        sy += w[j] * parts[j, 1]
    xy[m, 0] = sx / sw
    xy[m, 1] = sy / sw
    ws[m] = sw
    return xy[: m + 1], ws[: m + 1]


@njit(cache=True)
def mi_sp(rx, ry, rth, parts, w, cell, r_min, r_max, half, verts, normals,
          linv, log_norm, lam, h0):
    """Sigma-point MI of the censored measurement at robot pose (rx, ry, rth).

    ``cell > 0`` merges particles per grid cell first. Only particles close
    enough to matter are touched; everything else is empty-observation mass.
    """
    n = parts.shape[0]
    reach = r_max + (2.0 * _SQRT2 * cell if cell > 0.0 else 0.0)
    reach2 = reach * reach
    idx = np.empty(n, dtype=np.int64)
    nc = 0
    for j in range(n):
        dx = parts[j, 0] - rx
        dy = parts[j, 1] - ry
        if dx * dx + dy * dy <= reach2 and w[j] > 0.0:
            idx[nc] = j
            nc += 1
    if nc == 0:
        return 0.0
    idx = idx[:nc]
    if cell > 0.0:
        xy, ws = _simplify_subset(parts, w, idx, cell)
    else:
        xy = np.empty((nc, 2))
        ws = np.empty(nc)
        for a in range(nc):
            xy[a, 0] = parts[idx[a], 0]
            xy[a, 1] = parts[idx[a], 1]
            ws[a] = w[idx[a]]

    total = 0.0
    for j in range(n):
        total += w[j]
    m_pts = xy.shape[0]
    aw = np.empty((m_pts, 2))
    logw = np.empty(m_pts)
    win = np.empty(m_pts)
    k = 0
    mass = 0.0
    for a in range(m_pts):
        if point_visible(rx, ry, rth, xy[a, 0], xy[a, 1], r_min, r_max, half, verts, normals):
            dx = xy[a, 0] - rx
            dy = xy[a, 1] - ry
            rng_ = math.sqrt(dx * dx + dy * dy)
            brg = wrap(math.atan2(dy, dx) - rth)
            aw[k, 0] = linv[0, 0] * rng_ + linv[0, 1] * brg
            aw[k, 1] = linv[1, 0] * rng_ + linv[1, 1] * brg
            win[k] = ws[a] / total
            logw[k] = math.log(win[k])
            mass += win[k]
            k += 1
    if k == 0:
        return 0.0
    empty = 1.0 - mass
    if empty < 0.0:
        empty = 0.0
    s = math.sqrt(lam + 2.0)
    ws0 = lam / (lam + 2.0)
    wsl = 0.5 / (lam + 2.0)
    buf = np.empty(k)
    h = -empty * math.log(empty) if empty > 0.0 else 0.0
    for j in range(k):
        pj = 0.0
        for l in range(5):
            zx = aw[j, 0]
            zy = aw[j, 1]
            if l == 1:
                zx += s
            elif l == 2:
                zx -= s
            elif l == 3:
                zy += s
            elif l == 4:
                zy -= s
            top = -np.inf
            for i in range(k):
                ex = zx - aw[i, 0]
                ey = zy - aw[i, 1]
                val = logw[i] - 0.5 * (ex * ex + ey * ey)
                buf[i] = val
                if val > top:
                    top = val
            acc = 0.0
            for i in range(k):
                acc += math.exp(buf[i] - top)
            lse = top + math.log(acc) - log_norm
            pj += (ws0 if l == 0 else wsl) * lse
        h -= win[j] * pj
    return h - h0 * mass


@njit(cache=True)
def drift_inplace(parts, k, tkind, tctrl, tdt, tspeed):
    if tkind == TARGET_CONTROLLED:
        kk = min(max(k, 0), tctrl.shape[0] - 1)
        v = tctrl[kk, 0]
        w = tctrl[kk, 1]
    else:
        v = tspeed
        w = 0.0
    for j in range(parts.shape[0]):
        th = parts[j, 2]
        parts[j, 0] += v * tdt * math.cos(th)
        parts[j, 1] += v * tdt * math.sin(th)
        parts[j, 2] = wrap(th + w * tdt)


@njit(cache=True)
def add_noise_inplace(parts, eps, qsqrt):
    for j in range(parts.shape[0]):
        e0 = eps[j, 0]
        e1 = eps[j, 1]
        e2 = eps[j, 2]
        parts[j, 0] += qsqrt[0, 0] * e0 + qsqrt[0, 1] * e1 + qsqrt[0, 2] * e2
        parts[j, 1] += qsqrt[1, 0] * e0 + qsqrt[1, 1] * e1 + qsqrt[1, 2] * e2
        parts[j, 2] = wrap(parts[j, 2] + qsqrt[2, 0] * e0 + qsqrt[2, 1] * e1 + qsqrt[2, 2] * e2)


@njit(cache=True)
def rollout_chunk(pose, parts, w, k, acc, n_steps, delta_r, discount, scale,
                  ctrl_v, ctrl_w, dt, radius, nsub, bounds, verts, edges, normals,
                  tkind, tctrl, tdt, tspeed, qsqrt,
                  r_min, r_max, half, linv, log_norm, lam, h0, cell,
                  eps, unif):
    """Run up to ``n_steps`` rollout steps, mutating ``pose``, ``parts`` and
    ``acc = [total, discount_factor]`` in place.

    Returns (steps_done, status, k) with status 0 = continue,
    1 = reward exceeded ``delta_r``, 2 = no feasible primitive.
    """
    nctrl = ctrl_v.shape[0]
    tries = unif.shape[1] - 1
    feas = np.empty(nctrl, dtype=np.int64)
    for s in range(n_steps):
        x = pose[0]
        y = pose[1]
        th = pose[2]
        pick = -1
        for t in range(tries):
            c = int(unif[s, t] * nctrl)
            if primitive_ok(x, y, th, ctrl_v[c], dt, radius, nsub, bounds, verts, edges, normals):
                pick = c
                break
        if pick < 0:
            nf = 0
            for c in range(nctrl):
                if primitive_ok(x, y, th, ctrl_v[c], dt, radius, nsub, bounds, verts, edges, normals):
                    feas[nf] = c
                    nf += 1
            if nf == 0:
                return s, 2, k
            pick = feas[int(unif[s, tries] * nf)]
        v = ctrl_v[pick]
        nx = x + v * math.cos(th) * dt
        ny = y + v * math.sin(th) * dt
        nth = wrap(th + ctrl_w[pick] * dt)
        drift_inplace(parts, k, tkind, tctrl, tdt, tspeed)
        r = scale * mi_sp(nx, ny, nth, parts, w, cell, r_min, r_max, half, verts, normals,
                          linv, log_norm, lam, h0)
        acc[0] += acc[1] * r
        if r > delta_r:
            return s + 1, 1, k
        add_noise_inplace(parts, eps[s], qsqrt)
        acc[1] *= discount
        k += 1
        pose[0] = nx
        pose[1] = ny
        pose[2] = nth
    return n_steps, 0, k


@njit(cache=True)
def loglik_batch(zr, zb, empty, rx, ry, rth, parts, r_min, r_max, half, verts, normals,
                 linv, log_norm, out):
    """Per-particle measurement log-likelihood, written into ``out``."""
    for j in range(parts.shape[0]):
        vis = point_visible(rx, ry, rth, parts[j, 0], parts[j, 1], r_min, r_max, half, verts, normals)
        if empty:
            out[j] = -np.inf if vis else 0.0
        elif not vis:
            out[j] = -np.inf
        else:
            dx = parts[j, 0] - rx
            dy = parts[j, 1] - ry
            e0 = zr - math.sqrt(dx * dx + dy * dy)
            e1 = wrap(zb - wrap(math.atan2(dy, dx) - rth))
            a0 = linv[0, 0] * e0 + linv[0, 1] * e1
            a1 = linv[1, 0] * e0 + linv[1, 1] * e1
            out[j] = -0.5 * (a0 * a0 + a1 * a1) - log_norm
