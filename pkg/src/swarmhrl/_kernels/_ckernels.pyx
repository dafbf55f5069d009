# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot kernels. Semantics match ``_pykernels`` exactly."""

import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, cos, sin, fabs, INFINITY

cnp.import_array()


cdef inline bint _blocked(double ax, double ay, double bx, double by,
                          const double[:, ::1] circles, double r2) nogil:
    cdef Py_ssize_t c
    cdef double sx = bx - ax, sy = by - ay
    cdef double len2 = sx * sx + sy * sy
    cdef double t, qx, qy, ex, ey
    for c in range(circles.shape[0]):
        if len2 > 0.0:
            t = ((circles[c, 0] - ax) * sx + (circles[c, 1] - ay) * sy) / len2
            if t < 0.0:
                t = 0.0
            elif t > 1.0:
                t = 1.0
        else:
            t = 0.0
        qx = ax + t * sx
        qy = ay + t * sy
        ex = qx - circles[c, 0]
        ey = qy - circles[c, 1]
        if ex * ex + ey * ey < r2:
            return True
    return False


def visibility(pos, heading, team, alive, circles, double radius, double d1, double d2):
    cdef const double[:, ::1] p = np.ascontiguousarray(pos, dtype=np.float64)
    cdef const double[::1] hd = np.ascontiguousarray(heading, dtype=np.float64)
    cdef const long[::1] tm = np.ascontiguousarray(team, dtype=np.int64)
    cdef const unsigned char[::1] lv = np.ascontiguousarray(alive, dtype=np.uint8)
    cdef const double[:, ::1] cc = np.ascontiguousarray(
        np.asarray(circles, dtype=np.float64).reshape(-1, 2))
    cdef Py_ssize_t n = p.shape[0], nc = cc.shape[0]
    ally_np = np.zeros((n, n), dtype=np.uint8)
    enemy_np = np.zeros((n, n), dtype=np.uint8)
    obst_np = np.zeros((n, nc), dtype=np.uint8)
    cdef unsigned char[:, ::1] ally = ally_np
    cdef unsigned char[:, ::1] enemy = enemy_np
    cdef unsigned char[:, ::1] obst = obst_np
    cdef Py_ssize_t i, j, c
    cdef double ux, uy, dx, dy, f, l, half = 0.5 * d2, r2 = radius * radius
    with nogil:
        for i in range(n):
            if not lv[i]:
                continue
            ux = cos(hd[i])
            uy = sin(hd[i])
            for j in range(n):
                if j == i or not lv[j]:
                    continue
                dx = p[j, 0] - p[i, 0]
                dy = p[j, 1] - p[i, 1]
                f = dx * ux + dy * uy
                l = -dx * uy + dy * ux
                if f < 0.0 or f > d1 or fabs(l) > half:
                    continue
                if tm[i] == tm[j]:
                    ally[i, j] = 1
                elif not _blocked(p[i, 0], p[i, 1], p[j, 0], p[j, 1], cc, r2):
                    enemy[i, j] = 1
            for c in range(nc):
                dx = cc[c, 0] - p[i, 0]
                dy = cc[c, 1] - p[i, 1]
                f = dx * ux + dy * uy
                l = -dx * uy + dy * ux
                if f >= 0.0 and f <= d1 and fabs(l) <= half:
                    obst[i, c] = 1
    return ally_np, enemy_np, obst_np


def segments_blocked(a, b, circles, double radius):
    cdef const double[:, ::1] pa = np.ascontiguousarray(np.asarray(a, dtype=np.float64).reshape(-1, 2))
    cdef const double[:, ::1] pb = np.ascontiguousarray(np.asarray(b, dtype=np.float64).reshape(-1, 2))
    cdef const double[:, ::1] cc = np.ascontiguousarray(
        np.asarray(circles, dtype=np.float64).reshape(-1, 2))
    cdef Py_ssize_t k, n = pa.shape[0]
    out_np = np.zeros(n, dtype=bool)
    cdef cnp.npy_bool[::1] out = out_np
    cdef double r2 = radius * radius
    with nogil:
        for k in range(n):
            out[k] = _blocked(pa[k, 0], pa[k, 1], pb[k, 0], pb[k, 1], cc, r2)
    return out_np


def average_linkage(points):
    cdef const double[:, ::1] pts = np.ascontiguousarray(
        np.asarray(points, dtype=np.float64).reshape(-1, 2))
    cdef Py_ssize_t n = pts.shape[0]
    merges_np = np.zeros((max(n - 1, 0), 3))
    if n < 2:
        return merges_np
    cdef double[:, ::1] merges = merges_np
    dist_np = np.empty((n, n))
    cdef double[:, ::1] dist = dist_np
    size_np = np.ones(n)
    cdef double[::1] size = size_np
    active_np = np.ones(n, dtype=np.uint8)
    cdef unsigned char[::1] active = active_np
    chain_np = np.empty(n, dtype=np.intp)
    cdef Py_ssize_t[::1] chain = chain_np
    cdef Py_ssize_t i, j, a, b, prev, lo, hi, top = 0, k = 0, first = 0
    cdef double dx, dy, best, h, nl, nh
    with nogil:
        for i in range(n):
            dist[i, i] = INFINITY
            for j in range(i + 1, n):
                dx = pts[i, 0] - pts[j, 0]
                dy = pts[i, 1] - pts[j, 1]
                dist[i, j] = sqrt(dx * dx + dy * dy)
                dist[j, i] = dist[i, j]
        while k < n - 1:
            if top == 0:
                while not active[first]:
                    first += 1
                chain[0] = first
                top = 1
            a = chain[top - 1]
            b = -1
            best = INFINITY
            for j in range(n):
                if dist[a, j] < best:
                    best = dist[a, j]
                    b = j
            if b < 0:
                # every remaining distance is infinite; take the first other active index
                for j in range(n):
                    if active[j] and j != a:
                        b = j
                        break
            if top > 1:
                prev = chain[top - 2]
                if dist[a, prev] <= dist[a, b]:
                    b = prev
            if top > 1 and b == chain[top - 2]:
                top -= 2
                h = dist[a, b]
                merges[k, 0] = a
                merges[k, 1] = b
                merges[k, 2] = h
                k += 1
                if a < b:
                    lo = a
                    hi = b
                else:
                    lo = b
                    hi = a
                nl = size[lo]
                nh = size[hi]
                for j in range(n):
                    if active[j] and j != lo and j != hi:
                        dist[lo, j] = (nl * dist[lo, j] + nh * dist[hi, j]) / (nl + nh)
                        dist[j, lo] = dist[lo, j]
                    dist[hi, j] = INFINITY
                    dist[j, hi] = INFINITY
                dist[lo, lo] = INFINITY
                size[lo] = nl + nh
                active[hi] = 0
            else:
                chain[top] = b
                top += 1
    return merges_np


def rollout(p0, v0, acc, jitter, circles, double clearance, double dt,
            double v_max, double width, double height):
    cdef double[:, ::1] p = np.array(np.asarray(p0, dtype=np.float64).reshape(-1, 2), order="C")
    cdef double[:, ::1] v = np.array(np.asarray(v0, dtype=np.float64).reshape(-1, 2), order="C")
    cdef double[:, ::1] a = np.array(np.asarray(acc, dtype=np.float64).reshape(-1, 2), order="C")
    cdef const double[:, ::1] jt = np.ascontiguousarray(jitter, dtype=np.float64)
    cdef const double[:, ::1] cc = np.ascontiguousarray(
        np.asarray(circles, dtype=np.float64).reshape(-1, 2))
    cdef Py_ssize_t n = jt.shape[0], steps = jt.shape[1], nc = cc.shape[0]
    out_np = np.empty((n, steps, 2))
    cdef double[:, :, ::1] out = out_np
    cdef Py_ssize_t i, t, c
    cdef double cs, sn, vx, vy, ax, ay, nx, ny, rx, ry, d, ux, uy, px, py, inward, speed
    with nogil:
        for i in range(n):
            vx = v[i, 0]
            vy = v[i, 1]
            ax = a[i, 0]
            ay = a[i, 1]
            px = p[i, 0]
            py = p[i, 1]
            for t in range(steps):
                cs = cos(jt[i, t])
                sn = sin(jt[i, t])
                vx, vy = cs * vx - sn * vy, sn * vx + cs * vy
                ax, ay = cs * ax - sn * ay, sn * ax + cs * ay
                nx = px + dt * vx + 0.5 * dt * dt * ax
                ny = py + dt * vy + 0.5 * dt * dt * ay
                vx = vx + dt * ax
                vy = vy + dt * ay
                # push evaluated on the uncorrected prediction, summed over circles
                rx = 0.0
                ry = 0.0
                for c in range(nc):
                    ux = nx - cc[c, 0]
                    uy = ny - cc[c, 1]
                    d = sqrt(ux * ux + uy * uy)
                    if d < clearance:
                        if d > 0.0:
                            ux = ux / d
                            uy = uy / d
                        else:
                            ux = 1.0
                            uy = 0.0
                        rx = rx + ux * (clearance - d)
                        ry = ry + uy * (clearance - d)
                        inward = vx * ux + vy * uy
                        if inward < 0.0:
                            vx = vx - inward * ux
                            vy = vy - inward * uy
                nx = nx + dt * rx
                ny = ny + dt * ry
                speed = sqrt(vx * vx + vy * vy)
                if speed > v_max:
                    vx = vx * (v_max / speed)
                    vy = vy * (v_max / speed)
                if nx < 0.0:
                    nx = 0.0
                elif nx > width:
                    nx = width
                if ny < 0.0:
                    ny = 0.0
                elif ny > height:
                    ny = height
                out[i, t, 0] = nx
                out[i, t, 1] = ny
                px = nx
                py = ny
    return out_np
