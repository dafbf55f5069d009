"""Planar geometry helpers: obstacle covering, sight lines, angles."""

import math

import numpy as np

from .. import _kernels


def cover_rectangle(rect, radius):
    """Cover an axis-aligned rectangle with a grid of equal circles.

    ``rect`` is ``(cx, cy, width, height)``. Centres sit on a regular grid
    whose cells are at most ``radius * sqrt(2)`` on a side, so each cell lies
    inside the circle at its centre and the union covers the rectangle.
    """
    cx, cy, w, h = (float(v) for v in rect)
    if not (w > 0 and h > 0):
        raise ValueError(f"degenerate rectangle {rect!r}")
    if radius <= 0:
        raise ValueError("radius must be positive")
    cell = radius * math.sqrt(2.0)
    nx = max(1, math.ceil(w / cell - 1e-12))
    ny = max(1, math.ceil(h / cell - 1e-12))
    xs = cx - w / 2 + (np.arange(nx) + 0.5) * (w / nx)
    ys = cy - h / 2 + (np.arange(ny) + 0.5) * (h / ny)
    gx, gy = np.meshgrid(xs, ys, indexing="ij")
    return np.stack([gx.ravel(), gy.ravel()], axis=1)


def line_of_sight(p_a, p_b, obstacles):
    """True when the segment p_a -> p_b stays out of every obstacle circle.

    A segment that only touches a circle (distance exactly equal to the
    radius) is not blocked.
    """
    if len(obstacles) == 0:
        return True
    blocked = _kernels.segments_blocked(
        np.asarray(p_a, dtype=np.float64), np.asarray(p_b, dtype=np.float64),
        obstacles.circles, obstacles.radius,
    )
    return not bool(blocked[0])


def wrap_angle(a):
    return (np.asarray(a) + np.pi) % (2 * np.pi) - np.pi


def advantage(pos_i, vel_i, pos_e):
    """Cosine of the angle between v_i and the bearing p_e - p_i.

    Zero velocity or coincident positions give 0 (neutral).
    """
    v = np.asarray(vel_i, dtype=np.float64)
    d = np.asarray(pos_e, dtype=np.float64) - np.asarray(pos_i, dtype=np.float64)
    nv = math.hypot(v[0], v[1])
    nd = math.hypot(d[0], d[1])
    if nv == 0.0 or nd == 0.0:
        return 0.0
    c = (v[0] * d[0] + v[1] * d[1]) / (nv * nd)
    return min(1.0, max(-1.0, c))


def advantage_matrix(pos, vel):
    """Vectorised advantage for every ordered pair (i, j)."""
    d = pos[None, :, :] - pos[:, None, :]
    nd = np.linalg.norm(d, axis=-1)
    nv = np.linalg.norm(vel, axis=-1)
    dot = np.einsum("ijk,ik->ij", d, vel)
    den = nd * nv[:, None]
    out = np.divide(dot, den, out=np.zeros_like(dot), where=den > 0)
    return np.clip(out, -1.0, 1.0)
