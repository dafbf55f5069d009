"""Numpy implementations of the hot kernels.

These mirror ``_ckernels.pyx`` one to one and are used whenever the compiled
extension is unavailable (or ``SWARMHRL_PURE_PYTHON=1``).
"""

import numpy as np


def visibility(pos, heading, team, alive, circles, radius, d1, d2):
    """Pairwise perception/communication membership for every agent.

    Returns ``(ally, enemy, obstacle)`` uint8 matrices of shapes (N, N),
    (N, N), (N, C). ``ally[i, j]`` is set when j is a live teammate inside
    i's sensing rectangle; ``enemy[i, j]`` additionally requires an
    unobstructed sight line; ``obstacle[i, c]`` marks circle centres inside
    the rectangle.
    """
    pos = np.asarray(pos, dtype=np.float64)
    n = pos.shape[0]
    circles = np.asarray(circles, dtype=np.float64).reshape(-1, 2)
    ux = np.cos(heading)
    uy = np.sin(heading)

    dx = pos[None, :, 0] - pos[:, None, 0]
    dy = pos[None, :, 1] - pos[:, None, 1]
    fwd = dx * ux[:, None] + dy * uy[:, None]
    lat = -dx * uy[:, None] + dy * ux[:, None]
    live = alive.astype(bool)
    in_rect = (fwd >= 0.0) & (fwd <= d1) & (np.abs(lat) <= 0.5 * d2)
    in_rect &= live[:, None] & live[None, :]
    in_rect[np.arange(n), np.arange(n)] = False

    same = team[:, None] == team[None, :]
    ally = in_rect & same
    enemy = in_rect & ~same

    if circles.shape[0]:
        cx = circles[:, 0]
        cy = circles[:, 1]
        ox = cx[None, :] - pos[:, 0, None]
        oy = cy[None, :] - pos[:, 1, None]
        ofwd = ox * ux[:, None] + oy * uy[:, None]
        olat = -ox * uy[:, None] + oy * ux[:, None]
        obstacle = (ofwd >= 0.0) & (ofwd <= d1) & (np.abs(olat) <= 0.5 * d2)
        obstacle &= live[:, None]

        ii, jj = np.nonzero(enemy)
        if ii.size:
            blocked = segments_blocked(pos[ii], pos[jj], circles, radius)
            enemy[ii[blocked], jj[blocked]] = False
    else:
        obstacle = np.zeros((n, 0), dtype=bool)
    return ally.astype(np.uint8), enemy.astype(np.uint8), obstacle.astype(np.uint8)


def segments_blocked(a, b, circles, radius):
    """True for every segment a[k]->b[k] passing strictly inside some circle."""
    a = np.asarray(a, dtype=np.float64).reshape(-1, 2)
    b = np.asarray(b, dtype=np.float64).reshape(-1, 2)
    circles = np.asarray(circles, dtype=np.float64).reshape(-1, 2)
    if circles.shape[0] == 0:
        return np.zeros(a.shape[0], dtype=bool)
    seg = b - a
    seg_len2 = np.einsum("ij,ij->i", seg, seg)
    rel = circles[None, :, :] - a[:, None, :]
    safe = np.where(seg_len2 > 0.0, seg_len2, 1.0)
    t = np.einsum("kcj,kj->kc", rel, seg) / safe[:, None]
    t = np.clip(t, 0.0, 1.0)
    t[seg_len2 == 0.0] = 0.0
    closest = a[:, None, :] + t[..., None] * seg[:, None, :]
    d2 = np.sum((closest - circles[None, :, :]) ** 2, axis=-1)
    return np.any(d2 < radius * radius, axis=1)


def average_linkage(points):
    """Average-linkage dendrogram via the nearest-neighbour chain.

    Returns an (n-1, 3) array of ``(a, b, height)`` rows, where a and b are
    representative point indices of the merged clusters. Rows are in merge
    (chain) order, not sorted by height.
    """
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 2)
    n = pts.shape[0]
    merges = np.zeros((max(n - 1, 0), 3))
    if n < 2:
        return merges
    diff = pts[:, None, :] - pts[None, :, :]
    dist = np.sqrt(np.sum(diff * diff, axis=-1))
    np.fill_diagonal(dist, np.inf)
    size = np.ones(n)
    active = np.ones(n, dtype=bool)
    chain = []
    k = 0
    while k < n - 1:
        if not chain:
            chain.append(int(np.flatnonzero(active)[0]))
        a = chain[-1]
        row = dist[a]
        b = int(np.argmin(row))
        if len(chain) > 1:
            prev = chain[-2]
            if row[prev] <= row[b]:
                b = prev
        if len(chain) > 1 and b == chain[-2]:
            chain.pop()
            chain.pop()
            h = row[b]
            merges[k] = (a, b, h)
            k += 1
            lo, hi = (a, b) if a < b else (b, a)
            new = (size[lo] * dist[lo] + size[hi] * dist[hi]) / (size[lo] + size[hi])
            new[lo] = np.inf
            dist[lo, :] = new
            dist[:, lo] = new
            dist[hi, :] = np.inf
            dist[:, hi] = np.inf
            size[lo] += size[hi]
            active[hi] = False
        else:
            chain.append(b)
    return merges


def rollout(p0, v0, acc, jitter, circles, clearance, dt, v_max, width, height):
    """Iterate the second-order predictor with obstacle correction.

    ``jitter`` is an (n, T) array of per-step heading perturbations (rad).
    Returns predicted positions of shape (n, T, 2).
    """
    p = np.array(p0, dtype=np.float64).reshape(-1, 2)
    v = np.array(v0, dtype=np.float64).reshape(-1, 2)
    a = np.array(acc, dtype=np.float64).reshape(-1, 2)
    jitter = np.asarray(jitter, dtype=np.float64)
    circles = np.asarray(circles, dtype=np.float64).reshape(-1, 2)
    n, steps = jitter.shape
    out = np.empty((n, steps, 2))
    for t in range(steps):
        c = np.cos(jitter[:, t])
        s = np.sin(jitter[:, t])
        vx = c * v[:, 0] - s * v[:, 1]
        vy = s * v[:, 0] + c * v[:, 1]
        v = np.stack([vx, vy], axis=1)
        a = np.stack([c * a[:, 0] - s * a[:, 1], s * a[:, 0] + c * a[:, 1]], axis=1)
        nxt = p + dt * v + 0.5 * dt * dt * a
        v = v + dt * a
        if circles.shape[0]:
            rel = nxt[:, None, :] - circles[None, :, :]
            dist = np.sqrt(np.sum(rel * rel, axis=-1))
            hit = dist < clearance
            if hit.any():
                safe = np.where(dist > 0.0, dist, 1.0)
                unit = rel / safe[..., None]
                unit[dist == 0.0] = (1.0, 0.0)
                depth = np.where(hit, clearance - dist, 0.0)
                push = np.sum(unit * depth[..., None], axis=1)
                nxt = nxt + dt * push
                # drop the velocity component pointing into each hit circle
                for ci in range(circles.shape[0]):
                    rows = hit[:, ci]
                    if rows.any():
                        u = unit[rows, ci]
                        inward = np.einsum("ij,ij->i", v[rows], u)
                        v[rows] -= np.minimum(inward, 0.0)[:, None] * u
        speed = np.sqrt(np.sum(v * v, axis=1))
        over = speed > v_max
        if over.any():
            v[over] *= (v_max / speed[over])[:, None]
        nxt[:, 0] = np.clip(nxt[:, 0], 0.0, width)
        nxt[:, 1] = np.clip(nxt[:, 1], 0.0, height)
        out[:, t] = nxt
        p = nxt
    return out
