"""Enemy trajectory prediction for search and escape subgoals.

Stored enemy tracks are rolled forward with a constant-acceleration model,
pushed out of obstacles with a potential-field correction, and the predicted
points are grouped by average-linkage clustering. Cluster centres are
"likely enemy locations": searchers head for the nearest one, escapers for
the nearest random point at least ``escape_distance`` from all of them.
"""

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels

log = logging.getLogger(__name__)


@dataclass
class PredictorConfig:
    horizon: int = 20
    rollouts: int = 8
    jitter: float = 0.1
    link_threshold: float = 2.0
    escape_distance: float = 5.0
    n_candidates: int = 10
    point_stride: int = 1
    omniscient: bool = False
    max_rejections: int = 10_000
    relax_factor: float = 0.8


@dataclass
class TrackHistory:
    """Observed samples of one enemy, oldest first."""

    steps: list = field(default_factory=list)
    positions: list = field(default_factory=list)
    velocities: list = field(default_factory=list)

    def record(self, step, pos, vel):
        if self.steps and step <= self.steps[-1]:
            return
        self.steps.append(int(step))
        self.positions.append(np.array(pos, dtype=np.float64))
        self.velocities.append(np.array(vel, dtype=np.float64))

    def __len__(self):
        return len(self.steps)

    def latest(self, dt):
        """(position, velocity, acceleration) at the newest sample.

        Acceleration comes from the last two velocity samples when they are
        consecutive steps; otherwise it is zero.
        """
        p = self.positions[-1]
        v = self.velocities[-1]
        if len(self.steps) >= 2 and self.steps[-1] - self.steps[-2] == 1:
            acc = (v - self.velocities[-2]) / dt
        else:
            acc = np.zeros(2)
        return p, v, acc


@dataclass
class ClusterSet:
    labels: np.ndarray
    centers: np.ndarray
    sizes: np.ndarray

    def __len__(self):
        return self.centers.shape[0]


@dataclass
class EscapeCandidates:
    points: np.ndarray
    distances: np.ndarray  # to the nearest cluster centre (inf when no clusters)
    escape_distance: float
    relaxed: bool


def second_order_step(p, v_now, v_prev, dt):
    """One constant-acceleration step; ``v_prev=None`` means first order."""
    p = np.asarray(p, dtype=np.float64)
    v_now = np.asarray(v_now, dtype=np.float64)
    if v_prev is None:
        return p + dt * v_now
    acc = (v_now - np.asarray(v_prev, dtype=np.float64)) / dt
    return p + dt * v_now + 0.5 * dt * dt * acc


def potential_field_correct(p_pred, circles, clearance, dt):
    """Push a predicted point out of every circle it overlaps.

    Each overlapping circle contributes ``dt * depth * unit(p - centre)``
    with ``depth = clearance - |p - centre|``. A point exactly on a centre is
    pushed along +x.
    """
    p = np.asarray(p_pred, dtype=np.float64)
    circles = np.asarray(circles, dtype=np.float64).reshape(-1, 2)
    if circles.shape[0] == 0:
        return p.copy()
    rel = p - circles
    dist = np.linalg.norm(rel, axis=1)
    hit = dist < clearance
    if not hit.any():
        return p.copy()
    unit = np.zeros_like(rel)
    nz = hit & (dist > 0)
    unit[nz] = rel[nz] / dist[nz, None]
    unit[hit & (dist == 0)] = (1.0, 0.0)
    depth = clearance - dist[hit]
    return p + dt * np.sum(unit[hit] * depth[:, None], axis=0)


def rollout(history, horizon, n_rollouts, rng, *, circles, clearance, dt, v_max, arena, jitter=0.1):
    """``n_rollouts`` predicted trajectories of shape (n_rollouts, horizon, 2).

    Every step applies a Gaussian heading perturbation (std ``jitter``), the
    constant-acceleration update and one obstacle correction pass. The
    velocity component pointing into an overlapped circle is removed so the
    prediction slides around obstacles rather than through them.
    """
    if len(history) == 0:
        return np.zeros((0, horizon, 2))
    if horizon < 1 or n_rollouts < 1:
        raise ValueError("horizon and n_rollouts must be >= 1")
    p, v, acc = history.latest(dt)
    noise = jitter * rng.standard_normal((n_rollouts, horizon)) if jitter > 0 else np.zeros((n_rollouts, horizon))
    return _kernels.rollout(
        np.repeat(p[None], n_rollouts, 0), np.repeat(v[None], n_rollouts, 0),
        np.repeat(acc[None], n_rollouts, 0), noise, circles, clearance, dt, v_max,
        arena[0], arena[1],
    )


def cut_dendrogram(n, merges, threshold):
    """Labels after applying every merge lower than ``threshold``.

    Labels are numbered in order of each cluster's first point.
    """
    parent = np.arange(n)

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    for a, b, height in merges:
        if height < threshold:
            ra, rb = find(int(a)), find(int(b))
            if ra != rb:
                parent[max(ra, rb)] = min(ra, rb)
    roots = np.array([find(i) for i in range(n)])
    _, first, inverse = np.unique(roots, return_index=True, return_inverse=True)
    order = np.argsort(np.argsort(first))
    return order[inverse]


def cluster(points, link_threshold):
    """Average-linkage agglomerative clustering stopped at ``link_threshold``."""
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 2)
    if pts.shape[0] == 0:
        raise ValueError("need at least one point")
    merges = _kernels.average_linkage(pts)
    labels = cut_dendrogram(pts.shape[0], merges, link_threshold)
    k = int(labels.max()) + 1
    sizes = np.bincount(labels, minlength=k)
    centers = np.zeros((k, 2))
    np.add.at(centers, labels, pts)
    centers /= sizes[:, None]
    return ClusterSet(labels=labels, centers=centers, sizes=sizes)


def search_subgoal(clusters, p_i, arena):
    """Nearest cluster centre (lowest index on ties); arena centre without clusters."""
    if clusters is None or len(clusters) == 0:
        return np.array([arena[0] / 2, arena[1] / 2])
    d = np.linalg.norm(clusters.centers - np.asarray(p_i, dtype=np.float64), axis=1)
    return clusters.centers[int(np.argmin(d))].copy()


def escape_candidates(clusters, arena, escape_distance, n_candidates, rng, *,
                      circles=None, clearance=0.0, max_rejections=10_000, relax_factor=0.8):
    """Rejection-sample uniform arena points far from every cluster centre.

    After ``max_rejections`` consecutive rejections the distance requirement
    is multiplied by ``relax_factor`` (reported via ``relaxed``).
    """
    if escape_distance <= 0:
        raise ValueError("escape_distance must be positive")
    centers = np.zeros((0, 2)) if clusters is None else clusters.centers
    circles = np.zeros((0, 2)) if circles is None else np.asarray(circles).reshape(-1, 2)
    d4 = float(escape_distance)
    relaxed = False
    accepted = []
    rejections = 0
    chunk = 256
    while len(accepted) < n_candidates:
        pts = rng.uniform((0.0, 0.0), arena, size=(chunk, 2))
        ok = np.ones(chunk, dtype=bool)
        if centers.shape[0]:
            dc = np.linalg.norm(pts[:, None] - centers[None], axis=-1)
            ok &= np.all(dc > d4, axis=1)
        if circles.shape[0]:
            do = np.linalg.norm(pts[:, None] - circles[None], axis=-1)
            ok &= np.all(do >= clearance, axis=1)
        for k in range(chunk):
            if ok[k]:
                accepted.append(pts[k])
                rejections = 0
                if len(accepted) == n_candidates:
                    break
            else:
                rejections += 1
                if rejections >= max_rejections:
                    d4 *= relax_factor
                    relaxed = True
                    rejections = 0
                    log.info("escape candidates: relaxing distance to %.3f m", d4)
                    break
    pts = np.array(accepted)
    if centers.shape[0]:
        dist = np.min(np.linalg.norm(pts[:, None] - centers[None], axis=-1), axis=1)
    else:
        dist = np.full(len(pts), np.inf)
    return EscapeCandidates(points=pts, distances=dist, escape_distance=d4, relaxed=relaxed)


def escape_subgoal(candidates, p_i):
    pts = candidates.points if isinstance(candidates, EscapeCandidates) else np.asarray(candidates)
    if len(pts) == 0:
        raise ValueError("no candidates")
    d = np.linalg.norm(pts - np.asarray(p_i, dtype=np.float64), axis=1)
    return pts[int(np.argmin(d))].copy()


class GlobalPlanner:
    """Per-team planner: keeps enemy tracks and serves search/escape subgoals.

    Tracks are only fed from enemies some teammate currently perceives
    unless ``omniscient`` is set. Predictions are computed lazily once per
    step and shared by every agent that asks.
    """

    def __init__(self, config, engagement, obstacles, rng):
        self.cfg = config
        self.eng = engagement
        self.obstacles = obstacles
        self.rng = rng
        self.tracks = {}
        self._step = None
        self._clusters = None
        self._candidates = None
        self.relax_events = 0

    @property
    def arena(self):
        return (self.eng.width, self.eng.height)

    @property
    def clearance(self):
        return self.eng.avoid_radius + self.obstacles.radius

    def observe(self, world, perception, team=0):
        """Record enemies visible to any live member of ``team`` (or all, if omniscient)."""
        mine = world.members(team)
        enemies = world.members(1 - team, alive_only=False)
        if self.cfg.omniscient:
            seen = enemies[world.alive[enemies]]
        else:
            seen = enemies[perception.enemy[mine][:, enemies].any(axis=0)] if mine.size else enemies[:0]
        for k in seen:
            self.tracks.setdefault(int(k), TrackHistory()).record(world.step_index, world.pos[k], world.vel[k])
        for k in enemies:
            if not world.alive[k]:
                self.tracks.pop(int(k), None)
        if self._step != world.step_index:
            self._step = world.step_index
            self._clusters = None
            self._candidates = None

    def predicted_points(self):
        cfg = self.cfg
        chunks = []
        for k in sorted(self.tracks):
            traj = rollout(self.tracks[k], cfg.horizon, cfg.rollouts, self.rng,
                           circles=self.obstacles.circles, clearance=self.clearance,
                           dt=self.eng.dt, v_max=self.eng.v_max, arena=self.arena, jitter=cfg.jitter)
            stride = max(1, cfg.point_stride)
            chunks.append(traj[:, stride - 1::stride].reshape(-1, 2))
        return np.concatenate(chunks) if chunks else np.zeros((0, 2))

    def clusters(self):
        if self._clusters is None:
            pts = self.predicted_points()
            self._clusters = cluster(pts, self.cfg.link_threshold) if len(pts) else ClusterSet(
                np.zeros(0, dtype=np.int64), np.zeros((0, 2)), np.zeros(0, dtype=np.int64))
        return self._clusters

    def search_subgoal(self, p_i):
        return search_subgoal(self.clusters(), p_i, self.arena)

    def escape_subgoal(self, p_i):
        if self._candidates is None:
            cfg = self.cfg
            self._candidates = escape_candidates(
                self.clusters(), self.arena, cfg.escape_distance, cfg.n_candidates, self.rng,
                circles=self.obstacles.circles, clearance=self.clearance,
                max_rejections=cfg.max_rejections, relax_factor=cfg.relax_factor)
            if self._candidates.relaxed:
                self.relax_events += 1
        return escape_subgoal(self._candidates, p_i)
