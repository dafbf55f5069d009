"""Scripted red-team policies.

``ExpertRules`` and ``HeuristicAttack`` are rule-based reconstructions of
classical task-and-motion planners (fixed priorities; ring-search attack
positioning). ``RandomPolicy`` samples uniform bounded actions.
``mirror:PATH`` drives red with a trained checkpoint (see ``hrl.MirrorOpponent``).

Scripted agents only use what they could sense: their own perception
rectangle, teammates' task flags over communication, and obstacle circles
either inside the rectangle or within short proximity range.
"""

import math

import numpy as np

from .sim.config import TaskKind, Team

PROXIMITY = 1.0  # extra range beyond contact at which obstacles are sensed and repel


def _unit(v):
    n = math.hypot(v[0], v[1])
    return np.zeros(2) if n == 0 else np.asarray(v, dtype=np.float64) / n


def _adv(world, i, j):
    v = world.vel[i]
    d = world.pos[j] - world.pos[i]
    nv, nd = math.hypot(*v), math.hypot(*d)
    if nv == 0 or nd == 0:
        return 0.0
    return float(np.dot(v, d) / (nv * nd))


def _nearest(world, i, ids):
    d = np.linalg.norm(world.pos[ids] - world.pos[i], axis=1)
    return int(ids[np.lexsort((ids, d))[0]])


def sensed_circles(world, perception, i):
    cfg = world.config
    circles = world.obstacles.circles
    if circles.shape[0] == 0:
        return circles
    clearance = cfg.avoid_radius + world.obstacles.radius
    near = perception.obstacle_dist[i] < clearance + PROXIMITY
    return circles[perception.obstacle[i] | near]


def steer(world, perception, i, goal):
    """Greedy goal seeking plus obstacle/teammate repulsion; returns (speed, heading)."""
    cfg = world.config
    p = world.pos[i]
    to_goal = np.asarray(goal, dtype=np.float64) - p
    dist_goal = math.hypot(*to_goal)
    attract = _unit(to_goal)
    force = attract.copy()
    clearance = cfg.avoid_radius + world.obstacles.radius
    reach = clearance + PROXIMITY
    for c in sensed_circles(world, perception, i):
        away = p - c
        d = math.hypot(*away)
        if d >= reach or d == 0:
            continue
        u = away / d
        w = ((reach - d) / PROXIMITY) ** 2
        force += 2.0 * w * u
        # slide around obstacles sitting between the agent and its goal
        if np.dot(attract, -u) > 0:
            tangent = np.array([-u[1], u[0]])
            if np.dot(tangent, attract) < 0:
                tangent = -tangent
            force += 1.5 * w * tangent
    mates = np.flatnonzero(perception.ally[i])
    for j in mates:
        away = p - world.pos[j]
        d = math.hypot(*away)
        if 0 < d < 2 * cfg.avoid_radius + 0.4:
            force += 0.5 * away / d
    if math.hypot(*force) == 0:
        return np.array([0.0, float(world.heading[i])])
    speed = min(cfg.v_max, dist_goal / cfg.dt)
    return np.array([speed, math.atan2(force[1], force[0])])


def patrol_waypoints(config):
    w, h = config.width, config.height
    return np.array([(0.25 * w, 0.25 * h), (0.75 * w, 0.25 * h),
                     (0.75 * w, 0.75 * h), (0.25 * w, 0.75 * h)])


def expert_rules(world, perception, i, patrol_state=None):
    """Fixed-priority rules; returns ``(action, task)``.

    Chase the nearest advantaged visible enemy, else support the nearest
    chasing/escaping teammate, else escape a disadvantaged contact, else
    patrol a loop of waypoints.
    """
    enemies = np.flatnonzero(perception.enemy[i])
    if enemies.size:
        adv = np.array([_adv(world, i, j) for j in enemies])
        good = enemies[adv > 0]
        if good.size:
            return steer(world, perception, i, world.pos[_nearest(world, i, good)]), TaskKind.CHASING
    allies = np.flatnonzero(perception.ally[i])
    if allies.size:
        busy = allies[np.isin(world.task[allies], (TaskKind.CHASING, TaskKind.ESCAPING))]
        if busy.size:
            return steer(world, perception, i, world.pos[_nearest(world, i, busy)]), TaskKind.SUPPORTING
    if enemies.size:
        adv = np.array([_adv(world, i, j) for j in enemies])
        bad = enemies[adv < 0]
        if bad.size:
            threat = world.pos[_nearest(world, i, bad)]
            away = world.pos[i] + 3.0 * _unit(world.pos[i] - threat)
            away = np.clip(away, 0.0, [world.config.width, world.config.height])
            return steer(world, perception, i, away), TaskKind.ESCAPING
    wps = patrol_waypoints(world.config)
    state = patrol_state if patrol_state is not None else {}
    k = state.get(i)
    if k is None:
        k = int(np.argmin(np.linalg.norm(wps - world.pos[i], axis=1)))
    if np.linalg.norm(wps[k] - world.pos[i]) < 1.0:
        k = (k + 1) % len(wps)
    state[i] = k
    return steer(world, perception, i, wps[k]), TaskKind.SEARCHING


def attack_candidates(world, enemies, ring_radius, n_ring):
    """Ring positions around each enemy; row order = (enemy order, angle index)."""
    angles = 2 * np.pi * np.arange(n_ring) / n_ring
    ring = ring_radius * np.stack([np.cos(angles), np.sin(angles)], axis=1)
    return (world.pos[enemies][:, None, :] + ring[None]).reshape(-1, 2), np.repeat(enemies, n_ring)


def attack_scores(world, candidates, owners, enemies):
    """Advantage gain (being behind the owning enemy) minus threat exposure."""
    cfg = world.config
    scores = np.zeros(len(candidates))
    for k, (c, e) in enumerate(zip(candidates, owners)):
        he = np.array([math.cos(world.heading[e]), math.sin(world.heading[e])])
        gain = -float(np.dot(_unit(c - world.pos[e]), he))
        threat = 0.0
        for j in enemies:
            hj = np.array([math.cos(world.heading[j]), math.sin(world.heading[j])])
            rel = c - world.pos[j]
            d = math.hypot(*rel)
            if d == 0:
                threat += 1.0
                continue
            threat += max(0.0, float(np.dot(rel / d, hj))) * math.exp(-d / cfg.attack_radius)
        scores[k] = gain - threat
    return scores


def heuristic_attack(world, perception, i, patrol_state=None, n_ring=12):
    """Move toward the best-scoring attack position around visible enemies.

    Falls back to ``expert_rules`` when no enemy is visible.
    """
    enemies = np.flatnonzero(perception.enemy[i])
    if enemies.size == 0:
        return expert_rules(world, perception, i, patrol_state)
    cand, owners = attack_candidates(world, enemies, 0.7 * world.config.attack_radius, n_ring)
    scores = attack_scores(world, cand, owners, enemies)
    best = int(np.argmax(scores))
    return steer(world, perception, i, cand[best]), TaskKind.CHASING


def random_action(rng, v_max):
    return np.array([rng.uniform(0.0, v_max), rng.uniform(-math.pi, math.pi)])


class ScriptedOpponent:
    """Drives every agent of ``team`` with one of the scripted rules."""

    kinds = ("expert", "heuristic", "random")

    def __init__(self, kind, team=Team.RED):
        if kind not in self.kinds:
            raise ValueError(f"unknown opponent {kind!r}")
        self.kind = kind
        self.team = int(team)
        self.patrol = {}
        self.rng = np.random.default_rng(0)

    def reset(self, world, rng):
        self.patrol = {}
        self.rng = rng

    def act(self, world, perception, t=None):
        """``(ids, actions, tasks)`` for the live members of this team."""
        ids = world.members(self.team)
        actions = np.zeros((len(ids), 2))
        tasks = world.task[ids].copy()
        for row, i in enumerate(ids):
            if self.kind == "random":
                actions[row] = random_action(self.rng, world.config.v_max)
                continue
            rule = expert_rules if self.kind == "expert" else heuristic_attack
            actions[row], tasks[row] = rule(world, perception, i, self.patrol)
        return ids, actions, tasks


def make_opponent(spec, **kw):
    """``expert | heuristic | random | mirror:PATH``."""
    if spec.startswith("mirror:"):
        from .hrl import MirrorOpponent

        return MirrorOpponent.from_checkpoint(spec.split(":", 1)[1], **kw)
    return ScriptedOpponent(spec)
