"""Sensing, neighbour sets and fixed-slot observations.

The sensing rectangle of agent i starts at p_i and extends ``sense_length``
along its heading and ``sense_width / 2`` to either side. Teammates inside it
are reachable by communication (obstacles ignored); opponents additionally
need a clear sight line.
"""

from dataclasses import dataclass

import numpy as np

from .. import _kernels
from .config import SlotCapacity

SLOT = 5  # relative position (2), relative velocity (2), mask
UPPER_ALLY_SLOT = 6  # + task code before the mask


@dataclass
class Perception:
    ally: np.ndarray  # (N, N) bool
    enemy: np.ndarray  # (N, N) bool
    obstacle: np.ndarray  # (N, C) bool
    dist: np.ndarray  # (N, N)
    obstacle_dist: np.ndarray  # (N, C)


def perceive(world):
    """Neighbour membership for every agent of both teams at once."""
    cfg = world.config
    ally, enemy, obst = _kernels.visibility(
        world.pos, world.heading, world.team.astype(np.int64), world.alive.astype(np.uint8),
        world.obstacles.circles, world.obstacles.radius, cfg.sense_length, cfg.sense_width,
    )
    dist = np.linalg.norm(world.pos[:, None, :] - world.pos[None, :, :], axis=-1)
    circles = world.obstacles.circles
    odist = np.linalg.norm(world.pos[:, None, :] - circles[None, :, :], axis=-1)
    return Perception(ally.astype(bool), enemy.astype(bool), obst.astype(bool), dist, odist)


def neighbor_sets(world, i, perception=None):
    """(ally ids, enemy ids, obstacle-circle ids) visible to agent i."""
    if not world.alive[i]:
        raise ValueError(f"agent {i} is dead")
    perc = perception if perception is not None else perceive(world)
    return (np.flatnonzero(perc.ally[i]), np.flatnonzero(perc.enemy[i]),
            np.flatnonzero(perc.obstacle[i]))


class ObsLayout:
    """Index arithmetic for the flat lower/upper observation vectors."""

    def __init__(self, caps=SlotCapacity()):
        self.caps = caps
        ka, ke, ko = caps.allies, caps.enemies, caps.obstacles
        self.lower_ally = slice(4, 4 + SLOT * ka)
        self.lower_enemy = slice(self.lower_ally.stop, self.lower_ally.stop + SLOT * ke)
        self.lower_obstacle = slice(self.lower_enemy.stop, self.lower_enemy.stop + SLOT * ko)
        self.lower_dim = self.lower_obstacle.stop
        self.upper_ally = slice(5, 5 + UPPER_ALLY_SLOT * ka)
        self.upper_enemy = slice(self.upper_ally.stop, self.upper_ally.stop + SLOT * ke)
        self.upper_dim = self.upper_enemy.stop


def _nearest(member, dist, k):
    """Indices (rows x k) of the k nearest members per row; -1 pads."""
    d = np.where(member, dist, np.inf)
    order = np.argsort(d, axis=1, kind="stable")[:, :k]
    taken = np.take_along_axis(d, order, axis=1)
    order = np.where(np.isfinite(taken), order, -1)
    if order.shape[1] < k:
        pad = -np.ones((order.shape[0], k - order.shape[1]), dtype=order.dtype)
        order = np.concatenate([order, pad], axis=1)
    return order


def _slots(world, idx, ids, with_vel=True, extra=None):
    """Fill (rows, k, SLOT [+1]) slot blocks relative to each observer."""
    rows, k = ids.shape
    width = SLOT + (1 if extra is not None else 0)
    out = np.zeros((rows, k, width))
    valid = ids >= 0
    safe = np.where(valid, ids, 0)
    rel_p = world.pos[safe] - world.pos[idx][:, None, :]
    out[..., 0:2] = rel_p
    if with_vel:
        out[..., 2:4] = world.vel[safe] - world.vel[idx][:, None, :]
    if extra is not None:
        out[..., 4] = extra[safe]
    out[..., -1] = 1.0
    out[~valid] = 0.0
    return out


def slot_ids(world, perception, idx, caps):
    idx = np.asarray(idx, dtype=np.int64)
    ally = _nearest(perception.ally[idx], perception.dist[idx], caps.allies)
    enemy = _nearest(perception.enemy[idx], perception.dist[idx], caps.enemies)
    obst = _nearest(perception.obstacle[idx], perception.obstacle_dist[idx], caps.obstacles)
    return ally, enemy, obst


def lower_observations(world, perception, idx, caps=SlotCapacity()):
    """Stacked lower-layer observation vectors for agents ``idx``."""
    idx = np.asarray(idx, dtype=np.int64)
    ally, enemy, obst = slot_ids(world, perception, idx, caps)
    parts = [
        world.pos[idx], world.vel[idx],
        _slots(world, idx, ally).reshape(len(idx), -1),
        _slots(world, idx, enemy).reshape(len(idx), -1),
    ]
    ob = np.zeros((len(idx), caps.obstacles, SLOT))
    valid = obst >= 0
    if world.obstacles.circles.shape[0]:
        centres = world.obstacles.circles[np.where(valid, obst, 0)]
        ob[..., 0:2] = centres - world.pos[idx][:, None, :]
        ob[..., 4] = 1.0
        ob[~valid] = 0.0
    parts.append(ob.reshape(len(idx), -1))
    return np.concatenate(parts, axis=1)


def upper_observations(world, perception, idx, caps=SlotCapacity()):
    """Stacked upper-layer observation vectors; enemy task codes are never included."""
    idx = np.asarray(idx, dtype=np.int64)
    ally, enemy, _ = slot_ids(world, perception, idx, caps)
    task = world.task.astype(np.float64)
    parts = [
        world.pos[idx], world.vel[idx], task[idx][:, None],
        _slots(world, idx, ally, extra=task).reshape(len(idx), -1),
        _slots(world, idx, enemy).reshape(len(idx), -1),
    ]
    return np.concatenate(parts, axis=1)


@dataclass
class LowerObservation:
    self_pos: np.ndarray
    self_vel: np.ndarray
    allies: np.ndarray  # (K_a, 5)
    enemies: np.ndarray  # (K_e, 5)
    obstacles: np.ndarray  # (K_o, 5)

    def vector(self):
        return np.concatenate([self.self_pos, self.self_vel, self.allies.ravel(),
                               self.enemies.ravel(), self.obstacles.ravel()])

    @classmethod
    def from_vector(cls, vec, caps=SlotCapacity()):
        lay = ObsLayout(caps)
        return cls(vec[0:2].copy(), vec[2:4].copy(),
                   vec[lay.lower_ally].reshape(caps.allies, SLOT).copy(),
                   vec[lay.lower_enemy].reshape(caps.enemies, SLOT).copy(),
                   vec[lay.lower_obstacle].reshape(caps.obstacles, SLOT).copy())


@dataclass
class UpperObservation:
    self_pos: np.ndarray
    self_vel: np.ndarray
    self_task: float
    allies: np.ndarray  # (K_a, 6)
    enemies: np.ndarray  # (K_e, 5)

    def vector(self):
        return np.concatenate([self.self_pos, self.self_vel, [self.self_task],
                               self.allies.ravel(), self.enemies.ravel()])

    @classmethod
    def from_vector(cls, vec, caps=SlotCapacity()):
        lay = ObsLayout(caps)
        return cls(vec[0:2].copy(), vec[2:4].copy(), float(vec[4]),
                   vec[lay.upper_ally].reshape(caps.allies, UPPER_ALLY_SLOT).copy(),
                   vec[lay.upper_enemy].reshape(caps.enemies, SLOT).copy())


def build_lower_observation(world, i, caps=SlotCapacity(), perception=None):
    if not world.alive[i]:
        raise ValueError(f"agent {i} is dead")
    perc = perception if perception is not None else perceive(world)
    return LowerObservation.from_vector(lower_observations(world, perc, [i], caps)[0], caps)


def build_upper_observation(world, i, caps=SlotCapacity(), perception=None):
    if not world.alive[i]:
        raise ValueError(f"agent {i} is dead")
    perc = perception if perception is not None else perceive(world)
    return UpperObservation.from_vector(upper_observations(world, perc, [i], caps)[0], caps)


def apply_uncertainty(obs, loss_rate, noise_sigma, rng, kind="lower", caps=SlotCapacity()):
    """Message loss on ally slots plus relative Gaussian noise on kinematic fields.

    ``obs`` is one vector or a (B, D) stack. Each ally slot is dropped
    (zeroed, mask 0) with probability ``loss_rate``; every populated
    position/velocity component x becomes x * (1 + noise_sigma * N(0, 1)).
    Zero rates return an unchanged copy without consuming randomness.
    """
    if not 0.0 <= loss_rate <= 1.0:
        raise ValueError("loss_rate must lie in [0, 1]")
    if noise_sigma < 0:
        raise ValueError("noise_sigma must be non-negative")
    single = np.ndim(obs) == 1
    out = np.array(obs, dtype=np.float64, ndmin=2)
    if loss_rate == 0.0 and noise_sigma == 0.0:
        return out[0] if single else out
    lay = ObsLayout(caps)
    b = out.shape[0]
    if kind == "lower":
        blocks = [(lay.lower_ally, SLOT, True), (lay.lower_enemy, SLOT, False),
                  (lay.lower_obstacle, SLOT, False)]
    elif kind == "upper":
        blocks = [(lay.upper_ally, UPPER_ALLY_SLOT, True), (lay.upper_enemy, SLOT, False)]
    else:
        raise ValueError(f"unknown observation kind {kind!r}")

    if loss_rate > 0.0:
        sl, width, _ = blocks[0]
        view = out[:, sl].reshape(b, -1, width)
        drop = rng.random(view.shape[:2]) < loss_rate
        view[drop] = 0.0
        out[:, sl] = view.reshape(b, -1)

    if noise_sigma > 0.0:
        noise = rng.standard_normal(out.shape)
        scale = np.zeros_like(out)
        scale[:, 0:4] = 1.0
        for sl, width, _ in blocks:
            view = out[:, sl].reshape(b, -1, width)
            s = np.zeros_like(view)
            s[..., 0:4] = view[..., -1:]  # only populated slots
            scale[:, sl] = s.reshape(b, -1)
        out = out * (1.0 + noise_sigma * noise * scale)
    return out[0] if single else out
