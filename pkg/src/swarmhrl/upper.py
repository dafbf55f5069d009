"""Upper layer: decentralized double-DQN task allocation.

Three meta-actions are resolved into a concrete subgoal and task flag:
Chase (nearest visible enemy with positive advantage), Support (nearest
communicable ally that is chasing or escaping) and SearchOrEscape (handed to
the trajectory predictor).
"""

import logging
import math
from dataclasses import dataclass
from enum import IntEnum

import numpy as np

from .lower import POS_SCALE
from .nn import Adam, make_mlp, sync_target
from .nn.mlp import HIDDEN
from .replay import ReplayBuffer
from .sim.config import TaskKind
from .sim.perception import SLOT, UPPER_ALLY_SLOT, ObsLayout

log = logging.getLogger(__name__)


class UpperAction(IntEnum):
    CHASE = 0
    SUPPORT = 1
    SEARCH_OR_ESCAPE = 2


N_ACTIONS = len(UpperAction)


@dataclass
class UpperConfig:
    gamma: float = 0.99
    lr: float = 1e-3
    batch: int = 64
    buffer: int = 100_000
    h: int = 10
    double: bool = True
    feedback: bool = True
    eps_start: float = 1.0
    eps_end: float = 0.05
    eps_decay_fraction: float = 0.5
    target_every: int = 100
    hidden: tuple = HIDDEN


def feasible_actions(world, perception, i):
    """Boolean mask over UpperAction for agent i; SearchOrEscape is always allowed."""
    mask = np.zeros(N_ACTIONS, dtype=bool)
    mask[UpperAction.SEARCH_OR_ESCAPE] = True
    enemies = np.flatnonzero(perception.enemy[i])
    if enemies.size:
        adv = _advantage_row(world, i, enemies)
        mask[UpperAction.CHASE] = bool(np.any(adv > 0))
    allies = np.flatnonzero(perception.ally[i])
    if allies.size:
        mask[UpperAction.SUPPORT] = bool(np.any(np.isin(
            world.task[allies], (TaskKind.ESCAPING, TaskKind.CHASING))))
    return mask


def _advantage_row(world, i, others):
    v = world.vel[i]
    nv = math.hypot(v[0], v[1])
    d = world.pos[others] - world.pos[i]
    nd = np.linalg.norm(d, axis=1)
    out = np.zeros(len(others))
    ok = (nd > 0) & (nv > 0)
    out[ok] = (d[ok] @ v) / (nd[ok] * nv)
    return np.clip(out, -1.0, 1.0)


def _nearest(world, i, ids):
    d = np.linalg.norm(world.pos[ids] - world.pos[i], axis=1)
    # lexsort: distance first, then id
    return int(ids[np.lexsort((ids, d))[0]])


def select_task(qnet, features, mask, eps, rng):
    """Epsilon-greedy over the feasible actions only."""
    feasible = np.flatnonzero(mask)
    if feasible.size == 0:
        raise ValueError("no feasible action")
    if eps > 0.0 and rng.random() < eps:
        return UpperAction(int(feasible[rng.integers(feasible.size)]))
    q = qnet(features)
    q = np.where(mask, q, -np.inf)
    return UpperAction(int(np.argmax(q)))


def resolve_subgoal(action, world, perception, i, planner):
    """Concrete ``(subgoal_xy, TaskKind)`` for agent i under a meta-action."""
    action = UpperAction(action)
    if action == UpperAction.CHASE:
        enemies = np.flatnonzero(perception.enemy[i])
        adv = _advantage_row(world, i, enemies) if enemies.size else np.zeros(0)
        cand = enemies[adv > 0]
        if cand.size == 0:
            raise ValueError("chase chosen without an advantaged visible enemy")
        return world.pos[_nearest(world, i, cand)].copy(), TaskKind.CHASING
    if action == UpperAction.SUPPORT:
        allies = np.flatnonzero(perception.ally[i])
        cand = allies[np.isin(world.task[allies], (TaskKind.ESCAPING, TaskKind.CHASING))]
        if cand.size == 0:
            raise ValueError("support chosen without an eligible ally")
        return world.pos[_nearest(world, i, cand)].copy(), TaskKind.SUPPORTING
    enemies = np.flatnonzero(perception.enemy[i])
    if enemies.size and np.any(_advantage_row(world, i, enemies) < 0):
        return planner.escape_subgoal(world.pos[i]), TaskKind.ESCAPING
    return planner.search_subgoal(world.pos[i]), TaskKind.SEARCHING


def upper_reward(survivors, kills, lower_rewards, feedback=True):
    """Confrontation reward (survivors + kills) plus, with feedback, the summed lower rewards."""
    r_env = float(survivors + kills)
    if not feedback:
        return r_env
    return r_env + float(np.sum(lower_rewards))


def upper_scale(layout, v_max):
    s = np.ones(layout.upper_dim)
    s[0:2] = POS_SCALE
    s[2:4] = v_max
    s[4] = 3.0
    a = s[layout.upper_ally].reshape(-1, UPPER_ALLY_SLOT)
    a[:, 0:2] = POS_SCALE
    a[:, 2:4] = v_max
    a[:, 4] = 3.0
    s[layout.upper_ally] = a.ravel()
    e = s[layout.upper_enemy].reshape(-1, SLOT)
    e[:, 0:2] = POS_SCALE
    e[:, 2:4] = v_max
    s[layout.upper_enemy] = e.ravel()
    return s


class UpperPolicy:
    """Online/target Q-network pair and replay buffer per agent."""

    def __init__(self, n_agents, caps, v_max, cfg=None, rng=None):
        self.cfg = cfg or UpperConfig()
        self.n = n_agents
        self.layout = ObsLayout(caps)
        self.scale = upper_scale(self.layout, v_max)
        self.feat_dim = self.layout.upper_dim
        rng = rng if rng is not None else np.random.default_rng()
        h = self.cfg.hidden
        self.qnets = [make_mlp(self.feat_dim, N_ACTIONS, rng, hidden=h) for _ in range(n_agents)]
        self.targets = [q.copy() for q in self.qnets]
        self.opts = [Adam(q, lr=self.cfg.lr) for q in self.qnets]
        self.buffers = None
        self.updates = 0
        self.skipped = 0

    def features(self, obs):
        return np.atleast_2d(obs) / self.scale

    def qnet(self, i):
        return self.qnets[i % self.n]

    def make_buffers(self):
        f = self.feat_dim
        self.buffers = [ReplayBuffer(self.cfg.buffer, {
            "obs": (f,), "action": (), "reward": (), "next_obs": (f,),
            "next_mask": (N_ACTIONS,), "done": (),
        }) for _ in range(self.n)]
        return self.buffers

    def targets_for(self, i, batch, gamma):
        """Q-targets; double DQN picks a' with the online net and scores it with the target."""
        r = batch["reward"]
        if gamma == 0.0:
            return r.copy()
        mask = batch["next_mask"] > 0
        q_tgt = self.targets[i](batch["next_obs"])
        if self.cfg.double:
            q_on = np.where(mask, self.qnets[i](batch["next_obs"]), -np.inf)
            a_star = np.argmax(q_on, axis=1)
            boot = q_tgt[np.arange(len(r)), a_star]
        else:
            boot = np.max(np.where(mask, q_tgt, -np.inf), axis=1)
        return r + gamma * (1.0 - batch["done"]) * boot

    def dqn_update(self, i, batch, gamma=None):
        gamma = self.cfg.gamma if gamma is None else gamma
        y = self.targets_for(i, batch, gamma)
        q, cache = self.qnets[i].forward(batch["obs"])
        act = batch["action"].astype(np.int64)
        rows = np.arange(len(act))
        err = q[rows, act] - y
        loss = float(np.mean(err * err))
        if not math.isfinite(loss):
            self.skipped += 1
            log.warning("non-finite DQN loss for agent %d; skipped", i)
            return loss
        g = np.zeros_like(q)
        g[rows, act] = 2.0 * err / len(act)
        grads, _ = self.qnets[i].backward(cache, g)
        self.opts[i].step(self.qnets[i], grads)
        return loss

    def update(self, rng):
        losses = []
        for i in range(self.n):
            buf = self.buffers[i]
            if len(buf) == 0:
                continue
            losses.append(self.dqn_update(i, buf.sample(self.cfg.batch, rng)))
        self.updates += 1
        if self.updates % self.cfg.target_every == 0:
            for q, t in zip(self.qnets, self.targets):
                sync_target(q, t)
        return float(np.mean(losses)) if losses else float("nan")

    def epsilon_at(self, progress):
        c = self.cfg
        frac = min(max(progress / c.eps_decay_fraction, 0.0), 1.0) if c.eps_decay_fraction > 0 else 1.0
        return c.eps_start + (c.eps_end - c.eps_start) * frac

    def nets(self):
        out = {}
        for i in range(self.n):
            out[f"q{i}"] = self.qnets[i]
            out[f"q_target{i}"] = self.targets[i]
        return out

    def optimizers(self):
        return {f"q{i}": self.opts[i] for i in range(self.n)}
