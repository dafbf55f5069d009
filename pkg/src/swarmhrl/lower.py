"""Lower layer: MADDPG path planning toward upper-layer subgoals.

Each agent owns an actor reading only its local observation plus subgoal,
and a centralized critic reading every agent's (observation, subgoal,
action). Dead agents occupy zeroed slots with a 0 alive bit.
"""

import logging
import math
from dataclasses import dataclass

import numpy as np

from .nn import Adam, make_mlp, sync_target
from .nn.mlp import HIDDEN
from .replay import ReplayBuffer
from .sim.perception import SLOT, ObsLayout

log = logging.getLogger(__name__)

POS_SCALE = 10.0


def wrap(a):
    return (np.asarray(a) + math.pi) % (2 * math.pi) - math.pi


@dataclass
class LowerConfig:
    gamma: float = 0.99
    lr: float = 1e-3
    actor_lr: float | None = 1e-4  # None: same as lr
    batch: int = 64
    buffer: int = 100_000
    eps1: float = 0.5
    eps_den: float = 1e-6
    intrinsic_clip: float = 5.0
    noise_start: float = 0.3
    noise_end: float = 0.05
    target_every: int = 100
    tau: float | None = None
    action_code: str = "polar"
    heading_frame: str = "goal"
    heading_prior: float = 10.0
    hidden: tuple = HIDDEN


def avoidance_reward(collided):
    return -1.0 if collided else 0.0


def intrinsic_reward(p_now, p_start, subgoal, eps_den=1e-6):
    """Remaining distance to the subgoal relative to its distance at subtask start."""
    q = np.asarray(subgoal, dtype=np.float64)
    num = np.linalg.norm(q - np.asarray(p_now, dtype=np.float64), axis=-1)
    den = np.linalg.norm(q - np.asarray(p_start, dtype=np.float64), axis=-1)
    return -num / np.maximum(den, eps_den)


def lower_reward(r_a, r_b, eps1):
    """Team reward: sum over agents of eps1 * r_a + (1 - eps1) * r_b."""
    if not 0.0 <= eps1 <= 1.0:
        raise ValueError("eps1 must lie in [0, 1]")
    r_a = np.asarray(r_a, dtype=np.float64)
    r_b = np.asarray(r_b, dtype=np.float64)
    return float(np.sum(eps1 * r_a + (1.0 - eps1) * r_b))


def obs_scale(layout, v_max):
    """Per-component divisor that brings lower observations to O(1)."""
    s = np.ones(layout.lower_dim)
    s[0:2] = POS_SCALE
    s[2:4] = v_max
    for sl in (layout.lower_ally, layout.lower_enemy, layout.lower_obstacle):
        block = s[sl].reshape(-1, SLOT)
        block[:, 0:2] = POS_SCALE
        block[:, 2:4] = v_max
        s[sl] = block.ravel()
    return s


class LowerPolicy:
    """Per-agent actors and centralized critics with their target copies."""

    def __init__(self, n_agents, caps, v_max, cfg=None, rng=None):
        self.cfg = cfg or LowerConfig()
        self.n = n_agents
        self.caps = caps
        self.v_max = v_max
        self.layout = ObsLayout(caps)
        self.scale = obs_scale(self.layout, v_max)
        self.feat_dim = self.layout.lower_dim + 4
        if self.cfg.action_code not in ("raw", "polar"):
            raise ValueError(f"unknown action_code {self.cfg.action_code!r}")
        if self.cfg.heading_frame not in ("goal", "world"):
            raise ValueError(f"unknown heading_frame {self.cfg.heading_frame!r}")
        self.code_dim = 7 if self.cfg.action_code == "polar" else 2
        self.block = self.feat_dim + 1 + self.code_dim
        self.joint_dim = n_agents * self.block
        rng = rng if rng is not None else np.random.default_rng()
        bounds = (np.array([0.0, -math.pi]), np.array([v_max, math.pi]))
        h = self.cfg.hidden
        self.actors = [make_mlp(self.feat_dim, 2, rng, bounds=bounds, hidden=h) for _ in range(n_agents)]
        self.critics = [make_mlp(self.joint_dim, 1, rng, hidden=h) for _ in range(n_agents)]
        self.target_actors = [a.copy() for a in self.actors]
        self.target_critics = [c.copy() for c in self.critics]
        actor_lr = self.cfg.lr if self.cfg.actor_lr is None else self.cfg.actor_lr
        self.actor_opts = [Adam(a, lr=actor_lr) for a in self.actors]
        self.critic_opts = [Adam(c, lr=self.cfg.lr) for c in self.critics]
        self.buffer = None
        self.updates = 0
        self.skipped = 0

    # -- features -----------------------------------------------------------

    def features(self, obs, subgoal, start=None):
        """Actor input: scaled observation, relative subgoal vector, its length
        and the subgoal distance at subtask start (the intrinsic reward's
        denominator; taken equal to the current distance when ``start`` is None).
        """
        obs = np.atleast_2d(obs)
        goal = np.atleast_2d(subgoal)
        rel = (goal - obs[:, 0:2]) / POS_SCALE
        dist = np.linalg.norm(rel, axis=1, keepdims=True)
        if start is None:
            d0 = dist
        else:
            d0 = np.linalg.norm(goal - np.atleast_2d(start), axis=1, keepdims=True) / POS_SCALE
        return np.concatenate([obs / self.scale, rel, dist, d0], axis=1)

    def normalize(self, actions):
        a = np.asarray(actions, dtype=np.float64)
        half = 0.5 * self.v_max
        return np.stack([(a[..., 0] - half) / half, a[..., 1] / math.pi], axis=-1)

    def bearing(self, feats):
        """Bearing of the subgoal read back from the feature rows."""
        d = self.layout.lower_dim
        return np.arctan2(feats[..., d + 1], feats[..., d])

    def to_world(self, raw, feats):
        """Map raw actor output to a world-frame ``(speed, heading)`` action.

        In the ``goal`` frame the actor's heading output is an offset from
        the subgoal bearing, so "straight at the goal" is the zero output.
        """
        if self.cfg.heading_frame == "world":
            return raw
        out = np.array(raw, dtype=np.float64, copy=True)
        out[..., 1] = wrap(out[..., 1] + self.bearing(feats))
        return out

    def encode(self, act_norm, feats):
        """Critic-side action code.

        ``polar`` expands (speed, heading) into speed, cos and sin of the
        heading, the scaled velocity, and the scaled velocity in the subgoal
        frame. That removes the heading wrap-around and makes progress
        toward the subgoal linear in the code. ``raw`` passes the normalized pair.
        """
        if self.cfg.action_code == "raw":
            return act_norm
        sn = act_norm[..., 0]
        psi = math.pi * act_norm[..., 1]
        s = 0.5 * (sn + 1.0)
        c, si = np.cos(psi), np.sin(psi)
        rel = psi - self.bearing(feats)
        return np.stack([sn, c, si, s * c, s * si, s * np.cos(rel), s * np.sin(rel)], axis=-1)

    def encode_grad(self, act_norm, feats, g):
        """Chain a gradient w.r.t. the action code back to the normalized action."""
        if self.cfg.action_code == "raw":
            return g
        sn = act_norm[..., 0]
        psi = math.pi * act_norm[..., 1]
        s = 0.5 * (sn + 1.0)
        c, si = np.cos(psi), np.sin(psi)
        rel = psi - self.bearing(feats)
        cr, sr = np.cos(rel), np.sin(rel)
        d_sn = g[..., 0] + 0.5 * (c * g[..., 3] + si * g[..., 4] + cr * g[..., 5] + sr * g[..., 6])
        d_psi = (-si * g[..., 1] + c * g[..., 2] - s * si * g[..., 3] + s * c * g[..., 4]
                 - s * sr * g[..., 5] + s * cr * g[..., 6])
        return np.stack([d_sn, math.pi * d_psi], axis=-1)

    def joint_input(self, feats, alive, act_norm):
        """Critic input (B, N * (F + 1 + C)) from (B, N, F) features and (B, N, 2) actions."""
        alive = alive[..., None]
        block = np.concatenate([alive, feats * alive, self.encode(act_norm, feats) * alive], axis=-1)
        return block.reshape(block.shape[0], -1)

    # -- acting -------------------------------------------------------------

    def select_action(self, i, feat, noise_sigma=0.0, rng=None):
        """Bounded ``(speed, heading)`` for agent i; noise is added before the squash."""
        noise = None
        if noise_sigma > 0.0:
            noise = noise_sigma * rng.standard_normal(2)
        return self.to_world(self.actors[i % self.n].forward(feat, pre_noise=noise)[0], feat)

    def act(self, feats, agent_ids, noise_sigma=0.0, rng=None):
        out = np.zeros((len(agent_ids), 2))
        for row, i in enumerate(agent_ids):
            out[row] = self.select_action(i, feats[row], noise_sigma, rng)
        return out

    # -- learning -----------------------------------------------------------

    def make_buffer(self):
        n, f = self.n, self.feat_dim
        self.buffer = ReplayBuffer(self.cfg.buffer, {
            "feats": (n, f), "alive": (n,), "act": (n, 2), "reward": (),
            "next_feats": (n, f), "next_alive": (n,), "done": (),
        })
        return self.buffer

    def target_joint_actions(self, feats, alive):
        acts = np.zeros(feats.shape[:2] + (2,))
        for k in range(self.n):
            acts[:, k] = self.normalize(self.to_world(self.target_actors[k](feats[:, k]), feats[:, k]))
        return acts * alive[..., None]

    def critic_targets(self, batch, gamma):
        if gamma == 0.0:
            return batch["reward"].copy()
        nxt = self.target_joint_actions(batch["next_feats"], batch["next_alive"])
        x_next = self.joint_input(batch["next_feats"], batch["next_alive"], nxt)
        boot = np.stack([c(x_next)[:, 0] for c in self.target_critics], axis=1)
        return batch["reward"][:, None] + gamma * (1.0 - batch["done"][:, None]) * boot

    def critic_update(self, batch, gamma=None):
        """One squared-TD step per critic; returns the per-agent losses."""
        gamma = self.cfg.gamma if gamma is None else gamma
        y = self.critic_targets(batch, gamma)
        if y.ndim == 1:
            y = np.repeat(y[:, None], self.n, axis=1)
        x = self.joint_input(batch["feats"], batch["alive"], batch["act"])
        losses = np.zeros(self.n)
        b = x.shape[0]
        for i, (critic, opt) in enumerate(zip(self.critics, self.critic_opts)):
            q, cache = critic.forward(x)
            err = q[:, 0] - y[:, i]
            loss = float(np.mean(err * err))
            losses[i] = loss
            if not math.isfinite(loss):
                self.skipped += 1
                log.warning("non-finite critic loss for agent %d; skipped", i)
                continue
            grads, _ = critic.backward(cache, (2.0 * err / b)[:, None])
            opt.step(critic, grads)
        return losses

    def actor_update(self, batch):
        """Ascend each agent's critic w.r.t. its own action; returns -mean Q per agent."""
        feats, alive = batch["feats"], batch["alive"]
        losses = np.zeros(self.n)
        f = self.feat_dim
        half = np.array([0.5 * self.v_max, math.pi])
        for i in range(self.n):
            rows = alive[:, i] > 0
            if not rows.any():
                continue
            act_raw, a_cache = self.actors[i].forward(feats[:, i])
            acts = batch["act"].copy()
            own = self.normalize(self.to_world(act_raw, feats[:, i]))
            acts[:, i] = own
            x = self.joint_input(feats, alive, acts)
            q, c_cache = self.critics[i].forward(x)
            w = rows / rows.sum()
            losses[i] = -float(np.sum(w * q[:, 0]))
            _, dx = self.critics[i].backward(c_cache, -w[:, None])
            start = i * self.block + 1 + f
            # the goal-frame shift is additive in heading, so d(heading)/d(output) = 1
            d_act = self.encode_grad(own, feats[:, i], dx[:, start:start + self.code_dim]) / half
            if self.cfg.heading_frame == "goal" and self.cfg.heading_prior > 0.0:
                # quadratic pull of the heading offset toward the subgoal bearing
                off = act_raw[:, 1] / math.pi
                losses[i] += self.cfg.heading_prior * float(np.sum(w * off * off))
                d_act[:, 1] += self.cfg.heading_prior * 2.0 * w * off / math.pi
            grads, _ = self.actors[i].backward(a_cache, d_act)
            self.actor_opts[i].step(self.actors[i], grads)
        return losses

    def update(self, rng):
        """Sample a minibatch, update critics then actors, refresh targets on schedule."""
        batch = self.buffer.sample(self.cfg.batch, rng)
        c_loss = self.critic_update(batch)
        a_loss = self.actor_update(batch)
        self.updates += 1
        self.sync_targets()
        return c_loss, a_loss

    def sync_targets(self, force=False):
        if self.cfg.tau is not None:
            for s, t in zip(self.actors + self.critics, self.target_actors + self.target_critics):
                sync_target(s, t, self.cfg.tau)
        elif force or self.updates % self.cfg.target_every == 0:
            for s, t in zip(self.actors + self.critics, self.target_actors + self.target_critics):
                sync_target(s, t)

    def noise_at(self, progress):
        c = self.cfg
        return c.noise_start + (c.noise_end - c.noise_start) * min(max(progress, 0.0), 1.0)

    # -- persistence --------------------------------------------------------

    def nets(self):
        out = {}
        for i in range(self.n):
            out[f"actor{i}"] = self.actors[i]
            out[f"critic{i}"] = self.critics[i]
            out[f"target_actor{i}"] = self.target_actors[i]
            out[f"target_critic{i}"] = self.target_critics[i]
        return out

    def optimizers(self):
        out = {}
        for i in range(self.n):
            out[f"actor{i}"] = self.actor_opts[i]
            out[f"critic{i}"] = self.critic_opts[i]
        return out
