"""World state and the per-step transition (move, attack, collide)."""

import copy
import math
from dataclasses import dataclass, field

import numpy as np

from .config import EngagementConfig, ObstacleSet, TaskKind, Team


@dataclass(frozen=True)
class AgentState:
    id: int
    team: Team
    position: np.ndarray
    velocity: np.ndarray
    heading: float
    task: TaskKind
    alive: bool


@dataclass
class World:
    """Ground-truth snapshot stored as per-agent arrays.

    Agent ids are row indices. ``heading`` keeps the last non-zero motion
    direction and orients both the sensing rectangle and the attack sector.
    """

    pos: np.ndarray
    vel: np.ndarray
    heading: np.ndarray
    team: np.ndarray
    task: np.ndarray
    alive: np.ndarray
    obstacles: ObstacleSet
    config: EngagementConfig
    step_index: int = 0
    rng: np.random.Generator = field(default_factory=lambda: np.random.default_rng(0))

    @property
    def n(self):
        return self.pos.shape[0]

    def agent(self, i):
        return AgentState(
            id=i, team=Team(int(self.team[i])), position=self.pos[i].copy(),
            velocity=self.vel[i].copy(), heading=float(self.heading[i]),
            task=TaskKind(int(self.task[i])), alive=bool(self.alive[i]),
        )

    def members(self, team, alive_only=True):
        mask = self.team == int(team)
        if alive_only:
            mask &= self.alive
        return np.flatnonzero(mask)

    def survivors(self):
        return (int(np.sum(self.alive & (self.team == Team.BLUE))),
                int(np.sum(self.alive & (self.team == Team.RED))))

    def copy(self):
        return World(
            pos=self.pos.copy(), vel=self.vel.copy(), heading=self.heading.copy(),
            team=self.team.copy(), task=self.task.copy(), alive=self.alive.copy(),
            obstacles=self.obstacles, config=self.config, step_index=self.step_index,
            rng=copy.deepcopy(self.rng),
        )

    def mirrored(self):
        """Team-swapped view reflected about x = width / 2.

        Red sees itself as blue in this view, so one policy can drive either
        side; headings map through psi -> pi - psi.
        """
        w = self.config.width
        pos = self.pos.copy()
        pos[:, 0] = w - pos[:, 0]
        vel = self.vel.copy()
        vel[:, 0] = -vel[:, 0]
        return World(
            pos=pos, vel=vel, heading=mirror_heading(self.heading),
            team=1 - self.team, task=self.task.copy(), alive=self.alive.copy(),
            obstacles=self.obstacles.mirrored(w), config=self.config,
            step_index=self.step_index, rng=self.rng,
        )


def mirror_heading(psi):
    out = np.pi - np.asarray(psi, dtype=np.float64)
    return (out + np.pi) % (2 * np.pi) - np.pi


@dataclass
class StepEvents:
    kills: list
    collisions: np.ndarray
    boundary: np.ndarray
    survivors: tuple
    terminal: bool
    winner: Team | None

    def kills_by(self, team, world_team):
        return sum(1 for a, _ in self.kills if world_team[a] == int(team))


def _check_action(action):
    speed, psi = float(action[0]), float(action[1])
    if not (math.isfinite(speed) and math.isfinite(psi)):
        raise ValueError(f"non-finite action {action!r}")
    return speed, psi


def step_kinematics(agent, action, dt, config=None):
    """First-order motion for one agent; returns the next AgentState.

    ``action`` is ``(speed, heading)``. Speed is clipped to [0, v_max] and
    the position is clamped to the arena when ``config`` is given.
    """
    speed, psi = _check_action(action)
    v_max = config.v_max if config is not None else math.inf
    speed = min(max(speed, 0.0), v_max)
    vel = np.array([speed * math.cos(psi), speed * math.sin(psi)])
    pos = np.asarray(agent.position, dtype=np.float64) + dt * vel
    if config is not None:
        pos = np.clip(pos, [0.0, 0.0], [config.width, config.height])
    heading = psi if speed > 0 else agent.heading
    return AgentState(
        id=agent.id, team=agent.team, position=pos, velocity=vel,
        heading=float(heading), task=agent.task, alive=agent.alive,
    )


def move(world, actions):
    """Vectorised kinematics for every live agent; returns (pos, vel, heading, boundary)."""
    cfg = world.config
    live = world.alive
    act = np.asarray(actions, dtype=np.float64)
    if not np.all(np.isfinite(act[live])):
        raise ValueError("non-finite action for a live agent")
    speed = np.clip(act[:, 0], 0.0, cfg.v_max)
    psi = act[:, 1]
    vel = np.where(live[:, None], np.stack([speed * np.cos(psi), speed * np.sin(psi)], axis=1), 0.0)
    raw = world.pos + cfg.dt * vel
    pos = np.clip(raw, [0.0, 0.0], [cfg.width, cfg.height])
    boundary = np.any(pos != raw, axis=1) & live
    turning = live & (speed > 0)
    heading = np.where(turning, (psi + np.pi) % (2 * np.pi) - np.pi, world.heading)
    return pos, vel, heading, boundary


def sector_matrix(world):
    """in_sector[i, j]: live opponent j lies inside i's attack sector."""
    cfg = world.config
    d = world.pos[None, :, :] - world.pos[:, None, :]
    dist = np.linalg.norm(d, axis=-1)
    u = np.stack([np.cos(world.heading), np.sin(world.heading)], axis=1)
    dot = np.einsum("ijk,ik->ij", d, u)
    cos_half = math.cos(cfg.attack_angle / 2)
    safe = np.where(dist > 0, dist, 1.0)
    in_angle = (dist == 0) | (dot / safe >= cos_half - 1e-12)
    opp = world.team[:, None] != world.team[None, :]
    live = world.alive[:, None] & world.alive[None, :]
    return opp & live & (dist <= cfg.attack_radius) & in_angle


def resolve_attacks(world, rng):
    """Simultaneous attack resolution against the current state.

    Draws one uniform per ordered pair every call so the random stream does
    not depend on geometry. Returns ``[(attacker, target), ...]`` with one
    entry per killed target, credited to the lowest-id successful attacker.
    """
    n = world.n
    draws = rng.random((n, n))
    hits = sector_matrix(world) & (draws < world.config.hit_prob)
    kills = []
    for target in np.flatnonzero(hits.any(axis=0)):
        attacker = int(np.flatnonzero(hits[:, target])[0])
        kills.append((attacker, int(target)))
    return kills


def detect_collisions(world):
    """Per-agent flag: too close to another live agent or to an obstacle circle."""
    cfg = world.config
    live = world.alive
    d = np.linalg.norm(world.pos[:, None, :] - world.pos[None, :, :], axis=-1)
    np.fill_diagonal(d, np.inf)
    d[~live, :] = np.inf
    d[:, ~live] = np.inf
    flags = np.any(d < 2 * cfg.avoid_radius, axis=1)
    circles = world.obstacles.circles
    if circles.shape[0]:
        dc = np.linalg.norm(world.pos[:, None, :] - circles[None, :, :], axis=-1)
        flags |= np.any(dc < cfg.avoid_radius + world.obstacles.radius, axis=1)
    return flags & live


def step_world(world, actions, tasks=None):
    """Advance one step: kinematics, then attacks, then collisions.

    ``actions`` is an (N, 2) array of ``(speed, heading)``; rows of dead
    agents are ignored. The input world is left untouched.
    """
    actions = np.asarray(actions, dtype=np.float64)
    if actions.shape != (world.n, 2):
        raise ValueError(f"expected actions of shape {(world.n, 2)}, got {actions.shape}")
    nxt = world.copy()
    if tasks is not None:
        nxt.task = np.asarray(tasks, dtype=np.int64).copy()
    nxt.pos, nxt.vel, nxt.heading, boundary = move(world, actions)
    kills = resolve_attacks(nxt, nxt.rng)
    for _, target in kills:
        nxt.alive[target] = False
        nxt.vel[target] = 0.0
    collisions = detect_collisions(nxt)
    nxt.step_index = world.step_index + 1
    blue, red = nxt.survivors()
    terminal = blue == 0 or red == 0
    winner = None
    if terminal:
        if red == 0 and blue > 0:
            winner = Team.BLUE
        elif blue == 0 and red > 0:
            winner = Team.RED
    events = StepEvents(kills=kills, collisions=collisions, boundary=boundary & nxt.alive,
                        survivors=(blue, red), terminal=terminal, winner=winner)
    return nxt, events
