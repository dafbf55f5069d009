"""Two-layer team policy: model container, runtime controller, mirror opponent.

A controller always works in a team-canonical view where its own agents
are team 0 (blue). Red is driven through ``World.mirrored()``, so a single
trained model can play either side and self-play is exactly symmetric.
"""

import json
import os
from dataclasses import asdict, dataclass, field

import numpy as np

from .lower import LowerConfig, LowerPolicy
from .nn import load_nets, restore_adam, save_nets
from .predict import GlobalPlanner, PredictorConfig
from .sim.config import EngagementConfig, SlotCapacity, TaskKind, Team
from .sim.perception import apply_uncertainty, lower_observations, upper_observations
from .sim.world import mirror_heading
from .upper import UpperAction, UpperConfig, UpperPolicy, feasible_actions, resolve_subgoal, select_task

MODEL_FORMAT = "swarmhrl-model"
MODEL_VERSION = 1


@dataclass
class HrlConfig:
    n_agents: int
    caps: SlotCapacity = field(default_factory=SlotCapacity)
    engagement: EngagementConfig = field(default_factory=EngagementConfig)
    lower: LowerConfig = field(default_factory=LowerConfig)
    upper: UpperConfig = field(default_factory=UpperConfig)
    predictor: PredictorConfig = field(default_factory=PredictorConfig)

    def to_dict(self):
        d = asdict(self)
        d["lower"]["hidden"] = list(self.lower.hidden)
        d["upper"]["hidden"] = list(self.upper.hidden)
        return d

    @classmethod
    def from_dict(cls, d):
        lower = dict(d["lower"])
        lower["hidden"] = tuple(lower["hidden"])
        upper = dict(d["upper"])
        upper["hidden"] = tuple(upper["hidden"])
        return cls(
            n_agents=int(d["n_agents"]), caps=SlotCapacity(**d["caps"]),
            engagement=EngagementConfig(**d["engagement"]), lower=LowerConfig(**lower),
            upper=UpperConfig(**upper), predictor=PredictorConfig(**d["predictor"]),
        )


class HrlModel:
    """Networks of both layers for one team of ``n_agents``."""

    def __init__(self, cfg, rng=None):
        rng = rng if rng is not None else np.random.default_rng()
        self.cfg = cfg
        v_max = cfg.engagement.v_max
        self.lower = LowerPolicy(cfg.n_agents, cfg.caps, v_max, cfg.lower, rng)
        self.upper = UpperPolicy(cfg.n_agents, cfg.caps, v_max, cfg.upper, rng)

    def save(self, directory, extra=None):
        """Write ``manifest.json`` + ``nets.npz`` into ``directory``."""
        os.makedirs(directory, exist_ok=True)
        nets = {**{f"lower/{k}": v for k, v in self.lower.nets().items()},
                **{f"upper/{k}": v for k, v in self.upper.nets().items()}}
        opts = {**{f"lower/{k}": v for k, v in self.lower.optimizers().items()},
                **{f"upper/{k}": v for k, v in self.upper.optimizers().items()}}
        save_nets(os.path.join(directory, "nets.npz"), nets, opts)
        manifest = {"format": MODEL_FORMAT, "version": MODEL_VERSION, "config": self.cfg.to_dict(),
                    "lower_updates": self.lower.updates, "upper_updates": self.upper.updates,
                    "files": {"nets": "nets.npz"}, **(extra or {})}
        with open(os.path.join(directory, "manifest.json"), "w") as fh:
            json.dump(manifest, fh, indent=2, sort_keys=True)

    @classmethod
    def load(cls, directory):
        with open(os.path.join(directory, "manifest.json")) as fh:
            manifest = json.load(fh)
        if manifest.get("format") != MODEL_FORMAT or manifest.get("version") != MODEL_VERSION:
            raise ValueError(f"{directory}: unsupported model manifest")
        model = cls(HrlConfig.from_dict(manifest["config"]), np.random.default_rng(0))
        nets, opts, _ = load_nets(os.path.join(directory, manifest["files"]["nets"]))
        for layer, holder in (("lower", model.lower), ("upper", model.upper)):
            mine = holder.nets()
            for k, net in mine.items():
                src = nets[f"{layer}/{k}"]
                if src.sizes != net.sizes:
                    raise ValueError(f"{directory}: {layer}/{k} has sizes {src.sizes}, expected {net.sizes}")
                net.params = src.params
            for k in holder.optimizers():
                if f"{layer}/{k}" in opts:
                    restored = restore_adam(mine[k], opts[f"{layer}/{k}"])
                    if layer == "lower":
                        idx = int(k.lstrip("actorcritic"))
                        (holder.actor_opts if k.startswith("actor") else holder.critic_opts)[idx] = restored
                    else:
                        holder.opts[int(k[1:])] = restored
        model.lower.updates = manifest.get("lower_updates", 0)
        model.upper.updates = manifest.get("upper_updates", 0)
        return model

    def check_compatible(self, caps):
        if caps != self.cfg.caps:
            raise ValueError(f"slot capacities {caps} do not match the checkpoint's {self.cfg.caps}")


@dataclass
class Decision:
    agent: int
    local: int
    obs: np.ndarray  # scaled upper features
    mask: np.ndarray
    action: UpperAction


class TeamController:
    """Runs both layers for team 0 of a (possibly mirrored) world view.

    Holds the per-subtask state: subgoals, positions at subtask start and the
    latest upper decisions. ``loss_rate``/``noise_sigma`` inject communication
    and sensor uncertainty into the network inputs.
    """

    def __init__(self, model, obstacles, planner_rng, loss_rate=0.0, noise_sigma=0.0, noise_rng=None):
        self.model = model
        cfg = model.cfg
        self.caps = cfg.caps
        self.h = cfg.upper.h
        self.planner = GlobalPlanner(cfg.predictor, cfg.engagement, obstacles, planner_rng)
        self.loss_rate = loss_rate
        self.noise_sigma = noise_sigma
        self.noise_rng = noise_rng if noise_rng is not None else np.random.default_rng(0)
        self.ids = None

    def reset(self, view, obstacles=None):
        if obstacles is not None:
            self.planner.obstacles = obstacles
        self.planner.tracks = {}
        self.ids = view.members(0, alive_only=False)
        n = view.n
        self.subgoal = view.pos.copy()
        self.start = view.pos.copy()
        self.choice = np.full(n, int(UpperAction.SEARCH_OR_ESCAPE))
        self.local = {int(i): k for k, i in enumerate(self.ids)}

    def _noisy(self, obs, kind):
        if self.loss_rate == 0.0 and self.noise_sigma == 0.0:
            return obs
        return apply_uncertainty(obs, self.loss_rate, self.noise_sigma, self.noise_rng, kind, self.caps)

    def observe(self, view, perception):
        self.planner.observe(view, perception, team=0)

    def decide(self, view, perception, eps=0.0, rng=None):
        """Upper-layer step for every live agent; updates subgoals and task flags."""
        live = view.members(0)
        if live.size == 0:
            return [], np.zeros(0, dtype=np.int64)
        up = self.model.upper
        obs = up.features(self._noisy(upper_observations(view, perception, live, self.caps), "upper"))
        decisions = []
        tasks = np.zeros(len(live), dtype=np.int64)
        for row, i in enumerate(live):
            k = self.local[int(i)]
            mask = feasible_actions(view, perception, i)
            action = select_task(up.qnet(k), obs[row], mask, eps, rng)
            goal, task = resolve_subgoal(action, view, perception, i, self.planner)
            self.subgoal[i] = goal
            self.start[i] = view.pos[i]
            self.choice[i] = int(action)
            tasks[row] = int(task)
            decisions.append(Decision(int(i), k, obs[row], mask, action))
        return decisions, tasks

    def upper_features(self, view, perception, ids):
        return self.model.upper.features(upper_observations(view, perception, ids, self.caps))

    def lower_features(self, view, perception, ids):
        obs = self._noisy(lower_observations(view, perception, ids, self.caps), "lower")
        return self.model.lower.features(obs, self.subgoal[ids], self.start[ids])

    def act(self, view, perception, noise=0.0, rng=None):
        """``(ids, actions, features)`` for the live agents of team 0."""
        live = view.members(0)
        if live.size == 0:
            return live, np.zeros((0, 2)), np.zeros((0, self.model.lower.feat_dim))
        feats = self.lower_features(view, perception, live)
        local = [self.local[int(i)] for i in live]
        return live, self.model.lower.act(feats, local, noise, rng), feats


class MirrorOpponent:
    """Frozen model playing red through the mirrored view."""

    def __init__(self, model, team=Team.RED):
        self.model = model
        self.team = int(team)
        self.controller = None
        self.t = 0

    @classmethod
    def from_checkpoint(cls, path, caps=None, **_):
        model = HrlModel.load(path)
        if caps is not None:
            model.check_compatible(caps)
        return cls(model)

    def _view(self, world):
        return world.mirrored() if self.team == Team.RED else world

    def reset(self, world, rng):
        view = self._view(world)
        self.controller = TeamController(self.model, view.obstacles, rng)
        self.controller.reset(view)
        self.rng = rng

    def act(self, world, perception, t):
        view = self._view(world)
        ctl = self.controller
        ctl.observe(view, perception)
        tasks_all = world.task.copy()
        if t % ctl.h == 0:
            _, tasks = ctl.decide(view, perception, eps=0.0, rng=self.rng)
            tasks_all[view.members(0)] = tasks
        ids, actions, _ = ctl.act(view, perception, 0.0, self.rng)
        if self.team == Team.RED:
            actions = actions.copy()
            actions[:, 1] = mirror_heading(actions[:, 1])
        return ids, actions, tasks_all[ids]
