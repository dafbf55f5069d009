"""Cross-training schedule, greedy evaluation and size sweeps.

The lower layer takes one gradient step per environment step; the upper
layer takes one per completed subtask of ``h`` steps. Both layers share the
episode loop in ``run_episode``, which also serves evaluation with learning
switched off.
"""

import json
import logging
import math
import os
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from .harness.io import EVAL_COLUMNS, TIMING_COLUMNS, TRAIN_COLUMNS, export_metrics, frame
from .harness.scenario import ScenarioSpec, generate_scenario
from .hrl import HrlConfig, HrlModel, TeamController
from .lower import LowerConfig, intrinsic_reward, lower_reward
from .opponents import make_opponent
from .predict import PredictorConfig
from .sim.config import Team
from .sim.perception import perceive
from .sim.world import step_world
from .upper import N_ACTIONS, UpperConfig, feasible_actions, upper_reward

log = logging.getLogger(__name__)

DIVERGENCE_PATIENCE = 100


class DivergenceError(RuntimeError):
    """Losses stayed non-finite for too many consecutive updates."""


@dataclass
class TrainConfig:
    scenario: ScenarioSpec = field(default_factory=ScenarioSpec)
    episodes: int = 60
    steps: int = 300
    h: int = 10
    gamma: float = 0.99
    lr: float = 1e-3
    batch: int = 64
    buffer: int = 100_000
    instances: int = 100
    seed: int = 0
    opponent: str = "random"
    eps1: float = 0.5
    feedback: bool = True
    double: bool = True
    update_lower: bool = True
    update_upper: bool = True
    omniscient_planner: bool = False
    checkpoint_every: int = 0
    lower: dict = field(default_factory=dict)
    upper: dict = field(default_factory=dict)
    predictor: dict = field(default_factory=dict)

    def __post_init__(self):
        for name in ("episodes", "steps", "h", "batch", "buffer", "instances"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if not (0.0 <= self.gamma <= 1.0 and self.lr > 0):
            raise ValueError("gamma must lie in [0, 1] and lr must be positive")
        if not 0.0 <= self.eps1 <= 1.0:
            raise ValueError("eps1 must lie in [0, 1]")
        if self.steps % self.h:
            log.warning("steps (%d) is not a multiple of h (%d)", self.steps, self.h)

    def hrl_config(self):
        spec = self.scenario
        # per-layer dicts override the shared values
        lower = LowerConfig(**{"gamma": self.gamma, "lr": self.lr, "batch": self.batch, "buffer": self.buffer,
                               "eps1": self.eps1, **self.lower})
        upper = UpperConfig(**{"gamma": self.gamma, "lr": self.lr, "batch": self.batch, "buffer": self.buffer,
                               "h": self.h, "double": self.double, "feedback": self.feedback, **self.upper})
        predictor = PredictorConfig(**{"omniscient": self.omniscient_planner, **self.predictor})
        return HrlConfig(n_agents=spec.n_blue, caps=spec.slot_capacity(),
                         engagement=spec.engagement_config(), lower=lower, upper=upper,
                         predictor=predictor)

    def to_dict(self):
        d = asdict(self)
        d["scenario"] = self.scenario.to_dict()
        return d


@dataclass
class EpisodeStats:
    steps: int = 0
    win: bool = False
    blue_survivors: int = 0
    red_survivors: int = 0
    blue_kills: int = 0
    collisions: int = 0
    lower_return: float = 0.0
    upper_return: float = 0.0
    decision_time: float = 0.0
    decision_steps: int = 0
    critic_losses: list = field(default_factory=list)
    actor_losses: list = field(default_factory=list)
    q_losses: list = field(default_factory=list)
    subgoal_ratios: list = field(default_factory=list)

    @property
    def mean_decision_time(self):
        return self.decision_time / self.decision_steps if self.decision_steps else float("nan")


@dataclass
class Learning:
    """Per-episode learning switches and counters for ``run_episode``."""

    eps: float
    noise: float
    update_lower: bool = True
    update_upper: bool = True
    lower_updates: int = 0
    upper_updates: int = 0
    bad_streak: int = 0


class _Subtask:
    """Open upper-layer decisions plus what accumulates until they close."""

    def __init__(self):
        self.decisions = []
        self.lower_sum = 0.0
        self.kills = 0

    def reset(self, decisions):
        self.decisions = decisions
        self.lower_sum = 0.0
        self.kills = 0


def _derive_rngs(seed, *names):
    children = np.random.SeedSequence(seed).spawn(len(names))
    return {n: np.random.default_rng(c) for n, c in zip(names, children)}


def _close_subtask(model, ctl, sub, world, perc, terminal, learn, stats, rng):
    """Store the subtask's upper transitions and run one upper update."""
    if not sub.decisions:
        return
    ids = np.array([d.agent for d in sub.decisions])
    live = world.alive[ids]
    if live.any():
        # remaining fraction of the subgoal distance at subtask end
        done = ids[live]
        gap = np.linalg.norm(ctl.subgoal[done] - world.pos[done], axis=1)
        start = np.linalg.norm(ctl.subgoal[done] - ctl.start[done], axis=1)
        stats.subgoal_ratios.append(float(np.mean(gap / np.maximum(start, model.cfg.lower.eps_den))))
    up = model.upper
    blue_alive = world.survivors()[0]
    r_u = upper_reward(blue_alive, sub.kills, [sub.lower_sum], model.cfg.upper.feedback)
    stats.upper_return += r_u
    if learn is None:
        return
    nxt = np.zeros((len(ids), up.feat_dim))
    if live.any():
        nxt[live] = ctl.upper_features(world, perc, ids[live])
    for row, d in enumerate(sub.decisions):
        dead = not world.alive[d.agent]
        mask = np.ones(N_ACTIONS, dtype=bool) if dead else feasible_actions(world, perc, d.agent)
        up.buffers[d.local].add(obs=d.obs, action=int(d.action), reward=r_u, next_obs=nxt[row],
                                next_mask=mask, done=float(terminal or dead))
    if learn.update_upper:
        before = up.skipped
        loss = up.update(rng)
        learn.upper_updates += 1
        stats.q_losses.append(loss)
        _track_divergence(learn, up.skipped > before)


def _track_divergence(learn, bad):
    learn.bad_streak = learn.bad_streak + 1 if bad else 0
    if learn.bad_streak >= DIVERGENCE_PATIENCE:
        raise DivergenceError(f"losses non-finite for {learn.bad_streak} consecutive updates")


def run_episode(model, world, opponent, steps, rngs, learn=None, controller=None,
                loss_rate=0.0, noise_sigma=0.0, record=None):
    """Play one engagement with blue driven by ``model``; returns EpisodeStats.

    ``learn`` switches on exploration, replay storage and the update
    schedule. ``record`` (a list) receives one replay frame per state.
    ``rngs`` needs ``planner``, ``act``, ``opponent``, ``sample`` and
    ``uncertainty`` generators.
    """
    cfg = model.cfg
    lower, h = model.lower, cfg.upper.h
    ctl = controller or TeamController(model, world.obstacles, rngs["planner"], loss_rate,
                                       noise_sigma, rngs["uncertainty"])
    ctl.reset(world, world.obstacles)
    opponent.reset(world, rngs["opponent"])
    stats = EpisodeStats()
    sub = _Subtask()
    eps = learn.eps if learn else 0.0
    noise = learn.noise if learn else 0.0
    clip = cfg.lower.intrinsic_clip
    n_blue = len(ctl.ids)
    if record is not None:
        record.append(frame(world))
    perc = perceive(world)
    terminal = False
    for t in range(steps):
        tic = time.perf_counter()
        ctl.observe(world, perc)
        if t % h == 0:
            if t > 0:
                stats.decision_time += time.perf_counter() - tic
                _close_subtask(model, ctl, sub, world, perc, False, learn, stats, rngs["sample"])
                tic = time.perf_counter()
            decisions, tasks = ctl.decide(world, perc, eps, rngs["act"])
            sub.reset(decisions)
            world.task[world.members(Team.BLUE)] = tasks
        ids, actions, feats = ctl.act(world, perc, noise, rngs["act"])
        stats.decision_time += time.perf_counter() - tic
        stats.decision_steps += 1

        red_ids, red_actions, red_tasks = opponent.act(world, perc, t)
        joint = np.zeros((world.n, 2))
        joint[ids] = actions
        joint[red_ids] = red_actions
        tasks_all = world.task.copy()
        tasks_all[red_ids] = red_tasks
        nxt, ev = step_world(world, joint, tasks_all)
        next_perc = perceive(nxt)

        r_a = -(ev.collisions[ids] | ev.boundary[ids]).astype(np.float64)
        r_b = intrinsic_reward(nxt.pos[ids], ctl.start[ids], ctl.subgoal[ids], cfg.lower.eps_den)
        if clip is not None:
            r_b = np.maximum(r_b, -clip)
        r_l = lower_reward(r_a, r_b, cfg.lower.eps1)
        kills = ev.kills_by(Team.BLUE, world.team)
        sub.lower_sum += r_l
        sub.kills += kills
        stats.lower_return += r_l
        stats.blue_kills += kills
        stats.collisions += int(ev.collisions[ids].sum())

        if learn is not None:
            local = np.array([ctl.local[int(i)] for i in ids], dtype=np.int64)
            f = lower.feat_dim
            cur = np.zeros((n_blue, f))
            cur[local] = feats
            alive = np.zeros(n_blue)
            alive[local] = 1.0
            act = np.zeros((n_blue, 2))
            act[local] = lower.normalize(actions)
            nids = nxt.members(Team.BLUE)
            nloc = np.array([ctl.local[int(i)] for i in nids], dtype=np.int64)
            nfeat = np.zeros((n_blue, f))
            nalive = np.zeros(n_blue)
            if nids.size:
                nfeat[nloc] = ctl.lower_features(nxt, next_perc, nids)
                nalive[nloc] = 1.0
            lower.buffer.add(feats=cur, alive=alive, act=act, reward=r_l, next_feats=nfeat,
                             next_alive=nalive, done=float(ev.terminal))
            if learn.update_lower:
                before = lower.skipped
                c_loss, a_loss = lower.update(rngs["sample"])
                learn.lower_updates += 1
                stats.critic_losses.append(float(np.mean(c_loss)))
                stats.actor_losses.append(float(np.mean(a_loss)))
                _track_divergence(learn, lower.skipped > before)

        world, perc = nxt, next_perc
        stats.steps = t + 1
        if record is not None:
            record.append(frame(world))
        if ev.terminal:
            terminal = True
            break
    if terminal or stats.steps % h == 0:
        _close_subtask(model, ctl, sub, world, perc, terminal, learn, stats, rngs["sample"])
    stats.blue_survivors, stats.red_survivors = world.survivors()
    # timeouts count as blue losses
    stats.win = stats.red_survivors == 0 and stats.blue_survivors > 0
    return stats


@dataclass
class TrainResult:
    model: HrlModel
    rows: list
    timing: list
    lower_updates: int
    upper_updates: int
    checkpoint: str | None = None


def _mean(xs):
    finite = [x for x in xs if math.isfinite(x)]
    return float(np.mean(finite)) if finite else float("nan")


def cross_train(config, out_dir=None, model=None, progress=None):
    """Train blue for ``config.episodes`` episodes on round-robin instances.

    Writes ``metrics.csv``, ``timing.csv`` and ``checkpoint/`` under
    ``out_dir`` when given.
    """
    spec = config.scenario
    rngs = _derive_rngs(config.seed, "init", "instances", "planner", "act", "opponent", "sample",
                        "uncertainty")
    instance_seeds = rngs["instances"].integers(0, 2**31 - 1, size=config.instances)
    model = model or HrlModel(config.hrl_config(), rngs["init"])
    if model.cfg.n_agents != spec.n_blue:
        raise ValueError(f"model has {model.cfg.n_agents} agents, scenario has {spec.n_blue}")
    model.check_compatible(spec.slot_capacity())
    model.lower.make_buffer()
    model.upper.make_buffers()
    opponent = make_opponent(config.opponent, caps=spec.slot_capacity())
    rows, timing = [], []
    lower_updates = upper_updates = 0
    ckpt = os.path.join(out_dir, "checkpoint") if out_dir else None
    for e in range(config.episodes):
        progress_frac = e / max(config.episodes - 1, 1)
        learn = Learning(eps=model.upper.epsilon_at(progress_frac), noise=model.lower.noise_at(progress_frac),
                         update_lower=config.update_lower, update_upper=config.update_upper)
        inst = e % config.instances
        world = generate_scenario(spec, int(instance_seeds[inst]))
        tic = time.perf_counter()
        try:
            stats = run_episode(model, world, opponent, config.steps, rngs, learn)
        except DivergenceError as exc:
            if out_dir:
                _dump_divergence(out_dir, e, model, rows, exc)
            raise
        wall = time.perf_counter() - tic
        lower_updates += learn.lower_updates
        upper_updates += learn.upper_updates
        rows.append({
            "episode": e, "instance": inst, "steps": stats.steps, "win": stats.win,
            "blue_survivors": stats.blue_survivors, "red_survivors": stats.red_survivors,
            "blue_kills": stats.blue_kills, "collisions": stats.collisions,
            "lower_return": stats.lower_return, "upper_return": stats.upper_return,
            "critic_loss": _mean(stats.critic_losses), "actor_loss": _mean(stats.actor_losses),
            "q_loss": _mean(stats.q_losses), "subgoal_ratio": _mean(stats.subgoal_ratios),
            "epsilon": learn.eps, "noise": learn.noise,
            "lower_updates": lower_updates, "upper_updates": upper_updates,
        })
        timing.append({"run": "train", "episode": e, "decision_steps": stats.decision_steps,
                       "mean_decision_time_s": stats.mean_decision_time, "wall_time_s": wall})
        log.info("episode %d: win=%d steps=%d R_l=%.2f R_u=%.2f", e, stats.win, stats.steps,
                 stats.lower_return, stats.upper_return)
        if progress:
            progress(e, rows[-1])
        if ckpt and config.checkpoint_every and (e + 1) % config.checkpoint_every == 0:
            model.save(ckpt, {"episode": e + 1})
    if out_dir:
        os.makedirs(out_dir, exist_ok=True)
        export_metrics(rows, os.path.join(out_dir, "metrics.csv"), TRAIN_COLUMNS)
        export_metrics(timing, os.path.join(out_dir, "timing.csv"), TIMING_COLUMNS)
        model.save(ckpt, {"episode": config.episodes})
    return TrainResult(model, rows, timing, lower_updates, upper_updates, ckpt)


def _dump_divergence(out_dir, episode, model, rows, exc):
    os.makedirs(out_dir, exist_ok=True)
    dump = {"episode": episode, "error": str(exc), "lower_updates": model.lower.updates,
            "upper_updates": model.upper.updates, "lower_skipped": model.lower.skipped,
            "upper_skipped": model.upper.skipped, "last_rows": rows[-5:]}
    with open(os.path.join(out_dir, "divergence.json"), "w") as fh:
        json.dump(dump, fh, indent=2, default=str)
    model.save(os.path.join(out_dir, "diverged_checkpoint"))


@dataclass
class EvalResult:
    mean_return: float
    win_rate: float
    mean_decision_time: float
    rows: list
    timing: list


def evaluate(model, spec, n_instances=100, opponent="random", seed=0, steps=300,
             loss_rate=0.0, noise_sigma=0.0, out_dir=None, replay_dir=None):
    """Greedy evaluation of ``model`` as blue on fresh instances of ``spec``.

    Returns mean upper return, win rate and mean per-step decision time.
    """
    model.check_compatible(spec.slot_capacity())
    opp = make_opponent(opponent, caps=spec.slot_capacity()) if isinstance(opponent, str) else opponent
    rngs = _derive_rngs([seed, 7], "instances", "planner", "act", "opponent", "sample", "uncertainty")
    seeds = rngs["instances"].integers(0, 2**31 - 1, size=n_instances)
    rows, timing = [], []
    total_time = 0.0
    total_steps = 0
    for k in range(n_instances):
        world = generate_scenario(spec, int(seeds[k]))
        record = [] if replay_dir else None
        stats = run_episode(model, world, opp, steps, rngs, None, loss_rate=loss_rate,
                            noise_sigma=noise_sigma, record=record)
        if record is not None:
            from .harness.io import export_replay

            os.makedirs(replay_dir, exist_ok=True)
            export_replay(record, os.path.join(replay_dir, f"instance_{k:04d}.jsonl"),
                          {"seed": int(seeds[k]), "scenario": spec.name})
        total_time += stats.decision_time
        total_steps += stats.decision_steps
        rows.append({
            "instance": k, "seed": int(seeds[k]), "n_blue": spec.n_blue, "n_red": spec.n_red,
            "steps": stats.steps, "win": stats.win, "blue_survivors": stats.blue_survivors,
            "red_survivors": stats.red_survivors, "blue_kills": stats.blue_kills,
            "collisions": stats.collisions, "lower_return": stats.lower_return,
            "upper_return": stats.upper_return,
        })
        timing.append({"run": f"eval:{spec.name}", "episode": k, "decision_steps": stats.decision_steps,
                       "mean_decision_time_s": stats.mean_decision_time, "wall_time_s": ""})
    result = EvalResult(
        mean_return=float(np.mean([r["upper_return"] for r in rows])) if rows else float("nan"),
        win_rate=float(np.mean([r["win"] for r in rows])) if rows else float("nan"),
        mean_decision_time=total_time / total_steps if total_steps else float("nan"),
        rows=rows, timing=timing,
    )
    if out_dir:
        os.makedirs(out_dir, exist_ok=True)
        export_metrics(rows, os.path.join(out_dir, "eval_metrics.csv"), EVAL_COLUMNS)
        export_metrics(timing, os.path.join(out_dir, "eval_timing.csv"), TIMING_COLUMNS)
    return result


def generalization_sweep(model, spec, sizes=range(10, 21), n_instances=100, opponent="random",
                         seed=0, steps=300):
    """Win rate of a fixed model for each team size in ``sizes`` (n vs n)."""
    table = []
    for n in sizes:
        res = evaluate(model, spec.with_sizes(n), n_instances, opponent, seed, steps)
        table.append({"size": n, "win_rate": res.win_rate, "mean_return": res.mean_return,
                      "mean_decision_time_s": res.mean_decision_time})
    return table


@dataclass
class MatchResult:
    blue_wins: int
    red_wins: int
    draws: int  # timeouts and mutual elimination

    @property
    def games(self):
        return self.blue_wins + self.red_wins + self.draws

    @property
    def score(self):
        """Blue's symmetric score: wins count 1, draws 1/2."""
        return (self.blue_wins + 0.5 * self.draws) / self.games if self.games else float("nan")


def head_to_head(spec, blue, red, n_instances=200, seed=0, steps=300):
    """Play two scripted/frozen policies against each other on fresh instances.

    ``blue`` and ``red`` follow the opponent protocol (``reset``, ``act``)
    and must be bound to their team. Unlike ``evaluate`` a timeout is a
    draw, so swapping the two sides mirrors the result.
    """
    rngs = _derive_rngs([seed, 11], "instances", "blue", "red")
    seeds = rngs["instances"].integers(0, 2**31 - 1, size=n_instances)
    res = MatchResult(0, 0, 0)
    for k in range(n_instances):
        world = generate_scenario(spec, int(seeds[k]))
        blue.reset(world, rngs["blue"])
        red.reset(world, rngs["red"])
        perc = perceive(world)
        for t in range(steps):
            joint = np.zeros((world.n, 2))
            tasks = world.task.copy()
            for side in (blue, red):
                ids, actions, side_tasks = side.act(world, perc, t)
                joint[ids] = actions
                tasks[ids] = side_tasks
            world, ev = step_world(world, joint, tasks)
            perc = perceive(world)
            if ev.terminal:
                break
        b, r = world.survivors()
        if b > 0 and r == 0:
            res.blue_wins += 1
        elif r > 0 and b == 0:
            res.red_wins += 1
        else:
            res.draws += 1
    return res
