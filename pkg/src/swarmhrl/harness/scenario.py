"""Scenario specifications and seeded world generation."""

import json
import math
import os
from dataclasses import asdict, dataclass, field, fields
from importlib import resources

import numpy as np
import yaml

from ..sim.config import EngagementConfig, ObstacleSet, SlotCapacity, TaskKind, Team
from ..sim.world import World, detect_collisions, mirror_heading


class ScenarioError(ValueError):
    """Invalid or infeasible scenario specification."""


@dataclass
class ScenarioSpec:
    """Everything needed to generate reproducible engagement instances.

    ``obstacles`` lists explicit rectangles ``(cx, cy, w, h)``; when it is
    empty, ``n_obstacles`` random rectangles are drawn per instance.
    Spawn regions are ``(xmin, ymin, xmax, ymax)``; ``None`` means the whole
    arena. With ``symmetric`` the red team and the obstacles are mirror
    images of blue's about the vertical centre line.
    """

    name: str = "custom"
    n_blue: int = 3
    n_red: int = 3
    obstacles: list = field(default_factory=list)
    n_obstacles: int = 3
    obstacle_size: tuple = (1.0, 3.0)
    blue_region: tuple | None = None
    red_region: tuple | None = None
    symmetric: bool = False
    min_separation: float = 5.0
    max_attempts: int = 10_000
    engagement: dict = field(default_factory=dict)
    caps: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.n_blue < 1 or self.n_red < 1:
            raise ScenarioError("team sizes must be >= 1")
        if self.symmetric and self.n_blue != self.n_red:
            raise ScenarioError("symmetric scenarios need equal team sizes")
        if self.n_obstacles < 0 or self.min_separation < 0:
            raise ScenarioError("n_obstacles and min_separation must be non-negative")
        lo, hi = self.obstacle_size
        if not 0 < lo <= hi:
            raise ScenarioError("obstacle_size must satisfy 0 < min <= max")
        self.obstacle_size = (float(lo), float(hi))
        self.obstacles = [tuple(float(v) for v in r) for r in self.obstacles]
        for r in self.obstacles:
            if len(r) != 4 or r[2] <= 0 or r[3] <= 0:
                raise ScenarioError(f"bad obstacle rectangle {r}")
        for name in ("blue_region", "red_region"):
            reg = getattr(self, name)
            if reg is not None:
                reg = tuple(float(v) for v in reg)
                if len(reg) != 4 or reg[0] >= reg[2] or reg[1] >= reg[3]:
                    raise ScenarioError(f"bad {name} {reg}")
                setattr(self, name, reg)
        try:
            self.engagement_config()
            self.slot_capacity()
        except (TypeError, ValueError) as exc:
            raise ScenarioError(str(exc)) from exc

    def engagement_config(self):
        return EngagementConfig(**self.engagement)

    def slot_capacity(self):
        return SlotCapacity(**self.caps)

    def with_sizes(self, n_blue, n_red=None):
        d = self.to_dict()
        d["n_blue"] = n_blue
        d["n_red"] = n_blue if n_red is None else n_red
        d["name"] = f"{self.name}@{d['n_blue']}v{d['n_red']}"
        return ScenarioSpec.from_dict(d)

    def to_dict(self):
        d = asdict(self)
        d["obstacles"] = [list(r) for r in self.obstacles]
        d["obstacle_size"] = list(self.obstacle_size)
        for k in ("blue_region", "red_region"):
            if d[k] is not None:
                d[k] = list(d[k])
        return d

    @classmethod
    def from_dict(cls, d):
        known = {f.name for f in fields(cls)}
        extra = set(d) - known
        if extra:
            raise ScenarioError(f"unknown scenario keys: {sorted(extra)}")
        d = dict(d)
        if "obstacle_size" in d:
            d["obstacle_size"] = tuple(d["obstacle_size"])
        return cls(**d)


def bundled_scenarios():
    root = resources.files("swarmhrl") / "scenarios"
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".yaml"))


def load_scenario(path_or_name):
    """Load a YAML/JSON spec from a path, or a bundled one by name (``v3``, ``v5``...)."""
    if os.path.exists(path_or_name):
        with open(path_or_name) as fh:
            text = fh.read()
        data = json.loads(text) if path_or_name.endswith(".json") else yaml.safe_load(text)
    else:
        res = resources.files("swarmhrl") / "scenarios" / f"{path_or_name.lower()}.yaml"
        if not res.is_file():
            raise ScenarioError(f"no scenario file or bundled scenario named {path_or_name!r}")
        data = yaml.safe_load(res.read_text())
    if not isinstance(data, dict):
        raise ScenarioError(f"{path_or_name}: expected a mapping")
    return ScenarioSpec.from_dict(data)


def _random_rects(spec, cfg, rng, x_max):
    lo, hi = spec.obstacle_size
    n = spec.n_obstacles
    w = rng.uniform(lo, hi, n)
    h = rng.uniform(lo, hi, n)
    cx = rng.uniform(w / 2, x_max - w / 2)
    cy = rng.uniform(h / 2, cfg.height - h / 2)
    return np.stack([cx, cy, w, h], axis=1)


def _place(n, region, rng, ok, budget, what):
    """Rejection-sample ``n`` points in ``region``; ``ok(p, placed)`` vets each."""
    placed = []
    attempts = 0
    while len(placed) < n:
        p = rng.uniform(region[:2], region[2:])
        attempts += 1
        if ok(p, placed):
            placed.append(p)
            attempts = 0
        elif attempts >= budget:
            raise ScenarioError(f"could not place {what} {len(placed) + 1}/{n} "
                                f"within {budget} attempts; spec is infeasible")
    return np.array(placed).reshape(n, 2)


def generate_scenario(spec, seed):
    """Seeded world for ``spec``: obstacles first, then collision-free spawns."""
    cfg = spec.engagement_config()
    rng = np.random.default_rng(seed)
    w, hgt = cfg.width, cfg.height
    if spec.obstacles:
        rects = np.array(spec.obstacles, dtype=np.float64)
    elif spec.symmetric:
        half = _random_rects(spec, cfg, rng, w / 2)
        mirror = half.copy()
        mirror[:, 0] = w - mirror[:, 0]
        rects = np.concatenate([half, mirror])
    else:
        rects = _random_rects(spec, cfg, rng, w)
    obstacles = ObstacleSet.from_rects(rects, cfg.obstacle_radius)
    clearance = cfg.avoid_radius + obstacles.radius + 0.05
    gap = 2 * cfg.avoid_radius + 0.05
    circles = obstacles.circles

    def free(p, placed, others=()):
        if circles.shape[0] and np.min(np.linalg.norm(circles - p, axis=1)) < clearance:
            return False
        if placed and np.min(np.linalg.norm(np.array(placed) - p, axis=1)) < gap:
            return False
        if len(others) and np.min(np.linalg.norm(others - p, axis=1)) < spec.min_separation:
            return False
        return True

    arena = (0.0, 0.0, w, hgt)
    blue_region = np.array(spec.blue_region or arena)
    if spec.symmetric:
        # a blue point at x has its mirror at w - x, so keep it at least half the separation left of centre
        blue_region[2] = min(blue_region[2], w / 2 - spec.min_separation / 2)
        if blue_region[0] >= blue_region[2]:
            raise ScenarioError("symmetric spawn region is empty")

        def ok_blue(p, placed):
            return free(p, placed, np.array([[w - q[0], q[1]] for q in placed + [p]]))

        blue = _place(spec.n_blue, blue_region, rng, ok_blue, spec.max_attempts, "blue agent")
        red = blue.copy()
        red[:, 0] = w - red[:, 0]
        hb = rng.uniform(-math.pi, math.pi, spec.n_blue)
        hr = mirror_heading(hb)
    else:
        blue = _place(spec.n_blue, blue_region, rng, free, spec.max_attempts, "blue agent")
        red_region = np.array(spec.red_region or arena)
        red = _place(spec.n_red, red_region, rng, lambda p, placed: free(p, placed, blue),
                     spec.max_attempts, "red agent")
        hb = rng.uniform(-math.pi, math.pi, spec.n_blue)
        hr = rng.uniform(-math.pi, math.pi, spec.n_red)
    n = spec.n_blue + spec.n_red
    world = World(
        pos=np.concatenate([blue, red]), vel=np.zeros((n, 2)),
        heading=np.concatenate([hb, hr]),
        team=np.array([Team.BLUE] * spec.n_blue + [Team.RED] * spec.n_red, dtype=np.int64),
        task=np.full(n, int(TaskKind.SEARCHING), dtype=np.int64),
        alive=np.ones(n, dtype=bool), obstacles=obstacles, config=cfg,
        rng=np.random.default_rng([int(seed), 1]),
    )
    if detect_collisions(world).any():
        raise ScenarioError("generated world starts in collision")
    return world
