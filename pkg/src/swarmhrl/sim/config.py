"""Engagement constants, enums and the obstacle container."""

from dataclasses import dataclass, field, fields, replace
from enum import IntEnum
import math

import numpy as np


class TaskKind(IntEnum):
    SEARCHING = -3
    ESCAPING = -2
    SUPPORTING = -1
    CHASING = 0


class Team(IntEnum):
    BLUE = 0
    RED = 1


@dataclass(frozen=True)
class EngagementConfig:
    """Physical and sensing constants shared by both teams.

    ``attack_angle`` is the full opening of the attack sector; an opponent is
    inside the sector when its bearing is within ``attack_angle / 2`` of the
    attacker's heading.
    """

    attack_radius: float = 1.0
    attack_angle: float = math.pi / 2
    hit_prob: float = 0.5
    avoid_radius: float = 0.3
    obstacle_radius: float = 0.3
    sense_length: float = 5.0
    sense_width: float = 5.0
    v_max: float = 2.0
    dt: float = 0.1
    width: float = 30.0
    height: float = 20.0

    def __post_init__(self):
        for f in fields(self):
            value = getattr(self, f.name)
            if f.name == "hit_prob":
                continue
            if not (math.isfinite(value) and value > 0):
                raise ValueError(f"{f.name} must be positive and finite, got {value!r}")
        if not 0.0 <= self.hit_prob <= 1.0:
            raise ValueError("hit_prob must lie in [0, 1]")
        if self.attack_angle > 2 * math.pi:
            raise ValueError("attack_angle must lie in (0, 2*pi]")

    @property
    def arena(self):
        return (self.width, self.height)

    def with_overrides(self, **kw):
        return replace(self, **kw)


@dataclass(frozen=True)
class SlotCapacity:
    """Fixed neighbour-slot counts; these set every network input size."""

    allies: int = 4
    enemies: int = 4
    obstacles: int = 6


@dataclass
class ObstacleSet:
    """Axis-aligned rectangles and the circles that cover them.

    ``rects`` rows are ``(cx, cy, width, height)``; ``circles`` rows are
    circle centres, all of radius ``radius``.
    """

    rects: np.ndarray = field(default_factory=lambda: np.zeros((0, 4)))
    circles: np.ndarray = field(default_factory=lambda: np.zeros((0, 2)))
    radius: float = 0.3

    @classmethod
    def from_rects(cls, rects, radius):
        from .geometry import cover_rectangle

        rects = np.asarray(rects, dtype=np.float64).reshape(-1, 4)
        circles = [cover_rectangle(r, radius) for r in rects]
        circles = np.concatenate(circles) if circles else np.zeros((0, 2))
        return cls(rects=rects, circles=circles, radius=radius)

    def __len__(self):
        return self.circles.shape[0]

    def mirrored(self, width):
        rects = self.rects.copy()
        rects[:, 0] = width - rects[:, 0]
        circles = self.circles.copy()
        circles[:, 0] = width - circles[:, 0]
        return ObstacleSet(rects=rects, circles=circles, radius=self.radius)
