"""Metric CSVs, JSONL replays and run manifests."""

import csv
import hashlib
import json
import os
import sys
from dataclasses import asdict, dataclass, field

import numpy as np

from .. import __version__

SCHEMA_VERSION = 1

TRAIN_COLUMNS = (
    "schema_version", "episode", "instance", "steps", "win", "blue_survivors", "red_survivors",
    "blue_kills", "collisions", "lower_return", "upper_return", "critic_loss", "actor_loss",
    "q_loss", "subgoal_ratio", "epsilon", "noise", "lower_updates", "upper_updates",
)
EVAL_COLUMNS = (
    "schema_version", "instance", "seed", "n_blue", "n_red", "steps", "win", "blue_survivors",
    "red_survivors", "blue_kills", "collisions", "lower_return", "upper_return",
)
TIMING_COLUMNS = ("schema_version", "run", "episode", "decision_steps", "mean_decision_time_s", "wall_time_s")


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".10g")
    return str(v)


def export_metrics(rows, path, columns):
    """Write ``rows`` (dicts) as CSV; an empty run still gets the header."""
    directory = os.path.dirname(os.path.abspath(path))
    if not os.path.isdir(directory) or not os.access(directory, os.W_OK):
        raise OSError(f"cannot write metrics to {path}")
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            full = {"schema_version": SCHEMA_VERSION, **row}
            writer.writerow([_fmt(full.get(c, "")) for c in columns])
    return path


def read_metrics(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def frame(world):
    """JSON-ready snapshot of a world."""
    return {
        "step": int(world.step_index),
        "pos": np.round(world.pos, 6).tolist(),
        "vel": np.round(world.vel, 6).tolist(),
        "heading": np.round(world.heading, 6).tolist(),
        "team": world.team.tolist(),
        "task": world.task.tolist(),
        "alive": world.alive.astype(int).tolist(),
    }


def export_replay(frames, path, meta=None):
    """One JSON object per line: optional meta header excluded, one line per state."""
    directory = os.path.dirname(os.path.abspath(path))
    if not os.path.isdir(directory) or not os.access(directory, os.W_OK):
        raise OSError(f"cannot write replay to {path}")
    with open(path, "w") as fh:
        for f in frames:
            rec = dict(f)
            if meta and f is frames[0]:
                rec["meta"] = meta
            fh.write(json.dumps(rec, sort_keys=True) + "\n")
    return path


def load_replay(path):
    with open(path) as fh:
        return [json.loads(line) for line in fh if line.strip()]


def replay_survivors(frames):
    """(blue, red) survivors in the final frame."""
    last = frames[-1]
    team = np.array(last["team"])
    alive = np.array(last["alive"], dtype=bool)
    return int(np.sum(alive & (team == 0))), int(np.sum(alive & (team == 1)))


def config_hash(payload):
    blob = json.dumps(payload, sort_keys=True, default=str).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


@dataclass
class RunManifest:
    command: str
    seed: int
    config: dict
    outputs: dict = field(default_factory=dict)
    argv: list = field(default_factory=lambda: list(sys.argv))
    code_version: str = __version__
    config_hash: str = ""

    def __post_init__(self):
        if not self.config_hash:
            self.config_hash = config_hash({"command": self.command, "seed": self.seed, "config": self.config})

    def write(self, directory):
        os.makedirs(directory, exist_ok=True)
        path = os.path.join(directory, "run_manifest.json")
        with open(path, "w") as fh:
            json.dump(asdict(self), fh, indent=2, sort_keys=True, default=str)
        return path

    @classmethod
    def read(cls, directory):
        with open(os.path.join(directory, "run_manifest.json")) as fh:
            return cls(**json.load(fh))
