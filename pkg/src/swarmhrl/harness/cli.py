"""``swarmhrl`` command line: scenario, train, eval, sweep, bench.

Exit codes: 0 success, 2 configuration error, 3 training divergence.
Log verbosity comes from ``SWARMHRL_LOG_LEVEL`` (default WARNING).
"""

import argparse
import json
import logging
import os
import sys

import numpy as np

from .io import RunManifest, export_metrics, frame
from .scenario import ScenarioError, generate_scenario, load_scenario

EXIT_OK, EXIT_CONFIG, EXIT_DIVERGED = 0, 2, 3

log = logging.getLogger("swarmhrl")


def _sizes(text):
    if "-" in text:
        lo, hi = (int(v) for v in text.split("-", 1))
        return list(range(lo, hi + 1))
    return [int(v) for v in text.split(",")]


def build_parser():
    p = argparse.ArgumentParser(prog="swarmhrl", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, out_required=True):
        sp.add_argument("--scenario", default="v3", help="YAML/JSON path or bundled name (v3, v5, v9, ...)")
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--out", required=out_required, help="output directory")

    sc = sub.add_parser("scenario", help="generate one instance and write it as JSON")
    common(sc)

    tr = sub.add_parser("train", help="cross-train both layers")
    common(tr)
    tr.add_argument("--opponent", default="random", help="expert | heuristic | random | mirror:PATH")
    tr.add_argument("--episodes", type=int, default=60)
    tr.add_argument("--steps", type=int, default=300)
    tr.add_argument("--instances", type=int, default=100)
    tr.add_argument("--h", type=int, default=10, help="subtask length in steps")
    tr.add_argument("--eps1", type=float, default=0.5, help="avoidance weight in the lower reward")
    tr.add_argument("--no-feedback", action="store_true", help="drop lower rewards from the upper reward")
    tr.add_argument("--vanilla-dqn", action="store_true", help="max-based targets instead of double DQN")
    tr.add_argument("--omniscient-planner", action="store_true", help="predictor tracks every enemy")
    tr.add_argument("--checkpoint-every", type=int, default=0)

    ev = sub.add_parser("eval", help="greedy evaluation of a checkpoint")
    common(ev)
    ev.add_argument("--checkpoint", required=True)
    ev.add_argument("--opponent", default="random")
    ev.add_argument("--instances", type=int, default=100)
    ev.add_argument("--steps", type=int, default=300)
    ev.add_argument("--loss-rate", type=float, default=0.0, help="ally message loss probability")
    ev.add_argument("--noise-sigma", type=float, default=0.0, help="relative sensor noise std")
    ev.add_argument("--omniscient-planner", action="store_true")
    ev.add_argument("--replay", action="store_true", help="write one JSONL replay per instance")

    sw = sub.add_parser("sweep", help="evaluate a fixed checkpoint across team sizes")
    common(sw)
    sw.add_argument("--checkpoint", required=True)
    sw.add_argument("--opponent", default="random")
    sw.add_argument("--sizes", type=_sizes, default=list(range(10, 21)), help="e.g. 10-20 or 10,15,20")
    sw.add_argument("--instances", type=int, default=100)
    sw.add_argument("--steps", type=int, default=300)
    sw.add_argument("--omniscient-planner", action="store_true")

    bn = sub.add_parser("bench", help="time the compiled and numpy kernels")
    bn.add_argument("--repeat", type=int, default=20)
    return p


def _load_model(path, omniscient):
    from ..hrl import HrlModel

    model = HrlModel.load(path)
    if omniscient:
        model.cfg.predictor.omniscient = True
    return model


def _cmd_scenario(args, spec):
    world = generate_scenario(spec, args.seed)
    RunManifest("scenario", args.seed, {"scenario": spec.to_dict()},
                {"world": "world.json"}).write(args.out)
    payload = frame(world)
    payload["obstacles"] = {"rects": world.obstacles.rects.tolist(), "circles": world.obstacles.circles.tolist(),
                            "radius": world.obstacles.radius}
    with open(os.path.join(args.out, "world.json"), "w") as fh:
        json.dump(payload, fh, indent=2)
    print(f"wrote {os.path.join(args.out, 'world.json')}")


def _cmd_train(args, spec):
    from ..trainer import TrainConfig, cross_train

    cfg = TrainConfig(scenario=spec, episodes=args.episodes, steps=args.steps, h=args.h,
                      instances=args.instances, seed=args.seed, opponent=args.opponent,
                      eps1=args.eps1, feedback=not args.no_feedback, double=not args.vanilla_dqn,
                      omniscient_planner=args.omniscient_planner, checkpoint_every=args.checkpoint_every)
    RunManifest("train", args.seed, cfg.to_dict(), {"metrics": "metrics.csv", "timing": "timing.csv",
                                                   "checkpoint": "checkpoint"}).write(args.out)
    res = cross_train(cfg, args.out)
    wins = np.mean([r["win"] for r in res.rows[-10:]])
    print(f"trained {cfg.episodes} episodes ({res.lower_updates} lower / {res.upper_updates} upper updates); "
          f"last-10 win rate {wins:.2f}; checkpoint in {res.checkpoint}")


def _cmd_eval(args, spec):
    from ..trainer import evaluate

    RunManifest("eval", args.seed, {"scenario": spec.to_dict(), "checkpoint": args.checkpoint,
                                    "opponent": args.opponent, "instances": args.instances,
                                    "loss_rate": args.loss_rate, "noise_sigma": args.noise_sigma},
                {"metrics": "eval_metrics.csv", "timing": "eval_timing.csv"}).write(args.out)
    model = _load_model(args.checkpoint, args.omniscient_planner)
    res = evaluate(model, spec, args.instances, args.opponent, args.seed, args.steps,
                   args.loss_rate, args.noise_sigma, out_dir=args.out,
                   replay_dir=os.path.join(args.out, "replays") if args.replay else None)
    print(f"win rate {res.win_rate:.3f}  mean return {res.mean_return:.2f}  "
          f"decision time {1e3 * res.mean_decision_time:.3f} ms/step")


def _cmd_sweep(args, spec):
    from ..trainer import generalization_sweep

    RunManifest("sweep", args.seed, {"scenario": spec.to_dict(), "checkpoint": args.checkpoint,
                                     "sizes": args.sizes, "instances": args.instances},
                {"table": "sweep.csv"}).write(args.out)
    model = _load_model(args.checkpoint, args.omniscient_planner)
    table = generalization_sweep(model, spec, args.sizes, args.instances, args.opponent, args.seed, args.steps)
    export_metrics(table, os.path.join(args.out, "sweep.csv"),
                   ("schema_version", "size", "win_rate", "mean_return", "mean_decision_time_s"))
    for row in table:
        print(f"V{row['size']}: win rate {row['win_rate']:.3f}")


def _cmd_bench(args):
    from .bench import run_benchmarks

    for line in run_benchmarks(args.repeat):
        print(line)


def main(argv=None):
    level = os.environ.get("SWARMHRL_LOG_LEVEL", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(asctime)s %(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    from ..trainer import DivergenceError

    try:
        if args.command == "bench":
            _cmd_bench(args)
            return EXIT_OK
        spec = load_scenario(args.scenario)
        handler = {"scenario": _cmd_scenario, "train": _cmd_train, "eval": _cmd_eval, "sweep": _cmd_sweep}
        handler[args.command](args, spec)
    except DivergenceError as exc:
        print(f"error: training diverged: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    except (ScenarioError, ValueError, OSError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
