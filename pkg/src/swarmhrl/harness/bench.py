"""Timing of the compiled kernels against the numpy fallback."""

import time

import numpy as np

from .._kernels import backends


def _cases(rng):
    n, c = 18, 120
    pos = rng.uniform((0, 0), (30, 20), (n, 2))
    heading = rng.uniform(-np.pi, np.pi, n)
    team = np.repeat([0, 1], n // 2).astype(np.int64)
    alive = np.ones(n, dtype=bool)
    circles = rng.uniform((0, 0), (30, 20), (c, 2))
    pts = rng.uniform((0, 0), (30, 20), (480, 2))
    m, steps = 8, 20
    p0 = rng.uniform((0, 0), (30, 20), (m, 2))
    v0 = rng.uniform(-2, 2, (m, 2))
    acc = rng.normal(0, 1, (m, 2))
    jitter = rng.normal(0, 0.1, (m, steps))
    return {
        "visibility(18 agents, 120 circles)": lambda k: k.visibility(pos, heading, team, alive, circles, 0.3, 5.0, 5.0),
        "average_linkage(480 points)": lambda k: k.average_linkage(pts),
        "rollout(8 x 20 steps)": lambda k: k.rollout(p0, v0, acc, jitter, circles, 0.6, 0.1, 2.0, 30.0, 20.0),
    }


def time_call(fn, repeat):
    fn()
    best = float("inf")
    for _ in range(repeat):
        tic = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - tic)
    return best


def run_benchmarks(repeat=20, seed=0):
    """Yield one formatted line per (kernel, backend) with the best-of-``repeat`` time."""
    mods = backends()
    for name, call in _cases(np.random.default_rng(seed)).items():
        times = {b: time_call(lambda m=m: call(m), repeat) for b, m in mods.items()}
        parts = [f"{b} {1e3 * t:8.3f} ms" for b, t in times.items()]
        if "cython" in times:
            parts.append(f"speedup x{times['python'] / times['cython']:.1f}")
        yield f"{name:36s} " + "  ".join(parts)
