"""Compare the compiled kernels with the numpy fallback.

Run with ``python3 benchmarks/bench_kernels.py [--repeat N]``.
"""

import argparse

from swarmhrl._kernels import BACKEND
from swarmhrl.harness.bench import run_benchmarks

if __name__ == "__main__":
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=20)
    args = ap.parse_args()
    print(f"active backend: {BACKEND}")
    for line in run_benchmarks(args.repeat):
        print(line)
