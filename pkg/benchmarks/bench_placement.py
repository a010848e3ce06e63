"""Benchmark the compiled placement kernel against the pure-Python
fallback.

Two views:
  * micro: forward_plan on planner-sized instances (the call both the
    schedule pass and the forward planner sit on);
  * macro: the full four-policy comparison on the default 773-job
    workload, run once per backend in a subprocess so the import-time
    backend selection applies.

Usage: python benchmarks/bench_placement.py [--macro]
"""

import argparse
import os
import random
import subprocess
import sys
import time

from tailtrim.placement import _forward_plan_py

try:
    from tailtrim._placement_cy import forward_plan as forward_plan_cy
except ImportError:
    forward_plan_cy = None


def make_instance(rng, node_count, pending):
    avail = [rng.randint(0, 5000) for _ in range(node_count)]
    requests = [(rng.randint(1, max(1, node_count // 2)), rng.randint(60, 1440))
                for _ in range(pending)]
    return avail, requests


def best_of(fn, instances, repeats=5):
    best = float("inf")
    for _ in range(repeats):
        start = time.perf_counter()
        for avail, requests in instances:
            fn(avail, requests)
        best = min(best, time.perf_counter() - start)
    return best


def micro():
    rng = random.Random(0)
    print(f"{'instance':>24} {'pure':>10} {'cython':>10} {'speedup':>8}")
    for node_count, pending, n in [(20, 400, 50), (20, 50, 400),
                                   (64, 400, 50), (256, 800, 10)]:
        instances = [make_instance(rng, node_count, pending) for _ in range(n)]
        pure = best_of(_forward_plan_py, instances)
        label = f"{node_count} nodes x {pending} jobs"
        if forward_plan_cy is None:
            print(f"{label:>24} {pure:>9.3f}s {'n/a':>10} {'n/a':>8}")
            continue
        compiled = best_of(forward_plan_cy, instances)
        print(f"{label:>24} {pure:>9.3f}s {compiled:>9.3f}s "
              f"{pure / compiled:>7.1f}x")


MACRO_SNIPPET = """
import time
from tailtrim import ClusterConfig, PolicyKind, run_simulation, synthesize_paper_workload
from tailtrim import placement
specs = synthesize_paper_workload(0)
start = time.perf_counter()
for policy in PolicyKind:
    run_simulation(specs, ClusterConfig(), policy)
print(f"{placement.BACKEND}: {time.perf_counter() - start:.2f}s")
"""


def macro():
    print("full four-policy comparison, 773 jobs, 20 nodes:", flush=True)
    for pure in ("0", "1"):
        env = dict(os.environ, TAILTRIM_PURE=pure)
        subprocess.run([sys.executable, "-c", MACRO_SNIPPET], env=env,
                       check=True)


if __name__ == "__main__":
    parser = argparse.ArgumentParser()
    parser.add_argument("--macro", action="store_true",
                        help="also time full simulation runs per backend")
    args = parser.parse_args()
    micro()
    if args.macro:
        macro()
