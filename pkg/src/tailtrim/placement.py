"""Node placement arithmetic: the hot kernel of the scheduler.

Given per-node availability times, assign each request (in priority
order) the earliest instant at which enough nodes are simultaneously
free, placing it on the lowest-numbered nodes available then. Both the
schedule pass (head-of-queue reservation) and the forward planner run on
this routine, so it dominates simulation time.

A compiled twin (tailtrim._placement_cy, built via Cython) is preferred
at import; the pure-Python implementation below is the fallback and the
semantic reference. Set TAILTRIM_PURE=1 to force the fallback. The two
backends are bit-identical by contract (see tests/test_placement.py).
"""

from __future__ import annotations

import os
from typing import Sequence


def _forward_plan_py(
    avail: Sequence[int], requests: Sequence[tuple[int, int]]
) -> list[tuple[int, tuple[int, ...]]]:
    """For each (node_count, hold_time) request, in order: start at the
    node_count-th smallest availability time, occupy the lowest-numbered
    nodes available then for hold_time, and return (start, nodes)."""
    times = list(avail)
    n = len(times)
    out: list[tuple[int, tuple[int, ...]]] = []
    for req, hold in requests:
        if req < 1 or req > n:
            raise ValueError(f"request for {req} nodes does not fit cluster size {n}")
        start = sorted(times)[req - 1]
        chosen = []
        for node in range(n):
            if times[node] <= start:
                chosen.append(node)
                if len(chosen) == req:
                    break
        for node in chosen:
            times[node] = start + hold
        out.append((start, tuple(chosen)))
    return out


def _earliest_slot_py(
    avail: Sequence[int], req: int
) -> tuple[int, tuple[int, ...]]:
    """Earliest start and lowest-numbered placement for one request,
    without committing it."""
    return _forward_plan_py(avail, [(req, 0)])[0]


forward_plan = _forward_plan_py
earliest_slot = _earliest_slot_py
BACKEND = "pure"

if os.environ.get("TAILTRIM_PURE", "") != "1":
    try:
        from tailtrim._placement_cy import earliest_slot, forward_plan  # noqa: F811

        BACKEND = "cython"
    except ImportError:
        pass
