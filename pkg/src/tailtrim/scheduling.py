"""Two-path scheduling: a priority (main) pass and an EASY backfill pass,
plus the forward planner that predicts pending jobs' start times.

Priority is FCFS by submit time, ties broken by ascending job id; callers
pass queues already in that order. Placement is always lowest-numbered
free nodes first, which keeps every run byte-reproducible. The planner
sees running jobs' time limits, never their true durations, mirroring
what a real scheduler knows.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import AbstractSet, Iterable, Mapping, Sequence

from .model import SchedSource
from .placement import earliest_slot, forward_plan

# (job_id, nodes requested, current time limit), priority-ordered
QueueView = Sequence[tuple[int, int, int]]
# (job_id, expected end, allocated node ids)
RunningView = Iterable[tuple[int, int, Iterable[int]]]


@dataclass(frozen=True)
class PlannedJob:
    job_id: int
    start: int
    nodes: tuple[int, ...]


@dataclass(frozen=True)
class SchedulePlan:
    """Planner output: planned starts/placements for pending jobs and
    limit-based expected end times for running jobs."""

    planned: Mapping[int, PlannedJob]
    expected_end: Mapping[int, int]


@dataclass(frozen=True)
class StartDecision:
    job_id: int
    nodes: tuple[int, ...]
    source: SchedSource


def availability_vector(running: RunningView, node_count: int, now: int) -> list[int]:
    """Per-node time at which the node is (expected to be) free."""
    avail = [now] * node_count
    for _, end, nodes in running:
        for node in nodes:
            avail[node] = max(now, end)
    return avail


def plan_schedule(
    running: RunningView, pending: QueueView, node_count: int, now: int
) -> SchedulePlan:
    """Forward-simulate the pending queue in priority order against
    limit-based node availability. Pure function of its inputs; backfill
    opportunities are not modelled (this is the squeue-style estimate)."""
    running = list(running)
    avail = availability_vector(running, node_count, now)
    placements = forward_plan(avail, [(req, limit) for _, req, limit in pending])
    planned = {
        job_id: PlannedJob(job_id, start, nodes)
        for (job_id, _, _), (start, nodes) in zip(pending, placements)
    }
    expected = {job_id: end for job_id, end, _ in running}
    return SchedulePlan(planned=planned, expected_end=expected)


def schedule_pass(
    queue: QueueView,
    free_nodes: AbstractSet[int],
    node_avail: Sequence[int],
    now: int,
) -> list[StartDecision]:
    """One scheduling cycle at time `now`.

    Main pass: start jobs strictly in priority order until the head job
    does not fit. Backfill pass: reserve the head's earliest placement
    (EASY), then start any later job that fits the free nodes now without
    touching reserved nodes past the reservation time.
    """
    free = sorted(free_nodes)
    avail = list(node_avail)
    started: list[StartDecision] = []
    queue = list(queue)

    while queue and queue[0][1] <= len(free):
        job_id, req, limit = queue.pop(0)
        nodes = tuple(free[:req])
        free = free[req:]
        for node in nodes:
            avail[node] = now + limit
        started.append(StartDecision(job_id, nodes, SchedSource.MAIN))

    if not queue:
        return started

    # EASY reservation for the one job that blocked the main pass.
    _, head_req, _ = queue[0]
    shadow, reserved = earliest_slot(avail, head_req)
    reserved_set = set(reserved)

    for job_id, req, limit in queue[1:]:
        if now + limit <= shadow:
            eligible = free
        else:
            eligible = [n for n in free if n not in reserved_set]
        if req <= len(eligible):
            nodes = tuple(eligible[:req])
            taken = set(nodes)
            free = [n for n in free if n not in taken]
            for node in nodes:
                avail[node] = now + limit
            started.append(StartDecision(job_id, nodes, SchedSource.BACKFILL))
    return started
