"""Scenario metrics and the cross-policy comparison table.

Tail waste is the core-seconds a checkpointing job burns between its last
completed checkpoint and its termination; work that no checkpoint saved.
Non-checkpointing jobs have none, even when they time out, and completed
jobs lose nothing.

Two weighted wait figures are reported because the two natural readings
of "weighted by allocated nodes" differ in units: the normalized form
sum(nodes*wait)/sum(nodes) is a true weighted mean in seconds and is the
headline; sum(nodes*wait)/N (node-seconds per job) is kept alongside it.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

from .model import JobRuntime, JobState, NotFinishedError, PolicyKind, SchedSource, cpu_time

COMPARISON_ROWS = (
    "timeout_jobs",
    "early_cancelled_jobs",
    "extended_jobs",
    "completed_jobs",
    "total_jobs",
    "sched_main_jobs",
    "sched_backfill_jobs",
    "total_checkpoints",
    "avg_wait_s",
    "weighted_avg_wait_node_s",
    "weighted_avg_wait_s",
    "tail_waste_core_s",
    "total_cpu_core_s",
    "makespan_s",
)


@dataclass(frozen=True)
class JobCounts:
    total: int
    completed: int
    timeout: int
    cancelled_at_ckpt: int
    early_cancelled: int  # cancelled at a checkpoint without any extension
    extended: int  # granted at least one extension, whatever the end state


@dataclass(frozen=True)
class WaitStats:
    average: float
    weighted_average: float  # sum(nodes*wait)/sum(nodes), seconds
    node_seconds: float  # sum(nodes*wait)/N


@dataclass(frozen=True)
class MetricsReport:
    policy: PolicyKind
    counts: JobCounts
    sched_main: int
    sched_backfill: int
    total_checkpoints: int
    avg_wait: float
    weighted_avg_wait: float
    node_seconds_wait: float
    tail_waste: int
    total_cpu: int
    makespan: int

    def to_dict(self) -> dict:
        return {
            "policy": self.policy.value,
            "counts": {
                "total": self.counts.total,
                "completed": self.counts.completed,
                "timeout": self.counts.timeout,
                "cancelled_at_ckpt": self.counts.cancelled_at_ckpt,
                "early_cancelled": self.counts.early_cancelled,
                "extended": self.counts.extended,
            },
            "sched_main": self.sched_main,
            "sched_backfill": self.sched_backfill,
            "total_checkpoints": self.total_checkpoints,
            "avg_wait_s": self.avg_wait,
            "weighted_avg_wait_s": self.weighted_avg_wait,
            "weighted_avg_wait_node_s": self.node_seconds_wait,
            "tail_waste_core_s": self.tail_waste,
            "total_cpu_core_s": self.total_cpu,
            "makespan_s": self.makespan,
        }


def tail_waste(runtime: JobRuntime) -> int:
    """Core-seconds after the last completed checkpoint. Zero for
    non-checkpointing and for completed jobs; for a checkpointing job that
    never reported, the whole run is unsaved."""
    if not runtime.is_terminal:
        raise NotFinishedError(f"job {runtime.job_id} is not finished")
    if not runtime.spec.checkpointing or runtime.state is JobState.COMPLETED:
        return 0
    assert runtime.start_time is not None and runtime.end_time is not None
    last_saved = runtime.checkpoints[-1] if runtime.checkpoints else runtime.start_time
    return (runtime.end_time - last_saved) * runtime.spec.cores


def waits(runtimes: Sequence[JobRuntime]) -> WaitStats:
    """Average, node-weighted average (seconds), and node-seconds-per-job
    wait over terminal jobs. Raises on an empty set."""
    if not runtimes:
        raise ValueError("waits() needs at least one job")
    total = 0
    weighted = 0
    node_total = 0
    for rt in runtimes:
        if rt.start_time is None:
            raise NotFinishedError(f"job {rt.job_id} never started")
        wait = rt.start_time - rt.spec.submit_time
        total += wait
        weighted += rt.spec.nodes * wait
        node_total += rt.spec.nodes
    n = len(runtimes)
    return WaitStats(
        average=total / n,
        weighted_average=weighted / node_total,
        node_seconds=weighted / n,
    )


def aggregate(runtimes: Iterable[JobRuntime], policy: PolicyKind) -> MetricsReport:
    """Full per-scenario report from terminal runtimes. An empty workload
    yields an all-zero report."""
    jobs = sorted(runtimes, key=lambda rt: rt.job_id)
    if not jobs:
        zero = JobCounts(0, 0, 0, 0, 0, 0)
        return MetricsReport(policy, zero, 0, 0, 0, 0.0, 0.0, 0.0, 0, 0, 0)

    by_state = {state: 0 for state in JobState}
    early_cancelled = extended = 0
    sched_main = sched_backfill = 0
    total_ckpts = 0
    waste = 0
    total_cpu = 0
    for rt in jobs:
        if not rt.is_terminal:
            raise NotFinishedError(f"job {rt.job_id} is not finished")
        by_state[rt.state] += 1
        if rt.extensions_granted > 0:
            extended += 1
        elif rt.state is JobState.CANCELLED_AT_CKPT:
            early_cancelled += 1
        if rt.sched_source is SchedSource.MAIN:
            sched_main += 1
        elif rt.sched_source is SchedSource.BACKFILL:
            sched_backfill += 1
        total_ckpts += len(rt.checkpoints)
        waste += tail_waste(rt)
        total_cpu += cpu_time(rt)

    counts = JobCounts(
        total=len(jobs),
        completed=by_state[JobState.COMPLETED],
        timeout=by_state[JobState.TIMEOUT],
        cancelled_at_ckpt=by_state[JobState.CANCELLED_AT_CKPT],
        early_cancelled=early_cancelled,
        extended=extended,
    )
    assert counts.completed + counts.timeout + counts.cancelled_at_ckpt == counts.total
    assert waste <= total_cpu
    stats = waits(jobs)
    makespan = max(rt.end_time for rt in jobs) - min(rt.spec.submit_time for rt in jobs)
    return MetricsReport(
        policy=policy,
        counts=counts,
        sched_main=sched_main,
        sched_backfill=sched_backfill,
        total_checkpoints=total_ckpts,
        avg_wait=stats.average,
        weighted_avg_wait=stats.weighted_average,
        node_seconds_wait=stats.node_seconds,
        tail_waste=waste,
        total_cpu=total_cpu,
        makespan=makespan,
    )


def _row_value(report: MetricsReport, row: str):
    counts = report.counts
    return {
        "timeout_jobs": counts.timeout,
        "early_cancelled_jobs": counts.early_cancelled,
        "extended_jobs": counts.extended,
        "completed_jobs": counts.completed,
        "total_jobs": counts.total,
        "sched_main_jobs": report.sched_main,
        "sched_backfill_jobs": report.sched_backfill,
        "total_checkpoints": report.total_checkpoints,
        "avg_wait_s": report.avg_wait,
        "weighted_avg_wait_node_s": report.node_seconds_wait,
        "weighted_avg_wait_s": report.weighted_avg_wait,
        "tail_waste_core_s": report.tail_waste,
        "total_cpu_core_s": report.total_cpu,
        "makespan_s": report.makespan,
    }[row]


def percent_delta(value, baseline) -> float | None:
    """Percent change vs baseline, one decimal; None when undefined."""
    if baseline == 0:
        return 0.0 if value == 0 else None
    return round((value - baseline) / baseline * 100.0, 1)


@dataclass(frozen=True)
class ComparisonTable:
    policies: tuple[str, ...]
    values: Mapping[str, tuple]  # row name -> value per policy
    deltas: Mapping[str, tuple]  # row name -> percent vs baseline (None for col 0)

    def to_csv(self) -> str:
        header = ["metric", *self.policies]
        header += [f"{p}_pct_vs_{self.policies[0]}" for p in self.policies[1:]]
        lines = [",".join(header)]
        for row in COMPARISON_ROWS:
            cells = [row] + [_fmt(v) for v in self.values[row]]
            cells += [_fmt(d) for d in self.deltas[row][1:]]
            lines.append(",".join(cells))
        return "\n".join(lines) + "\n"

    def summary(self) -> str:
        """Human-readable digest, headlining tail-waste reductions."""
        out = []
        base = self.policies[0]
        for i, policy in enumerate(self.policies[1:], start=1):
            cut = self.deltas["tail_waste_core_s"][i]
            waste = self.values["tail_waste_core_s"][i]
            if cut is None:
                out.append(f"{policy}: tail waste {waste} core-s")
            else:
                out.append(
                    f"{policy}: tail waste {waste} core-s ({cut:+.1f}% vs {base})")
        return "\n".join(out)


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return f"{value:.3f}".rstrip("0").rstrip(".")
    return str(value)


def compare(reports: Sequence[MetricsReport]) -> ComparisonTable:
    """Absolute values and percent deltas against the first (baseline)
    report, in the fixed row order of COMPARISON_ROWS."""
    if len(reports) < 2:
        raise ValueError("compare() needs a baseline plus at least one policy")
    seen = set()
    for report in reports:
        if report.policy in seen:
            raise ValueError(f"duplicate policy {report.policy.value}")
        seen.add(report.policy)
    values = {}
    deltas = {}
    for row in COMPARISON_ROWS:
        row_values = tuple(_row_value(report, row) for report in reports)
        values[row] = row_values
        deltas[row] = (None,) + tuple(
            percent_delta(v, row_values[0]) for v in row_values[1:])
    return ComparisonTable(
        policies=tuple(report.policy.value for report in reports),
        values=values,
        deltas=deltas,
    )


def write_report(report: MetricsReport, path) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        json.dump(report.to_dict(), handle, indent=2)
        handle.write("\n")
