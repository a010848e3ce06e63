"""Deterministic discrete-event simulator of the cluster, the scheduler,
and the polling daemon.

Events are processed in (time, kind, job_id) lexicographic order; the
kind order is fixed by EventKind, which makes every tie deterministic
(e.g. a checkpoint completing at a poll instant is visible to that poll,
and a natural end beats a limit expiry at the same second). Identical
inputs produce byte-identical event logs.

Stale events (a limit expiry rescheduled by an extension, a checkpoint
after termination) are detected on pop and skipped without logging.
"""

from __future__ import annotations

import bisect
import hashlib
import heapq
import json
from dataclasses import dataclass, field
from enum import IntEnum
from typing import Iterable, Sequence

from . import daemon as daemon_mod
from .checkpoints import CheckpointLedger
from .daemon import ActionVerb, AdjustmentAction, HybridAudit, PendingJob, QueueSnapshot, RunningJob
from .model import (
    CancelAtCheckpoint,
    ClusterConfig,
    IllegalTransitionError,
    InfeasibleWorkloadError,
    InternalCheckError,
    JobRuntime,
    JobSpec,
    JobState,
    LimitReached,
    NaturalEnd,
    PolicyKind,
    Start,
    TailtrimError,
    grant_extension,
    job_transition,
    record_checkpoint,
)
from .scheduling import availability_vector, plan_schedule, schedule_pass


class EventKind(IntEnum):
    SUBMIT = 0
    SCHEDULE_PASS = 1
    JOB_END_NATURAL = 2
    JOB_LIMIT_REACHED = 3
    CHECKPOINT_DONE = 4
    DAEMON_POLL = 5
    CANCEL = 6
    LIMIT_UPDATE = 7


@dataclass(frozen=True)
class SimEvent:
    time: int
    kind: EventKind
    job_id: int  # -1 for events not tied to a job
    detail: dict

    def to_json(self) -> str:
        payload = {
            "time": self.time,
            "kind": self.kind.name,
            "job_id": self.job_id,
            "detail": self.detail,
        }
        return json.dumps(payload, separators=(",", ":"), sort_keys=False)


@dataclass
class SimulationResult:
    runtimes: dict[int, JobRuntime]
    events: list[SimEvent]
    actions: list[AdjustmentAction]
    hybrid_audit: list[HybridAudit] = field(default_factory=list)

    def runtimes_sorted(self) -> list[JobRuntime]:
        return [self.runtimes[job_id] for job_id in sorted(self.runtimes)]


class Simulator:
    """One simulation run: single-threaded, no shared mutable state, so
    independent instances may execute in parallel."""

    def __init__(self, jobs: Sequence[JobSpec], cluster: ClusterConfig,
                 policy: PolicyKind):
        seen: set[int] = set()
        for spec in jobs:
            if spec.job_id in seen:
                raise InfeasibleWorkloadError(f"duplicate job id {spec.job_id}")
            seen.add(spec.job_id)
            if spec.nodes > cluster.node_count:
                raise InfeasibleWorkloadError(
                    f"job {spec.job_id} requests {spec.nodes} nodes; cluster "
                    f"has {cluster.node_count}")
        self.cluster = cluster
        self.policy = policy
        self.runtimes = {spec.job_id: JobRuntime(spec) for spec in jobs}
        self.ledger = CheckpointLedger()
        self.events: list[SimEvent] = []
        self.actions: list[AdjustmentAction] = []
        self.hybrid_audit: list[HybridAudit] = []
        self._heap: list[tuple[int, int, int, int, object]] = []
        self._seq = 0
        self._pending: list[int] = []  # job ids, FCFS by (submit_time, job_id)
        self._running: set[int] = set()
        self._free: set[int] = set(range(cluster.node_count))
        self._unfinished = len(self.runtimes)
        self._pass_requested: set[int] = set()
        # Queue views (with planned starts) are rebuilt only after resource
        # state changes; polls between events reuse them.
        self._views: tuple[tuple[RunningJob, ...], tuple[PendingJob, ...]] | None = None
        self._views_dirty = True

    # -- event queue ------------------------------------------------

    def _push(self, time: int, kind: EventKind, job_id: int, payload: object = None):
        self._seq += 1
        heapq.heappush(self._heap, (time, int(kind), job_id, self._seq, payload))

    def _request_pass(self, now: int):
        if now not in self._pass_requested:
            self._pass_requested.add(now)
            self._push(now, EventKind.SCHEDULE_PASS, -1)

    def _log(self, time: int, kind: EventKind, job_id: int, detail: dict):
        self.events.append(SimEvent(time, kind, job_id, detail))

    # -- state helpers ----------------------------------------------

    def _running_view(self):
        for job_id in sorted(self._running):
            rt = self.runtimes[job_id]
            yield job_id, rt.limit_end, rt.allocated_nodes

    def _queue_view(self):
        return [
            (job_id, self.runtimes[job_id].spec.nodes,
             self.runtimes[job_id].current_limit)
            for job_id in self._pending
        ]

    def _snapshot(self, now: int) -> QueueSnapshot:
        if self._views_dirty or self._views is None:
            plan = plan_schedule(self._running_view(), self._queue_view(),
                                 self.cluster.node_count, now)
            running = tuple(
                RunningJob(job_id, self.runtimes[job_id].start_time,
                           self.runtimes[job_id].current_limit,
                           self.runtimes[job_id].allocated_nodes)
                for job_id in sorted(self._running)
            )
            pending = tuple(
                PendingJob(job_id, self.runtimes[job_id].spec.nodes,
                           self.runtimes[job_id].current_limit,
                           plan.planned[job_id].start,
                           frozenset(plan.planned[job_id].nodes))
                for job_id in self._pending
            )
            self._views = (running, pending)
            self._views_dirty = False
        running, pending = self._views
        return QueueSnapshot(now=now, running=running, pending=pending,
                             free_nodes=frozenset(self._free))

    def _release_nodes(self, rt: JobRuntime):
        self._running.discard(rt.job_id)
        self._free |= rt.allocated_nodes
        self._unfinished -= 1
        self.ledger.discard(rt.job_id)
        self._views_dirty = True

    # -- spec-level operations --------------------------------------

    def cancel_job(self, job_id: int, now: int) -> None:
        """Terminate a running job at its last completed checkpoint's
        tail; rejected for jobs without any checkpoint."""
        rt = self.runtimes[job_id]
        if rt.state is not JobState.RUNNING:
            raise IllegalTransitionError(f"job {job_id} is not running")
        if not rt.checkpoints:
            raise TailtrimError(f"job {job_id} has no checkpoint; cancel rejected")
        job_transition(rt, CancelAtCheckpoint(now))
        self._release_nodes(rt)
        self._request_pass(now)

    def apply_limit_update(self, job_id: int, new_limit: int, now: int) -> None:
        """Raise a running job's limit; its pending limit-expiry event is
        superseded (the old one is dropped as stale on pop)."""
        rt = self.runtimes[job_id]
        if rt.state is not JobState.RUNNING:
            raise IllegalTransitionError(f"job {job_id} is not running")
        if rt.extensions_granted >= self.cluster.max_extensions_per_job:
            raise TailtrimError(
                f"job {job_id}: extension budget "
                f"({self.cluster.max_extensions_per_job}) exhausted")
        grant_extension(rt, new_limit)  # raises on shrink
        self._push(rt.limit_end, EventKind.JOB_LIMIT_REACHED, job_id)
        self._views_dirty = True
        self._request_pass(now)

    # -- event handlers ---------------------------------------------

    def _on_submit(self, now: int, job_id: int):
        spec = self.runtimes[job_id].spec
        bisect.insort(self._pending, job_id,
                      key=lambda jid: (self.runtimes[jid].spec.submit_time, jid))
        self._views_dirty = True
        self._log(now, EventKind.SUBMIT, job_id,
                  {"nodes": spec.nodes, "time_limit": spec.time_limit})
        self._request_pass(now)

    def _on_schedule_pass(self, now: int):
        self._pass_requested.discard(now)
        avail = availability_vector(self._running_view(),
                                    self.cluster.node_count, now)
        decisions = schedule_pass(self._queue_view(), self._free, avail, now)
        started_detail = []
        for decision in decisions:
            rt = self.runtimes[decision.job_id]
            job_transition(rt, Start(now, decision.nodes, decision.source))
            self._pending.remove(decision.job_id)
            self._running.add(decision.job_id)
            self._free -= set(decision.nodes)
            self._push(now + rt.spec.true_duration,
                       EventKind.JOB_END_NATURAL, decision.job_id)
            self._push(rt.limit_end, EventKind.JOB_LIMIT_REACHED, decision.job_id)
            if rt.spec.checkpointing:
                self.ledger.open_job(decision.job_id, now)
                self._push(now + rt.spec.ckpt_interval,
                           EventKind.CHECKPOINT_DONE, decision.job_id, 1)
            started_detail.append({
                "job_id": decision.job_id,
                "nodes": list(decision.nodes),
                "source": decision.source.value,
            })
        if decisions:
            self._views_dirty = True
        self._log(now, EventKind.SCHEDULE_PASS, -1, {"started": started_detail})

    def _on_end_natural(self, now: int, job_id: int):
        rt = self.runtimes[job_id]
        if rt.state is not JobState.RUNNING:
            return
        if now != rt.start_time + rt.spec.true_duration:
            return  # stale (should not occur: natural ends are never moved)
        job_transition(rt, NaturalEnd(now))
        self._release_nodes(rt)
        self._log(now, EventKind.JOB_END_NATURAL, job_id, {})
        self._request_pass(now)

    def _on_limit_reached(self, now: int, job_id: int):
        rt = self.runtimes[job_id]
        if rt.state is not JobState.RUNNING or now != rt.limit_end:
            return  # stale: job finished first, or the limit was extended
        job_transition(rt, LimitReached(now))
        self._release_nodes(rt)
        self._log(now, EventKind.JOB_LIMIT_REACHED, job_id,
                  {"limit": rt.current_limit})
        self._request_pass(now)

    def _on_checkpoint_done(self, now: int, job_id: int, index: int):
        rt = self.runtimes[job_id]
        if rt.state is not JobState.RUNNING:
            return
        record_checkpoint(rt, now)
        # Same validated line protocol the live spool files go through.
        self.ledger.append_report(job_id, str(now))
        self._log(now, EventKind.CHECKPOINT_DONE, job_id, {"index": index})
        self._push(now + rt.spec.ckpt_interval, EventKind.CHECKPOINT_DONE,
                   job_id, index + 1)

    def _on_daemon_poll(self, now: int):
        snapshot = self._snapshot(now)
        extensions = {job_id: self.runtimes[job_id].extensions_granted
                      for job_id in self._running}
        actions = daemon_mod.poll(
            snapshot, self.ledger, self.policy, self.cluster,
            extensions_granted=extensions, audit_sink=self.hybrid_audit)
        for action in actions:  # already in ascending job id order
            self.actions.append(action)
            if action.verb is ActionVerb.CANCEL_NOW:
                self._push(now, EventKind.CANCEL, action.job_id,
                           action.reason.value)
            else:
                self._push(now, EventKind.LIMIT_UPDATE, action.job_id, action)
        self._log(now, EventKind.DAEMON_POLL, -1, {"actions": len(actions)})
        if self._unfinished > 0:
            self._push(now + self.cluster.poll_interval,
                       EventKind.DAEMON_POLL, -1)

    def _on_cancel(self, now: int, job_id: int, reason: str):
        rt = self.runtimes[job_id]
        if rt.state is not JobState.RUNNING:
            return
        self.cancel_job(job_id, now)
        self._log(now, EventKind.CANCEL, job_id, {"reason": reason})

    def _on_limit_update(self, now: int, job_id: int, action: AdjustmentAction):
        rt = self.runtimes[job_id]
        if rt.state is not JobState.RUNNING:
            return
        assert action.new_limit is not None
        self.apply_limit_update(job_id, action.new_limit, now)
        self._log(now, EventKind.LIMIT_UPDATE, job_id,
                  {"new_limit": action.new_limit, "reason": action.reason.value})

    # -- run ---------------------------------------------------------

    def run(self) -> SimulationResult:
        for job_id, rt in self.runtimes.items():
            self._push(rt.spec.submit_time, EventKind.SUBMIT, job_id)
        self._push(0, EventKind.DAEMON_POLL, -1)
        while self._heap:
            now, kind, job_id, _, payload = heapq.heappop(self._heap)
            kind = EventKind(kind)
            if kind is EventKind.SUBMIT:
                self._on_submit(now, job_id)
            elif kind is EventKind.SCHEDULE_PASS:
                self._on_schedule_pass(now)
            elif kind is EventKind.JOB_END_NATURAL:
                self._on_end_natural(now, job_id)
            elif kind is EventKind.JOB_LIMIT_REACHED:
                self._on_limit_reached(now, job_id)
            elif kind is EventKind.CHECKPOINT_DONE:
                self._on_checkpoint_done(now, job_id, payload)
            elif kind is EventKind.DAEMON_POLL:
                self._on_daemon_poll(now)
            elif kind is EventKind.CANCEL:
                self._on_cancel(now, job_id, payload)
            elif kind is EventKind.LIMIT_UPDATE:
                self._on_limit_update(now, job_id, payload)
        stuck = [job_id for job_id, rt in self.runtimes.items()
                 if not rt.is_terminal]
        if stuck:
            raise InternalCheckError(f"simulation ended with live jobs: {stuck}")
        return SimulationResult(self.runtimes, self.events, self.actions,
                                self.hybrid_audit)


def run_simulation(jobs: Sequence[JobSpec], cluster: ClusterConfig,
                   policy: PolicyKind) -> SimulationResult:
    """Run one scenario to completion; all jobs end terminal and the event
    log is totally ordered and replayable."""
    return Simulator(jobs, cluster, policy).run()


def event_log_lines(events: Iterable[SimEvent]) -> list[str]:
    return [event.to_json() for event in events]


def write_event_log(events: Iterable[SimEvent], path) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        for line in event_log_lines(events):
            handle.write(line + "\n")


def event_log_hash(events: Iterable[SimEvent]) -> str:
    digest = hashlib.sha256()
    for line in event_log_lines(events):
        digest.update(line.encode("utf-8"))
        digest.update(b"\n")
    return digest.hexdigest()
