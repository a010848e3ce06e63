"""The time-limit adjustment decision core.

At each poll tick the daemon inspects running jobs that report
checkpoints. A job becomes eligible for action once its predicted next
checkpoint no longer fits the current limit; until then nothing is done.
Eligible jobs are either cancelled right after their last completed
checkpoint or extended just far enough to accommodate the next one,
depending on the policy. Jobs that report nothing are never touched.

poll() is a pure function of its arguments; the surrounding live loop
(AutonomyDaemon) serializes poll -> decide -> apply on a single thread.
"""

from __future__ import annotations

import json
import logging
import time as _time
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Iterable, Mapping, Protocol

from .checkpoints import CheckpointLedger, LedgerEntry, load_spool, predict_next
from .model import ClusterConfig, PolicyKind, TailtrimError
from .scheduling import SchedulePlan, plan_schedule

logger = logging.getLogger(__name__)


class ActionVerb(Enum):
    CANCEL_NOW = "CANCEL_NOW"
    EXTEND_TO = "EXTEND_TO"


class ActionReason(Enum):
    NO_NEXT_CKPT_FITS = "NO_NEXT_CKPT_FITS"
    NEXT_CKPT_ACCOMMODATED = "NEXT_CKPT_ACCOMMODATED"
    EXTENSION_WOULD_DELAY = "EXTENSION_WOULD_DELAY"


@dataclass(frozen=True)
class AdjustmentAction:
    """One policy decision for one job.

    new_limit is a duration from the job's start (a time limit, not an
    absolute clock value); it is set for EXTEND_TO only.
    """

    job_id: int
    verb: ActionVerb
    reason: ActionReason
    decided_at: int
    new_limit: int | None = None

    def __post_init__(self):
        if self.verb is ActionVerb.EXTEND_TO and self.new_limit is None:
            raise ValueError("EXTEND_TO requires new_limit")
        if self.verb is ActionVerb.CANCEL_NOW and self.new_limit is not None:
            raise ValueError("CANCEL_NOW takes no new_limit")

    def to_json(self) -> str:
        payload = {
            "decided_at": self.decided_at,
            "job_id": self.job_id,
            "verb": self.verb.value,
            "reason": self.reason.value,
            "new_limit": self.new_limit,
        }
        return json.dumps(payload, separators=(",", ":"))


@dataclass(frozen=True)
class RunningJob:
    job_id: int
    start_time: int
    current_limit: int
    allocated_nodes: frozenset[int]

    @property
    def limit_end(self) -> int:
        return self.start_time + self.current_limit


@dataclass(frozen=True)
class PendingJob:
    job_id: int
    nodes: int
    time_limit: int
    planned_start: int | None = None
    planned_nodes: frozenset[int] | None = None


@dataclass(frozen=True)
class QueueSnapshot:
    """The daemon's squeue-style view: running and pending jobs plus the
    currently free nodes, taken atomically at time `now`."""

    now: int
    running: tuple[RunningJob, ...]
    pending: tuple[PendingJob, ...]
    free_nodes: frozenset[int]

    def __post_init__(self):
        running_ids = {job.job_id for job in self.running}
        pending_ids = {job.job_id for job in self.pending}
        if running_ids & pending_ids:
            raise ValueError(f"jobs both running and pending: {running_ids & pending_ids}")
        for job in self.pending:
            if job.planned_start is not None and job.planned_start < self.now:
                raise ValueError(f"job {job.job_id}: planned_start precedes now")


@dataclass(frozen=True)
class HybridAudit:
    """Record of one hybrid decision, kept so the choice can be replayed
    and re-verified against freshly recomputed plans."""

    snapshot: QueueSnapshot
    job_id: int
    candidate_limit: int
    chosen: ActionVerb


def plan_for_snapshot(
    snapshot: QueueSnapshot,
    node_count: int,
    drop_job: int | None = None,
    override_limits: Mapping[int, int] | None = None,
) -> SchedulePlan:
    """Planner view of a snapshot, optionally with one running job removed
    (its nodes free immediately) or with some limits hypothetically raised."""
    override_limits = override_limits or {}
    running = []
    for job in snapshot.running:
        if job.job_id == drop_job:
            continue
        limit = override_limits.get(job.job_id, job.current_limit)
        running.append((job.job_id, job.start_time + limit, job.allocated_nodes))
    pending = [(job.job_id, job.nodes, job.time_limit) for job in snapshot.pending]
    return plan_schedule(running, pending, node_count, snapshot.now)


def would_delay(plan_before: SchedulePlan, plan_after: SchedulePlan) -> bool:
    """True iff any pending job's planned start in plan_after exceeds its
    planned start in plan_before."""
    for job_id, planned in plan_after.planned.items():
        before = plan_before.planned.get(job_id)
        if before is not None and planned.start > before.start:
            return True
    return False


def _eligible(job: RunningJob, entry: LedgerEntry | None) -> int | None:
    """Predicted next checkpoint time if the job warrants action, else
    None. Jobs without reports are not considered at all."""
    if entry is None or not entry.timestamps:
        return None
    prediction = predict_next(entry)
    if prediction <= job.limit_end:
        return None
    return prediction


def decide_early_cancel(
    job: RunningJob, entry: LedgerEntry | None, now: int
) -> AdjustmentAction | None:
    prediction = _eligible(job, entry)
    if prediction is None:
        return None
    return AdjustmentAction(
        job_id=job.job_id,
        verb=ActionVerb.CANCEL_NOW,
        reason=ActionReason.NO_NEXT_CKPT_FITS,
        decided_at=now,
    )


def decide_extension(
    job: RunningJob,
    entry: LedgerEntry | None,
    cluster: ClusterConfig,
    extensions_used: int,
    now: int,
) -> AdjustmentAction | None:
    """Extend the limit to reach one more checkpoint; once the extension
    budget is spent, fall back to cancelling after the checkpoint the
    extension accommodated."""
    prediction = _eligible(job, entry)
    if prediction is None:
        return None
    if extensions_used >= cluster.max_extensions_per_job:
        return AdjustmentAction(
            job_id=job.job_id,
            verb=ActionVerb.CANCEL_NOW,
            reason=ActionReason.NO_NEXT_CKPT_FITS,
            decided_at=now,
        )
    new_limit = (prediction - job.start_time) + cluster.extension_grace
    return AdjustmentAction(
        job_id=job.job_id,
        verb=ActionVerb.EXTEND_TO,
        reason=ActionReason.NEXT_CKPT_ACCOMMODATED,
        decided_at=now,
        new_limit=new_limit,
    )


def decide_hybrid(
    job: RunningJob,
    entry: LedgerEntry | None,
    snapshot: QueueSnapshot,
    cluster: ClusterConfig,
    extensions_used: int,
    audit_sink: list[HybridAudit] | None = None,
) -> AdjustmentAction | None:
    """Extend only when the extension delays no pending job relative to
    the real alternative, cancelling now; otherwise cancel.

    The comparison baseline is the plan with the job cancelled (not the
    plan with the limit unchanged): cancellation is what the daemon would
    otherwise do to an eligible job, and it is the baseline under which
    the no-delay guarantee is checkable.
    """
    candidate = decide_extension(job, entry, cluster, extensions_used, snapshot.now)
    if candidate is None or candidate.verb is ActionVerb.CANCEL_NOW:
        return candidate
    assert candidate.new_limit is not None
    plan_cancel = plan_for_snapshot(snapshot, cluster.node_count, drop_job=job.job_id)
    plan_extend = plan_for_snapshot(
        snapshot, cluster.node_count,
        override_limits={job.job_id: candidate.new_limit})
    if would_delay(plan_cancel, plan_extend):
        action = AdjustmentAction(
            job_id=job.job_id,
            verb=ActionVerb.CANCEL_NOW,
            reason=ActionReason.EXTENSION_WOULD_DELAY,
            decided_at=snapshot.now,
        )
    else:
        action = candidate
    if audit_sink is not None:
        audit_sink.append(HybridAudit(
            snapshot=snapshot,
            job_id=job.job_id,
            candidate_limit=candidate.new_limit,
            chosen=action.verb,
        ))
    return action


def poll(
    snapshot: QueueSnapshot,
    ledgers: CheckpointLedger,
    policy: PolicyKind,
    cluster: ClusterConfig,
    extensions_granted: Mapping[int, int] | None = None,
    audit_sink: list[HybridAudit] | None = None,
) -> list[AdjustmentAction]:
    """One decision tick: at most one action per running job, in ascending
    job id order. BASELINE always returns nothing.

    extensions_granted maps job id to the number of extensions this job
    has already received; the caller tracks it (the scheduler does not
    report it), and omitted jobs count as zero.
    """
    if policy is PolicyKind.BASELINE:
        return []
    extensions_granted = extensions_granted or {}
    actions: list[AdjustmentAction] = []
    for job in sorted(snapshot.running, key=lambda j: j.job_id):
        entry = ledgers.entry(job.job_id)
        used = extensions_granted.get(job.job_id, 0)
        if policy is PolicyKind.EARLY_CANCEL:
            action = decide_early_cancel(job, entry, snapshot.now)
        elif policy is PolicyKind.EXTEND:
            action = decide_extension(job, entry, cluster, used, snapshot.now)
        elif policy is PolicyKind.HYBRID:
            action = decide_hybrid(job, entry, snapshot, cluster, used, audit_sink)
        else:  # pragma: no cover - exhaustive over PolicyKind
            raise ValueError(f"unhandled policy {policy}")
        if action is not None:
            actions.append(action)
    return actions


def write_action_log(actions: Iterable[AdjustmentAction], path) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        for action in actions:
            handle.write(action.to_json() + "\n")


@dataclass(frozen=True)
class DaemonConfig:
    """Live-loop settings; keys match the JSON config file."""

    policy: PolicyKind = PolicyKind.HYBRID
    poll_interval: int = 20
    extension_grace: int = 20
    max_extensions: int = 1
    spool_dir: str = "/tmp/tailtrim-spool"
    node_count: int = 20

    @classmethod
    def from_file(cls, path) -> "DaemonConfig":
        with open(path, "r", encoding="utf-8") as handle:
            raw = json.load(handle)
        known = {
            "policy": PolicyKind.from_string(raw["policy"]) if "policy" in raw else cls.policy,
        }
        for key in ("poll_interval", "extension_grace", "max_extensions",
                    "spool_dir", "node_count"):
            if key in raw:
                known[key] = raw[key]
        return cls(**known)

    def cluster(self, cores_per_node: int = 1) -> ClusterConfig:
        return ClusterConfig(
            node_count=self.node_count,
            cores_per_node=cores_per_node,
            poll_interval=self.poll_interval,
            extension_grace=self.extension_grace,
            max_extensions_per_job=self.max_extensions,
        )


class SchedulerInterface(Protocol):
    """What the live loop needs from a scheduler backend (see
    tailtrim.slurm.SlurmClient for the real one)."""

    def snapshot(self, now: int) -> QueueSnapshot: ...

    def apply(self, action: AdjustmentAction) -> None: ...


class AutonomyDaemon:
    """Single-threaded poll loop around the pure decision core.

    Tracks its own extension grants per job id, since the scheduler does
    not report them back.
    """

    def __init__(self, config: DaemonConfig, scheduler: SchedulerInterface,
                 action_sink: Callable[[AdjustmentAction], None] | None = None):
        self.config = config
        self.scheduler = scheduler
        self.action_sink = action_sink
        self._extensions: dict[int, int] = {}
        self._cluster = config.cluster()

    def tick(self, now: int) -> list[AdjustmentAction]:
        snapshot = self.scheduler.snapshot(now)
        starts = {job.job_id: job.start_time for job in snapshot.running}
        ledgers = load_spool(self.config.spool_dir, starts)
        actions = poll(snapshot, ledgers, self.config.policy, self._cluster,
                       extensions_granted=self._extensions)
        for action in actions:
            self.scheduler.apply(action)
            if action.verb is ActionVerb.EXTEND_TO:
                self._extensions[action.job_id] = self._extensions.get(action.job_id, 0) + 1
            if self.action_sink is not None:
                self.action_sink(action)
            logger.info("applied %s", action.to_json())
        return actions

    def run(self, ticks: int | None = None,
            clock: Callable[[], float] = _time.time,
            sleep: Callable[[float], None] = _time.sleep) -> None:
        done = 0
        while ticks is None or done < ticks:
            started = clock()
            try:
                self.tick(int(started))
            except TailtrimError:
                logger.exception("poll tick failed; continuing")
            done += 1
            elapsed = clock() - started
            if ticks is None or done < ticks:
                sleep(max(0.0, self.config.poll_interval - elapsed))
