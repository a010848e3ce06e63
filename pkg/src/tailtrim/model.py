"""Core job and cluster types shared by every other module.

All times are integer seconds on a simulation clock that starts at 0 (or
epoch seconds in live mode). Jobs request whole nodes exclusively, so a
job's core count is always nodes * cores_per_node.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum


class TailtrimError(Exception):
    """Base class for all package errors."""


class IllegalTransitionError(TailtrimError):
    """A lifecycle event was applied in a state that does not accept it."""


class NotFinishedError(TailtrimError):
    """A terminal-only query was made on a job that is still pending/running."""


class InfeasibleWorkloadError(TailtrimError):
    """A job or generator shape cannot be placed on the given cluster."""


class InternalCheckError(TailtrimError):
    """An internal consistency assertion failed; indicates a bug, not bad
    input."""


class JobState(Enum):
    PENDING = "PENDING"
    RUNNING = "RUNNING"
    COMPLETED = "COMPLETED"
    TIMEOUT = "TIMEOUT"
    CANCELLED_AT_CKPT = "CANCELLED_AT_CKPT"


TERMINAL_STATES = frozenset(
    {JobState.COMPLETED, JobState.TIMEOUT, JobState.CANCELLED_AT_CKPT}
)


class SchedSource(Enum):
    MAIN = "MAIN"
    BACKFILL = "BACKFILL"


class PolicyKind(Enum):
    """Time-limit adjustment policy. BASELINE never issues actions."""

    BASELINE = "baseline"
    EARLY_CANCEL = "early-cancel"
    EXTEND = "extend"
    HYBRID = "hybrid"

    @classmethod
    def from_string(cls, text: str) -> "PolicyKind":
        for member in cls:
            if member.value == text:
                return member
        raise ValueError(f"unknown policy {text!r}; expected one of "
                         f"{[m.value for m in cls]}")


@dataclass(frozen=True)
class JobSpec:
    """Immutable description of a job as submitted.

    true_duration is the wall time the job would run uninterrupted; the
    scheduler never sees it, only time_limit.
    """

    job_id: int
    submit_time: int
    nodes: int
    cores_per_node: int
    time_limit: int
    true_duration: int
    checkpointing: bool = False
    ckpt_interval: int | None = None

    def __post_init__(self):
        if self.submit_time < 0:
            raise ValueError(f"job {self.job_id}: submit_time must be >= 0")
        if self.nodes < 1 or self.cores_per_node < 1:
            raise ValueError(f"job {self.job_id}: nodes and cores_per_node must be >= 1")
        if self.time_limit <= 0 or self.true_duration <= 0:
            raise ValueError(f"job {self.job_id}: time_limit and true_duration must be > 0")
        if self.checkpointing:
            if self.ckpt_interval is None or self.ckpt_interval <= 0:
                raise ValueError(f"job {self.job_id}: checkpointing requires ckpt_interval > 0")
        elif self.ckpt_interval is not None:
            raise ValueError(f"job {self.job_id}: ckpt_interval given for non-checkpointing job")

    @property
    def cores(self) -> int:
        return self.nodes * self.cores_per_node


@dataclass(frozen=True)
class ClusterConfig:
    """Cluster and daemon parameters (defaults match the reference setup:
    20 nodes, 20 s queue polling, one extension per job)."""

    node_count: int = 20
    cores_per_node: int = 32
    poll_interval: int = 20
    extension_grace: int = 20
    max_extensions_per_job: int = 1

    def __post_init__(self):
        if self.node_count < 1 or self.cores_per_node < 1:
            raise ValueError("node_count and cores_per_node must be >= 1")
        if self.poll_interval <= 0:
            raise ValueError("poll_interval must be > 0")
        if self.extension_grace < 0 or self.max_extensions_per_job < 0:
            raise ValueError("extension_grace and max_extensions_per_job must be >= 0")


# Lifecycle events accepted by job_transition.

@dataclass(frozen=True)
class Start:
    time: int
    nodes: tuple[int, ...]
    source: SchedSource


@dataclass(frozen=True)
class NaturalEnd:
    time: int


@dataclass(frozen=True)
class LimitReached:
    time: int


@dataclass(frozen=True)
class CancelAtCheckpoint:
    time: int


LifecycleEvent = Start | NaturalEnd | LimitReached | CancelAtCheckpoint


@dataclass
class JobRuntime:
    """Mutable per-job execution state.

    current_limit only ever grows (cancellation is a separate verb, never a
    limit reduction). checkpoints holds absolute completion times.
    """

    spec: JobSpec
    state: JobState = JobState.PENDING
    start_time: int | None = None
    current_limit: int = 0
    allocated_nodes: frozenset[int] = frozenset()
    checkpoints: list[int] = field(default_factory=list)
    end_time: int | None = None
    sched_source: SchedSource | None = None
    extensions_granted: int = 0

    def __post_init__(self):
        if self.current_limit == 0:
            self.current_limit = self.spec.time_limit

    @property
    def job_id(self) -> int:
        return self.spec.job_id

    @property
    def is_terminal(self) -> bool:
        return self.state in TERMINAL_STATES

    @property
    def limit_end(self) -> int:
        """Absolute time the current limit expires. Running jobs only."""
        if self.start_time is None:
            raise NotFinishedError(f"job {self.job_id} has not started")
        return self.start_time + self.current_limit


def _illegal(runtime: JobRuntime, event: LifecycleEvent) -> IllegalTransitionError:
    return IllegalTransitionError(
        f"job {runtime.job_id}: event {type(event).__name__} is illegal in "
        f"state {runtime.state.value}"
    )


def job_transition(runtime: JobRuntime, event: LifecycleEvent) -> JobRuntime:
    """Apply one lifecycle event, enforcing the PENDING -> RUNNING ->
    {COMPLETED, TIMEOUT, CANCELLED_AT_CKPT} machine. Terminal states are
    absorbing. The runtime is updated in place and returned."""
    if isinstance(event, Start):
        if runtime.state is not JobState.PENDING:
            raise _illegal(runtime, event)
        if event.time < runtime.spec.submit_time:
            raise ValueError(f"job {runtime.job_id}: start before submit")
        if len(event.nodes) != runtime.spec.nodes:
            raise ValueError(
                f"job {runtime.job_id}: allocated {len(event.nodes)} nodes, "
                f"requested {runtime.spec.nodes}")
        runtime.state = JobState.RUNNING
        runtime.start_time = event.time
        runtime.allocated_nodes = frozenset(event.nodes)
        runtime.sched_source = event.source
        return runtime

    if runtime.state is not JobState.RUNNING:
        raise _illegal(runtime, event)
    assert runtime.start_time is not None

    if isinstance(event, NaturalEnd):
        expected = runtime.start_time + runtime.spec.true_duration
        if event.time != expected:
            raise ValueError(
                f"job {runtime.job_id}: natural end at {event.time}, expected {expected}")
        if runtime.spec.true_duration > runtime.current_limit:
            raise ValueError(
                f"job {runtime.job_id}: cannot complete past limit "
                f"({runtime.spec.true_duration} > {runtime.current_limit})")
        runtime.state = JobState.COMPLETED
        runtime.end_time = event.time
    elif isinstance(event, LimitReached):
        if event.time != runtime.limit_end:
            raise ValueError(
                f"job {runtime.job_id}: limit event at {event.time}, "
                f"expected {runtime.limit_end}")
        if runtime.spec.true_duration <= runtime.current_limit:
            raise ValueError(
                f"job {runtime.job_id}: would complete before the limit; "
                "TIMEOUT is illegal")
        runtime.state = JobState.TIMEOUT
        runtime.end_time = event.time
    elif isinstance(event, CancelAtCheckpoint):
        if not runtime.checkpoints:
            raise ValueError(f"job {runtime.job_id}: cancel with no checkpoint recorded")
        if event.time < runtime.checkpoints[-1]:
            raise ValueError(
                f"job {runtime.job_id}: cancel at {event.time} precedes last "
                f"checkpoint {runtime.checkpoints[-1]}")
        runtime.state = JobState.CANCELLED_AT_CKPT
        runtime.end_time = event.time
    else:
        raise _illegal(runtime, event)
    return runtime


def record_checkpoint(runtime: JobRuntime, time: int) -> None:
    """Append a checkpoint completion time. Running jobs only; times must be
    strictly increasing and not precede the start."""
    if runtime.state is not JobState.RUNNING:
        raise IllegalTransitionError(
            f"job {runtime.job_id}: checkpoint in state {runtime.state.value}")
    assert runtime.start_time is not None
    if time < runtime.start_time:
        raise ValueError(f"job {runtime.job_id}: checkpoint before start")
    if runtime.checkpoints and time <= runtime.checkpoints[-1]:
        raise ValueError(f"job {runtime.job_id}: checkpoints must strictly increase")
    runtime.checkpoints.append(time)


def grant_extension(runtime: JobRuntime, new_limit: int) -> None:
    """Raise the running job's limit. Limits only ever grow."""
    if runtime.state is not JobState.RUNNING:
        raise IllegalTransitionError(
            f"job {runtime.job_id}: extension in state {runtime.state.value}")
    if new_limit <= runtime.current_limit:
        raise ValueError(
            f"job {runtime.job_id}: new limit {new_limit} must exceed "
            f"current {runtime.current_limit}")
    runtime.current_limit = new_limit
    runtime.extensions_granted += 1


def cpu_time(runtime: JobRuntime) -> int:
    """Core-seconds consumed: (end - start) * nodes * cores_per_node."""
    if not runtime.is_terminal:
        raise NotFinishedError(f"job {runtime.job_id} is not finished")
    assert runtime.start_time is not None and runtime.end_time is not None
    return (runtime.end_time - runtime.start_time) * runtime.spec.cores
