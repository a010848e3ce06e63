"""Bit-exact construction and parsing of scheduler commands.

The daemon drives a real Slurm installation through three commands:

    squeue -o %i|%T|%S|%l|%N|%Y|%D
    scontrol update JobId=<id> TimeLimit=<D-HH:MM:SS>
    scancel <id>

The squeue format string is pinned (SQUEUE_FORMAT) because default
columns vary by site; it yields the pipe-separated fields JOBID, STATE,
START_TIME, TIME_LIMIT, NODELIST, SCHEDNODES, NODES, one row per job,
header first. Start times are integer seconds or ISO-8601 (read as UTC);
node names must end in their numeric index. Command execution goes
through an injectable runner so everything is testable from fixtures.
"""

from __future__ import annotations

import re
import subprocess
from dataclasses import dataclass
from datetime import datetime, timezone
from typing import Callable

from .daemon import ActionVerb, AdjustmentAction, PendingJob, QueueSnapshot, RunningJob
from .model import TailtrimError

SQUEUE_FORMAT = "%i|%T|%S|%l|%N|%Y|%D"

_ALLOWED_PROGRAMS = ("squeue", "scontrol", "scancel")


class TimelimitParseError(TailtrimError):
    """Text is not a Slurm time limit."""


class SqueueParseError(TailtrimError):
    """squeue output is structurally unusable (e.g. missing header)."""


class CommandFailed(TailtrimError):
    """A scheduler command exited with an unexpected status."""


@dataclass(frozen=True)
class SchedulerCommand:
    argv: tuple[str, ...]
    expected_exit: int = 0

    def __post_init__(self):
        if not self.argv:
            raise ValueError("argv must be non-empty")
        if self.argv[0] not in _ALLOWED_PROGRAMS:
            raise ValueError(f"unknown scheduler program {self.argv[0]!r}")

    def __str__(self) -> str:
        return " ".join(self.argv)


def format_timelimit(seconds: int) -> str:
    """Canonical D-HH:MM:SS rendering, e.g. 1500 -> 0-00:25:00."""
    if seconds < 0:
        raise ValueError("time limit must be >= 0")
    days, rest = divmod(seconds, 86400)
    hours, rest = divmod(rest, 3600)
    minutes, secs = divmod(rest, 60)
    return f"{days}-{hours:02d}:{minutes:02d}:{secs:02d}"


def parse_timelimit(text: str) -> int | None:
    """Seconds for any Slurm-accepted form: M, M:S, H:M:S, D-H, D-H:M,
    D-H:M:S. UNLIMITED/INFINITE map to None."""
    text = text.strip()
    if text.upper() in ("UNLIMITED", "INFINITE"):
        return None
    if not text:
        raise TimelimitParseError("empty time limit")

    def _int(part: str) -> int:
        if not part.isdigit():
            raise TimelimitParseError(f"bad time limit {text!r}")
        return int(part)

    if "-" in text:
        day_part, _, clock = text.partition("-")
        days = _int(day_part)
        pieces = clock.split(":")
        if len(pieces) > 3 or not clock:
            raise TimelimitParseError(f"bad time limit {text!r}")
        hours = _int(pieces[0])
        minutes = _int(pieces[1]) if len(pieces) > 1 else 0
        seconds = _int(pieces[2]) if len(pieces) > 2 else 0
        return days * 86400 + hours * 3600 + minutes * 60 + seconds
    pieces = text.split(":")
    if len(pieces) == 1:
        return _int(pieces[0]) * 60
    if len(pieces) == 2:
        return _int(pieces[0]) * 60 + _int(pieces[1])
    if len(pieces) == 3:
        return _int(pieces[0]) * 3600 + _int(pieces[1]) * 60 + _int(pieces[2])
    raise TimelimitParseError(f"bad time limit {text!r}")


def build_update_command(job_id: int, new_limit: int) -> SchedulerCommand:
    if job_id < 0:
        raise ValueError("job id must be >= 0")
    if new_limit <= 0:
        raise ValueError("new limit must be > 0")
    return SchedulerCommand((
        "scontrol", "update", f"JobId={job_id}",
        f"TimeLimit={format_timelimit(new_limit)}",
    ))


def build_cancel_command(job_id: int) -> SchedulerCommand:
    if job_id < 0:
        raise ValueError("job id must be >= 0")
    return SchedulerCommand(("scancel", str(job_id)))


def build_queue_command() -> SchedulerCommand:
    return SchedulerCommand(("squeue", "-o", SQUEUE_FORMAT))


_NODE_TOKEN = re.compile(r"([^,\[\]]+)(?:\[([^\]]+)\])?")


def expand_nodelist(text: str) -> frozenset[int]:
    """Numeric node ids from a Slurm hostlist expression, e.g.
    node[0-2,7] -> {0, 1, 2, 7}. Node names must end in digits."""
    text = text.strip()
    if not text or text in ("(null)", "N/A"):
        return frozenset()
    ids: set[int] = set()
    pos = 0
    while pos < len(text):
        match = _NODE_TOKEN.match(text, pos)
        if not match:
            raise SqueueParseError(f"bad node list {text!r}")
        name, ranges = match.groups()
        if ranges is not None:
            for piece in ranges.split(","):
                lo, _, hi = piece.partition("-")
                if not lo.isdigit() or (hi and not hi.isdigit()):
                    raise SqueueParseError(f"bad node range {piece!r} in {text!r}")
                start = int(lo)
                end = int(hi) if hi else start
                ids.update(range(start, end + 1))
        else:
            tail = re.search(r"(\d+)$", name)
            if not tail:
                raise SqueueParseError(f"node name {name!r} has no numeric index")
            ids.add(int(tail.group(1)))
        pos = match.end()
        if pos < len(text):
            if text[pos] != ",":
                raise SqueueParseError(f"bad node list {text!r}")
            pos += 1
    return frozenset(ids)


def _parse_start_time(text: str) -> int | None:
    text = text.strip()
    if not text or text in ("N/A", "(null)", "NONE"):
        return None
    if text.lstrip("-").isdigit():
        return int(text)
    try:
        stamp = datetime.fromisoformat(text)
    except ValueError:
        raise SqueueParseError(f"bad start time {text!r}") from None
    if stamp.tzinfo is None:
        stamp = stamp.replace(tzinfo=timezone.utc)
    return int(stamp.timestamp())


def parse_squeue_output(text: str, now: int = 0) -> tuple[QueueSnapshot, list[str]]:
    """Pinned-format squeue output -> (QueueSnapshot, warnings).

    Rows that cannot be used (unknown state, unlimited limit, missing
    start for a running job) are collected as warnings, never fatal.
    A missing header is fatal.
    """
    lines = [line for line in text.splitlines() if line.strip()]
    if not lines or "JOBID" not in lines[0].upper():
        raise SqueueParseError("header missing from squeue output")
    running: list[RunningJob] = []
    pending: list[PendingJob] = []
    warnings: list[str] = []
    for lineno, line in enumerate(lines[1:], start=2):
        fields = [part.strip() for part in line.split("|")]
        if len(fields) != 7:
            warnings.append(f"line {lineno}: expected 7 fields, got {len(fields)}")
            continue
        raw_id, state, start_text, limit_text, nodelist, sched_nodes, num_nodes = fields
        try:
            job_id = int(raw_id)
            limit = parse_timelimit(limit_text)
            state = state.upper()
            if state in ("RUNNING", "R"):
                if limit is None:
                    warnings.append(f"line {lineno}: job {job_id} has no finite limit")
                    continue
                start = _parse_start_time(start_text)
                if start is None:
                    warnings.append(f"line {lineno}: running job {job_id} lacks a start time")
                    continue
                running.append(RunningJob(
                    job_id=job_id, start_time=start, current_limit=limit,
                    allocated_nodes=expand_nodelist(nodelist)))
            elif state in ("PENDING", "PD"):
                if limit is None:
                    warnings.append(f"line {lineno}: job {job_id} has no finite limit")
                    continue
                planned = _parse_start_time(start_text)
                if planned is not None and planned < now:
                    planned = now  # squeue estimates may lag the clock
                pending.append(PendingJob(
                    job_id=job_id, nodes=int(num_nodes), time_limit=limit,
                    planned_start=planned,
                    planned_nodes=expand_nodelist(sched_nodes) or None))
            else:
                warnings.append(f"line {lineno}: ignoring job {job_id} in state {state}")
        except (ValueError, TailtrimError) as exc:
            warnings.append(f"line {lineno}: {exc}")
    snapshot = QueueSnapshot(
        now=now, running=tuple(running), pending=tuple(pending),
        free_nodes=frozenset())
    return snapshot, warnings


CommandRunner = Callable[[SchedulerCommand], str]


def run_command(command: SchedulerCommand, timeout: float = 30.0) -> str:
    """Default runner: shell out, enforce the expected exit code, return
    stdout."""
    proc = subprocess.run(list(command.argv), capture_output=True, text=True,
                          timeout=timeout)
    if proc.returncode != command.expected_exit:
        raise CommandFailed(
            f"{command} exited {proc.returncode}: {proc.stderr.strip()}")
    return proc.stdout


class SlurmClient:
    """Scheduler backend for the live daemon loop; all I/O flows through
    the injected runner (tests supply fixtures)."""

    def __init__(self, runner: CommandRunner = run_command):
        self.runner = runner
        self.warnings: list[str] = []

    def snapshot(self, now: int) -> QueueSnapshot:
        output = self.runner(build_queue_command())
        snapshot, warnings = parse_squeue_output(output, now=now)
        self.warnings = warnings
        return snapshot

    def apply(self, action: AdjustmentAction) -> None:
        if action.verb is ActionVerb.CANCEL_NOW:
            self.runner(build_cancel_command(action.job_id))
        else:
            assert action.new_limit is not None
            self.runner(build_update_command(action.job_id, action.new_limit))
