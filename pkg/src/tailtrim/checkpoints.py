"""Checkpoint report parsing, interval estimation, and next-checkpoint
prediction.

Applications report progress by appending one timestamp per line to a
spool file named ckpt_<job_id>.log. The in-memory ledger used by the
simulator feeds every report through the same line parser, so the file
protocol is exercised on every simulated run.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping

from .model import TailtrimError

SPOOL_PREFIX = "ckpt_"
SPOOL_SUFFIX = ".log"


class CheckpointFileError(TailtrimError):
    """Malformed checkpoint report; carries the offending line number."""

    def __init__(self, message: str, line: int):
        super().__init__(f"line {line}: {message}")
        self.line = line


class NoCheckpointData(TailtrimError):
    """Raised for jobs with no recorded checkpoint; such jobs are treated
    as non-checkpointing and skipped by the daemon."""


@dataclass(frozen=True)
class LedgerEntry:
    """Snapshot view of one job's checkpoint history."""

    job_start: int
    timestamps: tuple[int, ...]

    def __post_init__(self):
        last = self.job_start
        first = True
        for ts in self.timestamps:
            if ts < self.job_start or (not first and ts <= last):
                raise ValueError("timestamps must be strictly increasing and >= job_start")
            last = ts
            first = False


def _parse_line(text: str, lineno: int) -> int | None:
    """One report line -> integer seconds (decimals floored), None if blank."""
    stripped = text.strip()
    if not stripped:
        return None
    try:
        value = float(stripped)
    except ValueError:
        raise CheckpointFileError(f"non-numeric timestamp {stripped!r}", lineno) from None
    if not math.isfinite(value):
        raise CheckpointFileError(f"non-finite timestamp {stripped!r}", lineno)
    return math.floor(value)


def parse_checkpoint_file(stream: Iterable[str] | str) -> list[int]:
    """Parse a checkpoint report (text or line iterable) into a validated,
    strictly increasing list of integer seconds."""
    if isinstance(stream, str):
        stream = stream.splitlines()
    out: list[int] = []
    for lineno, raw in enumerate(stream, start=1):
        value = _parse_line(raw, lineno)
        if value is None:
            continue
        if out and value <= out[-1]:
            raise CheckpointFileError(
                f"timestamp {value} does not increase past {out[-1]}", lineno)
        out.append(value)
    return out


class CheckpointLedger:
    """Per-job checkpoint histories with snapshot-read semantics.

    One writer appends reports; readers get immutable LedgerEntry copies,
    never a partially appended record.
    """

    def __init__(self):
        self._starts: dict[int, int] = {}
        self._timestamps: dict[int, list[int]] = {}

    def open_job(self, job_id: int, job_start: int) -> None:
        self._starts[job_id] = job_start
        self._timestamps.setdefault(job_id, [])

    def append_report(self, job_id: int, line: str) -> int:
        """Record one report line for a started job, through the same
        parser and monotonicity check as the file protocol."""
        if job_id not in self._starts:
            raise KeyError(f"job {job_id} has no open ledger entry")
        history = self._timestamps[job_id]
        value = _parse_line(line, lineno=len(history) + 1)
        if value is None:
            raise CheckpointFileError("blank report line", len(history) + 1)
        if value < self._starts[job_id]:
            raise CheckpointFileError(
                f"timestamp {value} precedes job start {self._starts[job_id]}",
                len(history) + 1)
        if history and value <= history[-1]:
            raise CheckpointFileError(
                f"timestamp {value} does not increase past {history[-1]}",
                len(history) + 1)
        history.append(value)
        return value

    def entry(self, job_id: int) -> LedgerEntry | None:
        if job_id not in self._starts:
            return None
        return LedgerEntry(self._starts[job_id], tuple(self._timestamps[job_id]))

    def discard(self, job_id: int) -> None:
        self._starts.pop(job_id, None)
        self._timestamps.pop(job_id, None)

    def job_ids(self) -> list[int]:
        return sorted(self._starts)


def estimate_interval(entry: LedgerEntry) -> int:
    """Mean gap between successive checkpoints, with the job start acting
    as the zeroth checkpoint, rounded to the nearest second. With a single
    checkpoint this is the time from start to that checkpoint, which is
    exact for periodic reporters. Never below 1 s."""
    ts = entry.timestamps
    if not ts:
        raise NoCheckpointData("no checkpoints recorded")
    return max(1, round((ts[-1] - entry.job_start) / len(ts)))


def predict_next(entry: LedgerEntry) -> int:
    """Last checkpoint's timestamp plus the estimated interval."""
    if not entry.timestamps:
        raise NoCheckpointData("no checkpoints recorded")
    return entry.timestamps[-1] + estimate_interval(entry)


def spool_path(spool_dir: str | os.PathLike, job_id: int) -> Path:
    return Path(spool_dir) / f"{SPOOL_PREFIX}{job_id}{SPOOL_SUFFIX}"


def load_spool(spool_dir: str | os.PathLike, job_starts: Mapping[int, int]) -> CheckpointLedger:
    """Build a ledger from a spool directory. Only jobs present in
    job_starts (id -> start time) are loaded; stray files are ignored."""
    ledger = CheckpointLedger()
    for job_id, start in job_starts.items():
        ledger.open_job(job_id, start)
        path = spool_path(spool_dir, job_id)
        if not path.exists():
            continue
        for ts in parse_checkpoint_file(path.read_text().splitlines()):
            ledger.append_report(job_id, str(ts))
    return ledger
