import random

import pytest

from tailtrim.model import (
    CancelAtCheckpoint,
    ClusterConfig,
    IllegalTransitionError,
    JobRuntime,
    JobSpec,
    JobState,
    LimitReached,
    NaturalEnd,
    NotFinishedError,
    PolicyKind,
    SchedSource,
    Start,
    cpu_time,
    grant_extension,
    job_transition,
    record_checkpoint,
)


def make_spec(**overrides):
    base = dict(job_id=1, submit_time=0, nodes=1, cores_per_node=32,
                time_limit=1440, true_duration=2000)
    base.update(overrides)
    return JobSpec(**base)


class TestJobSpec:
    def test_cores(self):
        assert make_spec(nodes=2, cores_per_node=32).cores == 64

    @pytest.mark.parametrize("bad", [
        dict(nodes=0),
        dict(cores_per_node=0),
        dict(time_limit=0),
        dict(true_duration=0),
        dict(submit_time=-1),
        dict(checkpointing=True),  # missing interval
        dict(checkpointing=True, ckpt_interval=0),
        dict(ckpt_interval=420),  # interval without checkpointing
    ])
    def test_invalid(self, bad):
        with pytest.raises(ValueError):
            make_spec(**bad)


class TestTransitions:
    def test_start(self):
        rt = JobRuntime(make_spec())
        job_transition(rt, Start(100, (3,), SchedSource.MAIN))
        assert rt.state is JobState.RUNNING
        assert rt.start_time == 100
        assert rt.allocated_nodes == {3}

    def test_timeout_at_limit(self):
        rt = JobRuntime(make_spec(time_limit=1440, true_duration=2000))
        job_transition(rt, Start(0, (0,), SchedSource.MAIN))
        job_transition(rt, LimitReached(1440))
        assert rt.state is JobState.TIMEOUT
        assert rt.end_time == 1440

    def test_terminal_is_absorbing(self):
        rt = JobRuntime(make_spec(true_duration=100))
        job_transition(rt, Start(0, (0,), SchedSource.MAIN))
        job_transition(rt, NaturalEnd(100))
        with pytest.raises(IllegalTransitionError) as err:
            job_transition(rt, Start(200, (0,), SchedSource.MAIN))
        assert "COMPLETED" in str(err.value) and "Start" in str(err.value)

    def test_completion_requires_fitting_limit(self):
        rt = JobRuntime(make_spec(time_limit=100, true_duration=200))
        job_transition(rt, Start(0, (0,), SchedSource.MAIN))
        with pytest.raises(ValueError):
            job_transition(rt, NaturalEnd(200))

    def test_completion_exactly_at_limit(self):
        rt = JobRuntime(make_spec(time_limit=100, true_duration=100))
        job_transition(rt, Start(0, (0,), SchedSource.MAIN))
        job_transition(rt, NaturalEnd(100))
        assert rt.state is JobState.COMPLETED

    def test_timeout_illegal_when_job_would_finish(self):
        rt = JobRuntime(make_spec(time_limit=100, true_duration=50))
        job_transition(rt, Start(0, (0,), SchedSource.MAIN))
        with pytest.raises(ValueError):
            job_transition(rt, LimitReached(100))

    def test_cancel_requires_checkpoint(self):
        rt = JobRuntime(make_spec())
        job_transition(rt, Start(0, (0,), SchedSource.MAIN))
        with pytest.raises(ValueError):
            job_transition(rt, CancelAtCheckpoint(500))
        record_checkpoint(rt, 420)
        job_transition(rt, CancelAtCheckpoint(430))
        assert rt.state is JobState.CANCELLED_AT_CKPT
        assert rt.end_time == 430

    def test_cancel_cannot_precede_last_checkpoint(self):
        rt = JobRuntime(make_spec())
        job_transition(rt, Start(0, (0,), SchedSource.MAIN))
        record_checkpoint(rt, 420)
        with pytest.raises(ValueError):
            job_transition(rt, CancelAtCheckpoint(400))

    def test_events_on_pending_job_rejected(self):
        rt = JobRuntime(make_spec())
        for event in (NaturalEnd(10), LimitReached(10), CancelAtCheckpoint(10)):
            with pytest.raises(IllegalTransitionError):
                job_transition(rt, event)

    def test_wrong_node_count(self):
        rt = JobRuntime(make_spec(nodes=2))
        with pytest.raises(ValueError):
            job_transition(rt, Start(0, (0,), SchedSource.MAIN))


class TestCheckpointsAndExtensions:
    def test_checkpoints_strictly_increase(self):
        rt = JobRuntime(make_spec())
        job_transition(rt, Start(10, (0,), SchedSource.MAIN))
        record_checkpoint(rt, 430)
        with pytest.raises(ValueError):
            record_checkpoint(rt, 430)
        with pytest.raises(ValueError):
            record_checkpoint(rt, 5)  # before start

    def test_limits_only_grow(self):
        rt = JobRuntime(make_spec(time_limit=1440))
        job_transition(rt, Start(0, (0,), SchedSource.MAIN))
        grant_extension(rt, 1700)
        assert rt.current_limit == 1700
        assert rt.extensions_granted == 1
        with pytest.raises(ValueError):
            grant_extension(rt, 1700)
        with pytest.raises(ValueError):
            grant_extension(rt, 1000)


class TestCpuTime:
    def test_one_node_32_cores_1440s(self):
        rt = JobRuntime(make_spec(time_limit=1440, true_duration=2000))
        job_transition(rt, Start(0, (0,), SchedSource.MAIN))
        job_transition(rt, LimitReached(1440))
        assert cpu_time(rt) == 46_080

    def test_two_nodes_600s(self):
        rt = JobRuntime(make_spec(nodes=2, time_limit=900, true_duration=600))
        job_transition(rt, Start(0, (0, 1), SchedSource.MAIN))
        job_transition(rt, NaturalEnd(600))
        assert cpu_time(rt) == 38_400

    def test_zero_duration(self):
        rt = JobRuntime(make_spec(checkpointing=True, ckpt_interval=420))
        job_transition(rt, Start(100, (0,), SchedSource.MAIN))
        record_checkpoint(rt, 100)
        job_transition(rt, CancelAtCheckpoint(100))
        assert cpu_time(rt) == 0

    def test_not_finished(self):
        rt = JobRuntime(make_spec())
        with pytest.raises(NotFinishedError):
            cpu_time(rt)


def test_random_event_sequences_reach_one_terminal_state():
    # The machine is a DAG from PENDING to exactly one absorbing state:
    # replay random event soups and count accepted terminal assignments.
    rng = random.Random(7)
    for _ in range(300):
        limit = rng.randint(50, 400)
        true = rng.randint(10, 500)
        spec = make_spec(time_limit=limit, true_duration=true,
                         checkpointing=True, ckpt_interval=rng.randint(5, 100))
        rt = JobRuntime(spec)
        events = [Start(0, (0,), SchedSource.MAIN),
                  LimitReached(limit), NaturalEnd(true),
                  CancelAtCheckpoint(rng.randint(0, 600))]
        rng.shuffle(events)
        terminal_hits = 0
        for event in events:
            before = rt.state
            try:
                if rng.random() < 0.3 and rt.state is JobState.RUNNING:
                    record_checkpoint(rt, rng.randint(0, 600))
            except ValueError:
                pass
            try:
                job_transition(rt, event)
            except (IllegalTransitionError, ValueError):
                continue
            if before is JobState.RUNNING and rt.is_terminal:
                terminal_hits += 1
        assert terminal_hits <= 1
        if rt.is_terminal:
            assert rt.end_time is not None


def test_cluster_config_validation():
    assert ClusterConfig().node_count == 20
    assert ClusterConfig().poll_interval == 20
    with pytest.raises(ValueError):
        ClusterConfig(node_count=0)
    with pytest.raises(ValueError):
        ClusterConfig(poll_interval=0)
    with pytest.raises(ValueError):
        ClusterConfig(extension_grace=-1)


def test_policy_kind_from_string():
    assert PolicyKind.from_string("early-cancel") is PolicyKind.EARLY_CANCEL
    with pytest.raises(ValueError):
        PolicyKind.from_string("nope")
