"""Cross-policy identities on a small checkpointing workload.

These are exact consequences of the mechanism: cancellation removes
exactly the post-checkpoint run segment, extension adds exactly the
extended jobs' extra run time, and one extension buys at most one extra
checkpoint.
"""

import pytest

from tailtrim.metrics import aggregate, tail_waste
from tailtrim.model import ClusterConfig, JobState, PolicyKind
from tailtrim.sim import run_simulation
from tailtrim.workload import GeneratorShape, synthesize_paper_workload

POLICIES = (PolicyKind.BASELINE, PolicyKind.EARLY_CANCEL, PolicyKind.EXTEND,
            PolicyKind.HYBRID)

MINI_SHAPE = GeneratorShape(
    completed_jobs=30, timeout_jobs=10, checkpointing_jobs=20,
    cluster_nodes=6, completed_node_choices=(1, 2, 4),
    timeout_node_choices=(1, 2), ckpt_node_choices=(1, 2))


@pytest.fixture(scope="module")
def runs():
    specs = synthesize_paper_workload(2, MINI_SHAPE)
    cluster = ClusterConfig(node_count=6)
    return {policy: run_simulation(specs, cluster, policy)
            for policy in POLICIES}


@pytest.fixture(scope="module")
def reports(runs):
    return {policy: aggregate(result.runtimes_sorted(), policy)
            for policy, result in runs.items()}


def duration(rt):
    return rt.end_time - rt.start_time


def test_cancellation_removes_exactly_the_tail(reports):
    base = reports[PolicyKind.BASELINE]
    cancel = reports[PolicyKind.EARLY_CANCEL]
    assert base.total_cpu - cancel.total_cpu == \
        base.tail_waste - cancel.tail_waste


def test_extension_adds_exactly_the_extended_run_time(runs, reports):
    base_runtimes = runs[PolicyKind.BASELINE].runtimes
    extended_delta = 0
    for rt in runs[PolicyKind.EXTEND].runtimes.values():
        if rt.extensions_granted > 0:
            extended_delta += rt.spec.cores * (
                duration(rt) - duration(base_runtimes[rt.job_id]))
    assert reports[PolicyKind.EXTEND].total_cpu - \
        reports[PolicyKind.BASELINE].total_cpu == extended_delta


def test_checkpoint_monotonicity(reports):
    totals = {p: reports[p].total_checkpoints for p in POLICIES}
    assert totals[PolicyKind.BASELINE] == totals[PolicyKind.EARLY_CANCEL]
    assert totals[PolicyKind.EARLY_CANCEL] <= totals[PolicyKind.HYBRID] \
        <= totals[PolicyKind.EXTEND]


def test_at_most_one_extra_checkpoint_per_job(runs):
    baseline = runs[PolicyKind.BASELINE].runtimes
    for policy in (PolicyKind.EXTEND, PolicyKind.HYBRID):
        for rt in runs[policy].runtimes.values():
            assert len(rt.checkpoints) <= \
                len(baseline[rt.job_id].checkpoints) + 1


def test_cancelled_tail_bounded_by_poll_interval(runs):
    for policy in (PolicyKind.EARLY_CANCEL, PolicyKind.EXTEND,
                   PolicyKind.HYBRID):
        for rt in runs[policy].runtimes.values():
            if rt.state is JobState.CANCELLED_AT_CKPT:
                assert tail_waste(rt) <= rt.spec.cores * 20


def test_adjusted_job_split(reports):
    cancel = reports[PolicyKind.EARLY_CANCEL].counts
    extend = reports[PolicyKind.EXTEND].counts
    hybrid = reports[PolicyKind.HYBRID].counts
    assert cancel.early_cancelled == 20
    assert extend.extended == 20
    assert hybrid.early_cancelled + hybrid.extended == 20


def test_baseline_issues_nothing(runs):
    assert runs[PolicyKind.BASELINE].actions == []
