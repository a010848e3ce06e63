import random

import pytest

from tailtrim.model import InfeasibleWorkloadError
from tailtrim.workload import (
    FilterCriteria,
    FinalState,
    GeneratorShape,
    TraceFormatError,
    TraceRecord,
    filter_jobs,
    mark_checkpointing,
    parse_trace,
    read_jobspecs,
    scale_time,
    synthesize_paper_workload,
    write_jobspecs,
)

CSV_HEADER = ("job_id,submit_time,nodes,cores_per_node,time_limit,"
              "run_duration,final_state,exclusive,partition,queue,month\n")


def record(**overrides):
    base = dict(job_id=1, submit_time=0, nodes=1, cores_per_node=32,
                time_limit=86400, run_duration=5000,
                final_state=FinalState.COMPLETED, exclusive=True,
                partition="1", queue="1", month="May")
    base.update(overrides)
    return TraceRecord(**base)


class TestParseTrace:
    def test_csv_row(self):
        text = CSV_HEADER + "17,0,2,32,86400,86400,TIMEOUT,true,1,1,May\n"
        records = parse_trace(text, "csv")
        assert len(records) == 1
        rec = records[0]
        assert (rec.job_id, rec.nodes, rec.time_limit) == (17, 2, 86400)
        assert rec.final_state is FinalState.TIMEOUT
        assert rec.exclusive is True

    def test_empty_stream(self):
        assert parse_trace("", "csv") == []
        assert parse_trace("", "jsonl") == []

    def test_header_only(self):
        assert parse_trace(CSV_HEADER, "csv") == []

    def test_negative_nodes_reports_line(self):
        text = (CSV_HEADER
                + "1,0,1,32,100,100,COMPLETED,true,1,1,May\n"
                + "2,0,-1,32,100,100,COMPLETED,true,1,1,May\n")
        with pytest.raises(TraceFormatError) as err:
            parse_trace(text, "csv")
        assert err.value.line == 3

    def test_non_numeric_field(self):
        text = CSV_HEADER + "1,0,x,32,100,100,COMPLETED,true,1,1,May\n"
        with pytest.raises(TraceFormatError) as err:
            parse_trace(text, "csv")
        assert "nodes" in str(err.value)

    def test_wrong_header(self):
        with pytest.raises(TraceFormatError) as err:
            parse_trace("a,b,c\n1,2,3\n", "csv")
        assert err.value.line == 1

    def test_unknown_final_state_maps_to_other(self):
        text = CSV_HEADER + "1,0,1,32,100,100,FAILED,true,1,1,May\n"
        assert parse_trace(text, "csv")[0].final_state is FinalState.OTHER

    def test_jsonl(self):
        line = ('{"job_id": 5, "submit_time": 9, "nodes": 1, '
                '"cores_per_node": 32, "time_limit": 100, "run_duration": 50,'
                ' "final_state": "COMPLETED", "exclusive": true, '
                '"partition": 1, "queue": 1, "month": "May"}\n')
        records = parse_trace(line, "jsonl")
        assert records[0].job_id == 5
        assert records[0].partition == "1"  # identifiers coerced to text

    def test_jsonl_missing_field(self):
        with pytest.raises(TraceFormatError) as err:
            parse_trace('{"job_id": 5}\n', "jsonl")
        assert err.value.line == 1

    def test_jsonl_unknown_column(self):
        line = ('{"job_id": 5, "submit_time": 9, "nodes": 1, '
                '"cores_per_node": 32, "time_limit": 100, "run_duration": 50,'
                ' "final_state": "COMPLETED", "exclusive": true, '
                '"partition": 1, "queue": 1, "month": "May", "extra": 0}\n')
        with pytest.raises(TraceFormatError) as err:
            parse_trace(line, "jsonl")
        assert "extra" in str(err.value)

    def test_jsonl_bad_json(self):
        with pytest.raises(TraceFormatError):
            parse_trace("{broken\n", "jsonl")

    def test_unknown_format(self):
        with pytest.raises(ValueError):
            parse_trace("", "xml")


class TestFilterJobs:
    def test_min_duration_boundary(self):
        records = [record(run_duration=3599), record(run_duration=3600)]
        kept = filter_jobs(records, FilterCriteria(min_run_duration=3600))
        assert [r.run_duration for r in kept] == [3600]

    def test_state_filter(self):
        records = [record(final_state=FinalState.OTHER),
                   record(final_state=FinalState.TIMEOUT)]
        kept = filter_jobs(records, FilterCriteria())
        assert [r.final_state for r in kept] == [FinalState.TIMEOUT]

    def test_identity_when_all_match(self):
        records = [record(job_id=i) for i in range(5)]
        criteria = FilterCriteria(partition="1", queue="1", month="May",
                                  min_run_duration=3600, require_exclusive=True)
        assert filter_jobs(records, criteria) == records

    def test_selectors(self):
        records = [record(partition="2"), record(queue="9"),
                   record(month="June"), record(exclusive=False), record()]
        criteria = FilterCriteria(partition="1", queue="1", month="May",
                                  require_exclusive=True)
        assert filter_jobs(records, criteria) == [records[-1]]

    def test_empty_result_is_legal(self):
        assert filter_jobs([record()], FilterCriteria(partition="zzz")) == []


class TestScaleTime:
    def test_paper_factor(self):
        out = scale_time([record(time_limit=86400, run_duration=3600)], 60)
        assert out[0].time_limit == 1440
        assert out[0].run_duration == 60
        assert out[0].submit_time == 0

    def test_identity_factor_still_zeroes_submits(self):
        out = scale_time([record(submit_time=5000)], 1)
        assert out[0].submit_time == 0
        assert out[0].time_limit == 86400

    def test_ties_round_to_even(self):
        out = scale_time([record(time_limit=90, run_duration=150)], 60)
        assert out[0].time_limit == 2  # 1.5 -> 2
        assert out[0].run_duration == 2  # 2.5 -> 2

    def test_bad_factor(self):
        with pytest.raises(ValueError):
            scale_time([record()], 0)
        with pytest.raises(ValueError):
            scale_time([record()], -3)


def test_filter_then_scale_commutes_away_from_boundaries():
    # Rounding makes the two orders disagree only within one quantum of
    # the threshold, so the generator keeps durations clear of it.
    rng = random.Random(21)
    threshold, factor = 3600, 60
    records = []
    for i in range(300):
        duration = rng.randint(0, 90_000)
        if abs(duration - threshold) < factor:
            duration += 2 * factor
        records.append(record(job_id=i, run_duration=duration,
                              time_limit=rng.randint(60, 90_000)))
    before = FilterCriteria(min_run_duration=threshold)
    after = FilterCriteria(min_run_duration=threshold // factor)
    assert scale_time(filter_jobs(records, before), factor) == \
        filter_jobs(scale_time(records, factor), after)


class TestMarkCheckpointing:
    def test_timeout_at_max_limit_becomes_checkpointing(self):
        rec = record(final_state=FinalState.TIMEOUT, time_limit=1440,
                     run_duration=1440)
        spec = mark_checkpointing([rec], max_limit=1440, ckpt_interval=420)[0]
        assert spec.checkpointing is True
        assert spec.ckpt_interval == 420
        assert spec.true_duration == 1861

    def test_timeout_below_max_stays_plain(self):
        rec = record(final_state=FinalState.TIMEOUT, time_limit=600,
                     run_duration=600)
        spec = mark_checkpointing([rec], max_limit=1440, ckpt_interval=420)[0]
        assert spec.checkpointing is False
        assert spec.true_duration == 1021  # still exceeds one extension

    def test_completed_keeps_duration(self):
        rec = record(final_state=FinalState.COMPLETED, time_limit=1440,
                     run_duration=900)
        spec = mark_checkpointing([rec], max_limit=1440, ckpt_interval=420)[0]
        assert spec.checkpointing is False
        assert spec.true_duration == 900

    def test_partition_preserves_counts(self):
        rng = random.Random(4)
        records = []
        for i in range(120):
            state = rng.choice([FinalState.COMPLETED, FinalState.TIMEOUT])
            limit = rng.choice([600, 1200, 1440])
            records.append(record(
                job_id=i, final_state=state, time_limit=limit,
                run_duration=rng.randint(60, limit)))
        specs = mark_checkpointing(records, 1440, 420)
        assert len(specs) == len(records)
        expected = sum(1 for r in records
                       if r.final_state is FinalState.TIMEOUT
                       and r.time_limit == 1440)
        assert sum(1 for s in specs if s.checkpointing) == expected


class TestGenerator:
    def test_default_mix(self):
        specs = synthesize_paper_workload(0)
        assert len(specs) == 773
        assert sum(1 for s in specs if s.checkpointing) == 109
        completed = sum(1 for s in specs
                        if not s.checkpointing
                        and s.true_duration < s.time_limit)
        timeouts = sum(1 for s in specs
                       if not s.checkpointing
                       and s.true_duration > s.time_limit)
        assert completed == 556
        assert timeouts == 108

    def test_deterministic_per_seed(self):
        assert synthesize_paper_workload(7) == synthesize_paper_workload(7)
        assert synthesize_paper_workload(7) != synthesize_paper_workload(8)

    def test_checkpoint_fit_arithmetic(self):
        for spec in synthesize_paper_workload(3):
            if spec.checkpointing:
                assert spec.time_limit == 1440
                assert spec.time_limit // spec.ckpt_interval == 3
                assert spec.true_duration > spec.time_limit + spec.ckpt_interval

    def test_job_ids_unique_and_submits_zero(self):
        specs = synthesize_paper_workload(5)
        assert len({s.job_id for s in specs}) == len(specs)
        assert all(s.submit_time == 0 for s in specs)

    def test_infeasible_shape_rejected(self):
        shape = GeneratorShape(cluster_nodes=4,
                               completed_node_choices=(1, 2, 8))
        with pytest.raises(InfeasibleWorkloadError):
            synthesize_paper_workload(0, shape)

    def test_capped(self):
        shape = GeneratorShape().capped(2)
        assert shape.completed_node_choices == (1, 2)
        with pytest.raises(InfeasibleWorkloadError):
            GeneratorShape().capped(100)

    def test_shape_from_file(self, tmp_path):
        path = tmp_path / "shape.json"
        path.write_text('{"completed_jobs": 3, "timeout_jobs": 1, '
                        '"checkpointing_jobs": 2, '
                        '"completed_node_choices": [1]}')
        shape = GeneratorShape.from_file(path)
        assert shape.total_jobs == 6
        assert shape.completed_node_choices == (1,)
        specs = synthesize_paper_workload(0, shape)
        assert len(specs) == 6


class TestJobspecFiles:
    def test_csv_round_trip(self, tmp_path):
        specs = synthesize_paper_workload(0, GeneratorShape(
            completed_jobs=5, timeout_jobs=2, checkpointing_jobs=3))
        path = tmp_path / "jobs.csv"
        write_jobspecs(specs, path)
        assert read_jobspecs(path) == specs

    def test_jsonl_round_trip(self, tmp_path):
        specs = synthesize_paper_workload(1, GeneratorShape(
            completed_jobs=4, timeout_jobs=0, checkpointing_jobs=1))
        path = tmp_path / "jobs.jsonl"
        write_jobspecs(specs, path)
        assert read_jobspecs(path) == specs

    def test_bad_header(self, tmp_path):
        path = tmp_path / "jobs.csv"
        path.write_text("nope\n1\n")
        with pytest.raises(TraceFormatError):
            read_jobspecs(path)
