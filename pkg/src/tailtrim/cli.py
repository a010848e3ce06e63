"""Experiment orchestration: generate workloads, run one policy, or run
the full four-policy comparison.

Exit codes: 0 success, 1 usage error, 2 input error, 3 internal
assertion failure. Every run lands in an output directory together with
a manifest (input hashes, effective config, package version) so results
can be reproduced exactly.
"""

from __future__ import annotations

import argparse
import dataclasses
import hashlib
import json
import sys
import time
from pathlib import Path

from . import __version__, placement
from .daemon import write_action_log
from .metrics import aggregate, compare, write_report
from .model import ClusterConfig, InternalCheckError, PolicyKind, TailtrimError
from .sim import event_log_hash, run_simulation, write_event_log
from .workload import (
    GeneratorShape,
    read_jobspecs,
    synthesize_paper_workload,
    write_jobspecs,
)

USAGE_EXIT = 1
INPUT_EXIT = 2
INTERNAL_EXIT = 3

POLICY_ORDER = (PolicyKind.BASELINE, PolicyKind.EARLY_CANCEL,
                PolicyKind.EXTEND, PolicyKind.HYBRID)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(USAGE_EXIT)


def _sha256(path: Path) -> str:
    digest = hashlib.sha256()
    with path.open("rb") as handle:
        for chunk in iter(lambda: handle.read(65536), b""):
            digest.update(chunk)
    return digest.hexdigest()


def _load_cluster(args) -> ClusterConfig:
    values = {}
    if args.cluster:
        with open(args.cluster, "r", encoding="utf-8") as handle:
            values.update(json.load(handle))
    # Flags override the config file.
    if getattr(args, "poll_interval", None) is not None:
        values["poll_interval"] = args.poll_interval
    if getattr(args, "grace", None) is not None:
        values["extension_grace"] = args.grace
    if getattr(args, "max_extensions", None) is not None:
        values["max_extensions_per_job"] = args.max_extensions
    return ClusterConfig(**values)


def _write_manifest(out_dir: Path, args, cluster: ClusterConfig, extra: dict):
    manifest = {
        "tool": "tailtrim",
        "version": __version__,
        "placement_backend": placement.BACKEND,
        "argv": sys.argv[1:],
        "cluster": dataclasses.asdict(cluster),
        **extra,
    }
    with (out_dir / "manifest.json").open("w", encoding="utf-8") as handle:
        json.dump(manifest, handle, indent=2, sort_keys=True)
        handle.write("\n")


def cmd_gen_workload(args) -> int:
    cluster = _load_cluster(args)
    if args.shape:
        shape = GeneratorShape.from_file(args.shape)
    else:
        shape = GeneratorShape(cluster_nodes=cluster.node_count,
                               cores_per_node=cluster.cores_per_node)
    if args.nodes_max is not None:
        shape = shape.capped(args.nodes_max)
    specs = synthesize_paper_workload(args.seed, shape)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    write_jobspecs(specs, out)
    print(f"{len(specs)} jobs written to {out}: "
          f"{shape.completed_jobs} complete-destined / "
          f"{shape.timeout_jobs} timeout-destined / "
          f"{shape.checkpointing_jobs} checkpointing")
    return 0


def _run_one(specs, cluster, policy, out_dir: Path):
    result = run_simulation(specs, cluster, policy)
    out_dir.mkdir(parents=True, exist_ok=True)
    write_event_log(result.events, out_dir / "events.jsonl")
    write_action_log(result.actions, out_dir / "actions.jsonl")
    report = aggregate(result.runtimes_sorted(), policy)
    write_report(report, out_dir / "report.json")
    return result, report


def cmd_run(args) -> int:
    cluster = _load_cluster(args)
    policy = PolicyKind.from_string(args.policy)
    specs = read_jobspecs(args.workload)
    out_dir = Path(args.out)
    result, report = _run_one(specs, cluster, policy, out_dir)
    _write_manifest(out_dir, args, cluster, {
        "workload": {"path": str(args.workload),
                     "sha256": _sha256(Path(args.workload))},
        "policy": policy.value,
        "event_log_sha256": event_log_hash(result.events),
    })
    counts = report.counts
    print(f"policy={policy.value} jobs={counts.total} "
          f"completed={counts.completed} timeout={counts.timeout} "
          f"early_cancelled={counts.early_cancelled} extended={counts.extended} "
          f"tail_waste={report.tail_waste} makespan={report.makespan}")
    return 0


def cmd_compare(args) -> int:
    cluster = _load_cluster(args)
    specs = read_jobspecs(args.workload)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    started = time.perf_counter()
    reports = []
    hashes = {}
    for policy in POLICY_ORDER:
        result, report = _run_one(specs, cluster, policy, out_dir / policy.value)
        reports.append(report)
        hashes[policy.value] = event_log_hash(result.events)
    table = compare(reports)
    (out_dir / "comparison.csv").write_text(table.to_csv(), encoding="utf-8")
    _write_manifest(out_dir, args, cluster, {
        "workload": {"path": str(args.workload),
                     "sha256": _sha256(Path(args.workload))},
        "policies": [p.value for p in POLICY_ORDER],
        "event_log_sha256": hashes,
        "wall_seconds": round(time.perf_counter() - started, 3),
    })
    print(table.summary())
    print(f"comparison written to {out_dir / 'comparison.csv'}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="tailtrim",
                     description="Batch-cluster simulation of checkpoint-aware "
                                 "job time limit adjustment")
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("gen-workload", help="write a synthetic workload file")
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--out", default="workload.csv")
    gen.add_argument("--shape", help="generator shape JSON")
    gen.add_argument("--cluster", help="cluster config JSON")
    gen.add_argument("--nodes-max", type=int, default=None,
                     help="largest node count any generated job may request")
    gen.set_defaults(func=cmd_gen_workload)

    run = sub.add_parser("run", help="simulate one policy")
    run.add_argument("--workload", required=True)
    run.add_argument("--policy", required=True,
                     choices=[p.value for p in PolicyKind])
    run.add_argument("--cluster", help="cluster config JSON")
    run.add_argument("--out", default="run-out")
    run.add_argument("--poll-interval", type=int, default=None)
    run.add_argument("--grace", type=int, default=None)
    run.add_argument("--max-extensions", type=int, default=None)
    run.set_defaults(func=cmd_run)

    cmp_ = sub.add_parser("compare",
                          help="run all four policies and tabulate the deltas")
    cmp_.add_argument("--workload", required=True)
    cmp_.add_argument("--cluster", help="cluster config JSON")
    cmp_.add_argument("--out", default="compare-out")
    cmp_.add_argument("--poll-interval", type=int, default=None)
    cmp_.add_argument("--grace", type=int, default=None)
    cmp_.add_argument("--max-extensions", type=int, default=None)
    cmp_.set_defaults(func=cmd_compare)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if exc.code is not None else 0
    try:
        return args.func(args)
    except InternalCheckError as exc:
        print(f"internal error: {exc}", file=sys.stderr)
        return INTERNAL_EXIT
    except (TailtrimError, OSError, json.JSONDecodeError, ValueError, TypeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return INPUT_EXIT


if __name__ == "__main__":
    sys.exit(main())
