"""tailtrim: a deterministic batch-cluster simulator plus an autonomy
daemon that adjusts running-job time limits from reported checkpoint
progress, with a Slurm command adapter for live deployments."""

__version__ = "0.1.0"

from .model import (  # noqa: F401
    ClusterConfig,
    JobRuntime,
    JobSpec,
    JobState,
    PolicyKind,
    SchedSource,
    cpu_time,
)
from .sim import SimulationResult, run_simulation  # noqa: F401
from .workload import GeneratorShape, synthesize_paper_workload  # noqa: F401
