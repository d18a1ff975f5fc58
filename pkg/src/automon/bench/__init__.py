"""Benchmark problems and harness comparing signaling mechanisms."""

from automon.bench.explicit import CondQueue, ExplicitMonitor
from automon.bench.harness import (
    CSV_COLUMNS,
    RunResult,
    SuiteRow,
    default_configs,
    run_problem,
    run_suite,
    trimmed_mean,
    write_csv,
)
from automon.bench.problems import PROBLEMS, ProblemConfig, Workload, build

__all__ = [
    "CSV_COLUMNS",
    "PROBLEMS",
    "CondQueue",
    "ExplicitMonitor",
    "ProblemConfig",
    "RunResult",
    "SuiteRow",
    "Workload",
    "build",
    "default_configs",
    "run_problem",
    "run_suite",
    "trimmed_mean",
    "write_csv",
]
