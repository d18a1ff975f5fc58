"""Saturation-test harness: repeated timed runs, trimmed means, CSV rows."""

from __future__ import annotations

import csv
import statistics
import sys
import threading
import time
from dataclasses import dataclass, field

from automon.bench.problems import PROBLEMS, ProblemConfig, build
from automon.monitor import Mechanism

CSV_COLUMNS = (
    "problem",
    "mechanism",
    "threads",
    "trimmed_mean_s",
    "futile_wakeups",
    "signals",
    "broadcasts",
    "preds_evaluated",
    "ops",
    "runs",
    "min_s",
    "max_s",
    "seed",
    "preds_per_signal",
)

ALL_MECHANISMS = tuple(Mechanism)


@dataclass
class RunResult:
    config: ProblemConfig
    mechanism: Mechanism
    wall_time: float
    counters: dict
    digest: dict


@dataclass
class SuiteRow:
    config: ProblemConfig
    mechanism: Mechanism
    results: list = field(repr=False)
    trimmed_mean_s: float = 0.0
    min_s: float = 0.0
    max_s: float = 0.0
    counters: dict = field(default_factory=dict)

    def as_csv(self) -> dict:
        c = self.counters
        return {
            "problem": self.config.problem,
            "mechanism": self.mechanism.value,
            "threads": self.config.threads,
            "trimmed_mean_s": f"{self.trimmed_mean_s:.6f}",
            "futile_wakeups": c["futile_wakeups"],
            "signals": c["signals"],
            "broadcasts": c["broadcasts"],
            "preds_evaluated": c["preds_evaluated"],
            "ops": self.config.ops,
            "runs": len(self.results),
            "min_s": f"{self.min_s:.6f}",
            "max_s": f"{self.max_s:.6f}",
            "seed": self.config.seed,
            "preds_per_signal": f"{c['preds_per_signal']:.3f}",
        }


def trimmed_mean(values) -> float:
    """Mean after dropping the single best and worst value (when there are at least 3)."""
    values = sorted(values)
    if len(values) >= 3:
        values = values[1:-1]
    return statistics.fmean(values)


def run_problem(cfg: ProblemConfig, mech, *, switch_interval: float | None = None) -> RunResult:
    """Run one configuration once on OS threads and validate its digest.

    Raises :class:`automon.CorrectnessError` if the digest does not hold.
    """
    mech = Mechanism.parse(mech)
    work = build(cfg, mech)
    start = threading.Event()
    failures = []

    def body(fn):
        start.wait()
        try:
            fn()
        except BaseException as exc:  # surfaced after join
            failures.append(exc)

    threads = [threading.Thread(target=body, args=(fn,), daemon=True) for fn in work.workers]
    old = sys.getswitchinterval()
    if switch_interval is not None:
        sys.setswitchinterval(switch_interval)
    try:
        for t in threads:
            t.start()
        t0 = time.perf_counter()
        start.set()
        for t in threads:
            t.join()
        elapsed = time.perf_counter() - t0
    finally:
        sys.setswitchinterval(old)
    if failures:
        raise failures[0]
    digest = work.digest()
    return RunResult(cfg, mech, elapsed, work.counters(), digest)


def run_suite(configs, mechanisms=ALL_MECHANISMS, *, runs: int = 25, progress=None) -> list:
    """Repeat every (config, mechanism) pair *runs* times; one :class:`SuiteRow` each.

    Counters in a row are averaged over the runs (rounded to integers).
    Any correctness failure propagates and voids the suite.
    """
    if isinstance(configs, ProblemConfig):
        configs = [configs]
    if runs < 1:
        raise ValueError("runs must be positive")
    rows = []
    for cfg in configs:
        for mech in mechanisms:
            mech = Mechanism.parse(mech)
            results = []
            for i in range(runs):
                results.append(run_problem(cfg, mech))
                if progress is not None:
                    progress(cfg, mech, i, results[-1])
            rows.append(_summarize(cfg, mech, results))
    return rows


def _summarize(cfg, mech, results):
    times = [r.wall_time for r in results]
    keys = results[0].counters.keys()
    mean = {k: statistics.fmean(r.counters[k] for r in results) for k in keys}
    counters = {k: (v if k == "preds_per_signal" else round(v)) for k, v in mean.items()}
    return SuiteRow(cfg, mech, results, trimmed_mean(times), min(times), max(times), counters)


def default_configs(threads=(2, 4, 8, 16, 32, 64), ops: int = 10_000, seed: int = 0):
    return [ProblemConfig(p, t, ops, seed=seed) for p in PROBLEMS for t in threads]


def write_csv(rows, path_or_file):
    """Write suite rows; *path_or_file* is a path or an open text file."""
    if hasattr(path_or_file, "write"):
        _write(rows, path_or_file)
    else:
        with open(path_or_file, "w", newline="") as fh:
            _write(rows, fh)


def _write(rows, fh):
    writer = csv.DictWriter(fh, fieldnames=CSV_COLUMNS)
    writer.writeheader()
    for row in rows:
        writer.writerow(row.as_csv())
