"""Bounded schedule exploration over simulated monitor programs."""

from __future__ import annotations

import random
import time
from dataclasses import dataclass, field
from typing import Callable

from automon.monitor import Mechanism
from automon.verify.sim import Execution, Outcome, Scenario

LOST_WAKEUP_KINDS = frozenset({"relay-invariance", "lost-wakeup"})
MAX_WARNINGS = 20


@dataclass
class Violation:
    kind: str
    message: str
    schedule: tuple  # thread ids, one per step
    trace: list = field(default_factory=list)

    def format(self) -> str:
        lines = [f"VIOLATION [{self.kind}] {self.message}", "schedule: " + " ".join(map(str, self.schedule))]
        lines += self.trace
        return "\n".join(lines)


@dataclass
class Verdict:
    scenario: str
    mechanism: str
    mode: str
    bound: int
    seed: int | None = None
    mutant: str | None = None
    schedules: int = 0
    completed: int = 0
    stuck: int = 0
    truncated: int = 0
    cycles: int = 0
    max_depth: int = 0
    elapsed_s: float = 0.0
    violation: Violation | None = None
    warnings: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return self.violation is None

    @property
    def status(self) -> str:
        if self.violation is not None:
            return "violation"
        if self.truncated:
            return "truncated"
        return "pass"

    def summary(self) -> str:
        parts = [
            f"{self.scenario} [{self.mechanism}{', mutant ' + self.mutant if self.mutant else ''}]",
            f"{self.mode}: {self.status.upper()}",
            f"schedules={self.schedules}",
            f"done={self.completed}",
            f"stuck={self.stuck}",
            f"cycles={self.cycles}",
            f"truncated={self.truncated}",
            f"max_depth={self.max_depth}",
            f"{self.elapsed_s:.2f}s",
        ]
        return "  ".join(parts)


def _factory(scenario):
    if isinstance(scenario, Scenario):
        return lambda: scenario
    return scenario


def explore(
    scenario: Scenario | Callable[[], Scenario],
    bound: int = 200,
    *,
    mode: str = "exhaustive",
    seed: int = 0,
    trials: int = 1000,
    mechanism=Mechanism.AUTO,
    mutant: str | None = None,
    kinds=None,
    limit: int | None = None,
) -> Verdict:
    """Run every schedule (``exhaustive``) or *trials* random ones (``random``).

    *scenario* is a Scenario or a zero-argument factory; a factory is called
    afresh for every schedule, which matters when thread actions close over
    mutable state.  Stops at the first finding whose kind is in *kinds*
    (all kinds when None).  *limit* caps the number of schedules in
    exhaustive mode; hitting it counts as truncation.
    """
    if bound < 1:
        raise ValueError("bound must be positive")
    if mode not in ("exhaustive", "random"):
        raise ValueError(f"unknown mode {mode!r}")
    make = _factory(scenario)
    mech = Mechanism.parse(mechanism)
    verdict = Verdict(make().name, mech.value, mode, bound, seed if mode == "random" else None, mutant)
    started = time.perf_counter()

    def execute(choose):
        ex = Execution(make(), mechanism=mech, mutant=mutant)
        outcome = ex.run(choose, bound)
        verdict.schedules += 1
        verdict.max_depth = max(verdict.max_depth, len(ex.schedule))
        if outcome is Outcome.VIOLATION and kinds is not None and ex.finding.kind not in kinds:
            outcome = Outcome.DONE
        if outcome is Outcome.DONE:
            verdict.completed += 1
        elif outcome is Outcome.STUCK:
            verdict.stuck += 1
        elif outcome is Outcome.TRUNCATED:
            verdict.truncated += 1
        elif outcome is Outcome.CYCLE:
            verdict.cycles += 1
            if ex.warning not in verdict.warnings and len(verdict.warnings) < MAX_WARNINGS:
                verdict.warnings.append(ex.warning)
        else:
            verdict.violation = Violation(ex.finding.kind, ex.finding.message, tuple(ex.schedule))
        return ex

    if mode == "exhaustive":
        prefix = []
        while True:
            widths = []
            path = []

            def choose(depth, enabled):
                i = prefix[depth] if depth < len(prefix) else 0
                widths.append(len(enabled))
                path.append(i)
                return i

            execute(choose)
            if verdict.violation is not None:
                break
            i = len(path) - 1
            while i >= 0 and path[i] + 1 >= widths[i]:
                i -= 1
            if i < 0:
                break
            if limit is not None and verdict.schedules >= limit:
                verdict.truncated += 1
                break
            prefix = path[:i] + [path[i] + 1]
    else:
        rng = random.Random(seed)
        for _ in range(trials):
            execute(lambda depth, enabled: rng.randrange(len(enabled)))
            if verdict.violation is not None:
                break

    if verdict.violation is not None:
        verdict.violation.trace = replay(make, verdict.violation.schedule, mechanism=mech, mutant=mutant)
    verdict.elapsed_s = time.perf_counter() - started
    return verdict


def check_no_lost_wakeup(scenario, bound: int = 200, **kwargs) -> Verdict:
    """Like :func:`explore`, reporting only lost wakeups.

    A lost wakeup is a waiter whose predicate holds while no thread is left
    to wake it: either every thread is done or waiting, or the remaining
    threads cycle without ever waking it.
    """
    return explore(scenario, bound, kinds=LOST_WAKEUP_KINDS, **kwargs)


def replay(scenario, schedule, *, mechanism=Mechanism.AUTO, mutant=None) -> list:
    """Re-run *schedule* (thread ids) and return the step log."""
    make = _factory(scenario)
    ex = Execution(make(), mechanism=mechanism, mutant=mutant, log=True)
    steps = iter(schedule)

    def choose(depth, enabled):
        tid = next(steps, None)
        if tid is None or tid not in enabled:
            raise ValueError(f"schedule diverges at step {depth}")
        return enabled.index(tid)

    ex.run(choose, len(schedule))
    if ex.finding is not None:
        ex.log.append(f"      {ex.finding.kind}: {ex.finding.message}")
    return ex.log


def count_schedules(scenario, bound: int = 200, **kwargs) -> int:
    """Number of distinct complete schedules the exhaustive search visits."""
    return explore(scenario, bound, mode="exhaustive", **kwargs).schedules
