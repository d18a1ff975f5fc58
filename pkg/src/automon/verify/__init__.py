"""Deterministic schedule exploration of monitor programs."""

from automon.verify.explore import (
    LOST_WAKEUP_KINDS,
    Verdict,
    Violation,
    check_no_lost_wakeup,
    count_schedules,
    explore,
    replay,
)
from automon.verify.scenarios import SCENARIOS
from automon.verify.sim import (
    MUTANTS,
    Assign,
    Do,
    Enter,
    Execution,
    Exit,
    Jump,
    Label,
    Local,
    Mutate,
    Outcome,
    Scenario,
    SimMonitor,
    Status,
    ThreadSpec,
    WaitUntil,
    op,
)

__all__ = [
    "LOST_WAKEUP_KINDS", "MUTANTS", "SCENARIOS", "Assign", "Do", "Enter", "Execution", "Exit",
    "Jump", "Label", "Local", "Mutate", "Outcome", "Scenario", "SimMonitor", "Status",
    "ThreadSpec", "Verdict", "Violation", "WaitUntil", "check_no_lost_wakeup",
    "count_schedules", "explore", "op", "replay",
]
