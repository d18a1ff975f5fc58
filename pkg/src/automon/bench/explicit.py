"""Hand-signaled monitor used as the comparison point in the benchmarks.

Blocking uses the same primitive as :class:`automon.Monitor` (a lock
posing as a one-shot wake token), so timing differences come from the
signaling strategy rather than from the plumbing.
"""

from __future__ import annotations

from _thread import allocate_lock
from collections import deque

from automon.monitor import WaitStats


class ExplicitMonitor:
    def __init__(self):
        self._lock = allocate_lock()
        self.stats = WaitStats()
        self.signals = 0
        self.broadcasts = 0

    def __enter__(self):
        self._lock.acquire()
        return self

    def __exit__(self, *exc):
        self._lock.release()

    def condition(self) -> "CondQueue":
        return CondQueue(self)

    def counters(self) -> dict:
        s = self.stats
        return {
            "wait_calls": s.wait_calls,
            "wakeups": s.total_wakeups,
            "futile_wakeups": s.futile_wakeups,
            "signals": self.signals,
            "broadcasts": self.broadcasts,
            "preds_evaluated": 0,
            "preds_per_signal": 0.0,
        }


class CondQueue:
    """A condition variable bound to an :class:`ExplicitMonitor`."""

    __slots__ = ("monitor", "waiters")

    def __init__(self, monitor: ExplicitMonitor):
        self.monitor = monitor
        self.waiters = deque()

    def __len__(self):
        return len(self.waiters)

    def wait(self):
        lock = self.monitor._lock
        token = allocate_lock()
        token.acquire()
        self.waiters.append(token)
        lock.release()
        token.acquire()
        lock.acquire()

    def wait_for(self, ready):
        """``while not ready(): wait()``, counting wakeups."""
        if ready():
            return
        stats = self.monitor.stats
        stats.wait_calls += 1
        while True:
            self.wait()
            stats.total_wakeups += 1
            if ready():
                return
            stats.futile_wakeups += 1

    def signal(self):
        if self.waiters:
            self.monitor.signals += 1
            self.waiters.popleft().release()

    def broadcast(self):
        self.monitor.broadcasts += 1
        waiters = self.waiters
        while waiters:
            waiters.popleft().release()
