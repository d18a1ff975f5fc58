"""Cooperative simulation of monitor programs.

Threads are scripted as lists of actions.  Every action is one scheduling
step; a signaled thread resuming inside ``waituntil`` is a step as well.
The simulated monitor is a :class:`automon.monitor.MonitorCore` with the
real condition manager and tagging code; only blocking is replaced, by
status changes on the simulated thread.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Callable

from automon.errors import AutomonError, ContractError
from automon.monitor import Mechanism, MonitorCore

MUTANTS = ("no-exit-relay", "fixed-target")


# -- actions -------------------------------------------------------------------


@dataclass(frozen=True)
class Enter:
    def describe(self):
        return "enter"


@dataclass(frozen=True)
class Exit:
    def describe(self):
        return "exit"


@dataclass(frozen=True)
class Mutate:
    """``var += delta`` on a shared variable."""

    var: str
    delta: int

    def describe(self):
        sign = "+" if self.delta >= 0 else "-"
        return f"{self.var} {sign}= {abs(self.delta)}"


@dataclass(frozen=True)
class Assign:
    """``var = value``; *value* may be a callable ``(monitor, env) -> value``."""

    var: str
    value: object

    def describe(self):
        shown = "<expr>" if callable(self.value) else repr(self.value)
        return f"{self.var} = {shown}"


@dataclass(frozen=True)
class WaitUntil:
    """``waituntil(pred)``; *bind* is a dict or a callable ``env -> dict``."""

    pred: str
    bind: object = None

    def binding(self, env):
        if self.bind is None:
            return {}
        if callable(self.bind):
            return self.bind(env)
        return dict(self.bind)

    def describe(self):
        return f"waituntil({self.pred})"


@dataclass(frozen=True)
class Do:
    """Arbitrary code inside the monitor: ``fn(monitor, env)``."""

    fn: Callable
    label: str = "do"

    def describe(self):
        return self.label


@dataclass(frozen=True)
class Local:
    """Thread-local work; needs no lock.  ``fn(env)``."""

    fn: Callable | None = None
    label: str = "local"

    def describe(self):
        return self.label


@dataclass(frozen=True)
class Label:
    """Jump target; not a step."""

    name: str


@dataclass(frozen=True)
class Jump:
    """Go to *target*, if *when* (``(monitor, env) -> bool``) is None or true."""

    target: str
    when: Callable | None = None

    def describe(self):
        return f"jump {self.target}" if self.when is None else f"jump-if {self.target}"


def op(*body):
    """Bracket *body* with enter and exit."""
    return [Enter(), *body, Exit()]


def compile_program(actions):
    """Flatten nested lists, strip labels; return (steps, label -> index)."""
    steps, labels = [], {}

    def walk(items):
        for a in items:
            if isinstance(a, (list, tuple)):
                walk(a)
            elif isinstance(a, Label):
                if a.name in labels:
                    raise ValueError(f"duplicate label {a.name!r}")
                labels[a.name] = len(steps)
            else:
                steps.append(a)

    walk(actions)
    for a in steps:
        if isinstance(a, Jump) and a.target not in labels:
            raise ValueError(f"unknown label {a.target!r}")
    return tuple(steps), labels


# -- threads ---------------------------------------------------------------------


class Status(enum.Enum):
    READY = "ready"
    RUNNING = "running"
    WAITING = "waiting"
    SIGNALED = "signaled"
    DONE = "done"


@dataclass
class ThreadSpec:
    name: str
    program: list
    env: dict = field(default_factory=dict)


class SimThread:
    __slots__ = (
        "tid", "name", "steps", "labels", "pc", "status", "env",
        "inside", "entry", "binding", "record", "signals",
    )

    def __init__(self, tid, spec: ThreadSpec):
        self.tid = tid
        self.name = spec.name
        self.steps, self.labels = compile_program(spec.program)
        self.pc = 0
        self.status = Status.READY if self.steps else Status.DONE
        self.env = dict(spec.env)
        self.inside = False
        self.entry = None
        self.binding = None
        self.record = None
        self.signals = 0  # times this thread was woken

    @property
    def action(self):
        return self.steps[self.pc]

    def __repr__(self):
        return f"<{self.name} {self.status.value} pc={self.pc}>"


class _Token:
    """Wake token standing in for a blocked OS thread."""

    __slots__ = ("thread", "sim")

    def __init__(self, thread, sim):
        self.thread = thread
        self.sim = sim

    def release(self):
        t = self.thread
        if t.status is not Status.WAITING:
            raise ContractError(f"{t.name} woken while {t.status.value}")
        t.status = Status.SIGNALED
        t.signals += 1
        self.sim.released.append(t)


# -- monitor ----------------------------------------------------------------------


class SimMonitor(MonitorCore):
    """Monitor whose lock belongs to simulated threads.

    *mutant* injects a known bug: ``no-exit-relay`` skips the relay when a
    thread leaves the monitor; ``fixed-target`` makes the manager wake the
    oldest waiting record regardless of its predicate.
    """

    def __init__(self, shared, predicates=(), *, mechanism=Mechanism.AUTO, mutant=None, **kwargs):
        if mutant is not None and mutant not in MUTANTS:
            raise ValueError(f"unknown mutant {mutant!r} (choose from {', '.join(MUTANTS)})")
        self.owner = None
        self.current = None
        self.released = []  # threads woken so far, in order
        self.mutant = mutant
        super().__init__(shared, predicates, mechanism=mechanism, debug=True, **kwargs)
        if mutant == "fixed-target":
            if self.manager is None:
                raise ValueError("fixed-target needs a relay-signaling mechanism")
            self.manager.relay_signal = _fixed_target(self.manager)

    def _assert_owner(self):
        if self.owner is None or self.owner is not self.current:
            raise ContractError("the running thread does not hold the monitor")


def _fixed_target(manager):
    def relay_signal(store):
        manager.relay_calls += 1
        for record in manager._table.values():  # creation order
            if record.queue:
                return manager._signal(record)
        return None

    return relay_signal


# -- one execution -------------------------------------------------------------------


@dataclass
class Scenario:
    """A small closed program: shared variables, threads and expectations.

    *expect_termination* says the program is deadlock-free by construction,
    so threads left waiting at the end are a violation.  *final_check*
    receives the monitor once no thread can move (all done, or the rest
    waiting as intended) and returns an error message or None.
    """

    name: str
    shared: dict
    threads: list
    predicates: tuple = ()
    expect_termination: bool = True
    final_check: Callable | None = None
    description: str = ""


@dataclass(frozen=True)
class Finding:
    kind: str
    message: str


class Outcome(enum.Enum):
    DONE = "done"
    STUCK = "stuck"  # waiters left whose predicates are false, as intended
    TRUNCATED = "truncated"
    CYCLE = "cycle"
    VIOLATION = "violation"


_SINGLE_SIGNAL = (Mechanism.AUTO, Mechanism.AUTO_NO_TAGS)


class Execution:
    """Runs one schedule of a scenario step by step, checking as it goes."""

    def __init__(self, scenario: Scenario, *, mechanism=Mechanism.AUTO, mutant=None, log=False):
        self.scenario = scenario
        self.mechanism = Mechanism.parse(mechanism)
        self.mutant = mutant
        self.mon = SimMonitor(
            scenario.shared, scenario.predicates, mechanism=self.mechanism, mutant=mutant
        )
        self.threads = [SimThread(i, spec) for i, spec in enumerate(scenario.threads)]
        self.schedule = []
        self.log = [] if log else None
        self.finding = None
        self.warning = None
        self.outcome = None
        self._states = {}

    # -- scheduling ---------------------------------------------------------

    def enabled(self):
        free = self.mon.owner is None
        out = []
        for t in self.threads:
            s = t.status
            if s is Status.READY:
                if free or not isinstance(t.action, Enter):
                    out.append(t.tid)
            elif s is Status.SIGNALED and free:
                out.append(t.tid)
        return out

    def run(self, choose, bound):
        """Step until the end, a finding or *bound* steps.

        *choose(depth, enabled)* returns an index into *enabled*.
        """
        self._remember()
        while self.outcome is None:
            enabled = self.enabled()
            if not enabled:
                self._finish()
                break
            if len(self.schedule) >= bound:
                self.outcome = Outcome.TRUNCATED
                break
            self.step(enabled[choose(len(self.schedule), enabled)])
        return self.outcome

    def step(self, tid):
        t = self.threads[tid]
        mon = self.mon
        self.schedule.append(tid)
        mon.current = t
        resuming = t.status is Status.SIGNALED
        t.status = Status.RUNNING
        try:
            if resuming:
                self._resume(t)
            else:
                self._act(t, t.action)
        except AutomonError as exc:
            self._violate("error", f"{t.name}: {type(exc).__name__}: {exc}")
        mon.current = None
        if t.status is Status.RUNNING:
            if t.pc >= len(t.steps):
                if t.inside:
                    self._violate("error", f"{t.name} finished inside the monitor")
                t.status = Status.DONE
            else:
                t.status = Status.READY
        if self.outcome is None:
            self._check_exclusion()
        if self.outcome is None:
            self._remember()

    def _note(self, t, text):
        if self.log is not None:
            self.log.append(f"{len(self.schedule):4d}  {t.name:<10} {text}")

    # -- actions ------------------------------------------------------------

    def _act(self, t, a):
        mon = self.mon
        if isinstance(a, Enter):
            if t.inside:
                raise ContractError(f"{t.name} enters twice")
            mon.owner = t
            t.inside = True
            t.pc += 1
            self._note(t, "enter")
        elif isinstance(a, Exit):
            mon._assert_owner()
            woken = self._relay(t) if self.mutant != "no-exit-relay" else []
            t.inside = False
            mon.owner = None
            t.pc += 1
            self._note(t, "exit" + _woke(woken))
        elif isinstance(a, WaitUntil):
            self._waituntil(t, a)
        elif isinstance(a, Mutate):
            mon[a.var] = mon[a.var] + a.delta
            t.pc += 1
            self._note(t, f"{a.describe()}  ({a.var}={mon.store[a.var]})")
        elif isinstance(a, Assign):
            mon[a.var] = a.value(mon, t.env) if callable(a.value) else a.value
            t.pc += 1
            self._note(t, f"{a.var} = {mon.store[a.var]}")
        elif isinstance(a, Do):
            mon._assert_owner()
            a.fn(mon, t.env)
            t.pc += 1
            self._note(t, a.label)
        elif isinstance(a, Local):
            if a.fn is not None:
                a.fn(t.env)
            t.pc += 1
            self._note(t, a.label)
        elif isinstance(a, Jump):
            taken = a.when is None or a.when(mon, t.env)
            t.pc = t.labels[a.target] if taken else t.pc + 1
            self._note(t, f"{a.describe()} ({'taken' if taken else 'not taken'})")
        else:
            raise TypeError(f"unknown action {a!r}")

    def _waituntil(self, t, a):
        mon = self.mon
        mon._assert_owner()
        entry = mon.entry(a.pred)
        binding = a.binding(t.env)
        if mon.check(entry, binding):
            t.pc += 1
            self._note(t, f"{a.describe()} holds")
            return
        mon.stats.wait_calls += 1
        t.entry, t.binding = entry, binding
        t.record = mon.prepare(entry, binding) if mon.manager is not None else None
        self._block(t, f"{a.describe()} false, waits")

    def _block(self, t, text, relay=True):
        mon = self.mon
        woken = self._relay(t) if relay else []
        mon.enqueue(t.record, _Token(t, self.mon))
        t.inside = False
        t.status = Status.WAITING
        mon.owner = None
        self._note(t, text + _woke(woken))

    def _resume(self, t):
        mon = self.mon
        mon.owner = t
        t.inside = True
        mon.resumed(t.record)
        mon.stats.total_wakeups += 1
        holds = t.record.evaluate(mon.store) if t.record is not None else mon.check(t.entry, t.binding)
        if not holds:
            mon.stats.futile_wakeups += 1
            self._block(t, "wakes, predicate false, waits again", relay=mon.manager is not None)
            return
        if not mon.check(t.entry, t.binding):
            self._violate(
                "wait-loop", f"{t.name} passes waituntil({t.entry.source}) although it is false"
            )
        mon.finish_wait(t.record)
        t.record = t.entry = t.binding = None
        t.pc += 1
        self._note(t, "wakes, predicate holds")

    def _relay(self, t):
        mon = self.mon
        before = len(mon.released)
        mon.relay()
        woken = mon.released[before:]
        if self.mechanism in _SINGLE_SIGNAL and len(woken) > 1:
            self._violate("multiple-signals", f"one relay by {t.name} woke {len(woken)} threads")
        return woken

    # -- checks -------------------------------------------------------------

    def _violate(self, kind, message):
        if self.finding is None:
            self.finding = Finding(kind, message)
            self.outcome = Outcome.VIOLATION

    def _check_exclusion(self):
        inside = [t for t in self.threads if t.inside]
        if len(inside) > 1:
            names = ", ".join(t.name for t in inside)
            self._violate("mutual-exclusion", f"{names} are inside the monitor together")
        elif inside and self.mon.owner is not inside[0]:
            self._violate("mutual-exclusion", f"{inside[0].name} runs without the lock")

    def _finish(self):
        """No thread can move: every thread is done or waiting unsignaled."""
        mon = self.mon
        waiting = [t for t in self.threads if t.status is Status.WAITING]
        true = [t for t in waiting if mon.check(t.entry, t.binding)]
        if true:
            t = true[0]
            self._violate(
                "relay-invariance",
                f"{t.name} waits on {t.entry.source!r}, which holds, but no thread is active or signaled",
            )
        elif waiting and self.scenario.expect_termination:
            names = ", ".join(t.name for t in waiting)
            self._violate("deadlock", f"{names} wait forever")
        else:
            msg = self.scenario.final_check(mon) if self.scenario.final_check else None
            if msg:
                self._violate("digest", msg)
            else:
                self.outcome = Outcome.STUCK if waiting else Outcome.DONE
        if self.log is not None and self.outcome is not Outcome.VIOLATION:
            self.log.append(f"      end: {self.outcome.value}")

    def state_key(self):
        mon = self.mon
        threads = tuple(
            (
                t.pc,
                t.status,
                t.inside,
                tuple(sorted(t.env.items())),
                None if t.record is None else t.record.key,
                None if t.binding is None else tuple(sorted(t.binding.items())),
            )
            for t in self.threads
        )
        if mon.manager is not None:
            queues = frozenset(
                (r.key, tuple(tok.thread.tid for tok in r.queue))
                for r in mon.manager._table.values()
                if r.queue
            )
        else:
            queues = tuple(tok.thread.tid for tok in mon._broadcast_queue)
        owner = None if mon.owner is None else mon.owner.tid
        return (tuple(mon.store.items()), threads, queues, owner)

    def _remember(self):
        key = self.state_key()
        first = self._states.get(key)
        depth = len(self.schedule)
        if first is None:
            self._states[key] = depth
            return
        # The state repeats: everything after it has been seen from `first`.
        cycle = self.schedule[first:]
        moved = set(cycle)
        mon = self.mon
        for t in self.threads:
            if (
                t.status is Status.WAITING
                and t.tid not in moved
                and mon.check(t.entry, t.binding)
            ):
                self._violate(
                    "lost-wakeup",
                    f"{t.name} waits on {t.entry.source!r}, which holds, while threads "
                    f"{sorted({self.threads[i].name for i in moved})} cycle without waking it",
                )
                return
        names = sorted({self.threads[i].name for i in moved})
        self.warning = f"livelock: {', '.join(names)} cycle through the same state"
        self.outcome = Outcome.CYCLE
        if self.log is not None:
            self.log.append(f"      end: cycle back to step {first}")


def _woke(threads):
    if not threads:
        return ""
    return "  -> signals " + ", ".join(t.name for t in threads)
