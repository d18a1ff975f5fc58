"""Automatic-signal monitors.

A :class:`Monitor` owns a lock, a store of named shared variables and a
condition manager.  Code running inside the monitor waits for a condition
with :meth:`Monitor.waituntil`; nobody ever signals by hand.  Whenever a
thread leaves the monitor or starts waiting, the monitor hands the lock on
("relays") to one waiter whose predicate has become true::

    buf = Monitor({"count": 0}, predicates=["count > 0"])

    def take(num):
        with buf:
            buf.waituntil("count >= $num", num=num)
            buf["count"] -= num

:class:`MonitorCore` holds the waiting protocol without any blocking; the
threaded monitor and the schedule verifier both build on it.
"""

from __future__ import annotations

import enum
import functools
from operator import itemgetter
from _thread import allocate_lock, get_ident
from collections import deque
from dataclasses import dataclass
from typing import Mapping

from automon.errors import ContractError, IncompleteBinding, MissingVariable, PredicateError
from automon.manager import (
    DEFAULT_INACTIVE_CAPACITY,
    ConditionManager,
    ExhaustiveConditionManager,
    RecordKind,
)
from automon.parser import parse
from automon.predicates import (
    DEFAULT_DNF_LIMIT,
    compile_dnf,
    INT64_MAX,
    INT64_MIN,
    DnfPred,
    Domain,
    Kind,
    Pred,
    canonicalize,
    classify,
    compile_pred,
    globalize,
    local_names,
    shared_names,
    to_dnf,
)
from automon.tagging import tag_predicate
from automon.template import Template


_DYNAMIC = RecordKind.COMPLEX_DYNAMIC


class Mechanism(enum.Enum):
    """Signaling strategies compared by the benchmarks."""

    EXPLICIT = "explicit"  # hand-written condition queues (benchmarks only)
    BASELINE = "baseline"  # one queue, broadcast on every exit/wait
    AUTO_NO_TAGS = "auto-notags"  # relay signaling, exhaustive search
    AUTO = "auto"  # relay signaling with tag indices

    @classmethod
    def parse(cls, value):
        if isinstance(value, cls):
            return value
        try:
            return cls(value)
        except ValueError:
            names = ", ".join(m.value for m in cls)
            raise ValueError(f"unknown mechanism {value!r} (choose from {names})") from None


@dataclass
class WaitStats:
    wait_calls: int = 0
    total_wakeups: int = 0
    futile_wakeups: int = 0


class _Entry:
    """A parsed waituntil predicate, cached by its source."""

    __slots__ = (
        "source", "pred", "dnf", "kind", "locals", "check", "prepared", "args", "template"
    )

    def __init__(self, source, pred, dnf, kind, locals_, check):
        self.source = source
        self.pred = pred
        self.dnf = dnf
        self.kind = kind
        self.locals = locals_
        self.check = check
        # binding values -> (canonical predicate, key, tags, evaluator)
        self.prepared = {}
        self.template = Template.build(dnf, locals_) if locals_ else None
        # binding -> cache key: a scalar for one local, a tuple for several
        if not locals_:
            self.args = lambda b: ()
        else:
            self.args = itemgetter(*locals_)


def _check_value(name, value):
    if isinstance(value, bool):
        return value
    if not isinstance(value, int):
        raise TypeError(f"shared variable {name!r} must be int or bool, got {value!r}")
    if not INT64_MIN <= value <= INT64_MAX:
        raise OverflowError(f"value {value} for {name!r} outside the signed 64-bit range")
    return value


class MonitorCore:
    """Store, condition manager and the waiting protocol, minus blocking.

    Subclasses supply lock ownership and the ability to block on a wake
    token; see :class:`Monitor`.
    """

    def __init__(
        self,
        shared: Mapping[str, int | bool],
        predicates=(),
        *,
        mechanism=Mechanism.AUTO,
        inactive_capacity=DEFAULT_INACTIVE_CAPACITY,
        dnf_limit=DEFAULT_DNF_LIMIT,
        prepared_cache=4096,
        debug=False,
        manager=None,
    ):
        self.mechanism = Mechanism.parse(mechanism)
        if self.mechanism is Mechanism.EXPLICIT:
            raise ValueError("explicit signaling has no automatic monitor; write it by hand")
        self.store = {}
        self._domains = {}
        for name, value in shared.items():
            if not isinstance(name, str) or not name.isidentifier():
                raise PredicateError(f"invalid shared variable name {name!r}")
            self.store[name] = _check_value(name, value)
            self._domains[name] = Domain.BOOL if isinstance(value, bool) else Domain.INT
        self.debug = debug
        self.dnf_limit = dnf_limit
        self.prepared_cache = prepared_cache
        if manager is not None:
            self.manager = manager
        elif self.mechanism is Mechanism.AUTO:
            self.manager = ConditionManager(inactive_capacity, debug=debug)
        elif self.mechanism is Mechanism.AUTO_NO_TAGS:
            self.manager = ExhaustiveConditionManager(inactive_capacity, debug=debug)
        else:
            self.manager = None
        self._broadcast_queue = deque()
        self.broadcasts = 0
        self.stats = WaitStats()
        self._entries = {}
        for p in predicates:
            self.declare_predicate(p)
        # Static predicates are declared before any thread can hold the lock.
        if debug and self.manager is not None and manager is None:
            self.manager._owner_check = self._assert_owner

    # -- subclass hooks -------------------------------------------------------

    def _assert_owner(self):
        raise NotImplementedError

    # -- store ------------------------------------------------------------------

    def __getitem__(self, name):
        if self.debug:
            self._assert_owner()
        try:
            return self.store[name]
        except KeyError:
            raise MissingVariable(name) from None

    def __setitem__(self, name, value):
        if self.debug:
            self._assert_owner()
        store = self.store
        if type(value) is int and type(store.get(name)) is int and INT64_MIN <= value <= INT64_MAX:
            store[name] = value
            return
        if name not in store:
            raise MissingVariable(name)
        if isinstance(value, bool) != isinstance(store[name], bool):
            raise TypeError(f"shared variable {name!r} changes type")
        store[name] = _check_value(name, value)

    @property
    def domains(self):
        return dict(self._domains)

    # -- predicates ---------------------------------------------------------------

    def entry(self, pred) -> _Entry:
        """Parse, check and cache a predicate given as text or as a Pred tree."""
        entry = self._entries.get(pred)
        if entry is not None:
            return entry
        if isinstance(pred, str):
            tree = parse(pred, self._domains)
        elif isinstance(pred, (Pred, DnfPred)):
            tree = pred
        else:
            raise TypeError(f"expected a predicate string or Pred, got {pred!r}")
        unknown = shared_names(tree) - set(self.store)
        if unknown:
            raise MissingVariable(sorted(unknown)[0])
        dnf = to_dnf(tree, self.dnf_limit)
        check = compile_pred(tree if isinstance(tree, Pred) else tree.to_pred())
        entry = _Entry(pred, tree, dnf, classify(tree), tuple(sorted(local_names(tree))), check)
        self._entries[pred] = entry
        return entry

    def declare_predicate(self, pred):
        """Register a static shared predicate; intended for construction time."""
        entry = self.entry(pred)
        if entry.kind is not Kind.SHARED:
            raise PredicateError(f"{pred!r} mentions local variables; it cannot be declared statically")
        if self.manager is not None:
            canon, key, tags, evaluate = self._globalized(entry, {})
            self.manager.register_shared_predicate(canon, tags, key=key, evaluate=evaluate)

    def _globalized(self, entry, binding):
        try:
            args = entry.args(binding)
        except KeyError:
            raise IncompleteBinding(set(entry.locals) - set(binding)) from None
        cached = entry.prepared.get(args)
        if cached is None:
            cached = self._globalize_new(entry, args)
        return cached

    def _globalize_new(self, entry, args):
        values = args if len(entry.locals) != 1 else (args,)
        binding = dict(zip(entry.locals, values))
        tagging = self.mechanism is Mechanism.AUTO
        cached = None
        if entry.template is not None:
            cached = entry.template.instantiate(binding, tagging)
        if cached is None:
            canon, key = canonicalize(globalize(entry.dnf, binding))
            tags = tag_predicate(canon) if tagging else ()
            cached = (canon, key, tags, compile_dnf(canon))
        if len(entry.prepared) >= self.prepared_cache:
            del entry.prepared[next(iter(entry.prepared))]
        entry.prepared[args] = cached
        return cached

    def check(self, entry, binding) -> bool:
        """Evaluate a waituntil predicate in the calling thread (locals from *binding*)."""
        try:
            return entry.check(self.store, binding)
        except KeyError as exc:
            name = exc.args[0]
            if name in self.store:
                raise
            if name in entry.locals:
                raise IncompleteBinding([name]) from None
            raise MissingVariable(name) from None

    def prepare(self, entry, binding):
        """Globalize and register a predicate about to be waited on; return its record."""
        try:
            args = entry.args(binding)
        except KeyError:
            raise IncompleteBinding(set(entry.locals) - set(binding)) from None
        cached = entry.prepared.get(args)
        if cached is None:
            cached = self._globalize_new(entry, args)
        canon, key, tags, evaluate = cached
        manager = self.manager
        record = manager._table.get(key)
        if record is None or not record.active:
            record = manager.register_complex_predicate(canon, tags, key=key, evaluate=evaluate)
        return record

    # -- protocol steps -----------------------------------------------------------

    def relay(self) -> int:
        """Apply the relay rule; return the number of threads woken.

        While a signaled thread has not resumed yet no further signal is
        sent: that thread still counts as active, and it relays in turn
        when it exits or waits again.
        """
        manager = self.manager
        if manager is not None:
            if manager.pending:
                return 0
            return 0 if manager.relay_signal(self.store) is None else 1
        queue = self._broadcast_queue
        if not queue:
            return 0
        self.broadcasts += 1
        woken = len(queue)
        while queue:
            queue.popleft().release()
        return woken

    def enqueue(self, record, token):
        if record is None:
            self._broadcast_queue.append(token)
        else:
            self.manager.enqueue(record, token)

    def resumed(self, record):
        if record is not None:
            self.manager.resumed(record)

    def finish_wait(self, record):
        """Deactivate a dynamic record once its last waiter is through."""
        if (
            record is not None
            and record.kind is RecordKind.COMPLEX_DYNAMIC
            and not record.queue
            and not record.pending
            and record.active
        ):
            self.manager.deactivate(record)

    def counters(self) -> dict:
        """Flat counter snapshot: wait statistics plus signaling counters."""
        s = self.stats
        out = {
            "wait_calls": s.wait_calls,
            "wakeups": s.total_wakeups,
            "futile_wakeups": s.futile_wakeups,
        }
        if self.manager is None:
            out.update(signals=0, broadcasts=self.broadcasts, preds_evaluated=0, preds_per_signal=0.0)
        else:
            c = self.manager.counters()
            out.update(
                signals=c.signals,
                broadcasts=c.broadcasts,
                preds_evaluated=c.predicates_evaluated,
                preds_per_signal=c.predicates_per_signal,
                hash_probes=c.hash_probes,
                heap_polls=c.heap_polls,
                heap_reinserts=c.heap_reinserts,
                records_created=c.records_created,
                records_reused=c.records_reused,
                records_evicted=c.records_evicted,
            )
        return out


class Monitor(MonitorCore):
    """Thread-safe automatic-signal monitor.

    Use ``with monitor:`` (or :meth:`enter` / :meth:`exit`) around every
    access to the store.  The lock is not reentrant.
    """

    def __init__(self, shared, predicates=(), **kwargs):
        self._lock = allocate_lock()
        self._owner = None
        super().__init__(shared, predicates, **kwargs)

    def _assert_owner(self):
        if self._owner != get_ident():
            raise ContractError("the calling thread does not hold the monitor")

    @property
    def locked(self) -> bool:
        return self._owner is not None

    def enter(self):
        me = get_ident()
        if self._owner == me:
            raise ContractError("monitor is not reentrant")
        self._lock.acquire()
        self._owner = me
        return self

    def exit(self):
        self.__exit__()

    def __exit__(self, *exc):
        if self._owner != get_ident():
            raise ContractError("exit without holding the monitor")
        try:
            manager = self.manager
            if manager is not None:
                # Same as relay(), minus the call when nobody waits.
                if manager._waiting and not manager._pending:
                    manager.relay_signal(self.store)
            elif self._broadcast_queue:
                self.relay()
        finally:
            self._owner = None
            self._lock.release()

    __enter__ = enter

    def _block(self, record):
        token = allocate_lock()
        token.acquire()
        self.enqueue(record, token)
        self._owner = None
        self._lock.release()
        token.acquire()
        self._lock.acquire()
        self._owner = get_ident()
        if record is not None:
            self.manager.resumed(record)

    def waituntil(self, pred, /, **binding):
        """Block until *pred* holds.  Keyword arguments bind its ``$locals``.

        Must be called inside the monitor.  The predicate is first checked
        directly; only if it is false is it globalized and registered, after
        which the thread relays a signal, waits, and re-checks on every
        wakeup.
        """
        if self._owner != get_ident():
            raise ContractError("waituntil outside the monitor")
        entry = self._entries.get(pred)
        if entry is None:
            entry = self.entry(pred)
        try:
            if entry.check(self.store, binding):
                return
        except KeyError:
            self.check(entry, binding)  # raises the precise error
            raise
        stats = self.stats
        stats.wait_calls += 1
        store = self.store
        if self.manager is None:
            # A futile wakeup changed nothing and everyone queued was woken
            # with it, so only the first block broadcasts.
            check = entry.check
            self.relay()
            while True:
                self._block(None)
                stats.total_wakeups += 1
                if check(store, binding):
                    return
                stats.futile_wakeups += 1
        manager = self.manager
        record = self.prepare(entry, binding)
        evaluate = record.evaluate
        lock = self._lock
        while True:
            if manager._waiting and not manager._pending:
                manager.relay_signal(store)
            # _block() and manager.resumed(), inlined on this hot path
            token = allocate_lock()
            token.acquire()
            manager.enqueue(record, token)
            self._owner = None
            lock.release()
            token.acquire()
            lock.acquire()
            self._owner = get_ident()
            record.pending -= 1
            manager._pending -= 1
            stats.total_wakeups += 1
            if evaluate(store):
                break
            stats.futile_wakeups += 1
        if record.kind is _DYNAMIC and not record.queue and not record.pending:
            manager.deactivate(record)


def synchronized(method):
    """Run a method of a :class:`Monitor` subclass inside the monitor."""

    @functools.wraps(method)
    def wrapper(self, *args, **kwargs):
        with self:
            return method(self, *args, **kwargs)

    return wrapper
