"""Condition manager: predicate table, tag indices and relay signaling.

The manager maps canonical predicates to :class:`ConditionRecord` objects,
each holding the queue of threads waiting on that predicate.  Its one job
at run time is :meth:`ConditionManager.relay_signal`: find a single
waiting thread whose predicate holds and wake exactly that thread.

Records are indexed by the tags of their conjunctions.  Equivalence tags
go into a hash table per shared expression (one probe finds the only key
that can be true), threshold tags into a min-heap (``>``/``>=``) or max-heap
(``<``/``<=``) per shared expression (a false root proves the whole heap
false), and untagged conjunctions onto a list that is scanned last.

The manager is not synchronized: the owning monitor's lock must be held
around every call.
"""

from __future__ import annotations

import bisect
import enum
import heapq
import itertools
from collections import OrderedDict, deque
from dataclasses import dataclass

from automon.errors import ContractError
from automon.predicates import GE, GT, LE, LT, DnfPred, compile_terms, canonicalize, compile_dnf
from automon.tagging import TagMode, tag_predicate

DEFAULT_INACTIVE_CAPACITY = 64


class RecordKind(enum.Enum):
    SHARED_STATIC = "shared-static"
    COMPLEX_DYNAMIC = "complex-dynamic"


class ConditionRecord:
    """A canonical predicate together with the threads waiting on it.

    ``queue`` holds wake tokens of threads that have not been signaled yet;
    ``pending`` counts threads that were signaled but have not resumed.
    A token is anything with a ``release()`` method.
    """

    __slots__ = (
        "key",
        "predicate",
        "evaluate",
        "tags",
        "kind",
        "queue",
        "pending",
        "active",
        "seq",
        "last_used",
        "slots",
    )

    def __init__(self, key, predicate, evaluate, tags, kind, seq):
        self.key = key
        self.predicate = predicate
        self.evaluate = evaluate
        self.tags = tags
        self.kind = kind
        self.queue = deque()
        self.pending = 0
        self.active = True
        self.seq = seq
        self.last_used = seq
        # (code, container, key, op) per tag, filled in by the manager
        self.slots = None

    @property
    def waiter_count(self) -> int:
        return len(self.queue) + self.pending

    def __repr__(self):
        state = "active" if self.active else "inactive"
        return f"<ConditionRecord #{self.seq} {self.predicate} {state} waiters={self.waiter_count}>"


@dataclass(frozen=True)
class ManagerCounters:
    signals: int = 0
    broadcasts: int = 0
    predicates_evaluated: int = 0
    hash_probes: int = 0
    heap_polls: int = 0
    heap_reinserts: int = 0
    records_created: int = 0
    records_reused: int = 0
    records_evicted: int = 0
    relay_calls: int = 0

    @property
    def predicates_per_signal(self) -> float:
        return self.predicates_evaluated / self.signals if self.signals else 0.0


class _TagNode:
    __slots__ = ("key", "op", "order", "records", "entry", "dead")

    def __init__(self, key, op, order):
        self.key = key
        self.op = op
        self.order = order
        self.records = {}
        self.entry = None
        self.dead = False

    def holds(self, value) -> bool:
        op = self.op
        if op == GE:
            return value >= self.key
        if op == GT:
            return value > self.key
        if op == LE:
            return value <= self.key
        return value < self.key

    def ordered(self):
        recs = self.records
        if len(recs) == 1:
            return tuple(recs)
        return sorted(recs, key=_by_seq)


def _by_seq(record):
    return record.seq


def _ordered(bucket):
    if len(bucket) == 1:
        return tuple(bucket)
    return sorted(bucket, key=_by_seq)


class TagHeap:
    """Heap of threshold tags on one shared expression.

    ``ascending`` heaps hold ``>``/``>=`` tags ordered by key, ``>=`` first on
    ties; descending heaps hold ``<``/``<=`` ordered by key from the top,
    ``<=`` first on ties.  Either way, if the root is false then so is every
    other tag in the heap.
    """

    def __init__(self, ascending: bool):
        self.ascending = ascending
        self._heap = []
        self._nodes = {}
        self._tick = itertools.count()

    def __len__(self):
        return len(self._nodes)

    def __bool__(self):
        return bool(self._nodes)

    def _order(self, key, op):
        if self.ascending:
            return (key, 0 if op == GE else 1)
        return (-key, 0 if op == LE else 1)

    def node(self, key, op, create=True):
        node = self._nodes.get((key, op))
        if node is None and create:
            node = _TagNode(key, op, self._order(key, op))
            self._nodes[(key, op)] = node
            self.push(node)
        return node

    def discard(self, node):
        node.dead = True
        node.entry = None
        del self._nodes[(node.key, node.op)]

    def push(self, node):
        entry = [node.order, next(self._tick), node]
        node.entry = entry
        heapq.heappush(self._heap, entry)

    def peek(self):
        heap = self._heap
        while heap:
            entry = heap[0]
            node = entry[2]
            if node.entry is entry:
                return node
            heapq.heappop(heap)
        return None

    def poll(self):
        node = self.peek()
        if node is not None:
            heapq.heappop(self._heap)
            node.entry = None
        return node

    def nodes(self):
        """Live nodes in heap order (for inspection and tests)."""
        return sorted(self._nodes.values(), key=lambda n: n.order)


class _EquivalenceIndex:
    __slots__ = ("value", "table")

    def __init__(self, terms):
        self.value = compile_terms(terms)
        self.table = {}


class _ThresholdIndex:
    __slots__ = ("value", "lower", "upper")

    def __init__(self, terms):
        self.value = compile_terms(terms)
        self.lower = TagHeap(ascending=True)  # > and >=
        self.upper = TagHeap(ascending=False)  # < and <=


_EQ, _THR, _NONE = "eq", "thr", "none"


class ConditionManager:
    """Tag-indexed predicate table with single-thread relay signaling.

    *inactive_capacity* bounds the FIFO of waiterless dynamic records kept
    for reuse.  With *debug*, calling :meth:`register_shared_predicate`
    after the first wait raises, and *owner_check* (if given) is invoked on
    every entry point to assert the caller holds the lock.
    """

    def __init__(self, inactive_capacity=DEFAULT_INACTIVE_CAPACITY, *, debug=False, owner_check=None):
        if inactive_capacity < 0:
            raise ValueError("inactive_capacity must be nonnegative")
        self.inactive_capacity = inactive_capacity
        self.debug = debug
        self._owner_check = owner_check if debug else None
        self._table = {}
        self._inactive = OrderedDict()
        self._eq = {}
        self._eq_order = ()
        self._thr = {}
        self._thr_order = ()
        self._none = {}
        self._waiting = 0
        self._pending = 0
        self._seq = itertools.count()
        self._sealed = False
        # When set to a list, every record whose predicate relay_signal
        # evaluates is appended to it.
        self.trace = None

        self.signals = 0
        self.predicates_evaluated = 0
        self.hash_probes = 0
        self.heap_polls = 0
        self.heap_reinserts = 0
        self.records_created = 0
        self.records_reused = 0
        self.records_evicted = 0
        self.relay_calls = 0

    # -- inspection ---------------------------------------------------------

    def counters(self) -> ManagerCounters:
        return ManagerCounters(
            signals=self.signals,
            broadcasts=0,
            predicates_evaluated=self.predicates_evaluated,
            hash_probes=self.hash_probes,
            heap_polls=self.heap_polls,
            heap_reinserts=self.heap_reinserts,
            records_created=self.records_created,
            records_reused=self.records_reused,
            records_evicted=self.records_evicted,
            relay_calls=self.relay_calls,
        )

    @property
    def pending(self) -> int:
        """Number of signaled threads that have not resumed yet."""
        return self._pending

    @property
    def waiting(self) -> int:
        """Number of queued threads that have not been signaled."""
        return self._waiting

    def lookup(self, key):
        return self._table.get(key)

    def records(self):
        return [r for r in self._table.values() if r.active]

    def inactive_records(self):
        return list(self._inactive.values())

    def __len__(self):
        return len(self._table)

    def equivalence_buckets(self, terms):
        index = self._eq.get(terms)
        return {} if index is None else index.table

    def threshold_heaps(self, terms):
        index = self._thr.get(terms)
        return (None, None) if index is None else (index.lower, index.upper)

    def none_records(self):
        return list(self._none)

    # -- registration -------------------------------------------------------

    def _compute_tags(self, p):
        return tag_predicate(p)

    def _create(self, p, key, tags, kind, evaluate):
        if tags is None:
            tags = self._compute_tags(p)
        if evaluate is None:
            evaluate = compile_dnf(p)
        record = ConditionRecord(key, p, evaluate, tuple(tags), kind, next(self._seq))
        self._table[key] = record
        self.records_created += 1
        self._index(record)
        return record

    def register_shared_predicate(self, p: DnfPred, tags=None, *, key=None, evaluate=None) -> ConditionRecord:
        """Register a static shared predicate (monitor construction time only)."""
        if self._owner_check is not None:
            self._owner_check()
        if self.debug and self._sealed:
            raise ContractError("shared predicates must be registered before the first wait")
        if key is None:
            p, key = canonicalize(p)
        record = self._table.get(key)
        if record is not None:
            self.records_reused += 1
            if not record.active:
                self._reactivate(record)
            record.kind = RecordKind.SHARED_STATIC
            return record
        return self._create(p, key, tags, RecordKind.SHARED_STATIC, evaluate)

    def register_complex_predicate(self, p: DnfPred, tags=None, *, key=None, evaluate=None) -> ConditionRecord:
        """Find or create the record for a globalized predicate.

        An existing record with the same canonical key is returned, pulled
        back off the inactive list if necessary.  *evaluate* may supply a
        precompiled ``f(store) -> bool`` for *p*.
        """
        if self._owner_check is not None:
            self._owner_check()
        self._sealed = True
        if key is None:
            p, key = canonicalize(p)
        record = self._table.get(key)
        if record is not None:
            self.records_reused += 1
            if not record.active:
                del self._inactive[key]
                record.active = True
                self._index(record)
            return record
        return self._create(p, key, tags, RecordKind.COMPLEX_DYNAMIC, evaluate)

    def _reactivate(self, record):
        del self._inactive[record.key]
        record.active = True
        self._index(record)

    def deactivate(self, record: ConditionRecord) -> None:
        """Move a waiterless dynamic record to the inactive list."""
        if self._owner_check is not None:
            self._owner_check()
        if record.kind is RecordKind.SHARED_STATIC:
            raise ContractError("shared static predicates are never deactivated")
        if record.queue or record.pending:
            raise ContractError(f"cannot deactivate {record!r}: threads still wait on it")
        if not record.active:
            return
        self._unindex(record)
        record.active = False
        self._inactive[record.key] = record
        while len(self._inactive) > self.inactive_capacity:
            _, old = self._inactive.popitem(last=False)
            del self._table[old.key]
            self.records_evicted += 1

    # -- indices ------------------------------------------------------------

    def _plan(self, record):
        # Indices are never dropped once created, so a record can keep
        # direct references to the containers its tags live in.
        slots = []
        for _, tag in record.tags:
            mode = tag.mode
            if mode is TagMode.EQUIVALENCE:
                index = self._eq.get(tag.terms)
                if index is None:
                    index = self._eq[tag.terms] = _EquivalenceIndex(tag.terms)
                    self._eq_order = tuple(self._eq[t] for t in sorted(self._eq))
                slots.append((_EQ, index.table, tag.key, None))
            elif mode is TagMode.THRESHOLD:
                index = self._thr.get(tag.terms)
                if index is None:
                    index = self._thr[tag.terms] = _ThresholdIndex(tag.terms)
                    self._thr_order = tuple(self._thr[t] for t in sorted(self._thr))
                heap = index.lower if tag.op in (GT, GE) else index.upper
                slots.append((_THR, heap, tag.key, tag.op))
            else:
                slots.append((_NONE, self._none, None, None))
        return tuple(slots)

    def _index(self, record):
        slots = record.slots
        if slots is None:
            slots = record.slots = self._plan(record)
        for code, where, key, op in slots:
            if code is _EQ:
                bucket = where.get(key)
                if bucket is None:
                    where[key] = {record: 1}
                else:
                    bucket[record] = bucket.get(record, 0) + 1
            elif code is _THR:
                recs = where.node(key, op).records
                recs[record] = recs.get(record, 0) + 1
            else:
                where[record] = where.get(record, 0) + 1

    def _unindex(self, record):
        for code, where, key, op in record.slots:
            if code is _EQ:
                bucket = where[key]
                _decrement(bucket, record)
                if not bucket:
                    del where[key]
            elif code is _THR:
                node = where.node(key, op, create=False)
                _decrement(node.records, record)
                if not node.records:
                    where.discard(node)
            else:
                _decrement(where, record)

    # -- waiting and signaling --------------------------------------------------

    def enqueue(self, record: ConditionRecord, token) -> None:
        """Queue a waiter's wake token on *record*."""
        if self._owner_check is not None:
            self._owner_check()
        if not record.active:
            raise ContractError(f"cannot wait on inactive {record!r}")
        self._sealed = True
        record.queue.append(token)
        self._waiting += 1

    def resumed(self, record: ConditionRecord) -> None:
        """A signaled waiter of *record* is running again."""
        record.pending -= 1
        self._pending -= 1

    def _signal(self, record):
        token = record.queue.popleft()
        record.pending += 1
        self._pending += 1
        self._waiting -= 1
        self.signals += 1
        record.last_used = self.signals
        token.release()
        return record

    def _try(self, record, store, seen):
        # Records without unsignaled waiters are not candidates.
        if not record.queue or record in seen:
            return False
        seen.add(record)
        self.predicates_evaluated += 1
        if self.trace is not None:
            self.trace.append(record)
        return record.evaluate(store)

    def relay_signal(self, store):
        """Signal one waiter whose predicate holds under *store*; return its record.

        Search order: equivalence hash tables, threshold heaps, untagged
        records.  Returns None when no waiting predicate is true.  Never
        wakes more than one thread.
        """
        if self._owner_check is not None:
            self._owner_check()
        self.relay_calls += 1
        if not self._waiting:
            return None
        seen = set()
        for index in self._eq_order:
            table = index.table
            if not table:
                continue
            self.hash_probes += 1
            bucket = table.get(index.value(store))
            if bucket:
                for record in bucket if len(bucket) == 1 else _ordered(bucket):
                    if self._try(record, store, seen):
                        return self._signal(record)
        for index in self._thr_order:
            value = index.value(store)
            for heap in (index.lower, index.upper):
                if heap:
                    record = self._search_heap(heap, value, store, seen)
                    if record is not None:
                        return self._signal(record)
        if self._none:
            for record in _ordered(self._none):
                if self._try(record, store, seen):
                    return self._signal(record)
        return None

    def _search_heap(self, heap, value, store, seen):
        backup = []
        try:
            node = heap.peek()
            while node is not None and node.holds(value):
                for record in node.ordered():
                    if self._try(record, store, seen):
                        return record
                backup.append(heap.poll())
                self.heap_polls += 1
                node = heap.peek()
            return None
        finally:
            for node in backup:
                heap.push(node)
            self.heap_reinserts += len(backup)


def _decrement(counts, record):
    n = counts[record] - 1
    if n:
        counts[record] = n
    else:
        del counts[record]


class ExhaustiveConditionManager(ConditionManager):
    """Same table and inactive list, but no tagging: relay scans every active record.

    Records are scanned in creation order, the same FIFO tie-break the
    tagged manager uses within a bucket.
    """

    def __init__(self, inactive_capacity=DEFAULT_INACTIVE_CAPACITY, *, debug=False, owner_check=None):
        super().__init__(inactive_capacity, debug=debug, owner_check=owner_check)
        self._active = []

    def _compute_tags(self, p):
        return ()

    def _index(self, record):
        bisect.insort(self._active, record, key=_by_seq)

    def _unindex(self, record):
        i = bisect.bisect_left(self._active, record.seq, key=_by_seq)
        del self._active[i]

    def relay_signal(self, store):
        if self._owner_check is not None:
            self._owner_check()
        self.relay_calls += 1
        if not self._waiting:
            return None
        trace = self.trace
        for record in self._active:
            if record.queue:
                self.predicates_evaluated += 1
                if trace is not None:
                    trace.append(record)
                if record.evaluate(store):
                    return self._signal(record)
        return None
