"""The seven synchronization problems, each for every signaling mechanism.

A builder takes a :class:`ProblemConfig` and a mechanism and returns a
:class:`Workload`: the worker callables (one per OS thread), a digest
function that checks the final state, and a counter snapshot function.
Workers do nothing but monitor operations.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from typing import Callable

from automon.bench.explicit import ExplicitMonitor
from automon.errors import CorrectnessError
from automon.monitor import Mechanism, Monitor

PROBLEMS = (
    "bounded-buffer",
    "sleeping-barber",
    "h2o",
    "round-robin",
    "readers-writers",
    "dining-philosophers",
    "param-bounded-buffer",
)

DEFAULT_CAPACITY = {"bounded-buffer": 16, "param-bounded-buffer": 256}
MAX_BATCH = 128


@dataclass(frozen=True)
class ProblemConfig:
    """One benchmark setting.

    ``threads`` counts all worker threads, except for the parameterized
    buffer where it counts consumers (the single producer comes on top).
    ``ops`` is per thread: items put, visits, arrivals, turns, accesses,
    meals or takes depending on the problem.
    """

    problem: str
    threads: int
    ops: int = 10_000
    capacity: int | None = None
    chairs: int = 4
    seed: int = 0

    def __post_init__(self):
        if self.problem not in PROBLEMS:
            raise ValueError(f"unknown problem {self.problem!r}")
        least = _MIN_THREADS.get(self.problem, 1)
        if self.threads < least:
            raise ValueError(f"{self.problem} needs at least {least} thread(s)")
        if self.ops < 1:
            raise ValueError("ops must be positive")
        if self.capacity is not None and self.capacity < 1:
            raise ValueError("capacity must be positive")
        if self.chairs < 1:
            raise ValueError("chairs must be positive")
        if self.problem == "param-bounded-buffer" and self.buffer_capacity < MAX_BATCH:
            raise ValueError(f"param-bounded-buffer capacity must be at least {MAX_BATCH}")

    @property
    def buffer_capacity(self) -> int:
        return self.capacity or DEFAULT_CAPACITY.get(self.problem, 16)


_MIN_THREADS = {
    "bounded-buffer": 2,
    "sleeping-barber": 2,
    "h2o": 2,
    "dining-philosophers": 2,
}


@dataclass
class Workload:
    workers: list
    digest: Callable[[], dict]
    counters: Callable[[], dict]


def _check(ok, problem, message):
    if not ok:
        raise CorrectnessError(f"{problem}: {message}")


def _split(total, parts):
    q, r = divmod(total, parts)
    return [q + (i < r) for i in range(parts)]


# -- bounded buffer ------------------------------------------------------------


def bounded_buffer(cfg, mech):
    cap = cfg.buffer_capacity
    producers = cfg.threads // 2
    consumers = cfg.threads - producers
    total = producers * cfg.ops
    takes = _split(total, consumers)
    buf = []
    tally = {"put": 0, "taken": 0}

    if mech is Mechanism.EXPLICIT:
        m = ExplicitMonitor()
        not_full, not_empty = m.condition(), m.condition()

        def produce(base):
            for i in range(base, base + cfg.ops):
                with m:
                    not_full.wait_for(lambda: len(buf) < cap)
                    buf.append(i)
                    tally["put"] += i
                    not_empty.signal()

        def consume(n):
            for _ in range(n):
                with m:
                    not_empty.wait_for(lambda: len(buf) > 0)
                    tally["taken"] += buf.pop()
                    not_full.signal()

        counters = m.counters
    else:
        m = Monitor({"count": 0}, ["count < %d" % cap, "count > 0"], mechanism=mech)
        not_full, not_empty = "count < %d" % cap, "count > 0"

        def produce(base):
            for i in range(base, base + cfg.ops):
                with m:
                    m.waituntil(not_full)
                    buf.append(i)
                    tally["put"] += i
                    m["count"] += 1

        def consume(n):
            for _ in range(n):
                with m:
                    m.waituntil(not_empty)
                    tally["taken"] += buf.pop()
                    m["count"] -= 1

        counters = m.counters

    workers = [lambda b=p * cfg.ops: produce(b) for p in range(producers)]
    workers += [lambda n=n: consume(n) for n in takes]

    def digest():
        _check(not buf, cfg.problem, f"{len(buf)} items left in the buffer")
        _check(tally["put"] == tally["taken"], cfg.problem, "item checksum mismatch")
        return {"produced": total, "consumed": total}

    return Workload(workers, digest, counters)


# -- sleeping barber ---------------------------------------------------------------


def sleeping_barber(cfg, mech):
    customers = cfg.threads - 1
    total = customers * cfg.ops
    chairs = cfg.chairs
    got = [0] * customers

    if mech is Mechanism.EXPLICIT:
        m = ExplicitMonitor()
        s = _State(waiting=0, cut=0, visits=0, left=0, haircuts=0)
        sleep, in_chair, cut_done = m.condition(), m.condition(), m.condition()

        def customer(me):
            for _ in range(cfg.ops):
                with m:
                    if s.waiting >= chairs:
                        s.left += 1
                        s.visits += 1
                        sleep.signal()
                        continue
                    s.waiting += 1
                    sleep.signal()
                    in_chair.wait_for(lambda: s.cut > 0)
                    s.cut -= 1
                    got[me] += 1
                    s.visits += 1
                    cut_done.signal()

        def barber():
            while True:
                with m:
                    sleep.wait_for(lambda: s.waiting > 0 or s.visits == total)
                    if s.waiting == 0:
                        return
                    s.waiting -= 1
                    s.cut += 1
                    in_chair.signal()
                with m:
                    cut_done.wait_for(lambda: s.cut == 0)
                    s.haircuts += 1

        counters = m.counters
        final = lambda: (s.haircuts, s.left, s.visits)
    else:
        m = Monitor(
            {"waiting": 0, "cut": 0, "visits": 0, "total": total},
            ["waiting > 0 || visits == total", "cut > 0", "cut == 0"],
            mechanism=mech,
        )
        tally = {"left": 0, "haircuts": 0}

        def customer(me):
            for _ in range(cfg.ops):
                with m:
                    if m["waiting"] >= chairs:
                        tally["left"] += 1
                        m["visits"] += 1
                        continue
                    m["waiting"] += 1
                    m.waituntil("cut > 0")
                    m["cut"] -= 1
                    got[me] += 1
                    m["visits"] += 1

        def barber():
            while True:
                with m:
                    m.waituntil("waiting > 0 || visits == total")
                    if m["waiting"] == 0:
                        return
                    m["waiting"] -= 1
                    m["cut"] += 1
                with m:
                    m.waituntil("cut == 0")
                    tally["haircuts"] += 1

        counters = m.counters
        final = lambda: (tally["haircuts"], tally["left"], m.store["visits"])

    workers = [barber] + [lambda i=i: customer(i) for i in range(customers)]

    def digest():
        haircuts, left, visits = final()
        served = sum(got)
        _check(visits == total, cfg.problem, f"{visits} of {total} visits finished")
        _check(haircuts == served, cfg.problem, f"{haircuts} haircuts given, {served} received")
        _check(served + left == total, cfg.problem, "served + left != visits")
        return {"visits": total, "haircuts": haircuts, "left": left}

    return Workload(workers, digest, counters)


class _State:
    """Plain attribute bag for the explicit implementations."""

    def __init__(self, **values):
        self.__dict__.update(values)


# -- H2O ---------------------------------------------------------------------------
#
# Two staging slots for H atoms.  An H atom waits while both slots are taken
# (two H already present, no O has bonded them yet); the O atom waits until
# two H atoms are staged and then forms a molecule.  H atoms do not wait for
# their own bond to complete, which would deadlock once only one H thread is
# left running.


def h2o(cfg, mech):
    hydrogens = cfg.threads - 1
    arrivals = [cfg.ops] * hydrogens
    if sum(arrivals) % 2:
        arrivals[0] += 1  # molecules need an even number of H atoms
    molecules = sum(arrivals) // 2
    staged = [0] * hydrogens

    if mech is Mechanism.EXPLICIT:
        m = ExplicitMonitor()
        s = _State(h=0, made=0)
        o_wait, h_wait = m.condition(), m.condition()
        room = lambda: s.h < 2
        pair = lambda: s.h >= 2

        def hydrogen(me):
            for _ in range(arrivals[me]):
                with m:
                    h_wait.wait_for(room)
                    s.h += 1
                    staged[me] += 1
                    if s.h == 2:
                        o_wait.signal()

        def oxygen():
            for _ in range(molecules):
                with m:
                    o_wait.wait_for(pair)
                    s.h -= 2
                    s.made += 1
                    h_wait.signal()
                    h_wait.signal()

        counters = m.counters
        final = lambda: (s.made, s.h)
    else:
        m = Monitor({"h": 0}, ["h < 2", "h >= 2"], mechanism=mech)
        tally = {"made": 0}

        def hydrogen(me):
            for _ in range(arrivals[me]):
                with m:
                    m.waituntil("h < 2")
                    m["h"] += 1
                    staged[me] += 1

        def oxygen():
            for _ in range(molecules):
                with m:
                    m.waituntil("h >= 2")
                    m["h"] -= 2
                    tally["made"] += 1

        counters = m.counters
        final = lambda: (tally["made"], m.store["h"])

    workers = [oxygen] + [lambda i=i: hydrogen(i) for i in range(hydrogens)]

    def digest():
        made, h = final()
        _check(made == molecules, cfg.problem, f"{made} of {molecules} molecules")
        _check(sum(staged) == 2 * made, cfg.problem, "H atoms used != 2 x molecules")
        _check(h == 0, cfg.problem, "unbonded H atoms left over")
        return {"molecules": made, "h_atoms": sum(staged), "o_atoms": made}

    return Workload(workers, digest, counters)


# -- round robin -------------------------------------------------------------------


def round_robin(cfg, mech):
    n = cfg.threads
    grants = []

    if mech is Mechanism.EXPLICIT:
        m = ExplicitMonitor()
        s = _State(turn=0)
        queues = [m.condition() for _ in range(n)]

        def worker(me):
            mine = queues[me]
            ready = lambda: s.turn == me
            for _ in range(cfg.ops):
                with m:
                    mine.wait_for(ready)
                    grants.append(me)
                    s.turn = nxt = (me + 1) % n
                    queues[nxt].signal()

        counters = m.counters
    else:
        m = Monitor({"turn": 0}, mechanism=mech)

        def worker(me):
            nxt = (me + 1) % n
            for _ in range(cfg.ops):
                with m:
                    m.waituntil("turn == $me", me=me)
                    grants.append(me)
                    m["turn"] = nxt

        counters = m.counters

    workers = [lambda i=i: worker(i) for i in range(n)]

    def digest():
        _check(len(grants) == n * cfg.ops, cfg.problem, f"{len(grants)} grants")
        bad = next((k for k, g in enumerate(grants) if g != k % n), None)
        _check(bad is None, cfg.problem, f"grant {bad} went to the wrong thread")
        return {"grants": len(grants)}

    return Workload(workers, digest, counters)


# -- readers / writers -----------------------------------------------------------------


def readers_writers(cfg, mech):
    writers = cfg.threads // 2
    readers = cfg.threads - writers
    order = []
    errors = []

    if mech is Mechanism.EXPLICIT:
        m = ExplicitMonitor()
        s = _State(ticket=0, serving=0, readers=0, writing=False)
        queues = {}

        def wake_next():
            q = queues.get(s.serving)
            if q is not None:
                q.signal()

        def wait_turn(ready):
            t = s.ticket
            s.ticket += 1
            if not ready(t):
                q = queues[t] = m.condition()
                q.wait_for(lambda: ready(t))
                del queues[t]
            order.append(t)
            s.serving += 1

        reader_ready = lambda t: s.serving == t and not s.writing
        writer_ready = lambda t: s.serving == t and not s.writing and s.readers == 0

        def reader():
            for _ in range(cfg.ops):
                with m:
                    wait_turn(reader_ready)
                    s.readers += 1
                    if s.writing:
                        errors.append("read during write")
                    wake_next()
                with m:
                    s.readers -= 1
                    if s.readers == 0:
                        wake_next()

        def writer():
            for _ in range(cfg.ops):
                with m:
                    wait_turn(writer_ready)
                    if s.writing or s.readers:
                        errors.append("write overlaps")
                    s.writing = True
                with m:
                    s.writing = False
                    wake_next()

        counters = m.counters
    else:
        m = Monitor({"ticket": 0, "serving": 0, "readers": 0, "writing": False}, mechanism=mech)

        def take_ticket():
            t = m["ticket"]
            m["ticket"] = t + 1
            return t

        def reader():
            for _ in range(cfg.ops):
                with m:
                    t = take_ticket()
                    m.waituntil("serving == $t && !writing", t=t)
                    order.append(t)
                    m["serving"] = t + 1
                    m["readers"] += 1
                with m:
                    m["readers"] -= 1

        def writer():
            for _ in range(cfg.ops):
                with m:
                    t = take_ticket()
                    m.waituntil("serving == $t && !writing && readers == 0", t=t)
                    order.append(t)
                    m["serving"] = t + 1
                    if m["writing"] or m["readers"]:
                        errors.append("write overlaps")
                    m["writing"] = True
                with m:
                    m["writing"] = False

        counters = m.counters

    workers = [reader] * readers + [writer] * writers
    total = cfg.threads * cfg.ops

    def digest():
        _check(not errors, cfg.problem, errors[0] if errors else "")
        _check(order == list(range(total)), cfg.problem, "accesses did not follow ticket order")
        return {"reads": readers * cfg.ops, "writes": writers * cfg.ops}

    return Workload(workers, digest, counters)


# -- dining philosophers --------------------------------------------------------------


def dining_philosophers(cfg, mech):
    n = cfg.threads
    meals = [0] * n
    errors = []

    if mech is Mechanism.EXPLICIT:
        m = ExplicitMonitor()
        free = [True] * n
        queues = [m.condition() for _ in range(n)]

        def philosopher(i):
            left, right = i, (i + 1) % n
            ready = lambda: free[left] and free[right]
            for _ in range(cfg.ops):
                with m:
                    queues[i].wait_for(ready)
                    free[left] = free[right] = False
                    meals[i] += 1
                with m:
                    free[left] = free[right] = True
                    queues[(i - 1) % n].signal()
                    queues[(i + 1) % n].signal()

        counters = m.counters
        final = lambda: all(free)
    else:
        names = [f"c{i}" for i in range(n)]
        wants = [f"c{i} == 1 && c{(i + 1) % n} == 1" for i in range(n)]
        m = Monitor({name: 1 for name in names}, wants, mechanism=mech)

        def philosopher(i):
            left, right, want = names[i], names[(i + 1) % n], wants[i]
            for _ in range(cfg.ops):
                with m:
                    m.waituntil(want)
                    m[left] = 0
                    m[right] = 0
                    meals[i] += 1
                with m:
                    m[left] = 1
                    m[right] = 1

        counters = m.counters
        final = lambda: all(v == 1 for v in m.store.values())

    workers = [lambda i=i: philosopher(i) for i in range(n)]

    def digest():
        _check(all(k == cfg.ops for k in meals), cfg.problem, "meal counts differ from target")
        _check(final(), cfg.problem, "chopsticks not returned")
        return {"meals": sum(meals)}

    return Workload(workers, digest, counters)


# -- parameterized bounded buffer ------------------------------------------------------


def _batches(rng, total):
    out = []
    while total > 0:
        k = min(rng.randint(1, MAX_BATCH), total)
        out.append(k)
        total -= k
    return out


def param_bounded_buffer(cfg, mech):
    cap = cfg.buffer_capacity
    rng = random.Random(cfg.seed)
    takes = [[rng.randint(1, MAX_BATCH) for _ in range(cfg.ops)] for _ in range(cfg.threads)]
    total = sum(map(sum, takes))
    puts = _batches(rng, total)
    tally = {"put": 0, "taken": 0}

    if mech is Mechanism.EXPLICIT:
        m = ExplicitMonitor()
        s = _State(count=0)
        space, items = m.condition(), m.condition()

        def producer():
            for k in puts:
                with m:
                    space.wait_for(lambda: s.count + k <= cap)
                    s.count += k
                    tally["put"] += k
                    items.broadcast()

        def consumer(mine):
            for k in mine:
                with m:
                    items.wait_for(lambda: s.count >= k)
                    s.count -= k
                    tally["taken"] += k
                    space.broadcast()

        counters = m.counters
        final = lambda: s.count
    else:
        m = Monitor({"count": 0}, mechanism=mech)
        room = "count + $k <= %d" % cap

        def producer():
            for k in puts:
                with m:
                    m.waituntil(room, k=k)
                    m["count"] += k
                    tally["put"] += k

        def consumer(mine):
            for k in mine:
                with m:
                    m.waituntil("count >= $k", k=k)
                    m["count"] -= k
                    tally["taken"] += k

        counters = m.counters
        final = lambda: m.store["count"]

    workers = [producer] + [lambda t=t: consumer(t) for t in takes]

    def digest():
        _check(tally["put"] == total and tally["taken"] == total, cfg.problem, "items produced != consumed")
        _check(final() == 0, cfg.problem, "buffer not empty at the end")
        return {"produced": total, "consumed": total}

    return Workload(workers, digest, counters)


BUILDERS = {
    "bounded-buffer": bounded_buffer,
    "sleeping-barber": sleeping_barber,
    "h2o": h2o,
    "round-robin": round_robin,
    "readers-writers": readers_writers,
    "dining-philosophers": dining_philosophers,
    "param-bounded-buffer": param_bounded_buffer,
}


def build(cfg: ProblemConfig, mech) -> Workload:
    return BUILDERS[cfg.problem](cfg, Mechanism.parse(mech))
