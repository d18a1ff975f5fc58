import threading
import time

import pytest

from automon import (
    ContractError,
    IncompleteBinding,
    Mechanism,
    MissingVariable,
    Monitor,
    PermanentWait,
    PredicateError,
    synchronized,
)

MECHS = [Mechanism.AUTO, Mechanism.AUTO_NO_TAGS, Mechanism.BASELINE]


def spawn(fn, *args):
    t = threading.Thread(target=fn, args=args, daemon=True)
    t.start()
    return t


def wait_for(cond, timeout=5.0):
    deadline = time.monotonic() + timeout
    while not cond():
        if time.monotonic() > deadline:
            raise AssertionError("condition not reached")
        time.sleep(0.001)


def waiters(m):
    if m.manager is None:
        return len(m._broadcast_queue)
    return m.manager.waiting


def join_all(threads, timeout=10.0):
    for t in threads:
        t.join(timeout)
        assert not t.is_alive(), "thread did not finish"


# -- construction and store ----------------------------------------------------------


def test_enter_exit_and_store_access():
    m = Monitor({"count": 0, "flag": False})
    with m:
        assert m.locked
        m["count"] += 3
        m["flag"] = True
        assert (m["count"], m["flag"]) == (3, True)
    assert not m.locked
    m.enter()
    m.exit()


def test_reentrant_enter_rejected():
    m = Monitor({"x": 0})
    with m:
        with pytest.raises(ContractError):
            m.enter()


def test_exit_without_holding_rejected():
    m = Monitor({"x": 0})
    with pytest.raises(ContractError):
        m.exit()


def test_waituntil_outside_monitor_rejected():
    m = Monitor({"x": 1})
    with pytest.raises(ContractError):
        m.waituntil("x > 0")


def test_store_types_checked():
    m = Monitor({"x": 0, "b": False})
    with m:
        with pytest.raises(TypeError):
            m["x"] = True
        with pytest.raises(TypeError):
            m["b"] = 1
        with pytest.raises(OverflowError):
            m["x"] = 2**63
        with pytest.raises(MissingVariable):
            m["nope"] = 1
        with pytest.raises(MissingVariable):
            m["nope"]
    with pytest.raises(OverflowError):
        Monitor({"x": -(2**63) - 1})
    with pytest.raises(PredicateError):
        Monitor({"not a name": 0})


def test_debug_store_access_requires_lock():
    m = Monitor({"x": 0}, debug=True)
    with pytest.raises(ContractError):
        m["x"]
    with m:
        m["x"] = 1


def test_declared_predicates_registered_at_construction():
    m = Monitor({"count": 0}, predicates=["count > 0", "count < 16"])
    assert len(m.manager) == 2
    with pytest.raises(PredicateError):
        Monitor({"count": 0}, predicates=["count >= $n"])
    with pytest.raises(MissingVariable):
        Monitor({"count": 0}, predicates=["other > 0"])


def test_explicit_mechanism_has_no_automatic_monitor():
    with pytest.raises(ValueError):
        Monitor({"x": 0}, mechanism="explicit")
    with pytest.raises(ValueError):
        Monitor({"x": 0}, mechanism="bogus")


# -- waituntil -------------------------------------------------------------------------


@pytest.mark.parametrize("mech", MECHS)
def test_true_predicate_returns_without_registration(mech):
    m = Monitor({"count": 64}, mechanism=mech)
    with m:
        m.waituntil("count >= $n", n=48)
    assert m.stats.wait_calls == 0
    if m.manager is not None:
        assert len(m.manager) == 0


def test_waituntil_errors():
    m = Monitor({"count": 0})
    with m:
        with pytest.raises(IncompleteBinding):
            m.waituntil("count >= $n")
        with pytest.raises(MissingVariable):
            m.waituntil("other > 0")
        with pytest.raises(PermanentWait):
            m.waituntil("$a > 3 && count == 1", a=1)
        with pytest.raises(TypeError):
            m.waituntil(42)
    assert not m.locked


@pytest.mark.parametrize("mech", MECHS)
def test_lock_released_while_waiting(mech):
    m = Monitor({"count": 24}, mechanism=mech)
    done = []

    def consumer():
        with m:
            m.waituntil("count >= $n", n=32)
            m["count"] -= 32
            done.append(m["count"])

    t = spawn(consumer)
    wait_for(lambda: waiters(m) == 1)
    with m:  # would deadlock if the waiter kept the lock
        m["count"] += 16
    join_all([t])
    assert done == [8]
    assert m.stats.wait_calls == 1
    assert m.stats.total_wakeups == 1
    assert m.stats.futile_wakeups == 0


@pytest.mark.parametrize("mech", [Mechanism.AUTO, Mechanism.AUTO_NO_TAGS])
def test_exit_signals_only_the_true_waiter(mech):
    m = Monitor({"count": 0}, mechanism=mech)
    order = []

    def consumer(n):
        with m:
            m.waituntil("count >= $n", n=n)
            m["count"] -= n
            order.append(n)

    big = spawn(consumer, 48)
    wait_for(lambda: waiters(m) == 1)
    small = spawn(consumer, 16)
    wait_for(lambda: waiters(m) == 2)
    with m:
        m["count"] = 20
    join_all([small])
    assert order == [16]
    assert m.counters()["signals"] == 1
    assert m.stats.futile_wakeups == 0
    assert big.is_alive()
    with m:
        m["count"] += 44
    join_all([big])
    assert order == [16, 48]
    assert m.counters()["broadcasts"] == 0


def test_futile_wakeup_when_state_stolen():
    # Baseline wakes everyone; the loser re-evaluates false and re-waits.
    m = Monitor({"count": 0}, mechanism="baseline")
    got = []

    def consumer():
        with m:
            m.waituntil("count > 0")
            m["count"] -= 1
            got.append(1)

    ts = [spawn(consumer) for _ in range(2)]
    wait_for(lambda: waiters(m) == 2)
    with m:
        m["count"] = 1
    wait_for(lambda: len(got) == 1)
    wait_for(lambda: waiters(m) == 1)
    # the loser of the race, plus the first waiter woken by the second's entry
    assert m.stats.futile_wakeups == 2
    assert m.stats.total_wakeups == 3
    with m:
        m["count"] = 1
    join_all(ts)
    assert m.broadcasts >= 2


def test_futile_wakeup_counted_with_auto():
    # Signal mid-section, then falsify the predicate before the lock is released.
    m = Monitor({"count": 0})
    seen = []

    def consumer():
        with m:
            m.waituntil("count > 0")
            seen.append(m["count"])

    t = spawn(consumer)
    wait_for(lambda: waiters(m) == 1)
    with m:
        m["count"] = 1
        rec = next(iter(m.manager.records()))
        m.manager._signal(rec)
        m["count"] = 0
    wait_for(lambda: m.stats.total_wakeups == 1)
    wait_for(lambda: waiters(m) == 1)
    assert m.stats.futile_wakeups == 1
    with m:
        m["count"] = 5
    join_all([t])
    assert seen == [5]


def test_local_binding_frozen_during_wait():
    m = Monitor({"turn": 0})
    log = []

    def worker(my_id):
        with m:
            m.waituntil("turn == $me", me=my_id)
            log.append(my_id)
            m["turn"] += 1

    ts = [spawn(worker, i) for i in (3, 1, 2)]
    wait_for(lambda: waiters(m) == 3)
    with m:
        m["turn"] = 1
    join_all(ts)
    assert log == [1, 2, 3]


def test_dynamic_record_deactivated_after_last_waiter():
    m = Monitor({"count": 0})

    def consumer():
        with m:
            m.waituntil("count >= $n", n=5)

    ts = [spawn(consumer) for _ in range(2)]
    wait_for(lambda: waiters(m) == 2)
    assert len(m.manager.records()) == 1
    with m:
        m["count"] = 5
    join_all(ts)
    assert m.manager.records() == []
    assert len(m.manager.inactive_records()) == 1
    c = m.counters()
    assert c["records_created"] == 1


@pytest.mark.parametrize("mech", MECHS)
def test_bounded_buffer_threads(mech):
    m = Monitor({"count": 0}, predicates=["count > 0", "count < 4"], mechanism=mech)
    n, per = 3, 300
    taken = []

    def producer():
        for _ in range(per):
            with m:
                m.waituntil("count < 4")
                m["count"] += 1

    def consumer():
        k = 0
        for _ in range(per):
            with m:
                m.waituntil("count > 0")
                m["count"] -= 1
                k += 1
        taken.append(k)

    ts = [spawn(producer) for _ in range(n)] + [spawn(consumer) for _ in range(n)]
    join_all(ts, timeout=60)
    assert sum(taken) == n * per
    assert m.store["count"] == 0
    c = m.counters()
    if mech is not Mechanism.BASELINE:
        assert c["broadcasts"] == 0


def test_synchronized_decorator():
    class Counter(Monitor):
        def __init__(self):
            super().__init__({"n": 0}, debug=True)

        @synchronized
        def incr(self):
            self["n"] += 1
            return self["n"]

        @synchronized
        def await_at_least(self, k):
            self.waituntil("n >= $k", k=k)
            return self["n"]

    c = Counter()
    t = threading.Thread(target=lambda: c.await_at_least(3), daemon=True)
    t.start()
    for _ in range(3):
        c.incr()
    join_all([t])
    assert c.store["n"] == 3


def test_counters_shape():
    m = Monitor({"x": 0})
    keys = set(m.counters())
    assert {"wait_calls", "wakeups", "futile_wakeups", "signals", "broadcasts",
            "preds_evaluated", "preds_per_signal"} <= keys
    b = Monitor({"x": 0}, mechanism="baseline").counters()
    assert b["signals"] == 0 and b["preds_per_signal"] == 0.0
