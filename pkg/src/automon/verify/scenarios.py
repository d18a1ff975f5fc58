"""Built-in small instances for the verifier.

Each entry of :data:`SCENARIOS` is a zero-argument factory returning a
fresh :class:`Scenario`.  Programs are straight-line monitor operations,
so exhaustive search over them is finite.
"""

from __future__ import annotations

from automon.verify.sim import (
    Assign,
    Do,
    Enter,
    Exit,
    Jump,
    Label,
    Local,
    Mutate,
    Scenario,
    ThreadSpec,
    WaitUntil,
    op,
)


def _count_is(expected):
    def check(mon):
        got = mon.store["count"]
        return None if got == expected else f"count ends at {got}, expected {expected}"

    return check


def _put(k, cap=None):
    room = [] if cap is None else [WaitUntil(f"count + $k <= {cap}", {"k": k})]
    return op(*room, Mutate("count", k))


def _take(k):
    return op(WaitUntil("count >= $k", {"k": k}), Mutate("count", -k))


# -- parameterized buffer -----------------------------------------------------------


def param_bounded_buffer():
    """Capacity 4; one producer putting 2+3+3, consumers taking 1+2+1 and 2+1+1."""
    cap = 4
    return Scenario(
        "param-bounded-buffer",
        {"count": 0},
        [
            ThreadSpec("producer", [_put(k, cap) for k in (2, 3, 3)]),
            ThreadSpec("consumer1", [_take(k) for k in (1, 2, 1)]),
            ThreadSpec("consumer2", [_take(k) for k in (2, 1, 1)]),
        ],
        final_check=_count_is(0),
        description=param_bounded_buffer.__doc__,
    )


def pbb_two_producers():
    """Two producers put 16 each; a consumer waits for 32."""
    return Scenario(
        "pbb-two-producers",
        {"count": 0},
        [
            ThreadSpec("producer1", [_put(16)]),
            ThreadSpec("consumer", [_take(32)]),
            ThreadSpec("producer2", [_put(16)]),
        ],
        final_check=_count_is(0),
        description=pbb_two_producers.__doc__,
    )


def pbb_stuck():
    """The consumer wants 32 but only 24 items ever arrive; it waits forever."""
    return Scenario(
        "pbb-stuck",
        {"count": 0},
        [
            ThreadSpec("producer1", [_put(16)]),
            ThreadSpec("consumer", [_take(32)]),
            ThreadSpec("producer2", [_put(8)]),
        ],
        expect_termination=False,
        final_check=_count_is(24),
        description=pbb_stuck.__doc__,
    )


def pbb_48_16():
    """Consumers want 48 and 16, the producer supplies 20; the 16 must get through."""
    return Scenario(
        "pbb-48-16",
        {"count": 0},
        [
            ThreadSpec("consumer48", [_take(48)]),
            ThreadSpec("consumer16", [_take(16)]),
            ThreadSpec("producer", [_put(20)]),
        ],
        expect_termination=False,
        final_check=_count_is(4),
        description=pbb_48_16.__doc__,
    )


def pbb_starve():
    """Consumers want 48, 40 and 16, the producer supplies 20; only the 16 can proceed."""
    return Scenario(
        "pbb-starve",
        {"count": 0},
        [
            ThreadSpec("consumer48", [_take(48)]),
            ThreadSpec("consumer40", [_take(40)]),
            ThreadSpec("consumer16", [_take(16)]),
            ThreadSpec("producer", [_put(20)]),
        ],
        expect_termination=False,
        final_check=_count_is(4),
        description=pbb_starve.__doc__,
    )


# -- the other problems -------------------------------------------------------------------


def bounded_buffer():
    """Capacity 1; one producer of two items, two consumers of one item each."""
    put = op(WaitUntil("count < 1"), Mutate("count", 1))
    take = op(WaitUntil("count > 0"), Mutate("count", -1))
    return Scenario(
        "bounded-buffer",
        {"count": 0},
        [
            ThreadSpec("producer", [put, put]),
            ThreadSpec("consumer1", [take]),
            ThreadSpec("consumer2", [take]),
        ],
        predicates=("count < 1", "count > 0"),
        final_check=_count_is(0),
        description=bounded_buffer.__doc__,
    )


def round_robin(n=3, rounds=3):
    """Three threads taking three turns each in id order."""
    log = []

    def grant(me):
        return Do(lambda mon, env: log.append(me), f"turn {me}")

    threads = [
        ThreadSpec(
            f"t{me}",
            [
                op(WaitUntil("turn == $me", {"me": me}), grant(me), Assign("turn", (me + 1) % n))
                for _ in range(rounds)
            ],
        )
        for me in range(n)
    ]

    def check(mon):
        bad = [k for k, g in enumerate(log) if g != k % n]
        if len(log) != n * rounds or bad:
            return f"grant order {log}"
        return None

    return Scenario(
        "round-robin",
        {"turn": 0},
        threads,
        final_check=check,
        description=round_robin.__doc__,
    )


def sleeping_barber():
    """One chair, two customers (one may leave), a barber serving until all visits end."""
    total = 2

    def arrive(mon, env):
        if mon["waiting"] >= 1:
            env["sat"] = 0
            mon["visits"] += 1
            mon["left"] += 1
        else:
            env["sat"] = 1
            mon["waiting"] += 1

    customer = [
        Enter(),
        Do(arrive, "arrive"),
        Jump("out", lambda mon, env: not env["sat"]),
        WaitUntil("cut > 0"),
        Mutate("cut", -1),
        Mutate("visits", 1),
        Mutate("served", 1),
        Label("out"),
        Exit(),
    ]
    barber = [
        Label("top"),
        op(
            WaitUntil("waiting > 0 || visits == total"),
            Jump("done", lambda mon, env: mon["waiting"] == 0),
            Mutate("waiting", -1),
            Mutate("cut", 1),
        ),
        op(WaitUntil("cut == 0"), Mutate("haircuts", 1)),
        Jump("top"),
        Label("done"),
        Exit(),
    ]

    def check(mon):
        s = mon.store
        if s["visits"] != total or s["haircuts"] != s["served"] or s["served"] + s["left"] != total:
            return f"barber digest off: {s}"
        return None

    return Scenario(
        "sleeping-barber",
        {"waiting": 0, "cut": 0, "visits": 0, "total": total, "served": 0, "left": 0, "haircuts": 0},
        [ThreadSpec("barber", barber), ThreadSpec("cust1", customer), ThreadSpec("cust2", customer)],
        predicates=("waiting > 0 || visits == total", "cut > 0", "cut == 0"),
        final_check=check,
        description=sleeping_barber.__doc__,
    )


def h2o():
    """One O atom forming two molecules from two H threads arriving twice each."""
    h = op(WaitUntil("h < 2"), Mutate("h", 1), Mutate("staged", 1))
    o = op(WaitUntil("h >= 2"), Mutate("h", -2), Mutate("made", 1))

    def check(mon):
        s = mon.store
        if s["made"] != 2 or s["staged"] != 4 or s["h"] != 0:
            return f"h2o digest off: {s}"
        return None

    return Scenario(
        "h2o",
        {"h": 0, "made": 0, "staged": 0},
        [ThreadSpec("oxygen", [o, o]), ThreadSpec("h1", [h, h]), ThreadSpec("h2", [h, h])],
        predicates=("h < 2", "h >= 2"),
        final_check=check,
        description=h2o.__doc__,
    )


def readers_writers():
    """Two readers and one writer, one access each, admitted in ticket order."""
    order = []

    def take_ticket(mon, env):
        env["t"] = mon["ticket"]
        mon["ticket"] += 1

    def admit(kind):
        def fn(mon, env):
            order.append(env["t"])
            mon["serving"] = env["t"] + 1
            if kind == "w":
                if mon["writing"] or mon["readers"]:
                    order.append("overlap")
                mon["writing"] = True
            else:
                mon["readers"] += 1

        return fn

    bind = lambda env: {"t": env["t"]}
    reader = [
        op(Do(take_ticket, "ticket"), WaitUntil("serving == $t && !writing", bind), Do(admit("r"), "read")),
        op(Mutate("readers", -1)),
    ]
    writer = [
        op(
            Do(take_ticket, "ticket"),
            WaitUntil("serving == $t && !writing && readers == 0", bind),
            Do(admit("w"), "write"),
        ),
        op(Assign("writing", False)),
    ]

    def check(mon):
        return None if order == [0, 1, 2] else f"access order {order}"

    return Scenario(
        "readers-writers",
        {"ticket": 0, "serving": 0, "readers": 0, "writing": False},
        [ThreadSpec("reader1", reader), ThreadSpec("writer", writer), ThreadSpec("reader2", reader)],
        final_check=check,
        description=readers_writers.__doc__,
    )


def dining_philosophers(n=3):
    """Three philosophers, one meal each."""
    threads = []
    for i in range(n):
        left, right = f"c{i}", f"c{(i + 1) % n}"
        threads.append(
            ThreadSpec(
                f"phil{i}",
                [
                    op(
                        WaitUntil(f"{left} == 1 && {right} == 1"),
                        Assign(left, 0),
                        Assign(right, 0),
                        Mutate("meals", 1),
                    ),
                    op(Assign(left, 1), Assign(right, 1)),
                ],
            )
        )

    def check(mon):
        s = mon.store
        if s["meals"] != n or any(s[f"c{i}"] != 1 for i in range(n)):
            return f"philosophers digest off: {s}"
        return None

    return Scenario(
        "dining-philosophers",
        {**{f"c{i}": 1 for i in range(n)}, "meals": 0},
        threads,
        predicates=tuple(f"c{i} == 1 && c{(i + 1) % n} == 1" for i in range(n)),
        final_check=check,
        description=dining_philosophers.__doc__,
    )


def two_by_two():
    """Two threads of two local steps each; no monitor at all."""
    return Scenario(
        "two-by-two",
        {"x": 0},
        [ThreadSpec("a", [Local(), Local()]), ThreadSpec("b", [Local(), Local()])],
        description=two_by_two.__doc__,
    )


SCENARIOS = {
    "param-bounded-buffer": param_bounded_buffer,
    "round-robin": round_robin,
    "bounded-buffer": bounded_buffer,
    "sleeping-barber": sleeping_barber,
    "h2o": h2o,
    "readers-writers": readers_writers,
    "dining-philosophers": dining_philosophers,
    "pbb-two-producers": pbb_two_producers,
    "pbb-stuck": pbb_stuck,
    "pbb-48-16": pbb_48_16,
    "pbb-starve": pbb_starve,
    "two-by-two": two_by_two,
}


def get(name):
    try:
        return SCENARIOS[name]
    except KeyError:
        raise ValueError(f"unknown scenario {name!r} (choose from {', '.join(SCENARIOS)})") from None
