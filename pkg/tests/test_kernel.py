import pytest
from hypothesis import given
from hypothesis import strategies as st

from wsnsim.kernel import (
    EventKind,
    ScheduleError,
    SimulationError,
    Simulator,
    bit_offset_ns,
    to_ns,
)


def recording_sim():
    sim = Simulator()
    seen = []
    sim.register("x", lambda ev: seen.append((sim.now, ev.seq, ev.data)))
    return sim, seen


def test_event_at_now_precedes_later_event():
    sim, seen = recording_sim()
    sim.schedule(1, "x", EventKind.BEACON_DUE, "later")
    sim.schedule(0, "x", EventKind.BEACON_DUE, "now")
    sim.run(10)
    assert [d for _, _, d in seen] == ["now", "later"]


def test_ties_dispatch_in_insertion_order():
    sim, seen = recording_sim()
    for i in range(5):
        sim.schedule(7, "x", EventKind.SLOT_DUE, i)
    sim.run(100)
    assert [d for _, _, d in seen] == [0, 1, 2, 3, 4]


def test_schedule_in_past_is_an_error():
    sim, _ = recording_sim()
    sim.schedule(5, "x", EventKind.SLOT_DUE)
    sim.run(10)
    with pytest.raises(ScheduleError):
        sim.schedule(4, "x", EventKind.SLOT_DUE)


def test_empty_run():
    sim = Simulator()
    s = sim.run(to_ns(10))
    assert (s.events_dispatched, s.end_time) == (0, 0)


def test_horizon_cut():
    sim, seen = recording_sim()
    sim.schedule(to_ns(5), "x", EventKind.BEACON_DUE)
    s = sim.run(to_ns(3))
    assert seen == []
    assert s.end_time == to_ns(3)


def test_cancelled_event_is_skipped():
    sim, seen = recording_sim()
    ev = sim.schedule(1, "x", EventKind.SLOT_DUE, "gone")
    sim.schedule(2, "x", EventKind.SLOT_DUE, "kept")
    ev.cancel()
    sim.run(10)
    assert [d for _, _, d in seen] == ["kept"]
    assert len(sim.queue) == 0


def test_handler_fault_carries_context():
    sim = Simulator()

    def boom(ev):
        raise KeyError("oops")

    sim.register(3, boom)
    sim.schedule(42, 3, EventKind.TASK_DONE)
    with pytest.raises(SimulationError, match=r"task-done.*node 3.*t=42"):
        sim.run(100)


@given(st.lists(st.tuples(st.integers(0, 50), st.integers(0, 3)), max_size=60))
def test_dispatch_order_is_sorted_and_clock_monotone(items):
    sim = Simulator(trace=True)
    clocks = []
    for target in range(4):
        sim.register(target, lambda ev: clocks.append(sim.now))
    for t, target in items:
        sim.schedule(t, target, EventKind.SLOT_DUE)
    sim.run(1000)
    keys = [(t, seq) for t, seq, *_ in sim.trace]
    assert keys == sorted(keys)
    assert clocks == sorted(clocks)
    assert len(keys) == len(items)


def test_handlers_can_schedule_at_now():
    sim = Simulator(trace=True)
    order = []

    def h(ev):
        order.append(ev.data)
        if ev.data == "a":
            sim.schedule(sim.now, "t", EventKind.SLOT_DUE, "c")

    sim.register("t", h)
    sim.schedule(5, "t", EventKind.SLOT_DUE, "a")
    sim.schedule(5, "t", EventKind.SLOT_DUE, "b")
    sim.run(10)
    assert order == ["a", "b", "c"]


def test_to_ns_is_exact():
    assert to_ns("0.06") == 60_000_000
    assert to_ns("60", "ms") == 60_000_000
    assert to_ns(1) == 1_000_000_000
    with pytest.raises(ValueError):
        to_ns("0.0000000001")


@pytest.mark.parametrize(
    "n_bytes, expected",
    [(15, 50_000_000), (16, 53_333_333), (4, 13_333_333), (8, 26_666_667), (1, 3_333_333)],
)
def test_byte_boundaries_round_once(n_bytes, expected):
    assert bit_offset_ns(8 * n_bytes, 2400.0) == expected
