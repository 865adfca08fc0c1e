"""Discrete-event core: integer-nanosecond clock, event queue, dispatch loop."""

from __future__ import annotations

import enum
import heapq
from dataclasses import dataclass, field
from decimal import Decimal
from fractions import Fraction
from functools import lru_cache
from typing import Any, Callable

NS_PER_S = 1_000_000_000
NS_PER_MS = 1_000_000
NS_PER_US = 1_000


class SimulationError(RuntimeError):
    """Unrecoverable fault raised while dispatching an event."""


class ScheduleError(SimulationError):
    """An event was scheduled before the current simulation time."""


class EventKind(enum.Enum):
    FRAME_START = "frame-start"
    FRAME_END = "frame-end"
    TX_OVER = "tx-over"
    BEACON_DUE = "beacon-due"
    SLOT_DUE = "slot-due"
    TASK_DONE = "task-done"
    WAYPOINT_HOP = "waypoint-hop"
    MODE_SWITCH = "mode-switch"


def to_ns(value: Any, unit: str = "s") -> int:
    """Convert a decimal quantity in ``unit`` to integer nanoseconds exactly.

    Raises ValueError if the quantity is not a whole number of nanoseconds.
    """
    scale = {"s": NS_PER_S, "ms": NS_PER_MS, "us": NS_PER_US, "ns": 1}[unit]
    exact = Decimal(str(value)) * scale
    if exact != exact.to_integral_value():
        raise ValueError(f"{value} {unit} is not a whole number of nanoseconds")
    return int(exact)


def round_half_up(q: Fraction) -> int:
    return (2 * q.numerator + q.denominator) // (2 * q.denominator)


def bit_time(datarate: float) -> Fraction:
    """Exact duration of one bit in nanoseconds."""
    return Fraction(NS_PER_S) / Fraction(str(datarate))


@lru_cache(maxsize=4096)
def bit_offset_ns(bits: int, datarate: float) -> int:
    """Offset of bit boundary ``bits`` from frame start, rounded once to ns."""
    return round_half_up(bits * bit_time(datarate))


@dataclass(eq=False, slots=True)
class Event:
    time: int
    seq: int
    target: Any
    kind: EventKind
    data: Any = None
    cancelled: bool = False

    def cancel(self) -> None:
        self.cancelled = True


@dataclass
class RunSummary:
    events_dispatched: int
    end_time: int
    frames_sent: int = 0
    frames_received: int = 0
    frames_dropped: dict[str, int] = field(default_factory=dict)


class EventQueue:
    """Binary heap ordered by (time, seq); cancelled events are skipped lazily."""

    def __init__(self) -> None:
        self._heap: list[tuple[int, int, Event]] = []
        self._seq = 0

    def __len__(self) -> int:
        return sum(1 for _, _, ev in self._heap if not ev.cancelled)

    def push(self, time: int, target: Any, kind: EventKind, data: Any = None) -> Event:
        ev = Event(time, self._seq, target, kind, data)
        self._seq += 1
        heapq.heappush(self._heap, (time, ev.seq, ev))
        return ev

    def peek_time(self) -> int | None:
        heap = self._heap
        while heap and heap[0][2].cancelled:
            heapq.heappop(heap)
        return heap[0][0] if heap else None

    def pop(self) -> Event:
        while True:
            ev = heapq.heappop(self._heap)[2]
            if not ev.cancelled:
                return ev


class Simulator:
    """Single-threaded event loop.

    Handlers are registered per target; each receives the dispatched
    :class:`Event`. ``trace`` (a list) collects one tuple per dispatch.
    """

    def __init__(self, trace: bool = False) -> None:
        self.now = 0
        self.queue = EventQueue()
        self.handlers: dict[Any, Callable[[Event], Any]] = {}
        self.trace: list[tuple[int, int, Any, str, str]] | None = [] if trace else None
        self.trace_notes: dict[int, str] = {}
        self.events_dispatched = 0

    def register(self, target: Any, handler: Callable[[Event], Any]) -> None:
        self.handlers[target] = handler

    def schedule(self, time: int, target: Any, kind: EventKind, data: Any = None) -> Event:
        if time < self.now:
            raise ScheduleError(
                f"cannot schedule {kind.value} for {target!r} at {time} ns; now is {self.now} ns"
            )
        return self.queue.push(time, target, kind, data)

    def note(self, event: Event, text: str) -> None:
        """Attach a free-text detail to the trace line of ``event``."""
        if self.trace is not None:
            self.trace_notes[event.seq] = text

    def run(self, until: int) -> RunSummary:
        """Dispatch every event with ``time < until`` in (time, seq) order."""
        heap = self.queue._heap
        handlers = self.handlers
        trace = self.trace
        pop = heapq.heappop
        dispatched = 0
        pending = False
        while heap:
            t, _, ev = heap[0]
            if ev.cancelled:
                pop(heap)
                continue
            if t >= until:
                pending = True
                break
            pop(heap)
            self.now = t
            try:
                handlers[ev.target](ev)
            except SimulationError:
                raise
            except Exception as exc:
                raise SimulationError(
                    f"fault in {ev.kind.value} handler for node {ev.target!r} "
                    f"at t={ev.time} ns (seq {ev.seq}): {exc}"
                ) from exc
            dispatched += 1
            if trace is not None:
                trace.append(
                    (ev.time, ev.seq, ev.target, ev.kind.value, self.trace_notes.pop(ev.seq, ""))
                )
        if pending:
            self.now = max(self.now, until)
        self.events_dispatched += dispatched
        return RunSummary(events_dispatched=dispatched, end_time=self.now)
