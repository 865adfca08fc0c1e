"""Radio PHY: transceiver states, air frames and the SNIR-tracking decider."""

from __future__ import annotations

import bisect
import enum
import itertools
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable

import numpy as np

from .kernel import Event, EventKind, Simulator, bit_offset_ns, bit_time


class RadioError(RuntimeError):
    """Firmware asked the radio for something its state does not allow."""


class RadioState(enum.Enum):
    SLEEP = "sleep"
    IDLE = "idle"
    RX = "rx"
    TX = "tx"


_NEIGHBOURS = {
    RadioState.SLEEP: (RadioState.IDLE,),
    RadioState.IDLE: (RadioState.SLEEP, RadioState.RX, RadioState.TX),
    RadioState.RX: (RadioState.IDLE,),
    RadioState.TX: (RadioState.IDLE,),
}


def transition_path(src: RadioState, dst: RadioState) -> list[RadioState]:
    """States visited going from ``src`` to ``dst`` (excluding ``src``)."""
    if src == dst:
        return []
    if dst in _NEIGHBOURS[src]:
        return [dst]
    path = [RadioState.IDLE]
    if dst != RadioState.IDLE:
        path.append(dst)
    return path


@dataclass(frozen=True)
class RadioConfig:
    tx_power_dbm: float = 1.0
    datarate: float = 2400.0
    modulation: str = "fsk2"
    noise_floor_dbm: float = -100.0
    rssi_resolution_db: float = 1.0
    transition_ns: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.datarate <= 0:
            raise ValueError("datarate must be positive")
        if self.rssi_resolution_db <= 0:
            raise ValueError("RSSI resolution must be positive")
        if self.modulation != "fsk2":
            raise ValueError(f"unsupported modulation {self.modulation!r}")
        for key, d in self.transition_ns.items():
            if d < 0:
                raise ValueError(f"negative transition time for {key}")

    def transition_time(self, a: RadioState, b: RadioState) -> int:
        return self.transition_ns.get((a.value, b.value), 0)


FIELDS = ("preamble", "sync", "header", "payload", "crc")


@dataclass(frozen=True)
class ByteLayout:
    preamble: int = 4
    sync: int = 4
    header: int = 3
    payload: int = 2
    crc: int = 2

    @property
    def sizes(self) -> tuple[int, ...]:
        return (self.preamble, self.sync, self.header, self.payload, self.crc)

    @property
    def total(self) -> int:
        return sum(self.sizes)

    @property
    def cumulative(self) -> tuple[int, ...]:
        return tuple(itertools.accumulate(self.sizes))


def frame_duration_ns(n_bytes: int, datarate: float) -> int:
    return bit_offset_ns(8 * n_bytes, datarate)


@dataclass(eq=False, slots=True)
class AirFrame:
    id: int
    sender: int
    tx_power_dbm: float
    start_time: int
    duration: int
    layout: ByteLayout
    payload: bytes
    datarate: float

    @property
    def end_time(self) -> int:
        return self.start_time + self.duration


def preview_segments(layout: ByteLayout, datarate: float) -> list[int]:
    """End offsets (ns from frame start) of preamble, sync, header, payload, CRC."""
    return [bit_offset_ns(8 * n, datarate) for n in layout.cumulative]


@dataclass(slots=True)
class SnirSegment:
    start: int
    end: int
    snir: float
    interference_mw: float
    noise_mw: float


@dataclass(eq=False, slots=True)
class ReceptionRecord:
    frame: AirFrame
    rx_power_dbm: float
    signal_mw: float
    noise_mw: float
    locked: bool = False
    aborted: bool = False
    segments: list[SnirSegment] = field(default_factory=list)
    bit_errors: dict[str, int] = field(default_factory=dict)
    receiver: int = -1
    _open_start: int = 0
    _open_interference: float = 0.0

    def open(self, at: int, interference_mw: float) -> None:
        self._open_start = at
        self._open_interference = interference_mw

    def boundary(self, at: int, interference_mw: float) -> None:
        """Close the open segment at ``at`` and open a new one."""
        if at > self._open_start:
            self._close(at)
        self._open_start = at
        self._open_interference = interference_mw

    def _close(self, at: int) -> None:
        i = self._open_interference
        self.segments.append(
            SnirSegment(self._open_start, at, self.signal_mw / (self.noise_mw + i), i, self.noise_mw)
        )

    def close(self, at: int) -> None:
        if at > self._open_start:
            self._close(at)
        self._open_start = at

    @property
    def interference_mw(self) -> float:
        return self._open_interference


def dbm_to_mw(dbm: float) -> float:
    return 10.0 ** (dbm / 10.0)


def compute_snir(record: ReceptionRecord, at: int) -> float:
    """Linear SNIR of ``record`` at absolute time ``at``."""
    for seg in record.segments:
        if seg.start <= at < seg.end:
            return seg.snir
    if at >= record._open_start and at < record.frame.end_time:
        return record.signal_mw / (record.noise_mw + record._open_interference)
    raise ValueError(f"t={at} lies outside the frame interval of frame {record.frame.id}")


def ber_for_snir(snir: float, modulation: str = "fsk2") -> float:
    """Bit error probability of non-coherent binary FSK."""
    if modulation != "fsk2":
        raise ValueError(f"unsupported modulation {modulation!r}")
    if snir < 0:
        raise ValueError("SNIR must be non-negative")
    return min(0.5, max(0.0, 0.5 * math.exp(-snir / 2.0)))


@lru_cache(maxsize=64)
def _bit_starts(n_bits: int, datarate: float) -> list[int]:
    q = bit_time(datarate)
    num, den = 2 * q.numerator, 2 * q.denominator
    return [(j * num + q.denominator) // den for j in range(n_bits)]


def draw_bit_errors(record: ReceptionRecord, rng: np.random.Generator) -> dict[str, int]:
    """Sample bit errors per SNIR segment and attribute them to layout fields.

    A bit belongs to the segment containing its start instant on the frame's
    bit-time grid.
    """
    frame = record.frame
    layout = frame.layout
    starts = _bit_starts(8 * layout.total, frame.datarate)
    field_ends = [8 * c for c in layout.cumulative]
    counts = dict.fromkeys(FIELDS, 0)
    t0 = frame.start_time
    for seg in record.segments:
        j0 = bisect.bisect_left(starts, seg.start - t0)
        n = bisect.bisect_left(starts, seg.end - t0) - j0
        p = ber_for_snir(seg.snir)
        if n == 0 or p == 0.0:
            continue
        k = int(rng.binomial(n, p))
        if k == 0:
            continue
        for bit in rng.choice(n, size=k, replace=False):
            counts[FIELDS[bisect.bisect_right(field_ends, j0 + int(bit))]] += 1
    record.bit_errors = counts
    return counts


def quantize_rssi(rx_power_dbm: float, resolution: float = 1.0) -> float:
    """Round to the nearest multiple of ``resolution``, halves away from zero."""
    if resolution <= 0:
        raise ValueError("resolution must be positive")
    steps = math.floor(abs(rx_power_dbm) / resolution + 0.5)
    return math.copysign(steps * resolution, rx_power_dbm) if steps else 0.0


@dataclass
class Outcome:
    record: ReceptionRecord
    decoded: bool
    reason: str = ""  # "not-locked" | "sync-loss" | "crc-fail" | "aborted"
    rssi_dbm: float | None = None


def finalize_reception(
    record: ReceptionRecord, rng: np.random.Generator, resolution: float = 1.0
) -> Outcome:
    if not record.locked:
        return Outcome(record, False, "aborted" if record.aborted else "not-locked")
    errors = draw_bit_errors(record, rng)
    if errors["sync"]:
        return Outcome(record, False, "sync-loss")
    if errors["header"] or errors["payload"] or errors["crc"]:
        return Outcome(record, False, "crc-fail")
    return Outcome(record, True, rssi_dbm=quantize_rssi(record.rx_power_dbm, resolution))


class Radio:
    """Per-node transceiver and decider.

    ``on_state`` is called as (new_state, time) whenever the radio state
    changes; ``on_arrived`` receives decoded :class:`Outcome` objects and
    ``on_transmitted`` the finished :class:`AirFrame`.
    """

    _frame_ids = itertools.count()

    def __init__(
        self,
        node_id: int,
        sim: Simulator,
        config: RadioConfig,
        broadcast: Callable[[AirFrame], int],
        rng: np.random.Generator,
        initial: RadioState = RadioState.IDLE,
        on_state: Callable[[RadioState, int], None] | None = None,
    ) -> None:
        self.node_id = node_id
        self.sim = sim
        self.config = config
        self._broadcast = broadcast
        self.rng = rng
        self.state = initial
        self.on_state = on_state
        self.on_arrived: Callable[[Outcome], None] = lambda outcome: None
        self.on_transmitted: Callable[[AirFrame], None] = lambda frame: None
        self.on_outcome: Callable[[Outcome], None] | None = None
        self.noise_mw = dbm_to_mw(config.noise_floor_dbm)
        self.active: dict[int, ReceptionRecord] = {}
        self.locked: ReceptionRecord | None = None
        self.transmitting: AirFrame | None = None
        self.switching = False
        self.frame_counter: Callable[[], int] = lambda: next(Radio._frame_ids)

    # state machine -------------------------------------------------------

    def _enter(self, state: RadioState) -> None:
        if self.state == RadioState.RX and state != RadioState.RX and self.locked is not None:
            self.locked.locked = False
            self.locked.aborted = True
            self.locked = None
        self.state = state
        if self.on_state is not None:
            self.on_state(state, self.sim.now)

    def set_state(self, target: RadioState, then: Callable[[], None] | None = None) -> None:
        """Walk the state machine to ``target``; ``then`` runs once it is reached."""
        if self.switching:
            raise RadioError(f"node {self.node_id}: state change requested while switching")
        if self.transmitting is not None:
            raise RadioError(f"node {self.node_id}: state change requested while transmitting")
        self._walk(transition_path(self.state, target), then)

    def _walk(self, path: list[RadioState], then: Callable[[], None] | None) -> None:
        while path:
            nxt = path.pop(0)
            d = self.config.transition_time(self.state, nxt)
            self._enter(nxt)
            if d > 0:
                self.switching = True
                self.sim.schedule(self.sim.now + d, self.node_id, EventKind.MODE_SWITCH, (path, then))
                return
        self.switching = False
        if then is not None:
            then()

    def handle_mode_switch(self, event: Event) -> None:
        path, then = event.data
        self.switching = False
        self._walk(path, then)

    # transmission --------------------------------------------------------

    def transmit(self, packet: bytes, then: Callable[[AirFrame], None] | None = None) -> None:
        """Switch to Tx (honouring transition times) and send ``packet``."""
        if self.transmitting is not None:
            raise RadioError(f"node {self.node_id}: transmission already in progress")

        def go() -> None:
            frame = self.start_transmission(packet)
            if then is not None:
                then(frame)

        self.set_state(RadioState.TX, go)

    def start_transmission(self, packet: bytes) -> AirFrame:
        if self.transmitting is not None:
            raise RadioError(f"node {self.node_id}: transmission already in progress")
        if self.state == RadioState.SLEEP:
            raise RadioError(f"node {self.node_id}: cannot transmit while asleep")
        if self.switching:
            raise RadioError(f"node {self.node_id}: cannot transmit while switching state")
        if self.state != RadioState.TX:
            path = transition_path(self.state, RadioState.TX)
            prev = self.state
            for nxt in path:
                if self.config.transition_time(prev, nxt) > 0:
                    raise RadioError(
                        f"node {self.node_id}: {self.state.value}->tx needs a timed transition"
                    )
                prev = nxt
            for nxt in path:
                self._enter(nxt)
        if len(packet) < 5:
            raise RadioError("packet shorter than header + CRC")
        layout = ByteLayout(payload=len(packet) - 5)
        now = self.sim.now
        frame = AirFrame(
            id=self.frame_counter(),
            sender=self.node_id,
            tx_power_dbm=self.config.tx_power_dbm,
            start_time=now,
            duration=frame_duration_ns(layout.total, self.config.datarate),
            layout=layout,
            payload=bytes(packet),
            datarate=self.config.datarate,
        )
        self.transmitting = frame
        self._broadcast(frame)
        self.sim.schedule(now + frame.duration, self.node_id, EventKind.TX_OVER, frame)
        return frame

    def handle_tx_over(self, event: Event) -> None:
        frame = event.data
        self.transmitting = None
        self._enter(RadioState.IDLE)
        self.on_transmitted(frame)

    # reception -----------------------------------------------------------

    def _interference_for(self, record: ReceptionRecord) -> float:
        return math.fsum(r.signal_mw for r in self.active.values() if r is not record)

    def on_frame_start(self, frame: AirFrame, rx_power_dbm: float) -> ReceptionRecord:
        now = self.sim.now
        record = ReceptionRecord(frame, rx_power_dbm, dbm_to_mw(rx_power_dbm), self.noise_mw)
        record.receiver = self.node_id
        record.locked = (
            self.state == RadioState.RX
            and not self.switching
            and self.transmitting is None
            and self.locked is None
        )
        self.active[frame.id] = record
        for other in self.active.values():
            if other is record:
                record.open(now, self._interference_for(record))
            else:
                other.boundary(now, self._interference_for(other))
        if record.locked:
            self.locked = record
        return record

    def on_frame_end(self, frame: AirFrame) -> Outcome:
        now = self.sim.now
        record = self.active.pop(frame.id)
        record.close(now)
        for other in self.active.values():
            other.boundary(now, self._interference_for(other))
        outcome = finalize_reception(record, self.rng, self.config.rssi_resolution_db)
        if self.locked is record:
            self.locked = None
        if self.on_outcome is not None:
            self.on_outcome(outcome)
        if outcome.decoded:
            self.on_arrived(outcome)
        return outcome

    def handle(self, event: Event) -> None:
        kind = event.kind
        if kind is EventKind.FRAME_START:
            self.on_frame_start(*event.data)
        elif kind is EventKind.FRAME_END:
            outcome = self.on_frame_end(event.data)
            if self.sim.trace is not None:
                self.sim.note(event, "decoded" if outcome.decoded else "drop:" + outcome.reason)
        elif kind is EventKind.TX_OVER:
            self.handle_tx_over(event)
        elif kind is EventKind.MODE_SWITCH:
            self.handle_mode_switch(event)
        else:
            raise ValueError(f"radio cannot handle {kind}")
