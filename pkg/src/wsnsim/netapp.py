"""Packet codec and the TDMA beacon / RSSI read-out firmware."""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Callable

from .energy import EnergyLedger
from .kernel import Event, EventKind, Simulator
from .phy import AirFrame, Outcome, Radio, RadioState


class PacketError(ValueError):
    pass


class PacketType(enum.IntEnum):
    BEACON = 0x00
    DATA = 0x01


def _make_table() -> list[int]:
    table = []
    for byte in range(256):
        crc = byte << 8
        for _ in range(8):
            crc = ((crc << 1) ^ 0x8005) if crc & 0x8000 else (crc << 1)
        table.append(crc & 0xFFFF)
    return table


_CRC_TABLE = _make_table()


def crc16(data: bytes) -> int:
    """CRC-16, polynomial 0x8005, init 0xFFFF, MSB first, no final xor."""
    crc = 0xFFFF
    for b in data:
        crc = ((crc << 8) & 0xFFFF) ^ _CRC_TABLE[(crc >> 8) ^ b]
    return crc


@dataclass(frozen=True)
class Packet:
    address: int
    ptype: PacketType
    payload: bytes = b""


def encode_packet(address: int, ptype: int, payload: bytes = b"") -> bytes:
    """Serialize to length, address, type, payload, CRC (big endian).

    The length byte counts address + type + payload.
    """
    if not 0 <= address <= 0xFF:
        raise PacketError(f"address {address} does not fit in one byte")
    length = 2 + len(payload)
    if length > 0xFF:
        raise PacketError(f"payload of {len(payload)} bytes is too long")
    body = bytes([length, address, int(ptype)]) + bytes(payload)
    return body + crc16(body).to_bytes(2, "big")


def decode_packet(data: bytes) -> Packet:
    if len(data) < 5:
        raise PacketError("packet shorter than header + CRC")
    length = data[0]
    if length + 3 != len(data):
        raise PacketError(f"length byte {length} does not match {len(data)}-byte packet")
    body, crc = data[:-2], int.from_bytes(data[-2:], "big")
    if crc16(body) != crc:
        raise PacketError("CRC mismatch")
    return Packet(data[1], PacketType(data[2]), bytes(data[3:-2]))


@dataclass(frozen=True)
class TdmaSchedule:
    beacon_period: int = 1_000_000_000
    slot_time: int = 60_000_000
    slot_guard: int = 1_000_000
    beacons: bool = True
    inter_round_state: str = "idle"
    wake_guard: int = 2_000_000

    def slot_start(self, beacon_end: int, slot: int, shift: int = 0) -> int:
        return beacon_end + (slot - 1) * self.slot_time + self.slot_guard + shift


@dataclass(frozen=True)
class FirmwareTask:
    name: str
    execution_time: int = 0

    def __post_init__(self) -> None:
        if self.execution_time < 0:
            raise ValueError(f"task {self.name}: negative execution time")


@dataclass
class RssiLogRecord:
    time: int
    base_id: int
    sender_id: int
    rssi_dbm: float
    round: int
    seq: int


class Node:
    """Couples a radio, a CPU energy track and one firmware application."""

    def __init__(self, node_id: int, sim: Simulator, radio: Radio, ledger: EnergyLedger) -> None:
        self.id = node_id
        self.sim = sim
        self.radio = radio
        self.ledger = ledger
        self.app: Firmware | None = None
        self.cpu_busy = False

    def run_task(self, task: FirmwareTask, action: Callable[[], None]) -> None:
        """Execute ``task`` on the CPU and call ``action`` when it completes."""
        if task.execution_time == 0:
            action()
            return
        if self.cpu_busy:
            raise RuntimeError(f"node {self.id}: task {task.name} started while CPU busy")
        self.cpu_busy = True
        self.ledger.notify_state_change(self.id, "cpu", "active", self.sim.now)
        self.sim.schedule(
            self.sim.now + task.execution_time, self.id, EventKind.TASK_DONE, action
        )

    def handle(self, event: Event) -> None:
        kind = event.kind
        if kind is _FRAME_START or kind is _FRAME_END or kind is _TX_OVER or kind is _MODE_SWITCH:
            self.radio.handle(event)
        elif kind is EventKind.TASK_DONE:
            self.cpu_busy = False
            self.ledger.notify_state_change(self.id, "cpu", "sleep", self.sim.now)
            event.data()
        else:
            self.app.handle(event)


_FRAME_START = EventKind.FRAME_START
_FRAME_END = EventKind.FRAME_END
_TX_OVER = EventKind.TX_OVER
_MODE_SWITCH = EventKind.MODE_SWITCH


class Firmware:
    def __init__(self, node: Node) -> None:
        self.node = node
        self.sim = node.sim
        node.app = self
        node.radio.on_arrived = self.on_air_data_arrived
        node.radio.on_transmitted = self.on_air_data_transmitted

    def start(self) -> None:
        pass

    def handle(self, event: Event) -> None:
        raise ValueError(f"{type(self).__name__} cannot handle {event.kind}")

    def on_air_data_arrived(self, outcome: Outcome) -> None:
        pass

    def on_air_data_transmitted(self, frame: AirFrame) -> None:
        pass


class BaseStation(Firmware):
    """Beacons every period, listens through the slot window, logs RSSI."""

    def __init__(
        self,
        node: Node,
        schedule: TdmaSchedule,
        n_slots: int,
        beacon_prep: FirmwareTask = FirmwareTask("beacon_prep"),
    ) -> None:
        super().__init__(node)
        self.schedule = schedule
        self.n_slots = n_slots
        self.beacon_prep = beacon_prep
        self.round = -1
        self.log: list[RssiLogRecord] = []
        self.beacons_sent = 0

    def start(self) -> None:
        if self.schedule.beacons:
            self.sim.schedule(0, self.node.id, EventKind.BEACON_DUE)
        else:
            self.round = 0
            self.node.radio.set_state(RadioState.RX)

    def handle(self, event: Event) -> None:
        if event.kind is EventKind.BEACON_DUE:
            self.round += 1
            self.sim.schedule(
                self.sim.now + self.schedule.beacon_period, self.node.id, EventKind.BEACON_DUE
            )
            self.node.run_task(self.beacon_prep, self._send_beacon)
        elif event.kind is EventKind.SLOT_DUE:
            self._close_window()
        else:
            super().handle(event)

    def _send_beacon(self) -> None:
        radio = self.node.radio
        payload = (self.round & 0xFFFF).to_bytes(2, "big")
        radio.transmit(encode_packet(self.node.id, PacketType.BEACON, payload))

    def _close_window(self) -> None:
        radio = self.node.radio
        if radio.locked is not None:
            # finish the reception in progress, then go idle
            self.sim.schedule(radio.locked.frame.end_time, self.node.id, EventKind.SLOT_DUE)
            return
        if radio.state == RadioState.RX and not radio.switching:
            radio.set_state(RadioState.IDLE)

    def on_air_data_transmitted(self, frame: AirFrame) -> None:
        self.beacons_sent += 1
        self.node.radio.set_state(RadioState.RX)
        window_end = self.sim.now + self.n_slots * self.schedule.slot_time + self.schedule.slot_guard
        self.sim.schedule(window_end, self.node.id, EventKind.SLOT_DUE)

    def on_air_data_arrived(self, outcome: Outcome) -> None:
        pkt = decode_packet(outcome.record.frame.payload)
        if pkt.ptype is not PacketType.DATA:
            return
        self.log.append(
            RssiLogRecord(
                time=self.sim.now,
                base_id=self.node.id,
                sender_id=pkt.address,
                rssi_dbm=outcome.rssi_dbm,
                round=self.round,
                seq=int.from_bytes(pkt.payload[:2], "big") if len(pkt.payload) >= 2 else 0,
            )
        )


class SensorNode(Firmware):
    """Sends one data packet per trigger.

    ``trigger="tdma"``: in its slot after every decoded beacon.
    ``trigger="waypoint"``: at every mobility waypoint arrival; ``hops`` yields
    the arrival times.
    """

    def __init__(
        self,
        node: Node,
        schedule: TdmaSchedule,
        base_id: int,
        slot: int = 1,
        slot_shift: int = 0,
        trigger: str = "tdma",
        hops: Callable[[int], int] | None = None,
        data_prep: FirmwareTask = FirmwareTask("data_prep"),
    ) -> None:
        super().__init__(node)
        if trigger not in ("tdma", "waypoint"):
            raise ValueError(f"unknown trigger {trigger!r}")
        if trigger == "waypoint" and hops is None:
            raise ValueError("waypoint trigger needs a hop schedule")
        self.schedule = schedule
        self.base_id = base_id
        self.slot = slot
        self.slot_shift = slot_shift
        self.trigger = trigger
        self.hops = hops
        self.data_prep = data_prep
        self.seq = 0
        self.sent = 0
        self._last_beacon_start: int | None = None
        self._slot_event: Event | None = None

    @property
    def _rest_state(self) -> RadioState:
        return RadioState(self.schedule.inter_round_state)

    def start(self) -> None:
        radio = self.node.radio
        if self.trigger == "tdma":
            radio.set_state(RadioState.RX)
        else:
            radio.set_state(self._rest_state)
            self.sim.schedule(self.hops(0), self.node.id, EventKind.WAYPOINT_HOP, 0)

    def handle(self, event: Event) -> None:
        kind = event.kind
        if kind is EventKind.SLOT_DUE:
            self._slot_event = None
            self._begin_tx(self.seq)
        elif kind is EventKind.BEACON_DUE:
            if self.node.radio.transmitting is not None:
                raise RuntimeError(f"node {self.node.id}: still transmitting when beacon is due")
            self.node.radio.set_state(RadioState.RX)
        elif kind is EventKind.WAYPOINT_HOP:
            k = event.data
            self.sim.schedule(self.hops(k + 1), self.node.id, EventKind.WAYPOINT_HOP, k + 1)
            self._begin_tx(k)
        else:
            super().handle(event)

    def _begin_tx(self, seq: int) -> None:
        if self.node.radio.transmitting is not None:
            raise RuntimeError(f"node {self.node.id}: slot due while previous frame still on air")
        payload = (seq & 0xFFFF).to_bytes(2, "big")
        packet = encode_packet(self.node.id, PacketType.DATA, payload)
        self.node.run_task(self.data_prep, lambda: self.node.radio.transmit(packet))

    def on_air_data_arrived(self, outcome: Outcome) -> None:
        if self.trigger != "tdma":
            return
        frame = outcome.record.frame
        pkt = decode_packet(frame.payload)
        if pkt.ptype is not PacketType.BEACON or pkt.address != self.base_id:
            return
        self._last_beacon_start = frame.start_time
        self.seq = int.from_bytes(pkt.payload[:2], "big") if len(pkt.payload) >= 2 else self.seq
        start = self.schedule.slot_start(self.sim.now, self.slot, self.slot_shift)
        self._slot_event = self.sim.schedule(start, self.node.id, EventKind.SLOT_DUE)
        self.node.radio.set_state(self._rest_state)

    def on_air_data_transmitted(self, frame: AirFrame) -> None:
        self.sent += 1
        radio = self.node.radio
        radio.set_state(self._rest_state)
        if self.trigger == "tdma" and self._last_beacon_start is not None:
            wake = self._last_beacon_start + self.schedule.beacon_period - self.schedule.wake_guard
            self.sim.schedule(wake, self.node.id, EventKind.BEACON_DUE)
