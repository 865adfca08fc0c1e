"""Free-space propagation and frame delivery over a shared channel."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Iterable

from .kernel import EventKind, Simulator

SPEED_OF_LIGHT = 299_792_458.0

Position = tuple[float, float]


@dataclass(frozen=True)
class PropagationModel:
    attenuation_exponent: float = 2.0
    effective_area_m2: float = 9.87670e-4

    def __post_init__(self) -> None:
        if self.attenuation_exponent <= 0:
            raise ValueError("attenuation exponent must be positive")
        if self.effective_area_m2 <= 0:
            raise ValueError("effective antenna area must be positive")


@dataclass(frozen=True)
class MediumConfig:
    sensitivity_cutoff_dbm: float = -110.0
    propagation_delay: str = "zero"  # "zero" | "light"

    def __post_init__(self) -> None:
        if self.propagation_delay not in ("zero", "light"):
            raise ValueError(f"unknown propagation delay policy {self.propagation_delay!r}")


def attenuation_db(distance: float, model: PropagationModel = PropagationModel()) -> float:
    """Path loss 10*log10(4*pi*d**b / A_eff) in dB."""
    if distance <= 0:
        raise ValueError(f"distance must be positive, got {distance}")
    return 10.0 * math.log10(
        4.0 * math.pi * distance**model.attenuation_exponent / model.effective_area_m2
    )


def received_power_dbm(
    tx_power_dbm: float,
    pos_tx: Position,
    pos_rx: Position,
    model: PropagationModel = PropagationModel(),
) -> float:
    d = math.hypot(pos_rx[0] - pos_tx[0], pos_rx[1] - pos_tx[1])
    if d == 0:
        raise ValueError(f"transmitter and receiver coincide at {pos_tx}")
    return tx_power_dbm - attenuation_db(d, model)


@dataclass
class FrameLogEntry:
    frame_id: int
    sender: int
    start: int
    end: int


@dataclass
class Medium:
    """Connects radios; ``position_of`` maps (node id, time ns) to a position."""

    sim: Simulator
    model: PropagationModel
    config: MediumConfig
    position_of: Callable[[int, int], Position]
    node_ids: list[int] = field(default_factory=list)
    frame_log: list[FrameLogEntry] = field(default_factory=list)
    _power_cache: dict = field(default_factory=dict, repr=False)

    def attach(self, node_ids: Iterable[int]) -> None:
        self.node_ids = sorted(set(self.node_ids) | set(node_ids))

    def broadcast(self, frame, sender_pos: Position | None = None) -> int:
        """Schedule frame-start/frame-end at every receiver above the cutoff.

        Returns the number of receivers the frame was delivered to.
        """
        t0 = frame.start_time
        if sender_pos is None:
            sender_pos = self.position_of(frame.sender, t0)
        self.frame_log.append(
            FrameLogEntry(frame.id, frame.sender, t0, t0 + frame.duration)
        )
        cutoff = self.config.sensitivity_cutoff_dbm
        light = self.config.propagation_delay == "light"
        delivered = 0
        for rx in self.node_ids:
            if rx == frame.sender:
                continue
            pos = self.position_of(rx, t0)
            key = (frame.tx_power_dbm, sender_pos, pos)
            p = self._power_cache.get(key)
            if p is None:
                p = received_power_dbm(frame.tx_power_dbm, sender_pos, pos, self.model)
                if len(self._power_cache) < 100_000:
                    self._power_cache[key] = p
            if p < cutoff:
                continue
            delay = 0
            if light:
                delay = round(math.dist(sender_pos, pos) / SPEED_OF_LIGHT * 1e9)
            self.sim.schedule(t0 + delay, rx, EventKind.FRAME_START, (frame, p))
            self.sim.schedule(t0 + delay + frame.duration, rx, EventKind.FRAME_END, frame)
            delivered += 1
        return delivered
