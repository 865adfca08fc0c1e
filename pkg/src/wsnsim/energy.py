"""State-residency energy accounting per node and component."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .kernel import NS_PER_S

# Placeholder only: the reproduction presets must override every entry.
PLACEHOLDER_POWER_MW: dict[tuple[str, str], float] = {
    ("radio", "sleep"): 0.0004,
    ("radio", "idle"): 1.5,
    ("radio", "rx"): 45.0,
    ("radio", "tx"): 60.0,
    ("cpu", "sleep"): 0.002,
    ("cpu", "active"): 1.2,
}

COMPONENT_STATES: dict[str, tuple[str, ...]] = {
    "radio": ("sleep", "idle", "rx", "tx"),
    "cpu": ("sleep", "active"),
}


class EnergyConfigError(ValueError):
    pass


class PowerTable(dict):
    """Mapping (component, state) -> power in mW."""

    def __init__(self, entries: dict[tuple[str, str], float]) -> None:
        super().__init__(entries)
        for key, p in self.items():
            if p < 0 or not math.isfinite(p):
                raise EnergyConfigError(f"power for {key} must be finite and >= 0, got {p}")
        missing = [
            (c, s) for c, states in COMPONENT_STATES.items() for s in states if (c, s) not in self
        ]
        if missing:
            raise EnergyConfigError(f"power table has no entry for {missing}")


@dataclass
class _Track:
    state: str
    since: int
    residency: dict[str, int] = field(default_factory=dict)


class EnergyLedger:
    """Accumulates integer-nanosecond residency per (node, component, state).

    Energies are derived as P * t on demand, so the per-state totals carry no
    accumulated rounding error.
    """

    def __init__(self, power: PowerTable, record_trace: bool = False) -> None:
        self.power = power
        self._tracks: dict[tuple[int, str], _Track] = {}
        self.trace: list[tuple[int, int, str, str]] | None = [] if record_trace else None

    def start(self, node: int, component: str, state: str, at: int = 0) -> None:
        self._check(component, state)
        self._tracks[(node, component)] = _Track(state, at)
        if self.trace is not None:
            self.trace.append((at, node, component, state))

    def _check(self, component: str, state: str) -> None:
        if (component, state) not in self.power:
            raise EnergyConfigError(f"no power entry for ({component}, {state})")

    def notify_state_change(self, node: int, component: str, new_state: str, at: int) -> None:
        self._check(component, new_state)
        track = self._tracks[(node, component)]
        if at < track.since:
            raise RuntimeError(
                f"time regression on node {node} {component}: {at} < {track.since}"
            )
        track.residency[track.state] = track.residency.get(track.state, 0) + (at - track.since)
        track.state = new_state
        track.since = at
        if self.trace is not None:
            self.trace.append((at, node, component, new_state))

    def current_state(self, node: int, component: str) -> str:
        return self._tracks[(node, component)].state

    def flush(self, horizon: int) -> None:
        for (node, component), track in self._tracks.items():
            if horizon > track.since:
                track.residency[track.state] = track.residency.get(track.state, 0) + (
                    horizon - track.since
                )
                track.since = horizon

    def report(self, horizon: int) -> dict[int, dict]:
        """Flush open intervals to ``horizon`` and return per-node energy in joules.

        ``{node: {"total": J, "breakdown": {(component, state): J}}}``
        """
        self.flush(horizon)
        out: dict[int, dict] = {}
        for (node, component), track in self._tracks.items():
            entry = out.setdefault(node, {"total": 0.0, "breakdown": {}})
            for state in COMPONENT_STATES.get(component, tuple(track.residency)):
                ns = track.residency.get(state, 0)
                entry["breakdown"][(component, state)] = (
                    self.power[(component, state)] * 1e-3 * ns / NS_PER_S
                )
        for entry in out.values():
            entry["total"] = math.fsum(entry["breakdown"].values())
        return dict(sorted(out.items()))
