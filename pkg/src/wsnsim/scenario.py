"""Build a simulation from a :class:`ScenarioConfig`, run it, write its outputs."""

from __future__ import annotations

import itertools
import json
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .config import ScenarioConfig
from .energy import EnergyLedger
from .kernel import NS_PER_S, RunSummary, Simulator
from .medium import Medium
from .mobility import Rectangle
from .netapp import BaseStation, Node, RssiLogRecord, SensorNode
from .phy import Outcome, Radio, RadioState

RNG_ALGORITHM = "numpy Philox4x64-10 seeded by SeedSequence(seed, spawn_key=(node_id,))"


def node_rng(seed: int, node_id: int) -> np.random.Generator:
    """Independent substream for one node, stable under node insertion order."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=(node_id,))))


@dataclass
class RunResult:
    config: ScenarioConfig
    summary: RunSummary
    rssi_log: list[RssiLogRecord]
    energy: dict[int, dict]
    state_trace: list[tuple[int, int, str, str]]
    frames: list
    outcomes: list[Outcome] = field(default_factory=list)
    trace: list | None = None


class Simulation:
    def __init__(self, config: ScenarioConfig, trace: bool = False, keep_outcomes: bool = False):
        self.config = config
        self.sim = Simulator(trace=trace)
        self.ledger = EnergyLedger(config.power, record_trace=True)
        mobility = {n.id: n.mobility for n in config.nodes}
        self.medium = Medium(
            self.sim, config.propagation, config.medium,
            position_of=lambda nid, t: mobility[nid].position_at(t),
        )
        self.medium.attach(mobility)
        self.keep_outcomes = keep_outcomes
        self.outcomes: list[Outcome] = []
        self.outcome_counts: dict[str, int] = {}
        frame_ids = itertools.count()
        self.nodes: dict[int, Node] = {}
        self.apps = {}

        for spec in config.nodes:
            self.ledger.start(spec.id, "radio", RadioState.IDLE.value, 0)
            self.ledger.start(spec.id, "cpu", "sleep", 0)
            radio = Radio(
                spec.id, self.sim, config.radio, self.medium.broadcast,
                node_rng(config.seed, spec.id),
                on_state=self._state_hook(spec.id),
            )
            radio.frame_counter = frame_ids.__next__
            radio.on_outcome = self._count_outcome
            node = Node(spec.id, self.sim, radio, self.ledger)
            self.nodes[spec.id] = node
            self.sim.register(spec.id, node.handle)

        base = config.base
        tdma_slots = [n.slot for n in config.sensors if n.trigger == "tdma"]
        self.base = BaseStation(
            self.nodes[base.id], config.tdma, max(tdma_slots, default=0), config.beacon_prep
        )
        self.apps[base.id] = self.base
        for spec in config.sensors:
            hops = spec.mobility.arrival_time if isinstance(spec.mobility, Rectangle) else None
            self.apps[spec.id] = SensorNode(
                self.nodes[spec.id], config.tdma, base.id,
                slot=spec.slot or 0, slot_shift=spec.slot_shift, trigger=spec.trigger,
                hops=hops, data_prep=config.data_prep,
            )
        for app in self.apps.values():
            app.start()

    def _count_outcome(self, outcome: Outcome) -> None:
        key = "decoded" if outcome.decoded else outcome.reason
        self.outcome_counts[key] = self.outcome_counts.get(key, 0) + 1
        if self.keep_outcomes:
            self.outcomes.append(outcome)

    def _state_hook(self, node_id: int):
        ledger = self.ledger

        def hook(state: RadioState, at: int) -> None:
            ledger.notify_state_change(node_id, "radio", state.value, at)

        return hook

    def run(self) -> RunResult:
        until = self.config.until
        summary = self.sim.run(until)
        summary.frames_sent = len(self.medium.frame_log)
        summary.frames_received = self.outcome_counts.get("decoded", 0)
        summary.frames_dropped = {
            k: v for k, v in sorted(self.outcome_counts.items()) if k != "decoded"
        }
        energy = self.ledger.report(until)
        return RunResult(
            config=self.config,
            summary=summary,
            rssi_log=self.base.log,
            energy=energy,
            state_trace=self.ledger.trace,
            frames=self.medium.frame_log,
            outcomes=self.outcomes,
            trace=self.sim.trace,
        )


def simulate(config: ScenarioConfig, trace: bool = False, keep_outcomes: bool = False) -> RunResult:
    return Simulation(config, trace=trace, keep_outcomes=keep_outcomes).run()


def fmt_time(ns: int) -> str:
    s, rem = divmod(ns, NS_PER_S)
    return f"{s}.{rem // 1000:06d}"


def fmt_rssi(value: float) -> str:
    return str(int(value)) if float(value).is_integer() else repr(value)


def _write(path: Path, rows: list[str]) -> None:
    with open(path, "w", newline="\n") as fh:
        fh.write("\n".join(rows) + "\n")


def write_outputs(result: RunResult, out_dir: Path, trace: bool = False) -> list[Path]:
    cfg = result.config
    files: dict[str, list[str]] = {}
    files["rssi_log.csv"] = ["time_s,base_id,sender_id,rssi_dbm,round,seq"] + [
        f"{fmt_time(r.time)},{r.base_id},{r.sender_id},{fmt_rssi(r.rssi_dbm)},{r.round},{r.seq}"
        for r in result.rssi_log
    ]
    energy_rows = ["node,component,state,energy_mj"]
    for node, entry in result.energy.items():
        for (comp, state), joules in entry["breakdown"].items():
            energy_rows.append(f"{node},{comp},{state},{joules * 1e3:.9f}")
        energy_rows.append(f"{node},total,total,{entry['total'] * 1e3:.9f}")
    files["energy_report.csv"] = energy_rows

    if cfg.plot_data:
        files["energy_timeline.csv"] = ["time_s,node,energy_mj"] + [
            f"{fmt_time(t)},{node},{e * 1e3:.9f}"
            for t, node, e in cumulative_energy(result.state_trace, cfg.power, cfg.until)
        ]
        movers = {n.id: n.mobility for n in cfg.sensors if isinstance(n.mobility, Rectangle)}
        if movers:
            files["rssi_vs_position.csv"] = ["node,position_index,rssi_dbm"] + [
                f"{r.sender_id},{r.seq % movers[r.sender_id].waypoint_count},{fmt_rssi(r.rssi_dbm)}"
                for r in result.rssi_log
                if r.sender_id in movers
            ]

    if trace and result.trace is not None:
        files["events.csv"] = ["time_ns,seq,target,kind,detail"] + [
            f"{t},{seq},{target},{kind},{detail}" for t, seq, target, kind, detail in result.trace
        ]

    s = result.summary
    meta = {
        "version": __version__,
        "seed": cfg.seed,
        "rng": RNG_ALGORITHM,
        "effective_config": cfg.effective,
        "summary": {
            "events_dispatched": s.events_dispatched,
            "end_time_ns": s.end_time,
            "frames_sent": s.frames_sent,
            "frames_received": s.frames_received,
            "frames_dropped": dict(sorted(s.frames_dropped.items())),
        },
    }
    files["run_meta.json"] = [json.dumps(meta, indent=2, sort_keys=True)]

    written = []
    try:
        for name, rows in files.items():
            path = out_dir / name
            _write(path, rows)
            written.append(path)
    except BaseException:
        for path in written:
            path.unlink(missing_ok=True)
        raise
    return written


def cumulative_energy(state_trace, power, horizon: int) -> list[tuple[int, int, float]]:
    """Per-node cumulative energy (J) at every state change, plus the horizon."""
    by_node: dict[int, list] = {}
    for t, node, comp, state in state_trace:
        by_node.setdefault(node, []).append((t, comp, state))
    rows = []
    for node in sorted(by_node):
        current: dict[str, tuple[str, int]] = {}
        total = 0.0
        for t, comp, state in by_node[node] + [(horizon, None, None)]:
            for c, (st, since) in current.items():
                total += power[(c, st)] * 1e-3 * (t - since) / NS_PER_S
                current[c] = (st, t)
            if comp is not None:
                current[comp] = (state, t)
            rows.append((t, node, total))
    rows.sort(key=lambda r: (r[0], r[1]))
    return rows


def check_writable(out_dir: Path) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    probe = out_dir / ".write_probe"
    probe.write_text("")
    probe.unlink()


def run_scenario(config: ScenarioConfig, out_dir: str | os.PathLike, trace: bool = False) -> RunResult:
    """Run ``config`` and write rssi_log.csv, energy_report.csv, run_meta.json and plot data."""
    out = Path(out_dir)
    check_writable(out)
    result = simulate(config, trace=trace)
    write_outputs(result, out, trace=trace)
    return result
