"""Scenario configuration: ``[section]`` / ``key = value`` files and built-in presets."""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from .energy import COMPONENT_STATES, PLACEHOLDER_POWER_MW, EnergyConfigError, PowerTable
from .kernel import to_ns
from .medium import MediumConfig, PropagationModel
from .mobility import Rectangle, Static, draw_start_offset
from .netapp import FirmwareTask, TdmaSchedule
from .phy import RadioConfig, RadioState, frame_duration_ns

REPRODUCTION_PRESETS = ("static", "mobile")


class ConfigError(ValueError):
    def __init__(self, message: str, section: str | None = None, line: int | None = None):
        where = []
        if section is not None:
            where.append(f"[{section}]")
        if line is not None:
            where.append(f"line {line}")
        super().__init__(f"{' '.join(where)}: {message}" if where else message)
        self.section = section
        self.line = line


@dataclass
class Section:
    name: str
    line: int
    values: dict[str, str] = field(default_factory=dict)
    lines: dict[str, int] = field(default_factory=dict)
    used: set[str] = field(default_factory=set)

    def take(self, key: str, default: Any = None, conv=str) -> Any:
        self.used.add(key)
        if key not in self.values:
            return default
        try:
            return conv(self.values[key])
        except (ValueError, TypeError) as exc:
            raise ConfigError(f"bad value for {key!r}: {exc}", self.name, self.lines[key]) from None

    def error(self, message: str, key: str | None = None) -> ConfigError:
        return ConfigError(message, self.name, self.lines.get(key, self.line))


_SECTION_RE = re.compile(r"^\[([A-Za-z0-9_.\-]+)\]$")


def parse_sections(text: str) -> dict[str, Section]:
    sections: dict[str, Section] = {}
    current: Section | None = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].split(";", 1)[0].strip()
        if not line:
            continue
        m = _SECTION_RE.match(line)
        if m:
            name = m.group(1)
            if name in sections:
                raise ConfigError("duplicate section", name, lineno)
            current = sections[name] = Section(name, lineno)
            continue
        if "=" not in line:
            raise ConfigError(f"expected 'key = value', got {raw.strip()!r}", None, lineno)
        if current is None:
            raise ConfigError("key outside of any section", None, lineno)
        key, value = (part.strip() for part in line.split("=", 1))
        if key in current.values:
            raise ConfigError(f"duplicate key {key!r}", current.name, lineno)
        current.values[key] = value
        current.lines[key] = lineno
    return sections


def _bool(text: str) -> bool:
    low = text.lower()
    if low in ("on", "true", "yes", "1"):
        return True
    if low in ("off", "false", "no", "0"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


@dataclass
class NodeSpec:
    id: int
    role: str
    mobility: Static | Rectangle
    slot: int | None = None
    slot_shift: int = 0
    trigger: str = "tdma"


@dataclass
class ScenarioConfig:
    name: str
    preset: str
    seed: int
    until: int
    playground: tuple[float, float]
    radio: RadioConfig
    propagation: PropagationModel
    medium: MediumConfig
    power: PowerTable
    tdma: TdmaSchedule
    beacon_prep: FirmwareTask
    data_prep: FirmwareTask
    nodes: list[NodeSpec]
    plot_data: bool = True
    effective: dict[str, dict[str, Any]] = field(default_factory=dict)

    @property
    def base(self) -> NodeSpec:
        return next(n for n in self.nodes if n.role == "base")

    @property
    def sensors(self) -> list[NodeSpec]:
        return [n for n in self.nodes if n.role == "sensor"]


def load_config(path: str | Path) -> ScenarioConfig:
    return parse_config(Path(path).read_text())


def parse_config(text: str) -> ScenarioConfig:
    sections = parse_sections(text)
    empty = lambda name: sections.get(name) or Section(name, 0)  # noqa: E731
    eff: dict[str, dict[str, Any]] = {}

    sc = empty("scenario")
    name = sc.take("name", "custom")
    preset = sc.take("preset", "custom")
    seed = sc.take("seed", 1, int)
    if not 0 <= seed < 2**64:
        raise sc.error("seed must be a 64-bit unsigned integer", "seed")
    until_s = sc.take("until_s", "10")
    try:
        until = to_ns(until_s, "s")
    except ValueError as exc:
        raise sc.error(str(exc), "until_s") from None
    pw = sc.take("playground_width_m", 100.0, float)
    ph = sc.take("playground_height_m", 100.0, float)
    eff["scenario"] = dict(
        name=name, preset=preset, seed=seed, until_s=until_s,
        playground_width_m=pw, playground_height_m=ph,
    )

    rs = empty("radio")
    transitions = {}
    for key in list(rs.values):
        if key.startswith("transition_us."):
            parts = key.split(".")
            states = {s.value for s in RadioState}
            if len(parts) != 3 or parts[1] not in states or parts[2] not in states:
                raise rs.error(f"bad transition key {key!r}", key)
            transitions[(parts[1], parts[2])] = to_ns(rs.take(key), "us")
    try:
        radio = RadioConfig(
            tx_power_dbm=rs.take("tx_power_dbm", 1.0, float),
            datarate=rs.take("datarate_baud", 2400.0, float),
            modulation=rs.take("modulation", "fsk2"),
            noise_floor_dbm=rs.take("noise_floor_dbm", -100.0, float),
            rssi_resolution_db=rs.take("rssi_resolution_db", 1.0, float),
            transition_ns=transitions,
        )
    except ValueError as exc:
        raise rs.error(str(exc)) from None
    eff["radio"] = dict(
        tx_power_dbm=radio.tx_power_dbm, datarate_baud=radio.datarate,
        modulation=radio.modulation, noise_floor_dbm=radio.noise_floor_dbm,
        rssi_resolution_db=radio.rssi_resolution_db,
        **{f"transition_us.{a}.{b}": ns / 1000 for (a, b), ns in sorted(transitions.items())},
    )

    ch = empty("channel")
    try:
        propagation = PropagationModel(
            attenuation_exponent=ch.take("attenuation_exponent", 2.0, float),
            effective_area_m2=ch.take("effective_area_cm2", 9.87670, float) * 1e-4,
        )
        medium = MediumConfig(
            sensitivity_cutoff_dbm=ch.take("sensitivity_cutoff_dbm", -110.0, float),
            propagation_delay=ch.take("propagation_delay", "zero"),
        )
    except ValueError as exc:
        raise ch.error(str(exc)) from None
    if medium.sensitivity_cutoff_dbm > radio.noise_floor_dbm:
        raise ch.error("sensitivity cutoff must not exceed the radio noise floor",
                       "sensitivity_cutoff_dbm")
    eff["channel"] = dict(
        attenuation_exponent=propagation.attenuation_exponent,
        effective_area_cm2=propagation.effective_area_m2 * 1e4,
        sensitivity_cutoff_dbm=medium.sensitivity_cutoff_dbm,
        propagation_delay=medium.propagation_delay,
    )

    if "power" not in sections:
        if preset in REPRODUCTION_PRESETS:
            raise ConfigError(
                f"reproduction preset {preset!r} requires a [power] section", "power",
                sc.lines.get("preset", sc.line),
            )
        power_entries = dict(PLACEHOLDER_POWER_MW)
    else:
        pws = sections["power"]
        power_entries = {}
        for key in pws.values:
            comp, _, state = key.partition(".")
            if comp not in COMPONENT_STATES or state not in COMPONENT_STATES[comp]:
                raise pws.error(f"unknown power entry {key!r}", key)
            power_entries[(comp, state)] = pws.take(key, conv=float)
    try:
        power = PowerTable(power_entries)
    except EnergyConfigError as exc:
        raise ConfigError(str(exc), "power", sections["power"].line if "power" in sections else None) from None
    eff["power"] = {f"{c}.{s}": p for (c, s), p in power.items()}
    eff["power"]["placeholder"] = "power" not in sections

    td = empty("tdma")
    try:
        tdma = TdmaSchedule(
            beacon_period=to_ns(td.take("beacon_period_ms", "1000"), "ms"),
            slot_time=to_ns(td.take("slot_time_ms", "60"), "ms"),
            slot_guard=to_ns(td.take("slot_guard_ms", "1"), "ms"),
            beacons=td.take("beacons", True, _bool),
            inter_round_state=td.take("inter_round_state", "idle"),
            wake_guard=to_ns(td.take("wake_guard_ms", "2"), "ms"),
        )
    except ValueError as exc:
        raise td.error(str(exc)) from None
    if tdma.inter_round_state not in ("idle", "sleep"):
        raise td.error("inter_round_state must be idle or sleep", "inter_round_state")
    if tdma.beacon_period <= 0 or tdma.slot_time <= 0:
        raise td.error("beacon period and slot time must be positive")
    eff["tdma"] = dict(
        beacons=tdma.beacons, beacon_period_ms=tdma.beacon_period / 1e6,
        slot_time_ms=tdma.slot_time / 1e6, slot_guard_ms=tdma.slot_guard / 1e6,
        inter_round_state=tdma.inter_round_state, wake_guard_ms=tdma.wake_guard / 1e6,
    )

    fw = empty("firmware")
    try:
        beacon_prep = FirmwareTask("beacon_prep", to_ns(fw.take("beacon_prep_us", "0"), "us"))
        data_prep = FirmwareTask("data_prep", to_ns(fw.take("data_prep_us", "0"), "us"))
    except ValueError as exc:
        raise fw.error(str(exc)) from None
    eff["firmware"] = dict(
        beacon_prep_us=beacon_prep.execution_time / 1000,
        data_prep_us=data_prep.execution_time / 1000,
    )

    out = empty("output")
    plot_data = out.take("plot_data", True, _bool)
    eff["output"] = dict(plot_data=plot_data)

    nodes = _parse_nodes(sections, (pw, ph), eff)
    _check_schedule(nodes, tdma, radio, sections)

    for sec in sections.values():
        unknown = set(sec.values) - sec.used
        if unknown:
            key = sorted(unknown, key=lambda k: sec.lines[k])[0]
            raise sec.error(f"unknown key {key!r}", key)

    return ScenarioConfig(
        name=name, preset=preset, seed=seed, until=until, playground=(pw, ph),
        radio=radio, propagation=propagation, medium=medium, power=power, tdma=tdma,
        beacon_prep=beacon_prep, data_prep=data_prep, nodes=nodes,
        plot_data=plot_data, effective=eff,
    )


def _parse_nodes(sections: dict[str, Section], playground, eff) -> list[NodeSpec]:
    pw, ph = playground
    nodes: list[NodeSpec] = []
    for sec in sections.values():
        kind, _, ident = sec.name.partition(".")
        if kind not in ("node", "mobility"):
            if kind not in ("scenario", "radio", "channel", "power", "tdma", "firmware", "output"):
                raise ConfigError("unknown section", sec.name, sec.line)
            continue
        try:
            node_id = int(ident)
        except ValueError:
            raise ConfigError("section suffix must be an integer node id", sec.name, sec.line) from None
        if not 0 <= node_id <= 255:
            raise ConfigError("node id must fit in one address byte", sec.name, sec.line)
        if kind == "mobility":
            if f"node.{node_id}" not in sections:
                raise ConfigError(f"no [node.{node_id}] for this mobility section", sec.name, sec.line)
            continue
        role = sec.take("role")
        if role not in ("base", "sensor"):
            raise sec.error("role must be base or sensor", "role")
        mobility = _parse_mobility(sec, sections.get(f"mobility.{node_id}"))
        for x, y in mobility.points():
            if not (0 <= x <= pw and 0 <= y <= ph):
                raise sec.error(f"position ({x}, {y}) lies outside the {pw}x{ph} m playground")
        trigger = sec.take("trigger", "waypoint" if isinstance(mobility, Rectangle) else "tdma")
        if trigger not in ("tdma", "waypoint"):
            raise sec.error("trigger must be tdma or waypoint", "trigger")
        if trigger == "waypoint" and not isinstance(mobility, Rectangle):
            raise sec.error("waypoint trigger needs a rectangle mobility section", "trigger")
        try:
            shift = to_ns(sec.take("slot_shift_ms", "0"), "ms")
        except ValueError as exc:
            raise sec.error(str(exc), "slot_shift_ms") from None
        nodes.append(
            NodeSpec(node_id, role, mobility, sec.take("slot", None, int), shift, trigger)
        )
    bases = [n for n in nodes if n.role == "base"]
    if len(bases) != 1:
        raise ConfigError(f"exactly one base station required, found {len(bases)}")

    slot = 0
    used: dict[int, int] = {}
    for n in nodes:
        if n.role != "sensor" or n.trigger != "tdma":
            continue
        slot += 1
        if n.slot is None:
            n.slot = slot
        if n.slot < 1:
            raise ConfigError("slot index must be >= 1", f"node.{n.id}")
        if n.slot in used and n.slot_shift == 0:
            raise ConfigError(f"slot {n.slot} already used by node {used[n.slot]}", f"node.{n.id}")
        used.setdefault(n.slot, n.id)

    statics = [(n.mobility.pos, n.id) for n in nodes if isinstance(n.mobility, Static)]
    seen: dict = {}
    for pos, nid in statics:
        if pos in seen:
            raise ConfigError(f"node {nid} shares position {pos} with node {seen[pos]}", f"node.{nid}")
        seen[pos] = nid

    for n in nodes:
        m = n.mobility
        key = f"node.{n.id}"
        eff[key] = dict(role=n.role, trigger=n.trigger)
        if n.role == "sensor" and n.trigger == "tdma":
            eff[key].update(slot=n.slot, slot_shift_ms=n.slot_shift / 1e6)
        if isinstance(m, Static):
            eff[key].update(x=m.pos[0], y=m.pos[1])
        else:
            eff[f"mobility.{n.id}"] = dict(
                model="rectangle", origin_x=m.origin[0], origin_y=m.origin[1],
                width_m=m.width, height_m=m.height, waypoints=m.waypoint_count,
                speed_mps=m.speed, mode=m.mode, start_offset_m=m.start_offset,
                start_time_s=m.start_time / 1e9,
            )
    return nodes


def _parse_mobility(node: Section, mob: Section | None) -> Static | Rectangle:
    if mob is None:
        x = node.take("x", None, float)
        y = node.take("y", None, float)
        if x is None or y is None:
            raise node.error("static node needs x and y (or a mobility section)")
        return Static((x, y))
    model = mob.take("model", "rectangle")
    if model != "rectangle":
        raise mob.error(f"unsupported mobility model {model!r}", "model")
    node.take("x")
    node.take("y")
    seed = mob.take("start_offset_seed", None, int)
    max_offset = mob.take("start_offset_max_m", 2.0, float)
    offset = draw_start_offset(seed, max_offset) if seed is not None else 0.0
    try:
        return Rectangle(
            origin=(mob.take("origin_x", conv=float), mob.take("origin_y", conv=float)),
            width=mob.take("width_m", conv=float),
            height=mob.take("height_m", conv=float),
            waypoint_count=mob.take("waypoints", 19, int),
            speed=mob.take("speed_mps", 10.0, float),
            mode=mob.take("mode", "discrete"),
            start_offset=offset,
            start_time=to_ns(mob.take("start_time_s", "0"), "s"),
        )
    except (TypeError, ValueError) as exc:
        raise mob.error(f"invalid rectangle: {exc}") from None


def _check_schedule(nodes, tdma: TdmaSchedule, radio: RadioConfig, sections) -> None:
    if not tdma.beacons:
        return
    slots = [n.slot for n in nodes if n.role == "sensor" and n.trigger == "tdma"]
    if not slots:
        return
    beacon_air = frame_duration_ns(15, radio.datarate)
    need = max(slots) * tdma.slot_time + beacon_air
    if need > tdma.beacon_period:
        sec = sections.get("tdma")
        raise ConfigError(
            f"schedule overflow: {max(slots)} slots x {tdma.slot_time / 1e6:g} ms + "
            f"{beacon_air / 1e6:g} ms beacon = {need / 1e6:g} ms exceeds the "
            f"{tdma.beacon_period / 1e6:g} ms beacon period",
            "tdma",
            sec.lines.get("slot_time_ms", sec.line) if sec else None,
        )


_COMMON = """\
[radio]
tx_power_dbm = 1
datarate_baud = 2400
modulation = fsk2
noise_floor_dbm = -100
rssi_resolution_db = 1

[channel]
attenuation_exponent = 2
effective_area_cm2 = 9.87670
sensitivity_cutoff_dbm = -110
propagation_delay = zero

# Placeholder powers in mW. Replace with the modelled hardware's figures.
[power]
radio.sleep = 0.0004
radio.idle = 1.5
radio.rx = 45
radio.tx = 60
cpu.sleep = 0.002
cpu.active = 1.2

[firmware]
beacon_prep_us = 0
data_prep_us = 0
"""

_STATIC_POSITIONS = [
    (25, 25), (50, 25), (75, 25), (25, 50), (75, 50), (25, 75), (50, 75), (75, 75), (10, 10),
]


def preset_text(name: str) -> str:
    """Config file text of a built-in preset (``static`` or ``mobile``)."""
    if name == "static":
        nodes = "".join(
            f"\n[node.{i}]\nrole = sensor\nx = {x}\ny = {y}\n"
            for i, (x, y) in enumerate(_STATIC_POSITIONS, start=1)
        )
        return (
            "# Static RSSI read-out: base station in the centre, nine fixed sensors.\n"
            "[scenario]\nname = static\npreset = static\nseed = 1\nuntil_s = 3600\n"
            "playground_width_m = 100\nplayground_height_m = 100\n\n"
            + _COMMON
            + "\n[tdma]\nbeacons = on\nbeacon_period_ms = 1000\nslot_time_ms = 60\n"
            "slot_guard_ms = 1\ninter_round_state = idle\nwake_guard_ms = 2\n"
            "\n[output]\nplot_data = off\n"
            "\n[node.0]\nrole = base\nx = 50\ny = 50\n" + nodes
        )
    if name == "mobile":
        return (
            "# Mobile RSSI read-out: one sensor walks a rectangle around the base station\n"
            "# and sends one packet at each of its 19 stops.\n"
            "[scenario]\nname = mobile\npreset = mobile\nseed = 1\nuntil_s = 23\n"
            "playground_width_m = 100\nplayground_height_m = 100\n\n"
            + _COMMON
            + "\n[tdma]\nbeacons = off\ninter_round_state = sleep\n"
            "\n[output]\nplot_data = on\n"
            "\n[node.0]\nrole = base\nx = 50\ny = 50\n"
            "\n[node.1]\nrole = sensor\ntrigger = waypoint\n"
            "\n[mobility.1]\nmodel = rectangle\norigin_x = 10\norigin_y = 30\n"
            "width_m = 80\nheight_m = 40\nwaypoints = 19\nspeed_mps = 10\nmode = discrete\n"
            "# start_offset_seed = 7\nstart_offset_max_m = 2\n"
        )
    raise ValueError(f"unknown preset {name!r}")
