"""End-to-end acceptance criteria; each prints one PASS/FAIL line."""

import contextlib
import math
import time

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from oracles import path_loss_db, perimeter_walk, replay_energy, rssi_oracle

from wsnsim.config import parse_config, preset_text
from wsnsim.kernel import Simulator
from wsnsim.phy import (
    AirFrame,
    ByteLayout,
    Radio,
    RadioConfig,
    RadioState,
    ReceptionRecord,
    SnirSegment,
    ber_for_snir,
    draw_bit_errors,
    frame_duration_ns,
    preview_segments,
)
from wsnsim.scenario import run_scenario, simulate

MS = 1_000_000
OUTPUTS = ("rssi_log.csv", "energy_report.csv", "events.csv")


@pytest.fixture
def criterion(capsys):
    @contextlib.contextmanager
    def check(label):
        try:
            yield
        except BaseException:
            with capsys.disabled():
                print(f"\nFAIL  {label}")
            raise
        with capsys.disabled():
            print(f"\nPASS  {label}")

    return check


def mobile_text(mode="discrete", offset_seed=None):
    text = preset_text("mobile").replace("mode = discrete", f"mode = {mode}")
    if offset_seed is not None:
        text = text.replace("# start_offset_seed = 7", f"start_offset_seed = {offset_seed}")
    return text


def test_ac1_path_loss(criterion):
    with criterion("AC1 path loss 50 m / 1 m"):
        from wsnsim.medium import attenuation_db

        assert abs(attenuation_db(50) - 75.025) <= 1e-3
        assert abs(attenuation_db(1) - 41.046) <= 1e-3
        assert attenuation_db(50) == pytest.approx(float(path_loss_db(50)), abs=1e-9)


def test_ac2_static_exact(criterion):
    with criterion("AC2 static 3600 s, 32400 records exact, < 10 s"):
        cfg = parse_config(preset_text("static"))
        t0 = time.perf_counter()
        res = simulate(cfg)
        elapsed = time.perf_counter() - t0
        pos = {n.id: n.mobility.pos for n in cfg.nodes}
        expected = {s: rssi_oracle(1, pos[s], pos[0]) for s in range(1, 10)}
        assert len(res.rssi_log) == 9 * 3600
        assert all(r.rssi_dbm == expected[r.sender_id] for r in res.rssi_log)
        assert elapsed < 10, f"{elapsed:.2f} s"


def test_ac3_mobile(criterion):
    with criterion("AC3 mobile discrete exact, continuous+offset within 1 dBm, < 5 s"):
        t0 = time.perf_counter()
        discrete = simulate(parse_config(mobile_text()))
        walk = perimeter_walk((10, 30), 80, 40, 19)
        got = [r.rssi_dbm for r in discrete.rssi_log]
        assert got == [rssi_oracle(1, p, (50, 50)) for p in walk]
        for seed in range(1, 9):
            moved = simulate(parse_config(mobile_text("continuous", seed)))
            other = [r.rssi_dbm for r in moved.rssi_log]
            assert len(other) == 19
            assert max(abs(a - b) for a, b in zip(got, other)) <= 1
        assert time.perf_counter() - t0 < 5


def test_ac4_energy_oracle(criterion):
    with criterion("AC4 energy equals state-timeline replay within 1e-9"):
        for text in (preset_text("static"), preset_text("mobile")):
            cfg = parse_config(text)
            res = simulate(cfg)
            oracle = replay_energy(res.state_trace, dict(cfg.power), cfg.until)
            assert set(oracle) == set(res.energy)
            for node, entry in res.energy.items():
                assert entry["total"] == pytest.approx(oracle[node], rel=1e-9)


def test_ac5_frame_timing(criterion):
    with criterion("AC5 15-byte airtime and preview boundaries"):
        assert frame_duration_ns(15, 2400) == 50_000_000
        # bytes (4, 8, 11, 13, 15) at 8/2400 s per byte, rounded half up
        grid = [round_half_up_ns(b) for b in (4, 8, 11, 13, 15)]
        assert preview_segments(ByteLayout(), 2400) == grid


def round_half_up_ns(n_bytes):
    num = n_bytes * 8 * 10**9
    return (2 * num + 2400) // (2 * 2400)


@pytest.mark.parametrize("snir_db", [0, 6, 13])
def test_ac6_ber_statistics(criterion, snir_db):
    with criterion(f"AC6 BER at {snir_db} dB over 1e6 bits within 3 sigma"):
        t0 = time.perf_counter()
        layout = ByteLayout(payload=125_000 - 13)
        n_bits = 8 * layout.total
        assert n_bits == 10**6
        dur = frame_duration_ns(layout.total, 2400.0)
        frame = AirFrame(0, 1, 1.0, 0, dur, layout, b"", 2400.0)
        rec = ReceptionRecord(frame, -70.0, 1.0, 1.0, locked=True)
        snir = 10 ** (snir_db / 10)
        rec.segments = [SnirSegment(0, dur, snir, 0.0, 1.0)]
        errors = sum(draw_bit_errors(rec, np.random.default_rng(2024)).values())
        p = 0.5 * math.exp(-snir / 2)
        assert p == ber_for_snir(snir)
        assert abs(errors - n_bits * p) <= 3 * math.sqrt(n_bits * p * (1 - p))
        assert time.perf_counter() - t0 < 5


def overlaps(frames):
    fs = sorted(frames, key=lambda f: f.start)
    return [(a, b) for a, b in zip(fs, fs[1:]) if a.end > b.start]


def test_ac7_tdma_separation(criterion):
    with criterion("AC7 no overlap in presets; mis-scheduled node collides"):
        static = simulate(parse_config(preset_text("static").replace("until_s = 3600", "until_s = 60")))
        mobile = simulate(parse_config(preset_text("mobile")))
        assert not overlaps(static.frames) and not overlaps(mobile.frames)

        # the rogue sits as far from the base as node 1 and starts 20 ms into slot 1
        rogue = "\n[node.10]\nrole = sensor\nx = 50\ny = 85.3553\nslot = 1\nslot_shift_ms = 20\n"
        text = preset_text("static").replace("until_s = 3600", "until_s = 1") + rogue
        res = simulate(parse_config(text), keep_outcomes=True)
        assert overlaps(res.frames)
        at_base = {o.record.frame.sender: o for o in res.outcomes
                   if o.record.receiver == 0 and o.record.frame.sender != 0}
        # the rogue frame overlaps the tail of slot 1 and the head of slot 2
        assert len(at_base[10].record.segments) >= 3
        assert not at_base[1].decoded and not at_base[10].decoded
        assert {r.sender_id for r in res.rssi_log}.isdisjoint({1, 10})
        assert abs(at_base[1].record.rx_power_dbm - at_base[10].record.rx_power_dbm) < 0.01


def run_pair(tmp_path, text, seeds):
    outs = []
    for i, seed in enumerate(seeds):
        cfg = parse_config(text.replace("seed = 1", f"seed = {seed}"))
        out = tmp_path / f"run{i}"
        run_scenario(cfg, out, trace=True)
        outs.append({name: (out / name).read_bytes() for name in OUTPUTS})
    return outs


def test_ac8_determinism(criterion, tmp_path):
    with criterion("AC8 byte-identical outputs per seed; clean presets seed-independent"):
        static = preset_text("static").replace("until_s = 3600", "until_s = 30")
        for text in (static, preset_text("mobile")):
            a, b = run_pair(tmp_path / "same", text, [1, 1])
            assert a == b
            a, c = run_pair(tmp_path / "diff", text, [1, 99])
            assert a == c


@settings(max_examples=200, deadline=None)
@given(
    st.lists(st.floats(-110, -30), min_size=1, max_size=8),
    st.floats(-110, -30),
    st.booleans(),
)
def test_ac9_interference_conservation(powers, extra, asleep):
    sim = Simulator()
    radio = Radio(1, sim, RadioConfig(), lambda f: None, np.random.default_rng(0),
                  initial=RadioState.SLEEP if asleep else RadioState.RX)
    layout = ByteLayout()
    dur = frame_duration_ns(layout.total, 2400.0)
    records = []
    for i, p in enumerate(powers):
        sim.now = i
        records.append(radio.on_frame_start(AirFrame(i, 9, 1.0, i, dur, layout, b"", 2400.0), p))
    before = [r.interference_mw for r in records]
    sim.now = len(powers)
    k = len(powers)
    radio.on_frame_start(AirFrame(k, 9, 1.0, k, dur, layout, b"", 2400.0), extra)
    sim.now = k + 1
    radio.on_frame_end(AirFrame(k, 9, 1.0, k, 1, layout, b"", 2400.0))
    after = [r.interference_mw for r in records]
    for x, y in zip(before, after):
        assert y == pytest.approx(x, rel=1e-12, abs=0)


def test_ac9_summary(criterion):
    with criterion("AC9 interferer add/remove restores interference within 1e-12"):
        test_ac9_interference_conservation()
