import csv
import json
import sys

import pytest
from oracles import rssi_oracle

from wsnsim.cli import main
from wsnsim.config import parse_config, preset_text
from wsnsim.scenario import fmt_rssi, fmt_time, node_rng, run_scenario


def write_preset(tmp_path, name, until):
    text = preset_text(name)
    text = text.replace("until_s = 3600", f"until_s = {until}").replace("until_s = 23", f"until_s = {until}")
    path = tmp_path / f"{name}.ini"
    path.write_text(text)
    return path


def read_csv(path):
    with open(path) as fh:
        return list(csv.DictReader(fh))


def test_formatting():
    assert fmt_time(1_234_567_891) == "1.234567"
    assert fmt_rssi(-74.0) == "-74"


def test_node_rng_streams_are_independent():
    a, b = node_rng(1, 1).random(4), node_rng(1, 2).random(4)
    assert (a != b).all()
    assert (node_rng(1, 1).random(4) == a).all()


def test_static_run_outputs(tmp_path):
    cfg = write_preset(tmp_path, "static", 3)
    out = tmp_path / "out"
    assert main(["--config", str(cfg), "--out", str(out)]) == 0
    assert sorted(p.name for p in out.iterdir()) == ["energy_report.csv", "rssi_log.csv", "run_meta.json"]
    rows = read_csv(out / "rssi_log.csv")
    assert len(rows) == 27
    positions = {n.id: n.mobility.pos for n in parse_config(cfg.read_text()).nodes}
    for r in rows:
        sender = int(r["sender_id"])
        assert int(r["rssi_dbm"]) == rssi_oracle(1, positions[sender], positions[0])
    meta = json.loads((out / "run_meta.json").read_text())
    assert meta["seed"] == 1 and "Philox" in meta["rng"]
    assert meta["effective_config"]["scenario"]["until_s"] in ("3", 3, 3.0)
    energy = read_csv(out / "energy_report.csv")
    assert {e["node"] for e in energy} == {str(i) for i in range(10)}


def test_mobile_run_writes_plot_data(tmp_path):
    cfg = write_preset(tmp_path, "mobile", 23)
    out = tmp_path / "out"
    assert main(["--config", str(cfg), "--out", str(out)]) == 0
    pos = read_csv(out / "rssi_vs_position.csv")
    assert [int(r["position_index"]) for r in pos] == list(range(19))
    timeline = read_csv(out / "energy_timeline.csv")
    last = {}
    for r in timeline:
        last[r["node"]] = float(r["energy_mj"])
    report = {r["node"]: float(r["energy_mj"]) for r in read_csv(out / "energy_report.csv")
              if r["component"] == "total"}
    for node, e in report.items():
        assert last[node] == pytest.approx(e, rel=1e-9)


def test_trace_and_until_override(tmp_path):
    cfg = write_preset(tmp_path, "static", 3600)
    out = tmp_path / "out"
    assert main(["--config", str(cfg), "--out", str(out), "--until", "2", "--trace"]) == 0
    assert len(read_csv(out / "rssi_log.csv")) == 18
    events = read_csv(out / "events.csv")
    assert events and int(events[-1]["time_ns"]) < 2_000_000_000


def test_multiple_seeds(tmp_path):
    cfg = write_preset(tmp_path, "static", 2)
    out = tmp_path / "out"
    assert main(["--config", str(cfg), "--out", str(out), "--seed", "3", "--seed", "4", "-j", "2"]) == 0
    a = (out / "seed_3" / "rssi_log.csv").read_text()
    b = (out / "seed_4" / "rssi_log.csv").read_text()
    assert a == b  # clean channel: the seed does not change the readings
    assert json.loads((out / "seed_4" / "run_meta.json").read_text())["seed"] == 4


def test_preset_flag(tmp_path, capsys):
    assert main(["--preset", "mobile"]) == 0
    assert "[mobility.1]" in capsys.readouterr().out
    path = tmp_path / "s.ini"
    assert main(["--preset", "static", "--config", str(path)]) == 0
    assert path.read_text() == preset_text("static")


def test_config_error_exit_code(tmp_path):
    bad = tmp_path / "bad.ini"
    bad.write_text(preset_text("static").replace("slot_time_ms = 60", "slot_time_ms = 120"))
    assert main(["--config", str(bad), "--out", str(tmp_path / "o")]) == 1
    assert main(["--config", str(tmp_path / "missing.ini")]) == 1
    assert main([]) == 1


@pytest.mark.skipif(sys.platform == "win32", reason="posix permissions")
def test_unwritable_output_exit_code(tmp_path):
    cfg = write_preset(tmp_path, "static", 1)
    blocker = tmp_path / "file"
    blocker.write_text("")
    assert main(["--config", str(cfg), "--out", str(blocker / "sub")]) == 2


def test_runtime_fault_exit_code(tmp_path, monkeypatch):
    from wsnsim import cli
    from wsnsim.kernel import SimulationError

    def boom(*a, **k):
        raise SimulationError("injected")

    monkeypatch.setattr(cli, "run_scenario", boom)
    cfg = write_preset(tmp_path, "static", 1)
    assert main(["--config", str(cfg), "--out", str(tmp_path / "o")]) == 2


def test_run_scenario_returns_result(tmp_path):
    cfg = parse_config(preset_text("mobile"))
    res = run_scenario(cfg, tmp_path / "o")
    assert len(res.rssi_log) == 19
    assert res.summary.frames_sent == 19
