import json
from pathlib import Path

import pytest

from edgeflow.cli import main
from edgeflow.scenarios import (
    config_from_dict,
    fridge_sim_config,
    load_config,
    run_scenario,
)
from edgeflow.sim import ConfigError, Simulation

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


def fridge(**overrides):
    base = dict(scenario="fridge", nodes=5, seed=1, drop_prob=0.1, dup_prob=0.05,
                max_delay_rounds=1, fanout=2, max_rounds=40,
                fridge={"threshold_celsius": 8.0, "readings": []})
    base.update(overrides)
    return config_from_dict(**base)


def test_single_node_no_readings():
    result = run_scenario(fridge(nodes=1))
    assert result.ok
    assert result.report["sim"]["converged"] and result.report["sim"]["rounds"] == 0
    assert result.report["fridge"]["alerts"] == {"A": []}


def test_below_threshold_reading_never_alerts():
    result = run_scenario(fridge(fridge={"threshold_celsius": 8.0, "readings": [[0, "A", 4.0]]}))
    assert result.ok
    assert all(alerts == [] for alerts in result.report["fridge"]["alerts"].values())


def test_partitioned_node_alerts_locally_then_everyone_agrees():
    cfg = fridge(partitions=[{"from_round": 2, "to_round": 6, "side": ["C"]}],
                 fridge={"threshold_celsius": 8.0, "readings": [[3, "C", 9.5]]})
    sim = Simulation(fridge_sim_config(cfg))
    while sim.round < 3:
        sim.step()
    sim.step()  # round 3: C reads 9.5
    assert sim.node("C").graph.read("Alerts").elements() == {("C", 9.5)}
    for other in "ABDE":
        assert sim.node(other).graph.read("Alerts").elements() == frozenset()

    result = run_scenario(cfg)
    assert result.ok, result.violations
    report = result.report["fridge"]
    assert report["local_alerts"] == [
        {"round": 3, "node": "C", "temp_celsius": 9.5, "alert_round": 3, "latency": 0}]
    assert all(alerts == [["C", 9.5]] for alerts in report["alerts"].values())
    assert report["convergence_round"] >= 6


def test_reading_on_missing_node_is_rejected():
    with pytest.raises(ConfigError):
        fridge(fridge={"threshold_celsius": 8.0, "readings": [[0, "Z", 9.0]]})


@pytest.mark.parametrize("bad", [
    dict(scenario="nope"),
    dict(drop_prob="high"),
    dict(nodes=0),
    dict(fridge={"readings": []}),
    dict(fridge={"threshold_celsius": float("inf")}),
    dict(fridge={"threshold_celsius": 8.0, "readings": [[99, "A", 9.0]]}),
    dict(partitions=[{"from_round": 0, "side": ["Q"]}]),
])
def test_bad_configs(bad):
    with pytest.raises(ConfigError):
        fridge(**bad)


def test_drop_prob_out_of_range_is_config_error():
    cfg = fridge(drop_prob=1.5)
    with pytest.raises(ConfigError):
        run_scenario(cfg)


def test_sample_configs_load():
    for path in sorted(CONFIGS.glob("*.toml")):
        load_config(str(path))


def test_gossip_scenario_matches_oracle():
    result = run_scenario(load_config(str(CONFIGS / "gossip.toml")))
    assert result.ok
    assert result.report["gossip"]["oracle_match"] is True


def test_report_is_deterministic():
    cfg = load_config(str(CONFIGS / "fridge.toml"))
    a, b = run_scenario(cfg), run_scenario(cfg)
    assert a.report_json() == b.report_json()
    assert a.report_text() == b.report_text()
    assert a.trace == b.trace
    assert run_scenario(cfg, seed=99).trace != a.trace


def test_trace_records_have_stable_field_order():
    result = run_scenario(load_config(str(CONFIGS / "fridge.toml")))
    events = set()
    for line in result.trace.splitlines():
        rec = json.loads(line)
        assert list(rec) == ["round", "node", "event", "data"]
        events.add(rec["event"])
    assert {"update", "send", "drop", "deliver", "alert", "converge"} <= events


def test_cli_run_writes_report_and_trace(tmp_path, monkeypatch, capsys):
    monkeypatch.setenv("EDGEFLOW_OUT_DIR", str(tmp_path))
    code = main(["run", "--config", str(CONFIGS / "fridge.toml"), "--format", "structured"])
    assert code == 0
    report = json.loads((tmp_path / "fridge-seed7.report.json").read_text())
    assert report["fridge"]["local_alerts"][0]["latency"] == 0
    assert (tmp_path / "fridge-seed7.trace.jsonl").read_text().count("\n") > 0
    assert json.loads(capsys.readouterr().out) == report


def test_cli_run_seed_override_and_trace_path(tmp_path):
    trace = tmp_path / "t" / "trace.jsonl"
    code = main(["run", "--config", str(CONFIGS / "fridge.toml"), "--seed", "3",
                 "--trace", str(trace), "--out", str(tmp_path)])
    assert code == 0
    assert trace.exists() and (tmp_path / "fridge-seed3.report.txt").exists()


def test_cli_run_bad_config(tmp_path, capsys):
    bad = tmp_path / "bad.toml"
    bad.write_text('scenario = "fridge"\nnodes = 2\n')
    assert main(["run", "--config", str(bad), "--out", str(tmp_path)]) == 2
    assert "config error" in capsys.readouterr().err
    assert main(["run", "--config", str(tmp_path / "missing.toml"), "--out", str(tmp_path)]) == 2


def test_cli_run_nonconvergence_is_a_violation(tmp_path):
    cfg = tmp_path / "stuck.toml"
    cfg.write_text((CONFIGS / "split_brain.toml").read_text().replace("expect_converged = false", ""))
    assert main(["run", "--config", str(cfg), "--out", str(tmp_path)]) == 1
    assert main(["run", "--config", str(CONFIGS / "split_brain.toml"), "--out", str(tmp_path)]) == 0


def test_cli_usage_errors():
    with pytest.raises(SystemExit) as exc:
        main(["explode"])
    assert exc.value.code == 2
    assert main(["laws", "--iterations", "0"]) == 2
    assert main(["fuzz", "--kinds", "gset"]) == 2


def test_cli_laws_small(capsys):
    assert main(["laws", "--iterations", "50", "--seed", "4"]) == 0
    out = capsys.readouterr().out
    assert "PASS lattice-orset: 50 cases" in out
    assert "FAIL" not in out


def test_cli_fuzz_small(capsys):
    assert main(["fuzz", "--max-ops", "2", "--replicas", "2"]) == 0
    out = capsys.readouterr().out
    assert "interleavings checked" in out
