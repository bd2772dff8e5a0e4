"""Scenario configs and runners for the command-line front end.

Configs are TOML files. Shared keys::

    scenario = "fridge"          # or "gossip"
    nodes = 5                    # node names default to A, B, C, ...
    names = ["A", "B", "C"]      # optional, overrides the default names
    seed = 7
    drop_prob = 0.1
    dup_prob = 0.05
    max_delay_rounds = 1
    fanout = 2
    max_rounds = 40
    expect_converged = true      # optional, default true

    [[partitions]]               # zero or more
    from_round = 2
    to_round = 6                 # optional; omitted means never healed
    side = ["C"]

The ``[fridge]`` table holds ``threshold_celsius`` and ``readings``, a
list of ``[round, node, temp_celsius]``. The ``[gossip]`` table holds an
optional ``graph`` spec, explicit ``updates`` as
``[round, node, var, op, arg]`` and ``random_updates`` / ``random_until_round``
to generate more updates from the seed.
"""

from __future__ import annotations

import dataclasses
import json
import math
import random
import string
import sys
from dataclasses import dataclass, field
from typing import Any

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from edgeflow.dataflow import filter_set
from edgeflow.elements import element_key, element_to_json
from edgeflow.sim import (
    ConfigError,
    NetworkModel,
    Partition,
    ScriptedUpdate,
    SimConfig,
    Simulation,
    oracle_inputs,
)

NEVER = 2**62

GOSSIP_GRAPH = """\
S := input(orset)
C := input(gcounter)
P := input(pncounter)
G := input(gset)
Big := filter[gt:5](S)
Double := map[scale:2](S)
Total := fold_sum(S)
"""


@dataclass
class ScenarioConfig:
    scenario: str
    nodes: list[str]
    seed: int = 0
    drop_prob: float = 0.0
    dup_prob: float = 0.0
    max_delay_rounds: int = 0
    fanout: int = 1
    max_rounds: int = 50
    partitions: list[Partition] = field(default_factory=list)
    expect_converged: bool = True
    # fridge
    threshold_celsius: float = 8.0
    readings: list[tuple[int, str, float]] = field(default_factory=list)
    # gossip
    graph: str = GOSSIP_GRAPH
    updates: list[ScriptedUpdate] = field(default_factory=list)
    random_updates: int = 0
    random_until_round: int = 10

    def network(self) -> NetworkModel:
        return NetworkModel(self.drop_prob, self.dup_prob, self.max_delay_rounds, tuple(self.partitions))


def default_names(count: int) -> list[str]:
    if count <= 26:
        return list(string.ascii_uppercase[:count])
    return [f"n{i:03d}" for i in range(count)]


def _get(table: dict, key: str, kind, default=None):
    value = table.get(key, default)
    if value is None:
        raise ConfigError(f"missing required key {key!r}")
    if kind is float and type(value) is int:
        value = float(value)
    if kind is int and type(value) is bool or not isinstance(value, kind):
        raise ConfigError(f"{key!r} must be {kind.__name__}, got {value!r}")
    return value


def parse_config(data: dict) -> ScenarioConfig:
    scenario = _get(data, "scenario", str)
    if scenario not in RUNNERS:
        raise ConfigError(f"unknown scenario {scenario!r}; expected one of {sorted(RUNNERS)}")
    if "names" in data:
        names = data["names"]
        if not isinstance(names, list) or not all(isinstance(n, str) and n for n in names):
            raise ConfigError("names must be a list of non-empty strings")
        if "nodes" in data and data["nodes"] != len(names):
            raise ConfigError("nodes does not match the length of names")
    else:
        count = _get(data, "nodes", int)
        if count < 1:
            raise ConfigError("nodes must be >= 1")
        names = default_names(count)
    cfg = ScenarioConfig(
        scenario=scenario,
        nodes=names,
        seed=_get(data, "seed", int, 0),
        drop_prob=_get(data, "drop_prob", float, 0.0),
        dup_prob=_get(data, "dup_prob", float, 0.0),
        max_delay_rounds=_get(data, "max_delay_rounds", int, 0),
        fanout=_get(data, "fanout", int, 1),
        max_rounds=_get(data, "max_rounds", int, 50),
        expect_converged=_get(data, "expect_converged", bool, True),
    )
    if cfg.max_rounds < 1:
        raise ConfigError("max_rounds must be >= 1")
    for part in data.get("partitions", []):
        start = _get(part, "from_round", int)
        end = part.get("to_round", NEVER)
        side = part.get("side")
        if type(end) is not int or not isinstance(side, list):
            raise ConfigError(f"malformed partition {part!r}")
        cfg.partitions.append(Partition(start, end, frozenset(side)))
    if scenario == "fridge":
        table = data.get("fridge")
        if not isinstance(table, dict):
            raise ConfigError("fridge scenario needs a [fridge] table")
        cfg.threshold_celsius = _get(table, "threshold_celsius", float)
        if not math.isfinite(cfg.threshold_celsius):
            raise ConfigError("threshold_celsius must be finite")
        for row in table.get("readings", []):
            if (not isinstance(row, list) or len(row) != 3 or type(row[0]) is not int
                    or not isinstance(row[1], str) or type(row[2]) not in (int, float)):
                raise ConfigError(f"reading must be [round, node, temp], got {row!r}")
            cfg.readings.append((row[0], row[1], float(row[2])))
    else:
        table = data.get("gossip", {})
        cfg.graph = table.get("graph", GOSSIP_GRAPH)
        for row in table.get("updates", []):
            if not isinstance(row, list) or len(row) not in (4, 5):
                raise ConfigError(f"update must be [round, node, var, op, arg], got {row!r}")
            arg = row[4] if len(row) == 5 else None
            if isinstance(arg, list):
                arg = tuple(arg)
            cfg.updates.append(ScriptedUpdate(row[0], row[1], row[2], row[3], arg))
        cfg.random_updates = _get(table, "random_updates", int, 0)
        cfg.random_until_round = _get(table, "random_until_round", int, 10)
    _check_references(cfg)
    return cfg


def _check_references(cfg: ScenarioConfig) -> None:
    names = set(cfg.nodes)
    rounds = [r for r, _, _ in cfg.readings] + [u.round for u in cfg.updates]
    owners = [n for _, n, _ in cfg.readings] + [u.node for u in cfg.updates]
    for node in owners:
        if node not in names:
            raise ConfigError(f"reading or update scheduled on nonexistent node {node!r}")
    for r in rounds:
        if not 0 <= r <= cfg.max_rounds:
            raise ConfigError(f"round {r} outside [0, {cfg.max_rounds}]")
    if cfg.random_updates and not 0 < cfg.random_until_round <= cfg.max_rounds:
        raise ConfigError("random_until_round must be within (0, max_rounds]")
    for part in cfg.partitions:
        if part.side - names:
            raise ConfigError(f"partition names unknown nodes {sorted(part.side - names)}")


def load_config(path: str) -> ScenarioConfig:
    try:
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path!r}: {exc.strerror}") from None
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    return parse_config(data)


@dataclass
class ScenarioResult:
    name: str
    report: dict
    trace: str
    violations: list[str]

    @property
    def ok(self) -> bool:
        return not self.violations

    def report_json(self) -> str:
        return json.dumps(self.report, indent=2, ensure_ascii=True) + "\n"

    def report_text(self) -> str:
        lines = [f"scenario: {self.name}"]
        sim = self.report["sim"]
        lines.append(f"converged: {sim['converged']} after {sim['rounds']} rounds")
        lines.append(f"messages: sent={sim['messages_sent']} dropped={sim['dropped']} "
                     f"duplicated={sim['duplicated']} delivered={sim['delivered']}")
        fridge = self.report.get("fridge")
        if fridge is not None:
            lines.append(f"threshold: {fridge['threshold_celsius']}")
            for node, alerts in fridge["alerts"].items():
                lines.append(f"alerts[{node}]: {json.dumps(alerts)}")
            for item in fridge["local_alerts"]:
                lines.append(f"local alert: node={item['node']} temp={item['temp_celsius']} "
                             f"round={item['round']} latency={item['latency']}")
            lines.append(f"alert convergence round: {fridge['convergence_round']}")
        gossip = self.report.get("gossip")
        if gossip is not None:
            lines.append(f"updates: {gossip['updates']} oracle_match: {gossip['oracle_match']}")
        lines.extend(f"VIOLATION: {v}" for v in self.violations)
        return "\n".join(lines) + "\n"


def random_updates(seed: int, nodes: list[str], count: int, until_round: int) -> list[ScriptedUpdate]:
    """Delivery-independent updates for the default gossip graph."""
    rng = random.Random(f"updates:{seed}")
    out = []
    for _ in range(count):
        r, node = rng.randrange(until_round), rng.choice(nodes)
        var = rng.choice("SCPG")
        if var == "S":
            out.append(ScriptedUpdate(r, node, "S", "add", rng.randrange(10)))
        elif var == "C":
            out.append(ScriptedUpdate(r, node, "C", "increment", rng.randint(1, 3)))
        elif var == "P":
            out.append(ScriptedUpdate(r, node, "P", rng.choice(("increment", "decrement")), 1))
        else:
            out.append(ScriptedUpdate(r, node, "G", "add", rng.choice("abcdef")))
    return sorted(out, key=lambda u: u.round)


def gossip_sim_config(cfg: ScenarioConfig) -> SimConfig:
    updates = list(cfg.updates)
    if cfg.random_updates:
        updates += random_updates(cfg.seed, cfg.nodes, cfg.random_updates, cfg.random_until_round)
    updates.sort(key=lambda u: u.round)
    return SimConfig(cfg.nodes, cfg.graph, cfg.network(), cfg.fanout, cfg.seed, updates)


def run_gossip(cfg: ScenarioConfig) -> ScenarioResult:
    sim_cfg = gossip_sim_config(cfg)
    sim = Simulation(sim_cfg)
    report = sim.run(cfg.max_rounds)
    violations = []
    try:
        oracle = oracle_inputs(sim_cfg)
    except ValueError:
        oracle = None
    oracle_match = None
    if report.converged and oracle is not None and not cfg.partitions:
        oracle_match = all(n.graph.inputs() == oracle for n in sim.nodes)
        if not oracle_match:
            violations.append("converged stores differ from the oracle join of all updates")
    if cfg.expect_converged and not report.converged:
        violations.append(f"did not converge within {cfg.max_rounds} rounds")
    data = {
        "scenario": "gossip",
        "seed": cfg.seed,
        "sim": report.to_data(),
        "gossip": {"updates": len(sim_cfg.updates), "oracle_match": oracle_match},
    }
    return ScenarioResult(f"gossip-seed{cfg.seed}", data, report.trace_text(), violations)


def fridge_graph(threshold: float) -> str:
    return f"Readings := input(orset)\nAlerts := filter[second_gt:{threshold!r}](Readings)\n"


def fridge_sim_config(cfg: ScenarioConfig) -> SimConfig:
    updates = [ScriptedUpdate(r, node, "Readings", "add", (node, temp))
               for r, node, temp in sorted(cfg.readings, key=lambda row: row[0])]
    return SimConfig(cfg.nodes, fridge_graph(cfg.threshold_celsius), cfg.network(),
                     cfg.fanout, cfg.seed, updates, watch=("Alerts",))


def _alerts_at(history: list[tuple[int, tuple]], round_: int) -> tuple:
    current: tuple = ()
    for r, elements in history:
        if r > round_:
            break
        current = elements
    return current


def _keys(elements) -> list:
    return [element_key(e) for e in elements]


def run_fridge(cfg: ScenarioConfig) -> ScenarioResult:
    sim_cfg = fridge_sim_config(cfg)
    sim = Simulation(sim_cfg)
    report = sim.run(cfg.max_rounds)
    final_round = sim.round
    histories = {n.id: sim.watch_history[n.id]["Alerts"] for n in sim.nodes}
    violations = []

    local = []
    for r, node, temp in sorted(cfg.readings, key=lambda row: row[0]):
        if not temp > cfg.threshold_celsius:
            continue
        element = (node, temp)
        alert_round = next((x for x in range(r, final_round + 1)
                            if element_key(element) in _keys(_alerts_at(histories[node], x))), None)
        latency = None if alert_round is None else alert_round - r
        if latency != 0:
            violations.append(f"reading {temp} at {node} round {r} alerted with latency {latency}")
        local.append({"round": r, "node": node, "temp_celsius": temp,
                      "alert_round": alert_round, "latency": latency})

    # readings are adds, so the oracle join is delivery-independent
    oracle = filter_set(oracle_inputs(sim_cfg)["Readings"], f"second_gt:{cfg.threshold_celsius!r}")
    oracle_keys = _keys(oracle.distinct())
    convergence_round = None
    for start in range(final_round + 1):
        if all(_keys(_alerts_at(histories[n], x)) == oracle_keys
               for x in range(start, final_round + 1) for n in histories):
            convergence_round = start
            break

    alerts = {n.id: [element_to_json(e) for e in n.graph.read("Alerts").distinct()] for n in sim.nodes}
    violations.extend(check_fridge_consistency(sim, cfg.threshold_celsius))
    if cfg.expect_converged:
        if not report.converged:
            violations.append(f"did not converge within {cfg.max_rounds} rounds")
        elif convergence_round is None:
            violations.append("converged alert sets differ from the oracle")

    data = {
        "scenario": "fridge",
        "seed": cfg.seed,
        "sim": report.to_data(),
        "fridge": {
            "threshold_celsius": cfg.threshold_celsius,
            "alerts": alerts,
            "oracle_alerts": [element_to_json(e) for e in oracle.distinct()],
            "alert_history": {node: [[r, [element_to_json(e) for e in els]] for r, els in hist]
                              for node, hist in histories.items()},
            "local_alerts": local,
            "convergence_round": convergence_round,
        },
    }
    return ScenarioResult(f"fridge-seed{cfg.seed}", data, report.trace_text(), violations)


def check_fridge_consistency(sim: Simulation, threshold: float) -> list[str]:
    """Every final alert is backed by a trace event and by the node's readings."""
    problems = []
    traced: dict[str, set] = {}
    for rec in sim.trace:
        if rec["event"] == "alert":
            traced.setdefault(rec["node"], set()).update(json.dumps(e) for e in rec["data"]["added"])
    for node in sim.nodes:
        readings = node.graph.read("Readings")
        expected = filter_set(readings, f"second_gt:{threshold!r}")
        alerts = node.graph.read("Alerts")
        if alerts != expected:
            problems.append(f"{node.id}: Alerts differ from filter(Readings)")
        for e in alerts.distinct():
            if not (type(e) is tuple and e[1] > threshold and e in readings):
                problems.append(f"{node.id}: alert {e!r} not backed by an over-threshold reading")
            if json.dumps(element_to_json(e)) not in traced.get(node.id, set()):
                problems.append(f"{node.id}: alert {e!r} has no alert event in the trace")
    return problems


RUNNERS = {"fridge": run_fridge, "gossip": run_gossip}


def run_scenario(cfg: ScenarioConfig, seed: int | None = None) -> ScenarioResult:
    if seed is not None:
        cfg = dataclasses.replace(cfg, seed=seed)
    return RUNNERS[cfg.scenario](cfg)


def config_from_dict(**kwargs: Any) -> ScenarioConfig:
    """Build a config from keyword arguments using the TOML key names."""
    return parse_config(kwargs)
