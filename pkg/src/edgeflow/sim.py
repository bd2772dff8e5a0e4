"""Deterministic round-based epidemic dissemination simulator.

Every node runs the same dataflow graph over its own copy of the input
variables. Each round, scripted local updates are applied, every alive
node pushes its full input state to ``fanout`` random peers, and the
network may drop, duplicate, delay or partition envelopes. A delivered
push triggers a pull reply carrying the receiver's state back.

All randomness comes from one seeded :class:`random.Random`, and ties are
broken by sorting, so a run is reproducible from ``(config, seed)``.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field
from typing import Iterable

from edgeflow.dataflow import DataflowGraph, parse_spec_text
from edgeflow.elements import element_key, element_to_json
from edgeflow.lattice import MUTATIONS, Lattice

_ORACLE_SAFE_OPS = {"add", "increment", "decrement"}


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class Partition:
    """Nodes in ``side`` cannot talk to the rest during ``[start, end)``."""

    start: int
    end: int
    side: frozenset[str]

    def active(self, round_: int) -> bool:
        return self.start <= round_ < self.end

    def separates(self, a: str, b: str) -> bool:
        return (a in self.side) != (b in self.side)


@dataclass(frozen=True)
class NetworkModel:
    drop_prob: float = 0.0
    dup_prob: float = 0.0
    max_delay_rounds: int = 0
    partitions: tuple[Partition, ...] = ()

    def __post_init__(self):
        for name in ("drop_prob", "dup_prob"):
            p = getattr(self, name)
            if not isinstance(p, (int, float)) or not 0.0 <= p <= 1.0:
                raise ConfigError(f"{name} must be within [0, 1], got {p!r}")
        if type(self.max_delay_rounds) is not int or self.max_delay_rounds < 0:
            raise ConfigError(f"max_delay_rounds must be an int >= 0, got {self.max_delay_rounds!r}")
        object.__setattr__(self, "partitions", tuple(self.partitions))
        for part in self.partitions:
            if part.start < 0 or part.end < part.start:
                raise ConfigError(f"malformed partition interval [{part.start}, {part.end})")

    def blocked(self, round_: int, a: str, b: str) -> bool:
        return any(p.active(round_) and p.separates(a, b) for p in self.partitions)


@dataclass(frozen=True)
class ScriptedUpdate:
    round: int
    node: str
    var: str
    op: str
    arg: object = None


@dataclass
class SimConfig:
    nodes: list[str]
    graph: str
    net: NetworkModel = field(default_factory=NetworkModel)
    fanout: int = 1
    seed: int = 0
    updates: list[ScriptedUpdate] = field(default_factory=list)
    watch: tuple[str, ...] = ()

    def validate(self) -> dict:
        """Check the config and return the parsed graph nodes."""
        if not self.nodes:
            raise ConfigError("need at least one node")
        if len(set(self.nodes)) != len(self.nodes):
            raise ConfigError("node names must be unique")
        if type(self.fanout) is not int or self.fanout < 1:
            raise ConfigError(f"fanout must be an int >= 1, got {self.fanout!r}")
        try:
            specs = parse_spec_text(self.graph)
        except ValueError as exc:
            raise ConfigError(f"bad graph spec: {exc}") from None
        names = set(self.nodes)
        for upd in self.updates:
            if upd.node not in names:
                raise ConfigError(f"update scheduled on unknown node {upd.node!r}")
            if upd.var not in specs:
                raise ConfigError(f"update targets unknown variable {upd.var!r}")
            kind = getattr(specs[upd.var], "kind", None)
            if kind is None:
                raise ConfigError(f"update targets derived variable {upd.var!r}")
            if kind not in MUTATIONS.get(upd.op, ()):
                raise ConfigError(f"{upd.op!r} is not a mutation of {kind} variable {upd.var!r}")
            if type(upd.round) is not int or upd.round < 0:
                raise ConfigError(f"update round must be an int >= 0, got {upd.round!r}")
        for part in self.net.partitions:
            unknown = part.side - names
            if unknown:
                raise ConfigError(f"partition names unknown nodes {sorted(unknown)}")
        for var in self.watch:
            if var not in specs:
                raise ConfigError(f"watched variable {var!r} is not in the graph")
            if specs[var].output_kind not in ("orset", "gset"):
                raise ConfigError(f"watched variable {var!r} must be set-valued")
        return specs


@dataclass(frozen=True)
class Envelope:
    seq: int
    src: str
    dst: str
    kind: str  # "push" or "pull"
    sent_at: int
    deliver_at: int
    payload: tuple[tuple[str, Lattice], ...]


@dataclass
class SimNode:
    id: str
    graph: DataflowGraph
    alive: bool = True


@dataclass
class Report:
    converged: bool
    rounds: int
    messages_sent: int
    dropped: int
    duplicated: int
    delivered: int
    stores: dict
    trace: list = field(repr=False, default_factory=list)

    def to_data(self) -> dict:
        return {
            "converged": self.converged,
            "rounds": self.rounds,
            "messages_sent": self.messages_sent,
            "dropped": self.dropped,
            "duplicated": self.duplicated,
            "delivered": self.delivered,
            "stores": self.stores,
        }

    def trace_text(self) -> str:
        return "".join(json.dumps(rec, separators=(",", ":")) + "\n" for rec in self.trace)


def _record(round_: int, node: str | None, event: str, data: dict) -> dict:
    return {"round": round_, "node": node, "event": event, "data": data}


class Simulation:
    """Mutable world state of one simulation run."""

    def __init__(self, config: SimConfig):
        specs = config.validate()
        self.config = config
        self.net = config.net
        self.fanout = config.fanout
        self.rng = random.Random(config.seed)
        self.round = 0
        self.nodes = [SimNode(name, DataflowGraph(name, specs)) for name in config.nodes]
        self._by_id = {n.id: n for n in self.nodes}
        self.in_flight: list[Envelope] = []
        self.delivered_log: list[Envelope] = []
        self.trace: list[dict] = []
        self.messages_sent = 0
        self.dropped = 0
        self.duplicated = 0
        self._seq = 0
        self._script: dict[int, list[ScriptedUpdate]] = {}
        for upd in config.updates:
            self._script.setdefault(upd.round, []).append(upd)
        self._last_update_round = max(self._script, default=-1)
        # per node, per watched var: [(round, distinct elements)]
        self.watch_history: dict[str, dict[str, list[tuple[int, tuple]]]] = {
            n.id: {v: [] for v in config.watch} for n in self.nodes}

    def node(self, node_id: str) -> SimNode:
        return self._by_id[node_id]

    def _emit(self, node: str | None, event: str, data: dict, round_: int | None = None) -> None:
        self.trace.append(_record(self.round if round_ is None else round_, node, event, data))

    def _after_change(self, node: SimNode, round_: int) -> None:
        node.graph.propagate()
        for var, history in self.watch_history[node.id].items():
            value = node.graph.read(var)
            current = value.distinct()
            previous = history[-1][1] if history else ()
            if [element_key(e) for e in current] == [element_key(e) for e in previous]:
                continue
            history.append((round_, current))
            before = {element_key(e) for e in previous}
            added = [e for e in current if element_key(e) not in before]
            if added:
                self._emit(node.id, "alert", {
                    "var": var,
                    "added": [element_to_json(e) for e in added],
                    "elements": [element_to_json(e) for e in current],
                }, round_)

    def _send(self, src: str, dst: str, kind: str, now: int) -> None:
        payload = tuple(self._by_id[src].graph.inputs().items())
        seq = self._seq
        self._seq += 1
        self.messages_sent += 1
        if self.net.blocked(now, src, dst):
            self.dropped += 1
            self._emit(src, "drop", {"dst": dst, "kind": kind, "seq": seq, "reason": "partition"}, now)
            return
        if self.rng.random() < self.net.drop_prob:
            self.dropped += 1
            self._emit(src, "drop", {"dst": dst, "kind": kind, "seq": seq, "reason": "loss"}, now)
            return
        deliver_at = now + self.rng.randint(1, 1 + self.net.max_delay_rounds)
        self.in_flight.append(Envelope(seq, src, dst, kind, now, deliver_at, payload))
        self._emit(src, "send", {"dst": dst, "kind": kind, "seq": seq, "deliver_at": deliver_at}, now)
        if self.rng.random() < self.net.dup_prob:
            copy_seq = self._seq
            self._seq += 1
            self.duplicated += 1
            copy_at = now + self.rng.randint(1, 1 + self.net.max_delay_rounds)
            self.in_flight.append(Envelope(copy_seq, src, dst, kind, now, copy_at, payload))
            self._emit(src, "dup", {"dst": dst, "kind": kind, "seq": seq, "copy_seq": copy_seq,
                                    "deliver_at": copy_at}, now)

    def apply_envelope(self, env: Envelope) -> list[str]:
        """Merge an envelope's payload into its destination; return changed vars."""
        dst = self._by_id[env.dst]
        changed = [var for var, value in env.payload if dst.graph.merge_var(var, value)]
        return changed

    def step(self) -> None:
        now = self.round
        for upd in self._script.get(now, ()):
            node = self._by_id[upd.node]
            if not node.alive:
                self._emit(upd.node, "update", {"var": upd.var, "op": upd.op,
                                                "arg": element_to_json(upd.arg), "skipped": True})
                continue
            node.graph.update(upd.var, upd.op, upd.arg)
            self._emit(upd.node, "update", {"var": upd.var, "op": upd.op, "arg": element_to_json(upd.arg)})
            self._after_change(node, now)

        alive = [n for n in self.nodes if n.alive]
        for node in alive:
            peers = [p.id for p in alive if p.id != node.id]
            for peer in self.rng.sample(peers, min(self.fanout, len(peers))):
                self._send(node.id, peer, "push", now)

        nxt = now + 1
        due = sorted((e for e in self.in_flight if e.deliver_at == nxt),
                     key=lambda e: (e.dst, e.src, e.seq))
        self.in_flight = [e for e in self.in_flight if e.deliver_at != nxt]
        for env in due:
            dst = self._by_id[env.dst]
            if not dst.alive or self.net.blocked(nxt, env.src, env.dst):
                self.dropped += 1
                reason = "partition" if dst.alive else "dead"
                self._emit(env.src, "drop", {"dst": env.dst, "kind": env.kind, "seq": env.seq,
                                             "reason": reason}, nxt)
                continue
            changed = self.apply_envelope(env)
            self.delivered_log.append(env)
            self._emit(env.dst, "deliver", {"src": env.src, "kind": env.kind, "seq": env.seq,
                                            "changed": changed}, nxt)
            if changed:
                self._after_change(dst, nxt)
            if env.kind == "push":
                self._send(env.dst, env.src, "pull", nxt)
        self.round = nxt

    def stores_equal(self, nodes: Iterable[SimNode] | None = None) -> bool:
        group = [n for n in (self.nodes if nodes is None else nodes) if n.alive]
        return all(n.graph.store == group[0].graph.store for n in group[1:])

    def converged(self) -> bool:
        """All alive stores equal and nothing in flight would change them."""
        if not self.stores_equal():
            return False
        for env in self.in_flight:
            dst = self._by_id[env.dst]
            if not dst.alive:
                continue
            for var, value in env.payload:
                if not value.leq(dst.graph.store[var]):
                    return False
        return True

    def pending_updates(self) -> bool:
        return self._last_update_round >= self.round

    def quiescent(self) -> bool:
        return not self.pending_updates() and self.converged()

    def run(self, max_rounds: int) -> Report:
        if type(max_rounds) is not int or max_rounds < 1:
            raise ConfigError(f"max_rounds must be an int >= 1, got {max_rounds!r}")
        while not self.quiescent() and self.round < max_rounds:
            self.step()
        done = self.quiescent()
        if done:
            self._emit(None, "converge", {"rounds": self.round})
        return self.report(done)

    def report(self, converged: bool | None = None) -> Report:
        if converged is None:
            converged = self.quiescent()
        return Report(
            converged=converged,
            rounds=self.round,
            messages_sent=self.messages_sent,
            dropped=self.dropped,
            duplicated=self.duplicated,
            delivered=len(self.delivered_log),
            stores={n.id: n.graph.state_to_data() for n in self.nodes},
            trace=list(self.trace),
        )


def sim_run(config: SimConfig, max_rounds: int) -> Report:
    return Simulation(config).run(max_rounds)


def oracle_inputs(config: SimConfig, nodes: Iterable[str] | None = None) -> dict[str, Lattice]:
    """Join of every scripted update, computed without any network.

    Each owner replays its own updates in script order on a private graph
    and the resulting input stores are joined. This is only equal to the
    delivered outcome for updates whose effect does not depend on remote
    state (adds, increments, decrements), so other ops are rejected.
    ``nodes`` restricts the join to updates owned by those nodes.
    """
    specs = config.validate()
    owners = set(config.nodes if nodes is None else nodes)
    total = DataflowGraph("", specs).inputs()
    for name in config.nodes:
        if name not in owners:
            continue
        graph = DataflowGraph(name, specs)
        for upd in sorted((u for u in config.updates if u.node == name), key=lambda u: u.round):
            if upd.op not in _ORACLE_SAFE_OPS:
                raise ValueError(f"oracle cannot model {upd.op!r}; its effect depends on delivery")
            graph.update(upd.var, upd.op, upd.arg)
        for var, value in graph.inputs().items():
            total[var] = total[var].join(value)
    return total
