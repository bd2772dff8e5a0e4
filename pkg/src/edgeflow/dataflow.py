"""Composition of CRDT variables into derived, mergeable views.

The set operators here work on :class:`~edgeflow.lattice.ORSet` values
and keep dot-level provenance in their output: ``map_set`` and
``filter_set`` reuse the input dots, ``union`` namespaces them by input
position, and ``intersection``/``product`` tag each output entry with the
pair of input dots that produced it. Because of that, outputs computed on
different replicas can be joined like any other ORSet.

:class:`DataflowGraph` holds named input variables plus derived variables
and recomputes the derived ones in topological order on ``propagate``.
"""

from __future__ import annotations

import graphlib
import math
import re
from dataclasses import dataclass
from typing import Mapping

from edgeflow import registry
from edgeflow.causality import PairContext, ReplicaId, UnionContext
from edgeflow.elements import element_key, is_number
from edgeflow.lattice import KINDS, KindMismatchError, Lattice, LWWRegister, ORSet, apply_mutation, bottom


class GraphError(ValueError):
    pass


class CycleError(GraphError):
    pass


class UnknownVariableError(GraphError, LookupError):
    pass


def _require_set(value, name: str = "input") -> ORSet:
    if not isinstance(value, ORSet):
        raise KindMismatchError(f"{name} must be an ORSet, got {type(value).__name__}")
    return value


def map_set(s: ORSet, fn_id: str) -> ORSet:
    fn = registry.transform(fn_id)
    _require_set(s)
    return ORSet({d: fn(e) for d, e in s.entries.items()}, s.context, _trusted=True)


def filter_set(s: ORSet, pred_id: str) -> ORSet:
    pred = registry.predicate(pred_id)
    _require_set(s)
    return ORSet({d: e for d, e in s.entries.items() if pred(e)}, s.context, _trusted=True)


def union(a: ORSet, b: ORSet) -> ORSet:
    _require_set(a, "left input")
    _require_set(b, "right input")
    entries = {(0, d): e for d, e in a.entries.items()}
    entries.update({(1, d): e for d, e in b.entries.items()})
    return ORSet(entries, UnionContext((a.context, b.context)), _trusted=True)


def intersection(a: ORSet, b: ORSet) -> ORSet:
    _require_set(a, "left input")
    _require_set(b, "right input")
    by_key: dict[tuple, list] = {}
    for d, e in b.entries.items():
        by_key.setdefault(element_key(e), []).append(d)
    entries = {}
    for da, e in a.entries.items():
        for db in by_key.get(element_key(e), ()):
            entries[(da, db)] = e
    return ORSet(entries, PairContext(a.context, b.context), _trusted=True)


def product(a: ORSet, b: ORSet) -> ORSet:
    _require_set(a, "left input")
    _require_set(b, "right input")
    entries = {(da, db): (ea, eb)
               for da, ea in a.entries.items()
               for db, eb in b.entries.items()}
    return ORSet(entries, PairContext(a.context, b.context), _trusted=True)


def fold(s: ORSet, op: str, stamp: tuple[int, ReplicaId] | None = None) -> LWWRegister:
    """Summarise the distinct live elements of ``s`` into a register.

    ``op`` is ``"fold_count"`` or ``"fold_sum"``. The default stamp is
    ``(number of dots observed by s, "")`` so that replicas with equal
    inputs produce equal registers.
    """
    _require_set(s)
    values = s.distinct()
    if op == "fold_count":
        result = len(values)
    elif op == "fold_sum":
        for v in values:
            if not is_number(v):
                raise TypeError(f"fold_sum needs numeric elements, got {v!r}")
        if all(type(v) is int for v in values):
            result = sum(values)
        else:
            result = math.fsum(values)
    else:
        raise ValueError(f"unknown fold {op!r}")
    counter, replica = stamp if stamp is not None else (s.context.size(), "")
    return LWWRegister(result, counter, replica)


SET_OPS = {"map": 1, "filter": 1, "union": 2, "intersection": 2, "product": 2}
FOLD_OPS = {"fold_sum": 1, "fold_count": 1}
ARITY = {**SET_OPS, **FOLD_OPS}


@dataclass(frozen=True)
class Input:
    kind: str

    def __post_init__(self):
        if self.kind not in KINDS:
            raise GraphError(f"unknown lattice kind {self.kind!r}")

    @property
    def output_kind(self) -> str:
        return self.kind


@dataclass(frozen=True)
class Derived:
    op: str
    inputs: tuple[str, ...]
    arg: str | None = None

    def __post_init__(self):
        object.__setattr__(self, "inputs", tuple(self.inputs))
        if self.op not in ARITY:
            raise GraphError(f"unknown operation {self.op!r}")
        if len(self.inputs) != ARITY[self.op]:
            raise GraphError(f"{self.op} takes {ARITY[self.op]} input(s), got {len(self.inputs)}")
        if self.op in ("map", "filter"):
            if not self.arg:
                raise GraphError(f"{self.op} needs a function id")
            # resolve now so bad ids fail at declaration time
            if self.op == "map":
                registry.transform(self.arg)
            else:
                registry.predicate(self.arg)
        elif self.arg is not None:
            raise GraphError(f"{self.op} takes no function id")

    @property
    def output_kind(self) -> str:
        return "lww" if self.op in FOLD_OPS else "orset"


NodeSpec = Input | Derived


def evaluate(spec: Derived, args: list[Lattice], var: str = "") -> Lattice:
    """Compute a derived node from its input values."""
    op = spec.op
    if op == "map":
        return map_set(args[0], spec.arg)
    if op == "filter":
        return filter_set(args[0], spec.arg)
    if op == "union":
        return union(*args)
    if op == "intersection":
        return intersection(*args)
    if op == "product":
        return product(*args)
    return fold(args[0], op, (args[0].context.size(), var))


_NAME = r"[A-Za-z_][A-Za-z0-9_.\-]*"
_LINE = re.compile(rf"^\s*({_NAME})\s*:=\s*([a-z_]+)\s*(?:\[([^\]\s]+)\])?\s*\(([^)]*)\)\s*$")


def format_spec(var: str, spec: NodeSpec) -> str:
    if isinstance(spec, Input):
        return f"{var} := input({spec.kind})"
    arg = f"[{spec.arg}]" if spec.arg is not None else ""
    return f"{var} := {spec.op}{arg}({', '.join(spec.inputs)})"


def parse_spec_text(text: str) -> dict[str, NodeSpec]:
    """Parse the text produced by :meth:`DataflowGraph.spec_text`.

    Blank lines and ``#`` comments are ignored.
    """
    nodes: dict[str, NodeSpec] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        m = _LINE.match(line)
        if not m:
            raise GraphError(f"line {lineno}: cannot parse {raw!r}")
        var, op, arg, args = m.groups()
        names = [a.strip() for a in args.split(",") if a.strip()]
        if var in nodes:
            raise GraphError(f"line {lineno}: {var!r} declared twice")
        if op == "input":
            if arg is not None or len(names) != 1:
                raise GraphError(f"line {lineno}: input takes exactly one kind")
            nodes[var] = Input(names[0])
        else:
            nodes[var] = Derived(op, tuple(names), arg)
    return nodes


class DataflowGraph:
    """Input variables and derived views owned by one replica.

    A graph is single-owner and mutable. Derived values are materialised
    and only refreshed by :meth:`propagate`.
    """

    def __init__(self, owner: ReplicaId = "", nodes: Mapping[str, NodeSpec] | None = None):
        self.owner = owner
        self.nodes: dict[str, NodeSpec] = {}
        self.store: dict[str, Lattice] = {}
        self._order: list[str] = []
        if nodes:
            self._install(dict(nodes))

    @classmethod
    def from_text(cls, text: str, owner: ReplicaId = "") -> DataflowGraph:
        return cls(owner, parse_spec_text(text))

    def _install(self, nodes: dict[str, NodeSpec]) -> None:
        merged = {**self.nodes, **nodes}
        sorter = graphlib.TopologicalSorter()
        for var in sorted(merged):
            spec = merged[var]
            deps = spec.inputs if isinstance(spec, Derived) else ()
            for dep in deps:
                if dep not in merged:
                    raise UnknownVariableError(f"{var!r} depends on undeclared {dep!r}")
            sorter.add(var, *deps)
        try:
            order = list(sorter.static_order())
        except graphlib.CycleError as exc:
            raise CycleError(f"dependency cycle through {exc.args[1]!r}") from None
        for var in order:
            spec = merged[var]
            if isinstance(spec, Derived):
                for dep in spec.inputs:
                    if merged[dep].output_kind != "orset":
                        raise GraphError(f"{var!r}: input {dep!r} is a {merged[dep].output_kind}, not an orset")
        self.nodes = merged
        self._order = order
        for var in order:
            if var not in self.store:
                self.store[var] = bottom(merged[var].output_kind)
        self.propagate()

    def declare(self, var: str, spec: NodeSpec) -> None:
        if not re.fullmatch(_NAME, var):
            raise GraphError(f"invalid variable name {var!r}")
        if var in self.nodes:
            raise GraphError(f"{var!r} is already declared")
        if isinstance(spec, Derived) and var in spec.inputs:
            raise CycleError(f"{var!r} depends on itself")
        self._install({var: spec})

    def _input(self, var: str) -> Input:
        spec = self.nodes.get(var)
        if spec is None:
            raise UnknownVariableError(f"unknown variable {var!r}")
        if not isinstance(spec, Input):
            raise GraphError(f"{var!r} is derived and cannot be written")
        return spec

    def update(self, var: str, op: str, arg=None) -> Lattice:
        """Apply a mutator to an input variable on behalf of the owner."""
        self._input(var)
        value = apply_mutation(self.store[var], self.owner, op, arg)
        self.store[var] = value
        return value

    def read(self, var: str) -> Lattice:
        try:
            return self.store[var]
        except KeyError:
            raise UnknownVariableError(f"unknown variable {var!r}") from None

    def merge_var(self, var: str, remote: Lattice) -> bool:
        """Join remote state into an input; return whether it changed."""
        self._input(var)
        local = self.store[var]
        if type(remote) is not type(local):
            raise KindMismatchError(f"{var!r} holds {local.kind}, got {type(remote).__name__}")
        merged = local.join(remote)
        if merged == local:
            return False
        self.store[var] = merged
        return True

    def propagate(self) -> list[str]:
        """Recompute every derived variable; return those whose value changed."""
        changed = []
        for var in self._order:
            spec = self.nodes[var]
            if isinstance(spec, Input):
                continue
            value = evaluate(spec, [self.store[d] for d in spec.inputs], var)
            if value != self.store[var]:
                self.store[var] = value
                changed.append(var)
        return changed

    @property
    def order(self) -> list[str]:
        return list(self._order)

    def input_vars(self) -> list[str]:
        return sorted(v for v, s in self.nodes.items() if isinstance(s, Input))

    def derived_vars(self) -> list[str]:
        return sorted(v for v, s in self.nodes.items() if isinstance(s, Derived))

    def inputs(self) -> dict[str, Lattice]:
        return {v: self.store[v] for v in self.input_vars()}

    def copy(self, owner: ReplicaId | None = None) -> DataflowGraph:
        clone = DataflowGraph.__new__(DataflowGraph)
        clone.owner = self.owner if owner is None else owner
        clone.nodes = dict(self.nodes)
        clone.store = dict(self.store)
        clone._order = list(self._order)
        return clone

    def spec_text(self) -> str:
        return "\n".join(format_spec(v, self.nodes[v]) for v in sorted(self.nodes)) + "\n"

    def same_specs(self, other: DataflowGraph) -> bool:
        return self.nodes == other.nodes

    def state_to_data(self) -> dict:
        return {v: self.store[v].to_data() for v in sorted(self.store)}
