"""Join-semilattice CRDT values.

Five state-based types are provided: :class:`GCounter`, :class:`PNCounter`,
:class:`GSet`, :class:`ORSet` and :class:`LWWRegister`. Values are
immutable; mutators return a new value that dominates the old one.

The module-level :func:`join`, :func:`leq` and :func:`bottom` functions
work on any of them and refuse to mix kinds.
"""

from __future__ import annotations

import json
from typing import Any, Iterable, Mapping

from edgeflow.causality import (
    CausalContext,
    Dot,
    PairContext,
    ReplicaId,
    UnionContext,
    dot_to_data,
)
from edgeflow.elements import check_element, element_from_data, element_key, element_to_data

__all__ = [
    "GCounter",
    "GSet",
    "KINDS",
    "KindMismatchError",
    "LWWRegister",
    "ORSet",
    "PNCounter",
    "apply_mutation",
    "bottom",
    "canonical_bytes",
    "from_data",
    "join",
    "leq",
]


class KindMismatchError(TypeError):
    """Raised when two values of different lattice kinds are combined."""


class Lattice:
    kind: str = ""

    def join(self, other):
        raise NotImplementedError

    def leq(self, other) -> bool:
        _check_same(self, other)
        return self.join(other) == other

    def to_data(self) -> dict:
        raise NotImplementedError

    def encode(self) -> bytes:
        return canonical_bytes(self)


def _check_same(a, b) -> None:
    if type(a) is not type(b):
        raise KindMismatchError(f"cannot combine {type(a).__name__} with {type(b).__name__}")


def _positive(amount: int) -> int:
    if type(amount) is not int or amount < 1:
        raise ValueError(f"amount must be a positive integer, got {amount!r}")
    return amount


class GCounter(Lattice):
    """Grow-only counter: one non-negative count per replica."""

    kind = "gcounter"
    __slots__ = ("entries", "_hash")

    def __init__(self, entries: Mapping[ReplicaId, int] | None = None):
        clean = {}
        for replica, n in sorted((entries or {}).items()):
            if not isinstance(replica, str):
                raise TypeError(f"replica id must be a str, got {replica!r}")
            if type(n) is not int or n < 0:
                raise ValueError(f"counts must be non-negative ints, got {n!r}")
            if n:
                clean[replica] = n
        self.entries = clean
        self._hash = None

    def increment(self, replica: ReplicaId, amount: int = 1) -> GCounter:
        _positive(amount)
        entries = dict(self.entries)
        entries[replica] = entries.get(replica, 0) + amount
        return GCounter(entries)

    def value(self) -> int:
        return sum(self.entries.values())

    def join(self, other: GCounter) -> GCounter:
        _check_same(self, other)
        merged = dict(self.entries)
        for replica, n in other.entries.items():
            if n > merged.get(replica, 0):
                merged[replica] = n
        return GCounter(merged)

    def leq(self, other: GCounter) -> bool:
        _check_same(self, other)
        return all(n <= other.entries.get(r, 0) for r, n in self.entries.items())

    def __eq__(self, other):
        if not isinstance(other, GCounter):
            return NotImplemented
        return self.entries == other.entries

    def __hash__(self):
        if self._hash is None:
            self._hash = hash(("gcounter", tuple(self.entries.items())))
        return self._hash

    def __repr__(self):
        return f"GCounter({self.entries!r})"

    def to_data(self) -> dict:
        return {"kind": self.kind, "entries": [[r, n] for r, n in self.entries.items()]}


class PNCounter(Lattice):
    """Counter supporting decrements, as a pair of grow-only counters."""

    kind = "pncounter"
    __slots__ = ("positive", "negative")

    def __init__(self, positive: GCounter | None = None, negative: GCounter | None = None):
        self.positive = positive if positive is not None else GCounter()
        self.negative = negative if negative is not None else GCounter()

    def increment(self, replica: ReplicaId, amount: int = 1) -> PNCounter:
        return PNCounter(self.positive.increment(replica, amount), self.negative)

    def decrement(self, replica: ReplicaId, amount: int = 1) -> PNCounter:
        return PNCounter(self.positive, self.negative.increment(replica, amount))

    def value(self) -> int:
        return self.positive.value() - self.negative.value()

    def join(self, other: PNCounter) -> PNCounter:
        _check_same(self, other)
        return PNCounter(self.positive.join(other.positive), self.negative.join(other.negative))

    def leq(self, other: PNCounter) -> bool:
        _check_same(self, other)
        return self.positive.leq(other.positive) and self.negative.leq(other.negative)

    def __eq__(self, other):
        if not isinstance(other, PNCounter):
            return NotImplemented
        return self.positive == other.positive and self.negative == other.negative

    def __hash__(self):
        return hash(("pncounter", self.positive, self.negative))

    def __repr__(self):
        return f"PNCounter(P={self.positive.entries!r}, N={self.negative.entries!r})"

    def to_data(self) -> dict:
        return {"kind": self.kind,
                "positive": self.positive.to_data()["entries"],
                "negative": self.negative.to_data()["entries"]}


class GSet(Lattice):
    """Grow-only set of elements."""

    kind = "gset"
    __slots__ = ("_items", "_hash")

    def __init__(self, elements: Iterable = ()):
        self._items = {element_key(check_element(e)): e for e in elements}
        self._hash = None

    def add(self, element) -> GSet:
        check_element(element)
        out = GSet()
        out._items = dict(self._items)
        out._items[element_key(element)] = element
        return out

    def elements(self) -> frozenset:
        return frozenset(self._items.values())

    def distinct(self) -> tuple:
        """Elements in canonical order, deduplicated exactly."""
        return tuple(self._items[k] for k in sorted(self._items))

    def __contains__(self, element) -> bool:
        return element_key(element) in self._items

    def __len__(self):
        return len(self._items)

    def join(self, other: GSet) -> GSet:
        _check_same(self, other)
        out = GSet()
        out._items = {**self._items, **other._items}
        return out

    def leq(self, other: GSet) -> bool:
        _check_same(self, other)
        return self._items.keys() <= other._items.keys()

    def __eq__(self, other):
        if not isinstance(other, GSet):
            return NotImplemented
        return self._items.keys() == other._items.keys()

    def __hash__(self):
        if self._hash is None:
            self._hash = hash(("gset", frozenset(self._items)))
        return self._hash

    def __repr__(self):
        return f"GSet({list(self.distinct())!r})"

    def to_data(self) -> dict:
        return {"kind": self.kind, "elements": [element_to_data(e) for e in self.distinct()]}


class ORSet(Lattice):
    """Add-wins observed-remove set in dotted form.

    ``entries`` maps each live dot to its element; ``context`` records every
    dot this replica has seen. A dot that is in the context but not in the
    entries has been removed, so no tombstones are kept.

    The context is normally a :class:`CausalContext`. Sets produced by
    dataflow operators carry composite dots and a :class:`UnionContext` or
    :class:`PairContext`; those can be joined and queried but not mutated.
    """

    kind = "orset"
    __slots__ = ("entries", "context", "_hash")

    def __init__(self, entries: Mapping | None = None, context=None, *, _trusted: bool = False):
        entries = dict(entries or {})
        if context is None:
            context = CausalContext.from_dots(entries) if entries else CausalContext()
        if not _trusted:
            for dot, element in entries.items():
                check_element(element)
                if not context.contains(dot):
                    raise ValueError(f"entry dot {dot!r} is not covered by the context")
        self.entries = entries
        self.context = context
        self._hash = None

    def add(self, replica: ReplicaId, element) -> ORSet:
        check_element(element)
        if not isinstance(self.context, CausalContext):
            raise TypeError("derived sets cannot be mutated directly")
        dot, context = self.context.next_dot(replica)
        entries = dict(self.entries)
        entries[dot] = element
        return ORSet(entries, context, _trusted=True)

    def remove(self, element) -> ORSet:
        key = element_key(element)
        if not isinstance(self.context, CausalContext):
            raise TypeError("derived sets cannot be mutated directly")
        entries = {d: e for d, e in self.entries.items() if element_key(e) != key}
        if len(entries) == len(self.entries):
            return self
        return ORSet(entries, self.context, _trusted=True)

    def elements(self) -> frozenset:
        return frozenset(self.entries.values())

    def distinct(self) -> tuple:
        """Live elements in canonical order, deduplicated exactly."""
        seen = {element_key(e): e for e in self.entries.values()}
        return tuple(seen[k] for k in sorted(seen))

    def __contains__(self, element) -> bool:
        key = element_key(element)
        return any(element_key(e) == key for e in self.entries.values())

    def join(self, other: ORSet) -> ORSet:
        _check_same(self, other)
        if other is self:
            return self
        mine, theirs = self.entries, other.entries
        mine_ctx, their_ctx = self.context, other.context
        out = {}
        for dot, element in mine.items():
            if dot in theirs:
                alt = theirs[dot]
                if alt is not element and element_key(alt) < element_key(element):
                    element = alt
                out[dot] = element
            elif not their_ctx.contains(dot):
                out[dot] = element
        for dot, element in theirs.items():
            if dot not in mine and not mine_ctx.contains(dot):
                out[dot] = element
        return ORSet(out, mine_ctx.merge(their_ctx), _trusted=True)

    def _signature(self):
        return frozenset((d, element_key(e)) for d, e in self.entries.items())

    def __eq__(self, other):
        if not isinstance(other, ORSet):
            return NotImplemented
        if self is other:
            return True
        return (len(self.entries) == len(other.entries)
                and self.context == other.context
                and self._signature() == other._signature())

    def __hash__(self):
        if self._hash is None:
            self._hash = hash(("orset", self._signature(), self.context))
        return self._hash

    def __repr__(self):
        inner = ", ".join(f"{d!r}->{self.entries[d]!r}" for d in sorted(self.entries))
        return f"ORSet({{{inner}}}, {self.context!r})"

    def to_data(self) -> dict:
        return {"kind": self.kind,
                "entries": [[dot_to_data(d), element_to_data(self.entries[d])]
                            for d in sorted(self.entries)],
                "context": self.context.to_data()}


_NO_VALUE_KEY = (-1,)


class LWWRegister(Lattice):
    """Last-writer-wins register stamped with ``(counter, replica)``.

    Equal stamps are broken by the larger replica id; if even those match
    the larger element (by exact key) wins, which keeps join commutative
    on arbitrary inputs. The bottom register holds ``None`` at counter 0.
    """

    kind = "lww"
    __slots__ = ("value", "counter", "replica")

    def __init__(self, value=None, counter: int = 0, replica: ReplicaId = ""):
        if value is not None:
            check_element(value)
        if type(counter) is not int or counter < 0:
            raise ValueError(f"counter must be an int >= 0, got {counter!r}")
        if value is None and counter:
            raise ValueError("an empty register must have counter 0")
        self.value = value
        self.counter = counter
        self.replica = replica

    @property
    def stamp(self) -> tuple[int, ReplicaId]:
        return (self.counter, self.replica)

    def _order_key(self):
        vkey = _NO_VALUE_KEY if self.value is None else element_key(self.value)
        return (self.counter, self.replica, vkey)

    def assign(self, replica: ReplicaId, value, counter: int | None = None) -> LWWRegister:
        """Write ``value`` with a stamp above the current one."""
        if counter is None:
            counter = self.counter + 1
        elif counter <= self.counter:
            raise ValueError(f"counter {counter} does not advance past {self.counter}")
        return LWWRegister(value, counter, replica)

    def join(self, other: LWWRegister) -> LWWRegister:
        _check_same(self, other)
        return other if other._order_key() > self._order_key() else self

    def leq(self, other: LWWRegister) -> bool:
        _check_same(self, other)
        return self._order_key() <= other._order_key()

    def __eq__(self, other):
        if not isinstance(other, LWWRegister):
            return NotImplemented
        return self._order_key() == other._order_key()

    def __hash__(self):
        return hash(("lww", self._order_key()))

    def __repr__(self):
        return f"LWWRegister({self.value!r}, stamp={self.stamp!r})"

    def to_data(self) -> dict:
        value = None if self.value is None else element_to_data(self.value)
        return {"kind": self.kind, "value": value, "stamp": [self.counter, self.replica]}


KINDS: dict[str, type] = {
    "gcounter": GCounter,
    "pncounter": PNCounter,
    "gset": GSet,
    "orset": ORSet,
    "lww": LWWRegister,
}


def bottom(kind: str) -> Lattice:
    """Least element of ``kind``; the identity for :func:`join`."""
    try:
        return KINDS[kind]()
    except KeyError:
        raise ValueError(f"unknown lattice kind {kind!r}") from None


def join(a: Lattice, b: Lattice) -> Lattice:
    _check_same(a, b)
    return a.join(b)


def leq(a: Lattice, b: Lattice) -> bool:
    _check_same(a, b)
    return a.leq(b)


# op name -> (kinds it applies to, whether it takes an argument)
MUTATIONS = {
    "increment": ("gcounter", "pncounter"),
    "decrement": ("pncounter",),
    "add": ("gset", "orset"),
    "remove": ("orset",),
    "set": ("lww",),
}


def apply_mutation(value: Lattice, replica: ReplicaId, op: str, arg: Any = None) -> Lattice:
    """Apply a named mutator on behalf of ``replica``."""
    kinds = MUTATIONS.get(op)
    if kinds is None:
        raise ValueError(f"unknown mutation {op!r}")
    if value.kind not in kinds:
        raise KindMismatchError(f"mutation {op!r} does not apply to {value.kind}")
    if op == "increment":
        return value.increment(replica, 1 if arg is None else arg)
    if op == "decrement":
        return value.decrement(replica, 1 if arg is None else arg)
    if op == "add":
        return value.add(arg) if value.kind == "gset" else value.add(replica, arg)
    if op == "remove":
        return value.remove(arg)
    return value.assign(replica, arg)


def canonical_bytes(value: Lattice) -> bytes:
    """Deterministic encoding; equal values always give identical bytes."""
    return json.dumps(value.to_data(), separators=(",", ":"), ensure_ascii=True,
                      allow_nan=False).encode("ascii")


def _context_from_data(data):
    if "compact" in data:
        return CausalContext({r: n for r, n in data["compact"]},
                             (Dot(r, s) for r, s in data["cloud"]))
    if "union" in data:
        return UnionContext(_context_from_data(p) for p in data["union"])
    left, right = data["pair"]
    return PairContext(_context_from_data(left), _context_from_data(right))


def _dot_from_data(data, context):
    if isinstance(context, CausalContext):
        return Dot(data[0], data[1])
    if isinstance(context, UnionContext):
        return (data[0], _dot_from_data(data[1], context.parts[data[0]]))
    return (_dot_from_data(data[0], context.left), _dot_from_data(data[1], context.right))


def from_data(data: dict) -> Lattice:
    """Inverse of ``to_data``."""
    kind = data["kind"]
    if kind == "gcounter":
        return GCounter({r: n for r, n in data["entries"]})
    if kind == "pncounter":
        return PNCounter(GCounter({r: n for r, n in data["positive"]}),
                         GCounter({r: n for r, n in data["negative"]}))
    if kind == "gset":
        return GSet(element_from_data(e) for e in data["elements"])
    if kind == "orset":
        context = _context_from_data(data["context"])
        entries = {_dot_from_data(d, context): element_from_data(e) for d, e in data["entries"]}
        return ORSet(entries, context)
    if kind == "lww":
        value = None if data["value"] is None else element_from_data(data["value"])
        counter, replica = data["stamp"]
        return LWWRegister(value, counter, replica)
    raise ValueError(f"unknown lattice kind {kind!r}")
