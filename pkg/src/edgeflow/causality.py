"""Causal metadata: dots, version vectors and causal contexts.

A :class:`Dot` names one event. A :class:`VersionVector` summarises
contiguous runs of events per replica, and a :class:`CausalContext`
adds a "cloud" of non-contiguous dots on top of that summary. All
values here are immutable; every operation returns a new value.

Derived sets in :mod:`edgeflow.dataflow` tag entries with composite
dots, so two further contexts live here as well: :class:`UnionContext`
(dots namespaced by input position) and :class:`PairContext` (dots that
are pairs of input dots).
"""

from __future__ import annotations

import enum
from typing import Iterable, Iterator, Mapping, NamedTuple

ReplicaId = str


class _DotBase(NamedTuple):
    replica: ReplicaId
    sequence: int


class Dot(_DotBase):
    """A single event: the ``sequence``-th event issued by ``replica``."""

    __slots__ = ()

    def __new__(cls, replica: ReplicaId, sequence: int) -> "Dot":
        if not isinstance(replica, str):
            raise TypeError(f"replica id must be a str, got {type(replica).__name__}")
        if type(sequence) is not int or sequence < 1:
            raise ValueError(f"dot sequence must be an int >= 1, got {sequence!r}")
        return super().__new__(cls, replica, sequence)

    def __repr__(self) -> str:
        return f"{self.replica}:{self.sequence}"


class Ordering(enum.Enum):
    EQUAL = "equal"
    BEFORE = "before"
    AFTER = "after"
    CONCURRENT = "concurrent"


class VersionVector:
    """Map from replica to the highest contiguous sequence observed.

    Zero entries are dropped on construction, so absent and zero are the
    same thing and equal vectors are structurally equal.
    """

    __slots__ = ("_entries", "_hash")

    def __init__(self, entries: Mapping[ReplicaId, int] | None = None):
        clean: dict[ReplicaId, int] = {}
        for replica, n in sorted((entries or {}).items()):
            if not isinstance(replica, str):
                raise TypeError(f"replica id must be a str, got {replica!r}")
            if type(n) is not int or n < 0:
                raise ValueError(f"version vector entry must be an int >= 0, got {n!r}")
            if n:
                clean[replica] = n
        self._entries = clean
        self._hash: int | None = None

    def get(self, replica: ReplicaId) -> int:
        return self._entries.get(replica, 0)

    def items(self):
        return self._entries.items()

    def replicas(self) -> Iterable[ReplicaId]:
        return self._entries.keys()

    def __len__(self) -> int:
        return len(self._entries)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, VersionVector):
            return NotImplemented
        return self._entries == other._entries

    def __hash__(self) -> int:
        if self._hash is None:
            self._hash = hash(tuple(self._entries.items()))
        return self._hash

    def __repr__(self) -> str:
        inner = ", ".join(f"{r}:{n}" for r, n in self._entries.items())
        return f"VersionVector({{{inner}}})"

    def merge(self, other: VersionVector) -> VersionVector:
        merged = dict(self._entries)
        for replica, n in other._entries.items():
            if n > merged.get(replica, 0):
                merged[replica] = n
        return VersionVector(merged)

    def compare(self, other: VersionVector) -> Ordering:
        """Partial-order comparison of two vectors."""
        less = greater = False
        for replica in self._entries.keys() | other._entries.keys():
            mine, theirs = self.get(replica), other.get(replica)
            if mine < theirs:
                less = True
            elif mine > theirs:
                greater = True
            if less and greater:
                return Ordering.CONCURRENT
        if less:
            return Ordering.BEFORE
        if greater:
            return Ordering.AFTER
        return Ordering.EQUAL

    def to_data(self) -> list:
        return [[r, n] for r, n in self._entries.items()]


class CausalContext:
    """Set of observed dots, stored as a version vector plus a dot cloud.

    The representation is normalised eagerly: cloud dots already covered
    by the vector are discarded and cloud dots that extend a contiguous
    run are folded into the vector. Two contexts covering the same dots
    are therefore structurally equal.
    """

    __slots__ = ("compact", "cloud", "_hash")

    def __init__(self, compact: VersionVector | Mapping[ReplicaId, int] | None = None,
                 cloud: Iterable[Dot] = ()):
        if not isinstance(compact, VersionVector):
            compact = VersionVector(compact)
        cloud = frozenset(cloud)
        for dot in cloud:
            if not isinstance(dot, Dot):
                raise TypeError(f"cloud entries must be Dot, got {dot!r}")
        self.compact, self.cloud = _normalize(compact, cloud)
        self._hash: int | None = None

    @classmethod
    def from_dots(cls, dots: Iterable[Dot]) -> CausalContext:
        return cls(None, dots)

    def contains(self, dot: Dot) -> bool:
        return dot.sequence <= self.compact.get(dot.replica) or dot in self.cloud

    __contains__ = contains

    def next_dot(self, replica: ReplicaId) -> tuple[Dot, CausalContext]:
        """Allocate the next event dot for ``replica`` and record it."""
        dot = Dot(replica, self.compact.get(replica) + 1)
        return dot, self.add(dot)

    def add(self, dot: Dot) -> CausalContext:
        if self.contains(dot):
            return self
        return CausalContext(self.compact, self.cloud | {dot})

    def merge(self, other: CausalContext) -> CausalContext:
        if not isinstance(other, CausalContext):
            raise TypeError(f"cannot merge CausalContext with {type(other).__name__}")
        if other is self:
            return self
        return CausalContext(self.compact.merge(other.compact), self.cloud | other.cloud)

    def dots(self) -> Iterator[Dot]:
        """Every covered dot, in sorted order."""
        covered = [Dot(r, s) for r, n in self.compact.items() for s in range(1, n + 1)]
        yield from sorted(covered + list(self.cloud))

    def size(self) -> int:
        """Number of dots covered."""
        return sum(n for _, n in self.compact.items()) + len(self.cloud)

    def is_empty(self) -> bool:
        return not len(self.compact) and not self.cloud

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, CausalContext):
            return NotImplemented
        return self.compact == other.compact and self.cloud == other.cloud

    def __hash__(self) -> int:
        if self._hash is None:
            self._hash = hash((self.compact, self.cloud))
        return self._hash

    def __repr__(self) -> str:
        cloud = ", ".join(repr(d) for d in sorted(self.cloud))
        return f"CausalContext({self.compact!r}, cloud={{{cloud}}})"

    def to_data(self) -> dict:
        return {"compact": self.compact.to_data(),
                "cloud": [[d.replica, d.sequence] for d in sorted(self.cloud)]}


def _normalize(compact: VersionVector, cloud: frozenset[Dot]) -> tuple[VersionVector, frozenset[Dot]]:
    if not cloud:
        return compact, cloud
    entries = dict(compact.items())
    rest = {d for d in cloud if d.sequence > entries.get(d.replica, 0)}
    grew = False
    for replica in sorted({d.replica for d in rest}):
        n = entries.get(replica, 0)
        while Dot(replica, n + 1) in rest:
            n += 1
            rest.discard(Dot(replica, n))
        if n != entries.get(replica, 0):
            entries[replica] = n
            grew = True
    return (VersionVector(entries) if grew else compact), frozenset(rest)


class UnionContext:
    """Context for dots of the form ``(position, inner_dot)``.

    Each input position keeps its own context; a namespaced dot is
    covered iff its inner dot is covered by the context at that position.
    """

    __slots__ = ("parts", "_hash")

    def __init__(self, parts: Iterable):
        self.parts = tuple(parts)
        self._hash: int | None = None

    def contains(self, dot) -> bool:
        position, inner = dot
        return self.parts[position].contains(inner)

    __contains__ = contains

    def merge(self, other: UnionContext) -> UnionContext:
        if not isinstance(other, UnionContext) or len(other.parts) != len(self.parts):
            raise TypeError("cannot merge UnionContext with a differently shaped context")
        return UnionContext(a.merge(b) for a, b in zip(self.parts, other.parts))

    def size(self) -> int:
        return sum(p.size() for p in self.parts)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, UnionContext):
            return NotImplemented
        return self.parts == other.parts

    def __hash__(self) -> int:
        if self._hash is None:
            self._hash = hash(("union", self.parts))
        return self._hash

    def __repr__(self) -> str:
        return f"UnionContext({list(self.parts)!r})"

    def to_data(self) -> dict:
        return {"union": [p.to_data() for p in self.parts]}


class PairContext:
    """Context for composite dots ``(left_dot, right_dot)``.

    A pair is covered iff both halves are covered by their side's context.
    """

    __slots__ = ("left", "right", "_hash")

    def __init__(self, left, right):
        self.left = left
        self.right = right
        self._hash: int | None = None

    def contains(self, dot) -> bool:
        left, right = dot
        return self.left.contains(left) and self.right.contains(right)

    __contains__ = contains

    def merge(self, other: PairContext) -> PairContext:
        if not isinstance(other, PairContext):
            raise TypeError(f"cannot merge PairContext with {type(other).__name__}")
        return PairContext(self.left.merge(other.left), self.right.merge(other.right))

    def size(self) -> int:
        return self.left.size() + self.right.size()

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, PairContext):
            return NotImplemented
        return self.left == other.left and self.right == other.right

    def __hash__(self) -> int:
        if self._hash is None:
            self._hash = hash(("pair", self.left, self.right))
        return self._hash

    def __repr__(self) -> str:
        return f"PairContext({self.left!r}, {self.right!r})"

    def to_data(self) -> dict:
        return {"pair": [self.left.to_data(), self.right.to_data()]}


def vv_compare(a: VersionVector, b: VersionVector) -> Ordering:
    return a.compare(b)


def dot_to_data(dot) -> list:
    """Encode a plain or composite dot as nested lists."""
    if isinstance(dot, Dot):
        return [dot.replica, dot.sequence]
    if isinstance(dot[0], int):
        return [dot[0], dot_to_data(dot[1])]
    return [dot_to_data(dot[0]), dot_to_data(dot[1])]
