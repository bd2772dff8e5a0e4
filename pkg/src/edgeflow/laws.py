"""Randomised law checks for lattices, contexts and dataflow operators.

Generators draw from small fixed universes so that collisions (shared
dots, equal elements, equal stamps) are frequent. Every ORSet generated
here respects the real-world constraint that a given dot always carries
the same element.
"""

from __future__ import annotations

import itertools
import random
from dataclasses import dataclass, field
from typing import Callable

from edgeflow import dataflow
from edgeflow.causality import CausalContext, Dot, Ordering
from edgeflow.lattice import (
    GCounter,
    GSet,
    LWWRegister,
    ORSet,
    PNCounter,
    apply_mutation,
    bottom,
    canonical_bytes,
    from_data,
)

REPLICAS = ("A", "B", "C")
ELEMENTS = (0, 1, 2, 7, 2.5, 9.5, -0.0, 0.0, "x", "y", "z", ("x", 1), ("y", 2.5))
DOTS = tuple(Dot(r, s) for r in REPLICAS for s in range(1, 5))
MAP_FNS = ("identity", "scale:10", "negate", "pair_with:t", "second", "offset:0.5")
FILTER_PREDS = ("always", "never", "gt:2", "is_str", "eq:x", "le:1")


def element_of(dot: Dot):
    """The element permanently attached to ``dot`` in generated sets."""
    return ELEMENTS[(ord(dot.replica) * 7 + dot.sequence * 3) % len(ELEMENTS)]


def random_gcounter(rng: random.Random) -> GCounter:
    return GCounter({r: rng.randint(0, 4) for r in REPLICAS if rng.random() < 0.7})


def random_pncounter(rng: random.Random) -> PNCounter:
    return PNCounter(random_gcounter(rng), random_gcounter(rng))


def random_gset(rng: random.Random) -> GSet:
    return GSet(e for e in ELEMENTS if rng.random() < 0.3)


def random_context(rng: random.Random) -> CausalContext:
    covered = set()
    for r in REPLICAS:
        prefix = rng.randint(0, 3)
        covered.update(Dot(r, s) for s in range(1, prefix + 1))
    covered.update(d for d in DOTS if rng.random() < 0.25)
    return CausalContext.from_dots(covered)


def random_orset(rng: random.Random) -> ORSet:
    context = random_context(rng)
    entries = {d: element_of(d) for d in context.dots() if rng.random() < 0.6}
    return ORSet(entries, context)


def random_lww(rng: random.Random) -> LWWRegister:
    if rng.random() < 0.1:
        return LWWRegister()
    return LWWRegister(rng.choice(ELEMENTS), rng.randint(1, 3), rng.choice(REPLICAS))


GENERATORS: dict[str, Callable[[random.Random], object]] = {
    "gcounter": random_gcounter,
    "pncounter": random_pncounter,
    "gset": random_gset,
    "orset": random_orset,
    "lww": random_lww,
}


def random_mutation(rng: random.Random, kind: str) -> tuple[str, str, object]:
    """A (replica, op, arg) triple valid for ``kind``."""
    replica = rng.choice(REPLICAS)
    if kind == "gcounter":
        return replica, "increment", rng.randint(1, 3)
    if kind == "pncounter":
        return replica, rng.choice(("increment", "decrement")), rng.randint(1, 3)
    if kind == "gset":
        return replica, "add", rng.choice(ELEMENTS)
    if kind == "orset":
        return replica, rng.choice(("add", "remove")), rng.choice(ELEMENTS)
    return replica, "set", rng.choice(ELEMENTS)


def same(a, b) -> bool:
    """Structural equality, confirmed on the canonical encoding."""
    return a == b and canonical_bytes(a) == canonical_bytes(b)


@dataclass
class LawResult:
    name: str
    checked: int = 0
    failures: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.failures

    def fail(self, message: str) -> None:
        if len(self.failures) < 5:
            self.failures.append(message)
        else:
            self.failures[-1] = message


def check_lattice_laws(kind: str, iterations: int, rng: random.Random) -> LawResult:
    gen = GENERATORS[kind]
    res = LawResult(f"lattice-{kind}")
    bot = bottom(kind)
    for _ in range(iterations):
        a, b, c = gen(rng), gen(rng), gen(rng)
        res.checked += 1
        if not same(a.join(a), a):
            res.fail(f"idempotence: {a!r}")
        if not same(a.join(b), b.join(a)):
            res.fail(f"commutativity: {a!r} {b!r}")
        if not same(a.join(b.join(c)), a.join(b).join(c)):
            res.fail(f"associativity: {a!r} {b!r} {c!r}")
        if not (same(bot.join(a), a) and same(a.join(bot), a)):
            res.fail(f"identity: {a!r}")
        if not (bot.leq(a) and a.leq(a) and a.leq(a.join(b))):
            res.fail(f"order: {a!r} {b!r}")
        if a.leq(b) != same(a.join(b), b):
            res.fail(f"leq disagrees with join: {a!r} {b!r}")
        if a.leq(b) and b.leq(a) and not same(a, b):
            res.fail(f"antisymmetry: {a!r} {b!r}")
        replica, op, arg = random_mutation(rng, kind)
        mutated = apply_mutation(a, replica, op, arg)
        if not a.leq(mutated):
            res.fail(f"mutator {op} not inflationary on {a!r}")
        if not same(from_data(a.to_data()), a):
            res.fail(f"encoding round trip: {a!r}")
        if isinstance(a, ORSet):
            for value in (a, a.join(b), mutated):
                if not all(value.context.contains(d) for d in value.entries):
                    res.fail(f"entry dot outside context: {value!r}")
    return res


def check_context_laws(iterations: int, rng: random.Random) -> LawResult:
    res = LawResult("causal-context")
    empty = CausalContext()
    for _ in range(iterations):
        a, b, c = random_context(rng), random_context(rng), random_context(rng)
        res.checked += 1
        if not (a.merge(a) == a and a.merge(b) == b.merge(a)
                and a.merge(b.merge(c)) == a.merge(b).merge(c) and empty.merge(a) == a):
            res.fail(f"merge ACI/identity: {a!r} {b!r} {c!r}")
        merged = a.merge(b)
        for d in DOTS + (Dot("A", 5), Dot("D", 1)):
            if merged.contains(d) != (a.contains(d) or b.contains(d)):
                res.fail(f"merge membership at {d!r}: {a!r} {b!r}")
        if CausalContext.from_dots(set(a.dots())) != a:
            res.fail(f"normal form not canonical: {a!r}")
        va, vb, vc = a.compact, b.compact, c.compact
        if va.compare(va) is not Ordering.EQUAL:
            res.fail(f"vv reflexivity: {va!r}")
        ab, ba = va.compare(vb), vb.compare(va)
        flipped = {Ordering.BEFORE: Ordering.AFTER, Ordering.AFTER: Ordering.BEFORE}
        if flipped.get(ab, ab) is not ba:
            res.fail(f"vv antisymmetry: {va!r} {vb!r}")
        if ab is Ordering.EQUAL and va != vb:
            res.fail(f"vv equality: {va!r} {vb!r}")
        below = (Ordering.BEFORE, Ordering.EQUAL)
        if ab in below and vb.compare(vc) in below and va.compare(vc) not in below:
            res.fail(f"vv transitivity: {va!r} {vb!r} {vc!r}")
        if not (va.merge(vb).compare(va) in (Ordering.AFTER, Ordering.EQUAL)):
            res.fail(f"vv merge not an upper bound: {va!r} {vb!r}")
    return res


def check_dataflow_laws(iterations: int, rng: random.Random) -> list[LawResult]:
    hom = LawResult("dataflow-map-filter-homomorphism")
    uni = LawResult("dataflow-union-coherence")
    prod = LawResult("dataflow-product-coherence")
    inter = LawResult("dataflow-intersection-coherence")
    for _ in range(iterations):
        a, b, a2, b2 = (random_orset(rng) for _ in range(4))
        fn, pred = rng.choice(MAP_FNS), rng.choice(FILTER_PREDS)
        hom.checked += 1
        if not same(dataflow.map_set(a.join(b), fn), dataflow.map_set(a, fn).join(dataflow.map_set(b, fn))):
            hom.fail(f"map {fn}: {a!r} {b!r}")
        if not same(dataflow.filter_set(a.join(b), pred),
                    dataflow.filter_set(a, pred).join(dataflow.filter_set(b, pred))):
            hom.fail(f"filter {pred}: {a!r} {b!r}")
        uni.checked += 1
        merged = dataflow.union(a.join(a2), b.join(b2))
        joined = dataflow.union(a, b).join(dataflow.union(a2, b2))
        if not same(merged, joined):
            uni.fail(f"union: {a!r} {a2!r} {b!r} {b2!r}")
        for res, op in ((prod, dataflow.product), (inter, dataflow.intersection)):
            res.checked += 1
            left = op(a.join(a2), b).entries == op(a, b).join(op(a2, b)).entries
            right = op(a, b.join(b2)).entries == op(a, b).join(op(a, b2)).entries
            if not (left and right):
                res.fail(f"{op.__name__}: {a!r} {a2!r} {b!r} {b2!r}")
    return [hom, uni, prod, inter]


def run_all(iterations: int, seed: int = 0) -> list[LawResult]:
    rng = random.Random(seed)
    results = [check_lattice_laws(kind, iterations, rng) for kind in GENERATORS]
    results.append(check_context_laws(iterations, rng))
    results.extend(check_dataflow_laws(iterations, rng))
    return results


def exhaustive_context_membership(replicas=("A", "B"), max_seq: int = 3) -> int:
    """Check merge membership for every pair of contexts over a tiny universe.

    Returns the number of pairs checked; raises AssertionError on failure.
    """
    universe = [Dot(r, s) for r in replicas for s in range(1, max_seq + 1)]
    subsets = [frozenset(c) for n in range(len(universe) + 1) for c in itertools.combinations(universe, n)]
    contexts = [CausalContext.from_dots(s) for s in subsets]
    checked = 0
    for sa, ca in zip(subsets, contexts):
        for sb, cb in zip(subsets, contexts):
            merged = ca.merge(cb)
            covered = {d for d in universe if merged.contains(d)}
            assert covered == sa | sb, (ca, cb, merged)
            assert merged == CausalContext.from_dots(sa | sb)
            checked += 1
    return checked
