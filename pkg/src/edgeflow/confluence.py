"""Exhaustive confluence checking on small scripts.

A script is a sequence of mutations, each performed at one replica. Before
each mutation (except the first) the acting replica either syncs, joining
every state emitted so far, or acts on what it already has; both choices
are enumerated. Every mutation emits the replica's resulting state as a
message.

For each such execution, the emitted messages are then delivered to a
fresh observer in every distinct order, with exactly one message
delivered twice. All of those orders must end in the same state, and
that state must match a semantic reference computed without lattices:
the arithmetic total for counters, and for sets an element is present
iff some add of it was not observed by any remove of it.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

from edgeflow.lattice import Lattice, apply_mutation, bottom

OPS = {
    "orset": (("add", "x"), ("add", "y"), ("remove", "x")),
    "pncounter": (("increment", 1), ("decrement", 1)),
}


def replica_names(count: int) -> list[str]:
    return [chr(ord("A") + i) for i in range(count)]


def orders_per_execution(k: int) -> int:
    """Distinct delivery sequences of k messages with one of them doubled."""
    return k * math.factorial(k + 1) // 2


def expected_count(choices: int, max_ops: int) -> int:
    """Size of the enumerated space: scripts x sync choices x delivery orders."""
    return sum(choices ** k * 2 ** (k - 1) * orders_per_execution(k) for k in range(1, max_ops + 1))


@dataclass
class FuzzResult:
    kind: str
    replicas: int
    max_ops: int
    executions: int = 0
    interleavings: int = 0
    violations: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations


def execute(kind: str, steps, syncs) -> tuple[list[Lattice], dict[str, Lattice], object]:
    """Run one execution; return (messages, replica states, semantic reference)."""
    states: dict[str, Lattice] = {}
    messages: list[Lattice] = []
    # semantic model: event ids known per replica
    known: dict[str, set[int]] = {}
    removes: list[tuple[str, set[int]]] = []
    adds: dict[int, str] = {}
    total = 0
    for i, ((replica, (op, arg)), sync) in enumerate(zip(steps, syncs)):
        state = states.get(replica, bottom(kind))
        seen = known.setdefault(replica, set())
        if sync:
            for m in messages:
                state = state.join(m)
            seen.update(range(i))
        state = apply_mutation(state, replica, op, arg)
        states[replica] = state
        messages.append(state)
        seen.add(i)
        if op == "add":
            adds[i] = arg
        elif op == "remove":
            removes.append((arg, {j for j in seen if adds.get(j) == arg}))
        elif op == "increment":
            total += arg
        elif op == "decrement":
            total -= arg
    if kind == "pncounter":
        reference = total
    else:
        cancelled = set().union(*(obs for _, obs in removes)) if removes else set()
        reference = frozenset(e for j, e in adds.items() if j not in cancelled)
    return messages, states, reference


def _walk_orders(messages: list[Lattice], dup: int, start: Lattice, expected: Lattice,
                 cache: dict, bad: list) -> int:
    """Deliver ``messages`` (``dup`` twice) in every distinct order.

    Returns the number of orders walked; any final state differing from
    ``expected`` is appended to ``bad``. ``cache`` memoises single joins.
    """
    counts = [1] * len(messages)
    counts[dup] += 1
    indices = range(len(messages))

    def walk(state, remaining: int) -> int:
        if remaining == 0:
            if state is not expected and state != expected:
                bad.append(state)
            return 1
        total = 0
        for idx in indices:
            if counts[idx]:
                counts[idx] -= 1
                key = (state, idx)
                nxt = cache.get(key)
                if nxt is None:
                    nxt = state.join(messages[idx])
                    nxt = cache.setdefault(nxt, nxt)
                    cache[key] = nxt
                total += walk(nxt, remaining - 1)
                counts[idx] += 1
        return total

    return walk(start, len(messages) + 1)


def _observed(kind: str, state: Lattice):
    if kind == "pncounter":
        return state.value()
    return frozenset(state.elements())


def check(kind: str, replicas: int = 3, max_ops: int = 4) -> FuzzResult:
    if kind not in OPS:
        raise ValueError(f"no confluence model for {kind!r}")
    if replicas < 1 or max_ops < 1:
        raise ValueError("replicas and max_ops must be >= 1")
    names = replica_names(replicas)
    choices = list(itertools.product(names, OPS[kind]))
    result = FuzzResult(kind, replicas, max_ops)
    base = bottom(kind)
    for k in range(1, max_ops + 1):
        for steps in itertools.product(choices, repeat=k):
            for tail in itertools.product((False, True), repeat=k - 1):
                syncs = (False,) + tail
                messages, states, reference = execute(kind, steps, syncs)
                result.executions += 1
                expected = base
                for m in messages:
                    expected = expected.join(m)
                label = f"{kind} script={steps} syncs={syncs}"
                if _observed(kind, expected) != reference:
                    result.violations.append(f"{label}: joined state {expected!r} != reference {reference!r}")
                for name, state in states.items():
                    final = state
                    for m in messages:
                        final = final.join(m)
                    if final != expected:
                        result.violations.append(f"{label}: replica {name} ends at {final!r}")
                cache: dict = {expected: expected}
                for dup in range(k):
                    bad: list = []
                    result.interleavings += _walk_orders(messages, dup, base, expected, cache, bad)
                    for final in bad:
                        result.violations.append(f"{label} dup={dup}: order-dependent result {final!r}")
    return result
