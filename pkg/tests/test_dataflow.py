import random

import pytest
from hypothesis import given, strategies as st

from edgeflow import registry
from edgeflow.causality import CausalContext, Dot
from edgeflow.dataflow import (
    CycleError,
    DataflowGraph,
    Derived,
    GraphError,
    Input,
    UnknownVariableError,
    filter_set,
    fold,
    intersection,
    map_set,
    product,
    union,
)
from edgeflow.lattice import GCounter, KindMismatchError, ORSet
from edgeflow.laws import FILTER_PREDS, MAP_FNS, random_orset

A1, A2, B1 = Dot("A", 1), Dot("A", 2), Dot("B", 1)


def orset_of(pairs):
    return ORSet(dict(pairs))


seeds = st.integers(0, 2**32 - 1)


def test_map_examples():
    empty = ORSet()
    assert map_set(empty, "scale:10") == empty
    s = orset_of({A1: 2, B1: 5})
    out = map_set(s, "scale:10")
    assert out.entries == {A1: 20, B1: 50}
    assert out.context == s.context


def test_filter_examples():
    s = orset_of({A1: 4.0, B1: 9.5})
    assert filter_set(s, "always") == s
    none = filter_set(s, "never")
    assert none.entries == {} and none.context == s.context
    assert filter_set(s, "gt:8.0").entries == {B1: 9.5}


def test_unknown_function_ids():
    with pytest.raises(registry.UnknownFunctionError):
        map_set(ORSet(), "frobnicate")
    with pytest.raises(registry.UnknownFunctionError):
        filter_set(ORSet(), "gt")  # missing argument


@given(seeds, st.sampled_from(MAP_FNS), st.sampled_from(FILTER_PREDS))
def test_map_and_filter_distribute_over_join(seed, fn, pred):
    rng = random.Random(seed)
    a, b = random_orset(rng), random_orset(rng)
    assert map_set(a.join(b), fn) == map_set(a, fn).join(map_set(b, fn))
    assert filter_set(a.join(b), pred) == filter_set(a, pred).join(filter_set(b, pred))


def test_union_examples():
    s = orset_of({A1: "x", B1: "y"})
    assert union(s, ORSet()).elements() == s.elements()
    assert union(orset_of({A1: "x"}), orset_of({B1: "y"})).elements() == {"x", "y"}


def test_union_namespaces_colliding_dots():
    # the same dot on both inputs must not collide in the output
    out = union(orset_of({A1: "x"}), orset_of({A1: "y"}))
    assert out.entries == {(0, A1): "x", (1, A1): "y"}


def test_intersection_example():
    a = orset_of({A1: "x", A2: "y"})
    b = orset_of({B1: "y", Dot("B", 2): "z"})
    out = intersection(a, b)
    assert out.elements() == {"y"}
    assert out.entries == {(A2, B1): "y"}


def test_product_examples():
    s = orset_of({A1: "x"})
    assert product(s, ORSet()).entries == {}
    out = product(s, orset_of({B1: "y", Dot("B", 2): "z"}))
    assert out.elements() == {("x", "y"), ("x", "z")}


@given(seeds)
def test_product_merge_coherence_per_side(seed):
    rng = random.Random(seed)
    a, a2, b, b2 = (random_orset(rng) for _ in range(4))
    assert product(a.join(a2), b).entries == product(a, b).join(product(a2, b)).entries
    assert product(a, b.join(b2)).entries == product(a, b).join(product(a, b2)).entries
    assert intersection(a.join(a2), b).entries == intersection(a, b).join(intersection(a2, b)).entries


@given(seeds)
def test_union_merge_coherence_both_sides(seed):
    rng = random.Random(seed)
    a, a2, b, b2 = (random_orset(rng) for _ in range(4))
    assert union(a.join(a2), b.join(b2)) == union(a, b).join(union(a2, b2))


def test_fold_examples():
    assert fold(ORSet(), "fold_count").value == 0
    assert fold(orset_of({A1: 2, B1: 5}), "fold_sum").value == 7
    assert fold(orset_of({A1: "x", B1: "x"}), "fold_count").value == 1
    assert fold(orset_of({A1: 1.5, B1: 2}), "fold_sum").value == 3.5
    with pytest.raises(TypeError):
        fold(orset_of({A1: "x"}), "fold_sum")


def test_fold_stamp_tracks_observed_events():
    reg = fold(orset_of({A1: 2, B1: 5}), "fold_sum")
    assert reg.stamp == (2, "")


def test_node_spec_validation():
    with pytest.raises(GraphError):
        Derived("union", ("S",))
    with pytest.raises(GraphError):
        Derived("explode", ("S",))
    with pytest.raises(GraphError):
        Input("mvregister")
    with pytest.raises(registry.UnknownFunctionError):
        Derived("map", ("S",), "nope")


def _filter_graph(owner="A"):
    g = DataflowGraph(owner)
    g.declare("S", Input("orset"))
    g.declare("D", Derived("filter", ("S",), "gt:8.0"))
    return g


def test_graph_filter_example():
    g = _filter_graph()
    g.update("S", "add", 4.0)
    g.propagate()
    assert g.read("D").elements() == frozenset()
    g.update("S", "add", 9.5)
    g.propagate()
    assert g.read("D").elements() == {9.5}


def test_graph_errors():
    g = _filter_graph()
    with pytest.raises(CycleError):
        g.declare("E", Derived("map", ("E",), "identity"))
    with pytest.raises(UnknownVariableError):
        g.declare("E", Derived("map", ("missing",), "identity"))
    with pytest.raises(UnknownVariableError):
        g.read("missing")
    with pytest.raises(GraphError):
        g.update("D", "add", 1)
    with pytest.raises(KindMismatchError):
        g.merge_var("S", GCounter())
    with pytest.raises(GraphError):
        g.declare("S", Input("gset"))
    g.declare("T", Derived("fold_count", ("S",)))
    with pytest.raises(GraphError):
        g.declare("U", Derived("map", ("T",), "identity"))


def test_cycle_detected_in_spec_text():
    text = "X := map[identity](Y)\nY := map[identity](X)\n"
    with pytest.raises(CycleError):
        DataflowGraph.from_text(text)


SPEC = """\
S := input(orset)
T := input(orset)
Big := filter[gt:5](S)
Scaled := map[scale:10](Big)
Both := union(S, T)
Common := intersection(S, T)
Pairs := product(Big, T)
Count := fold_count(Both)
Sum := fold_sum(Scaled)
"""


def test_spec_text_round_trip():
    g = DataflowGraph.from_text(SPEC)
    text = g.spec_text()
    assert text.splitlines() == sorted(text.splitlines())
    assert DataflowGraph.from_text(text).nodes == g.nodes


def test_two_replicas_converge_after_pairwise_merge():
    a = DataflowGraph.from_text(SPEC, owner="A")
    b = DataflowGraph.from_text(SPEC, owner="B")
    for v in (3, 7, 11):
        a.update("S", "add", v)
    a.update("T", "add", 7)
    b.update("S", "add", 7)
    b.update("T", "add", 11)
    b.update("T", "add", 3)
    a.update("S", "remove", 3)
    a.propagate()
    b.propagate()
    for var in a.input_vars():
        va, vb = a.read(var), b.read(var)
        a.merge_var(var, vb)
        b.merge_var(var, va)
    a.propagate()
    b.propagate()
    assert a.store == b.store
    # independent evaluation: recompute every derived node from scratch
    fresh = DataflowGraph.from_text(SPEC)
    for var in fresh.input_vars():
        fresh.merge_var(var, a.read(var))
    fresh.propagate()
    assert fresh.store == a.store
    assert a.read("Common").elements() == {7, 11, 3} & a.read("T").elements() & a.read("S").elements()
    assert a.read("Count").value == 3


def test_propagate_is_a_fixpoint():
    g = DataflowGraph.from_text(SPEC, owner="A")
    g.update("S", "add", 9)
    first = g.propagate()
    assert first
    before = dict(g.store)
    assert g.propagate() == []
    assert g.store == before


@given(seeds)
def test_derived_entries_keep_provenance(seed):
    rng = random.Random(seed)
    g = DataflowGraph.from_text(SPEC, owner="A")
    g.merge_var("S", random_orset(rng))
    g.merge_var("T", random_orset(rng))
    g.propagate()
    s, t = g.read("S"), g.read("T")
    for d in g.read("Big").entries:
        assert d in s.entries
    for (pos, d) in g.read("Both").entries:
        assert d in (s if pos == 0 else t).entries
    for (da, db) in g.read("Pairs").entries:
        assert da in s.entries and db in t.entries
    # deleting the producing input entries removes the derived ones
    for element in s.distinct():
        s = s.remove(element)
    g.store["S"] = s
    g.propagate()
    assert not g.read("Big").entries and not g.read("Pairs").entries
    assert all(pos == 1 for pos, _ in g.read("Both").entries)


def test_map_allows_non_injective_functions():
    s = orset_of({A1: ("a", 1), B1: ("b", 1)})
    out = map_set(s, "second")
    assert out.entries == {A1: 1, B1: 1}
    assert out.distinct() == (1,)


def test_copy_is_independent():
    g = _filter_graph()
    clone = g.copy()
    clone.update("S", "add", 1)
    assert g.read("S") == ORSet()
    assert g.read("S").context == CausalContext()


def test_registry_totality():
    scale = registry.transform("scale:2")
    assert scale("x") == "x" and scale(2.5) == 5.0
    gt = registry.predicate("gt:1")
    assert not gt("zzz") and not gt(("a", 5)) and not gt(float("nan"))
    assert registry.predicate("second_gt:8.0")(("C", 9.5))
    assert registry.transform("pair_with:t")(3) == ("t", 3)
