from __future__ import annotations

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from storyweave.graph import ThresholdGraph

T = 0.5


def brute_components(nodes, edges, t=T):
    parent = {n: n for n in nodes}

    def find(x):
        while parent[x] != x:
            x = parent[x]
        return x

    for (a, b), w in edges.items():
        if w >= t:
            parent[find(a)] = find(b)
    groups = {}
    for n in nodes:
        groups.setdefault(find(n), set()).add(n)
    return {frozenset(g) for g in groups.values()}


def partition(g):
    return {frozenset(m) for m in g.members.values()}


def check_consistent(g):
    for cid, members in g.members.items():
        assert cid == min(members)
        assert all(g.component[n] == cid for n in members)
    assert set(g.component) == set(g.adj)


class TestExamples:
    def test_new_node_singleton(self):
        g = ThresholdGraph(T)
        assert g.add_node(1) == {1}
        assert g.members == {1: {1}}

    def test_join_two_clusters(self):
        g = ThresholdGraph(T)
        for n in range(5):
            g.add_node(n)
        g.upsert_edge(0, 1, 0.9)
        g.upsert_edge(2, 3, 0.9)
        g.upsert_edge(3, 4, 0.9)
        dirty = g.upsert_edge(1, 2, 0.6)
        assert partition(g) == {frozenset(range(5))}
        assert {0, 2} <= dirty

    def test_chain_split(self):
        g = ThresholdGraph(T)
        for n in "ABC":
            g.add_node(n)
        g.upsert_edge("A", "B", 0.9)
        g.upsert_edge("B", "C", 0.9)
        dirty = g.upsert_edge("B", "C", 0.1)
        assert partition(g) == {frozenset("AB"), frozenset("C")}
        assert "C" in dirty and g.weight("B", "C") == 0.1

    def test_sub_threshold_edge_stored_without_link(self):
        g = ThresholdGraph(T)
        g.add_node(1), g.add_node(2)
        assert g.upsert_edge(1, 2, 0.2) == set()
        assert g.weight(1, 2) == 0.2 and len(g.members) == 2
        assert g.upsert_edge(1, 2, 0.2) == set()
        g.upsert_edge(1, 2, 0.7)
        assert len(g.members) == 1

    def test_transitivity(self):
        g = ThresholdGraph(T)
        for n in "ABC":
            g.add_node(n)
        g.upsert_edge("A", "B", 0.6)
        g.upsert_edge("B", "C", 0.6)
        g.upsert_edge("A", "C", 0.1)
        assert g.component["A"] == g.component["C"]

    def test_zero_weight_not_stored(self):
        g = ThresholdGraph(T)
        g.add_node(1), g.add_node(2)
        g.upsert_edge(1, 2, 0.0)
        assert g.edges() == {}

    def test_self_loop(self):
        g = ThresholdGraph(T)
        g.add_node(1)
        with pytest.raises(ValueError):
            g.upsert_edge(1, 1, 0.9)

    def test_order_key_names_components(self):
        order = {"x": 2, "y": 1}
        g = ThresholdGraph(T, order_key=order.__getitem__)
        g.add_node("x"), g.add_node("y")
        g.upsert_edge("x", "y", 0.9)
        assert g.component["x"] == "y"


weights = st.sampled_from([0.0, 0.2, 0.5, 0.8])
ops = st.lists(
    st.one_of(
        st.tuples(st.just("edge"), st.integers(0, 7), st.integers(0, 7), weights),
        st.tuples(st.just("node"), st.integers(0, 7), st.dictionaries(st.integers(0, 7), weights, max_size=4)),
        st.tuples(st.just("drop"), st.integers(0, 7)),
    ),
    max_size=60,
)


@settings(max_examples=300, deadline=None)
@given(ops)
def test_matches_brute_force(seq):
    g = ThresholdGraph(T)
    for n in range(8):
        g.add_node(n)
    nodes = set(range(8))
    edges: dict[tuple[int, int], float] = {}
    for op in seq:
        before = {n: g.component.get(n) for n in nodes}
        before_sets = {n: frozenset(g.members[g.component[n]]) for n in nodes}
        if op[0] == "edge":
            _, a, b, w = op
            if a == b or a not in nodes or b not in nodes:
                continue
            dirty = g.upsert_edge(a, b, w)
            edges[tuple(sorted((a, b)))] = w
        elif op[0] == "node":
            _, a, ws = op
            added = set()
            if a not in nodes:
                added = g.add_node(a)
                nodes.add(a)
                before_sets[a] = frozenset()
            ws = {b: w for b, w in ws.items() if b != a and b in nodes}
            dirty = added | g.set_node_edges(a, ws)
            edges = {k: v for k, v in edges.items() if a not in k}
            edges.update({tuple(sorted((a, b))): w for b, w in ws.items()})
        else:
            _, a = op
            if a not in nodes:
                continue
            dirty = g.remove_node(a)
            nodes.discard(a)
            edges = {k: v for k, v in edges.items() if a not in k}
        live = {k: v for k, v in edges.items() if v > 0}
        assert partition(g) == brute_components(nodes, live)
        assert g.edges() == live
        check_consistent(g)
        # dirty soundness: every node whose cluster changed reports a dirty id
        for n in nodes:
            now = frozenset(g.members[g.component[n]])
            if before_sets.get(n) != now:
                assert g.component[n] in dirty or before.get(n) in dirty
