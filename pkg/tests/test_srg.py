from __future__ import annotations

import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import example_config, table1
from oracle import Reference
from storyweave.errors import SourceMismatch, ValidationError, WindowConflict
from storyweave.model import DimensionConfig, EngineConfig, Snippet
from storyweave.srg import Path, SketchRelationshipGraph


def ingest(rows, cfg, source="s1"):
    g = SketchRelationshipGraph(source, cfg)
    steps = [g.integrate_snippet(r) for r in rows]
    return g, steps


def snippet_partition(g):
    return {
        frozenset(m for sk in members for m in g.sketches[sk].members)
        for members in g.clusters().values()
    }


class TestRunningExample:
    def test_bootstrap(self, cfg, s1):
        g, (step,) = ingest([s1["r1_1"]], cfg)
        assert step.path is Path.NEW_SKETCH and step.sketch_id == "s1/v1"
        assert step.cluster_id == "s1/c1" and step.dirty == {"s1/c1"}

    def test_second_row_merges(self, cfg, s1):
        _, steps = ingest([s1["r1_1"], s1["r2_1"]], cfg)
        assert steps[1].path is Path.MERGED and steps[1].sketch_id == "s1/v1"

    def test_examples_one_and_two(self, cfg, s1):
        rows = [s1[f"r{i}_1"] for i in range(1, 8)]
        g, steps = ingest(rows, cfg)
        by_row = {s.snippet_id: s for s in steps}
        # r4 opens a sketch in the first window, r5 a new one in the second
        assert by_row["r4_1"].path is Path.NEW_SKETCH
        assert by_row["r5_1"].path is Path.NEW_SKETCH
        v3, v1_t2 = by_row["r4_1"].sketch_id, by_row["r5_1"].sketch_id
        assert g.sketches[v3].window == 0 and g.sketches[v1_t2].window == 1
        assert g.cluster_id(v3) == g.cluster_id(v1_t2)
        assert by_row["r7_1"].sketch_id == v1_t2
        assert snippet_partition(g) == {
            frozenset({"r1_1", "r2_1", "r6_1"}),
            frozenset({"r3_1"}),
            frozenset({"r4_1", "r5_1", "r7_1"}),
        }

    def test_dirty_contains_joined_clusters(self, cfg, s1):
        g, steps = ingest([s1["r4_1"], s1["r3_1"], s1["r5_1"]], cfg)
        # the new sketch's singleton cluster is absorbed into the older one
        assert steps[-1].dirty == {"s1/c1", "s1/c3"}
        assert g.cluster_id("s1/v3") == "s1/c1"

    def test_rejects_foreign_and_invalid(self, cfg, s1):
        g = SketchRelationshipGraph("s1", cfg)
        with pytest.raises(SourceMismatch):
            g.integrate_snippet(table1("s2")["r1_2"])
        with pytest.raises(ValidationError):
            g.integrate_snippet(Snippet("z", "s1", 0, {"bogus": ("x",)}))


class TestUpsert:
    def test_window_conflict(self, cfg, s1):
        g, _ = ingest([s1["r1_1"], s1["r3_1"]], cfg)
        with pytest.raises(WindowConflict):
            g.upsert_edge("s1/v1", "s1/v2", 0.9)

    def test_raise_and_drop(self, cfg, s1):
        g, _ = ingest([s1["r3_1"], s1["r9_1"]], cfg)
        assert len(g.clusters()) == 2
        g.upsert_edge("s1/v1", "s1/v2", 0.1)
        assert len(g.clusters()) == 2
        g.upsert_edge("s1/v1", "s1/v2", 0.9)
        assert len(g.clusters()) == 1
        g.upsert_edge("s1/v1", "s1/v2", 0.9)
        assert len(g.clusters()) == 1


def random_rows(rng, n, windows, vocab=8, dims=("a", "b", "c")):
    rows = []
    for i in range(n):
        d = {k: tuple(f"{k}{rng.randrange(vocab)}" for _ in range(rng.randint(0, 3))) for k in dims}
        rows.append(Snippet(f"r{i}", "s", rng.randrange(windows) * 3600.0 + rng.random(), d))
    return rows


@settings(max_examples=60, deadline=None)
@given(
    st.integers(0, 10**6),
    st.sampled_from([0.2, 0.3, 0.5]),
    st.integers(1, 5),
    st.sampled_from([None, 2]),
    st.booleans(),
)
def test_partition_matches_reference(seed, alpha, interval, top_k, sorted_input):
    cfg = EngineConfig(
        window_hours=1, comparison_interval=interval, alpha_v=alpha,
        dimensions=(DimensionConfig("a", 1.0, top_k=top_k), DimensionConfig("b", 2.0),
                    DimensionConfig("c", 1.0, "cosine_tf", top_k=top_k)),
    )
    rng = random.Random(seed)
    rows = random_rows(rng, rng.randint(1, 60), rng.randint(1, 8))
    if sorted_input:
        rows.sort(key=lambda r: r.timestamp)
    g, steps = ingest(rows, cfg, "s")
    assert snippet_partition(g) == Reference(cfg).partitions(rows)["s"]
    # every snippet lives in exactly one sketch; index tracks live sketches
    assert sorted(m for sk in g.sketches.values() for m in sk.members) == sorted(r.id for r in rows)
    assert g.index.ids() == set(g.sketches)
    # no edges inside a window
    for (a, b) in g.graph.edges():
        assert g.sketches[a].window != g.sketches[b].window


def test_window_parallel_scoring_is_equivalent(cfg):
    from concurrent.futures import ThreadPoolExecutor

    rng = random.Random(7)
    cfg = EngineConfig(window_hours=1, comparison_interval=6, alpha_v=0.3,
                       dimensions=(DimensionConfig("a"), DimensionConfig("b"), DimensionConfig("c")))
    rows = random_rows(rng, 120, 10, vocab=6)
    serial, _ = ingest(rows, cfg, "s")
    with ThreadPoolExecutor(4) as pool:
        par = SketchRelationshipGraph("s", cfg, window_pool=pool, pool_width=4)
        for r in rows:
            par.integrate_snippet(r)
    assert serial.story_rows() == par.story_rows()
    assert serial.graph.edges() == par.graph.edges()
