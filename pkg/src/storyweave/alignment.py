"""Top-level sketches and cross-source alignment of per-source stories."""

from __future__ import annotations

from concurrent.futures import Executor
from typing import Iterable, Mapping

from .errors import UnknownCluster
from .graph import ThresholdGraph
from .index import DimensionIndex
from .model import EngineConfig, Sketch, build_top_sketch, span_of
from .similarity import cluster_similarity, passes_gate


def refresh_top_sketches(
    cluster_id: str,
    members: Iterable[Sketch],
    cfg: EngineConfig,
    spans: Iterable[int] | None = None,
) -> dict[int, Sketch]:
    """Group a cluster's base sketches by span and aggregate each group.

    With ``spans`` given, only those spans are rebuilt; a span that no longer
    has members maps to None.
    """
    wanted = None if spans is None else set(spans)
    groups: dict[int, list[Sketch]] = {}
    for sketch in members:
        span = span_of(sketch.window, cfg)
        if wanted is None or span in wanted:
            groups.setdefault(span, []).append(sketch)
    tops: dict[int, Sketch | None] = {
        span: build_top_sketch(children, cfg, f"{cluster_id}@{span}")
        for span, children in sorted(groups.items())
    }
    for span in wanted or ():
        tops.setdefault(span, None)
    return tops


class ClusterRelationshipGraph:
    """Cross-source cluster graph; aligned stories are its threshold components.

    Holds the published top sketches of every live cluster together with a
    level-1 index over them. All mutation happens on one thread at a time;
    ``pool`` only parallelizes the read-only candidate search per foreign source.
    """

    def __init__(self, cfg: EngineConfig, pool: Executor | None = None) -> None:
        self.cfg = cfg
        self.pool = pool
        self.index = DimensionIndex(cfg, level=1)
        self.tops: dict[str, dict[int, Sketch]] = {}
        self.top_owner: dict[str, str] = {}
        self.top_sketch: dict[str, Sketch] = {}
        self.source_of: dict[str, str] = {}
        self.sources: list[str] = []
        self.graph: ThresholdGraph[str] = ThresholdGraph(cfg.alpha_c)

    def __contains__(self, cluster_id: str) -> bool:
        return cluster_id in self.tops

    def publish(self, source: str, cluster_id: str, tops: Mapping[int, Sketch | None] | None,
                full: bool = True) -> set[str]:
        """Install new top sketches for a cluster (None retires the cluster)."""
        if source not in self.sources:
            self.sources.append(source)
        current = self.tops.get(cluster_id)
        if tops is None:
            if current is None:
                return set()
            for top in current.values():
                self._drop(top.id)
            del self.tops[cluster_id]
            del self.source_of[cluster_id]
            return self.graph.remove_node(cluster_id)
        changed: set[str] = set()
        if current is None:
            current = self.tops[cluster_id] = {}
            self.source_of[cluster_id] = source
            changed |= self.graph.add_node(cluster_id)
        if full:
            for span in [s for s in current if s not in tops]:
                self._drop(current.pop(span).id)
        for span, top in tops.items():
            old = current.pop(span, None)
            if old is not None:
                self._drop(old.id)
            if top is not None:
                current[span] = top
                self.top_owner[top.id] = cluster_id
                self.top_sketch[top.id] = top
                self.index.insert(top)
        return changed

    def _drop(self, top_id: str) -> None:
        self.index.remove(top_id)
        del self.top_owner[top_id]
        del self.top_sketch[top_id]

    def candidate_clusters(self, cluster_id: str, source: str) -> dict[str, float]:
        """Clusters of ``source`` overlapping ``cluster_id`` in some span, scored."""
        tops = self.tops[cluster_id]
        found: set[str] = set()
        for span, top in tops.items():
            views = top.views(self.cfg)
            for ids in self.index.matches(views, source, (span,)).values():
                for tid in ids:
                    if passes_gate(views, self.top_sketch[tid].views(self.cfg), self.cfg):
                        found.add(self.top_owner[tid])
        mine = list(tops.values())
        return {c: cluster_similarity(mine, list(self.tops[c].values()), self.cfg) for c in found}

    def edge_weights(self, cluster_id: str) -> dict[str, float]:
        home = self.source_of[cluster_id]
        foreign = [s for s in self.sources if s != home]
        weights: dict[str, float] = {}
        if self.pool is not None and len(foreign) > 1:
            parts = self.pool.map(lambda s: self.candidate_clusters(cluster_id, s), foreign)
        else:
            parts = (self.candidate_clusters(cluster_id, s) for s in foreign)
        for part in parts:
            weights.update(part)
        return {c: w for c, w in weights.items() if w > 0}

    def align(self, dirty: Iterable[str]) -> set[str]:
        """Recompute every edge incident to a live dirty cluster.

        Returns the ids of aligned stories whose membership changed.
        """
        changed: set[str] = set()
        for cid in sorted(set(dirty)):
            if cid in self.tops:
                changed |= self.graph.set_node_edges(cid, self.edge_weights(cid))
        return changed

    def aligned_story_of(self, cluster_id: str) -> str:
        try:
            return self.graph.component[cluster_id]
        except KeyError:
            raise UnknownCluster(f"no live cluster {cluster_id}") from None

    def aligned_stories(self) -> dict[str, set[str]]:
        return {k: set(v) for k, v in self.graph.members.items()}

    def edges(self) -> dict[tuple[str, str], float]:
        return self.graph.edges()

    def rows(self) -> list[tuple[str, str, str]]:
        return sorted(
            (cid, self.source_of[cid], self.graph.component[cid]) for cid in self.tops
        )
