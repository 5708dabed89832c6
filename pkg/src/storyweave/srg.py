"""Per-source sketch relationship graph and incremental story clustering."""

from __future__ import annotations

import enum
from concurrent.futures import Executor
from dataclasses import dataclass, field

from .errors import SourceMismatch, UnknownId, WindowConflict
from .graph import ThresholdGraph
from .index import DimensionIndex
from .model import (
    EngineConfig,
    Sketch,
    Snippet,
    create_sketch,
    merge_snippet,
    snippet_views,
    validate_snippet,
)
from .similarity import passes_gate, weighted_similarity


class Path(str, enum.Enum):
    MERGED = "MERGED"
    NEW_SKETCH = "NEW_SKETCH"


@dataclass
class Integration:
    snippet_id: str
    sketch_id: str
    path: Path
    cluster_id: str
    dirty: set[str] = field(default_factory=set)
    # dirty clusters whose member set changed, as opposed to content only
    reshaped: set[str] = field(default_factory=set)


class SketchRelationshipGraph:
    """Sketch graph, candidate index and story partition for one source."""

    def __init__(self, source: str, cfg: EngineConfig, window_pool: Executor | None = None,
                 pool_width: int = 1) -> None:
        self.source = source
        self.cfg = cfg
        self.index = DimensionIndex(cfg, level=0)
        self.sketches: dict[str, Sketch] = {}
        self.snippet_sketch: dict[str, str] = {}
        self.graph: ThresholdGraph[str] = ThresholdGraph(cfg.alpha_v, order_key=self._order)
        self.window_pool = window_pool
        self.pool_width = max(1, pool_width)
        self._seq = 0

    def _order(self, sketch_id: str) -> int:
        return self.sketches[sketch_id].seq

    def cluster_id(self, sketch_id: str) -> str:
        return self.cluster_name(self.graph.component[sketch_id])

    def cluster_name(self, root_sketch: str) -> str:
        return f"{self.source}/c{self.sketches[root_sketch].seq}"

    def clusters(self) -> dict[str, set[str]]:
        """Live clusters as cluster id -> member sketch ids."""
        return {self.cluster_name(root): set(m) for root, m in self.graph.members.items()}

    def root_of(self, cluster_id: str) -> str | None:
        """Sketch naming a cluster, or None when the cluster is no longer live."""
        prefix, _, seq = cluster_id.rpartition("/c")
        root = f"{prefix}/v{seq}"
        return root if root in self.graph.members else None

    def cluster_members(self, cluster_id: str) -> list[Sketch]:
        root = self.root_of(cluster_id)
        if root is None:
            raise UnknownId(f"no cluster {cluster_id}")
        return [self.sketches[s] for s in self.graph.members[root]]

    def integrate_snippet(self, snippet: Snippet) -> Integration:
        validate_snippet(snippet, self.cfg)
        if snippet.source != self.source:
            raise SourceMismatch(f"snippet {snippet.id} belongs to {snippet.source}, not {self.source}")
        views = snippet_views(snippet, self.cfg)
        best = None
        best_score = -1.0
        for sid in self.index.candidates_same_window(snippet):
            sketch = self.sketches[sid]
            if not passes_gate(views, sketch.views(self.cfg), self.cfg):
                continue
            score = weighted_similarity(views, sketch.views(self.cfg), self.cfg)
            if score > best_score or (score == best_score and sketch.seq < best.seq):
                best, best_score = sketch, score
        changed: set[str] = set()
        if best is not None and best_score >= self.cfg.alpha_v:
            sketch = merge_snippet(best, snippet, self.cfg)
            self.index.update(sketch)
            path = Path.MERGED
        else:
            self._seq += 1
            sketch = create_sketch(snippet, self.cfg, f"{self.source}/v{self._seq}", self._seq)
            self.sketches[sketch.id] = sketch
            self.index.insert(sketch)
            changed |= self.graph.add_node(sketch.id)
            path = Path.NEW_SKETCH
        self.snippet_sketch[snippet.id] = sketch.id
        changed |= self.relink(sketch)
        reshaped = {self.cluster_name(root) for root in changed}
        cid = self.cluster_id(sketch.id)
        return Integration(snippet.id, sketch.id, path, cid, reshaped | {cid}, reshaped)

    def edge_weights(self, sketch: Sketch) -> dict[str, float]:
        """Scores against every gated candidate in the comparison interval."""
        windows = self.index.horizon(sketch.window)
        if self.window_pool is None or self.pool_width == 1 or len(windows) < 2:
            return self._score_windows(sketch, windows)
        width = min(self.pool_width, len(windows))
        chunks = [windows[i::width] for i in range(width)]
        futures = [self.window_pool.submit(self._score_windows, sketch, c) for c in chunks]
        weights: dict[str, float] = {}
        for f in futures:
            weights.update(f.result())
        return weights

    def _score_windows(self, sketch: Sketch, windows: list[int]) -> dict[str, float]:
        views = sketch.views(self.cfg)
        found = self.index.matches(views, self.source, windows)
        weights = {}
        for ids in found.values():
            for sid in ids:
                if sid == sketch.id:
                    continue
                other = self.sketches[sid].views(self.cfg)
                if passes_gate(views, other, self.cfg):
                    score = weighted_similarity(views, other, self.cfg)
                    if score > 0:
                        weights[sid] = score
        return weights

    def relink(self, sketch: Sketch) -> set[str]:
        """Recompute all edges of ``sketch`` and recluster; returns changed roots."""
        return self.recluster(sketch.id, self.edge_weights(sketch))

    def recluster(self, sketch_id: str, weights: dict[str, float]) -> set[str]:
        return self.graph.set_node_edges(sketch_id, weights)

    def upsert_edge(self, a: str, b: str, score: float) -> set[str]:
        sa, sb = self.sketches[a], self.sketches[b]
        if a == b or sa.window == sb.window:
            raise WindowConflict(f"sketches {a} and {b} share window {sa.window}")
        return self.graph.upsert_edge(a, b, score)

    def story_rows(self) -> list[tuple[str, str, str, str]]:
        rows = []
        for snippet_id, sketch_id in self.snippet_sketch.items():
            rows.append((snippet_id, self.source, sketch_id, self.cluster_id(sketch_id)))
        return rows
