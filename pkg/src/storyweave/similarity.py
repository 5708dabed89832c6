"""Per-dimension metrics and the weighted, normalized similarity score."""

from __future__ import annotations

import math
from typing import Mapping, Sequence

from .errors import EmptyCluster, LevelMismatch, SameWindow, SourceMismatch, WindowMismatch
from .model import EngineConfig, Metric, Sketch, Snippet, Views, snippet_views, window_of


def jaccard(a: Mapping[str, int], b: Mapping[str, int]) -> float:
    if not a or not b:
        return 0.0
    if len(a) > len(b):
        a, b = b, a
    inter = sum(1 for t in a if t in b)
    return inter / (len(a) + len(b) - inter)


def cosine_tf(a: Mapping[str, int], b: Mapping[str, int]) -> float:
    if not a or not b:
        return 0.0
    if len(a) > len(b):
        a, b = b, a
    # fsum is exactly rounded, so the score does not depend on operand order
    dot = math.fsum(v * b[t] for t, v in a.items() if t in b)
    if not dot:
        return 0.0
    norm = math.sqrt(math.fsum(v * v for v in a.values())) * math.sqrt(math.fsum(v * v for v in b.values()))
    return min(1.0, dot / norm)


_METRICS = {Metric.JACCARD: jaccard, Metric.COSINE_TF: cosine_tf}


def dim_similarity(a: Mapping[str, int], b: Mapping[str, int], metric: Metric | str) -> float:
    """Similarity of two token-count views; an empty side scores 0."""
    return _METRICS[Metric(metric)](a, b)


def weighted_similarity(a: Views, b: Views, cfg: EngineConfig) -> float:
    total = 0.0
    for d in cfg.dimensions:
        if d.weight > 0:
            total += _METRICS[d.metric](a.get(d.name, {}), b.get(d.name, {})) * d.weight
    return min(1.0, total / cfg.weight_total)


def shared_dimensions(a: Views, b: Views, cfg: EngineConfig) -> int:
    """Number of scored dimensions in which the two views share a token."""
    n = 0
    for name in cfg.scored_dimensions:
        x, y = a.get(name), b.get(name)
        if x and y:
            if len(x) > len(y):
                x, y = y, x
            if any(t in y for t in x):
                n += 1
    return n


def nonempty_dimensions(views: Views, cfg: EngineConfig) -> int:
    return sum(1 for name in cfg.scored_dimensions if views.get(name))


def match_threshold(cfg: EngineConfig, *nonempty: int) -> int:
    """Shared-dimension count two objects need before they are compared.

    An object with fewer non-empty dimensions than ``min_match_dims`` lowers
    the bar to what it can possibly satisfy.
    """
    return min(cfg.min_match_dims, *nonempty)


def passes_gate(a: Views, b: Views, cfg: EngineConfig) -> bool:
    need = match_threshold(cfg, nonempty_dimensions(a, cfg), nonempty_dimensions(b, cfg))
    return need > 0 and shared_dimensions(a, b, cfg) >= need


def snippet_sketch_similarity(r: Snippet, v: Sketch, cfg: EngineConfig) -> float:
    if r.source != v.source:
        raise SourceMismatch(f"snippet {r.id} and sketch {v.id} come from different sources")
    if window_of(r.timestamp, cfg) != v.window:
        raise WindowMismatch(f"snippet {r.id} is outside window {v.window} of sketch {v.id}")
    return weighted_similarity(snippet_views(r, cfg), v.views(cfg), cfg)


def sketch_sketch_similarity(a: Sketch, b: Sketch, cfg: EngineConfig) -> float:
    if a.source != b.source:
        raise SourceMismatch(f"sketches {a.id} and {b.id} come from different sources")
    if a.level != b.level:
        raise LevelMismatch(f"sketches {a.id} (level {a.level}) and {b.id} (level {b.level})")
    if a.window == b.window:
        raise SameWindow(f"sketches {a.id} and {b.id} share window {a.window}")
    return weighted_similarity(a.views(cfg), b.views(cfg), cfg)


def _directed_cluster_similarity(a: Sequence[Sketch], b: Sequence[Sketch], cfg: EngineConfig) -> float:
    by_span: dict[int, list[Sketch]] = {}
    for t in b:
        by_span.setdefault(t.window, []).append(t)
    scores = []
    for t in a:
        rivals = by_span.get(t.window)
        if rivals:
            views = t.views(cfg)
            scores.append(max(weighted_similarity(views, r.views(cfg), cfg) for r in rivals))
    return math.fsum(scores) / len(scores) if scores else 0.0


def cluster_similarity(a: Sequence[Sketch], b: Sequence[Sketch], cfg: EngineConfig) -> float:
    """Mean best match of top sketches over shared spans, symmetrized."""
    if not a or not b:
        raise EmptyCluster("cluster similarity needs two non-empty clusters")
    if a[0].source == b[0].source:
        raise SourceMismatch("cluster similarity compares clusters of different sources")
    return (_directed_cluster_similarity(a, b, cfg) + _directed_cluster_similarity(b, a, cfg)) / 2
