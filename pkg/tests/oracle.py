"""Brute-force reference for story partitions and cross-source alignment.

Written independently of the engine: no index, no bloom filters, no
incremental graph maintenance. Each snippet is compared against every sketch
of its window by a full scan; the final sketch graph is built from all pairs
within the comparison interval, and stories are its connected components.
Cluster alignment is recomputed from scratch over every cross-source pair.
"""

from __future__ import annotations

import math
from collections import Counter, defaultdict


def _top(counter, k):
    items = sorted(counter.items(), key=lambda kv: (-kv[1], kv[0]))
    return dict(items if k is None else items[:k])


def _jaccard(a, b):
    if not a or not b:
        return 0.0
    sa, sb = set(a), set(b)
    return len(sa & sb) / len(sa | sb)


def _cosine(a, b):
    if not a or not b:
        return 0.0
    dot = math.fsum(a[t] * b[t] for t in set(a) & set(b))
    if dot == 0:
        return 0.0
    na = math.sqrt(math.fsum(v * v for v in a.values()))
    nb = math.sqrt(math.fsum(v * v for v in b.values()))
    return min(1.0, dot / (na * nb))


def _components(n, linked):
    parent = list(range(n))

    def find(i):
        while parent[i] != i:
            i = parent[i]
        return i

    for i, j in linked:
        parent[find(i)] = find(j)
    groups = defaultdict(list)
    for i in range(n):
        groups[find(i)].append(i)
    return list(groups.values())


class Reference:
    def __init__(self, cfg):
        self.cfg = cfg
        self.dims = [(d.name, d.weight, d.metric.value, d.top_k) for d in cfg.dimensions]

    def window(self, ts):
        return math.floor((ts - self.cfg.origin) / (self.cfg.window_hours * 3600))

    def view(self, counts):
        return {name: _top(counts.get(name, Counter()), k) for name, _, _, k in self.dims}

    def score(self, a, b):
        total = sum(w for _, w, _, _ in self.dims)
        acc = 0.0
        for name, w, metric, _ in self.dims:
            if w > 0:
                f = _jaccard if metric == "jaccard" else _cosine
                acc += f(a[name], b[name]) * w
        return min(1.0, acc / total)

    def comparable(self, a, b):
        scored = [name for name, w, _, _ in self.dims if w > 0]
        na = sum(1 for n in scored if a[n])
        nb = sum(1 for n in scored if b[n])
        need = min(self.cfg.min_match_dims, na, nb)
        shared = sum(1 for n in scored if set(a[n]) & set(b[n]))
        return need > 0 and shared >= need

    def partitions(self, snippets):
        """source -> set of frozensets of snippet ids."""
        return {
            src: {frozenset(m for sk in cl for m in sk["members"]) for cl in clusters}
            for src, clusters in self.clusters(snippets).items()
        }

    def clusters(self, snippets):
        """source -> list of clusters, each a list of sketch dicts."""
        by_source = defaultdict(list)
        for s in snippets:
            by_source[s.source].append(s)
        return {src: self._source_clusters(items) for src, items in by_source.items()}

    def _source_clusters(self, snippets):
        sketches = []  # dicts: window, counts, members (creation order)
        for s in snippets:
            w = self.window(s.timestamp)
            counts = {n: Counter(toks) for n, toks in s.dimensions.items()}
            probe = self.view(counts)
            best, best_score = None, None
            for sk in sketches:
                if sk["window"] != w:
                    continue
                v = self.view(sk["counts"])
                if not self.comparable(probe, v):
                    continue
                sc = self.score(probe, v)
                if best is None or sc > best_score:
                    best, best_score = sk, sc
            if best is not None and best_score >= self.cfg.alpha_v:
                for n, c in counts.items():
                    best["counts"].setdefault(n, Counter()).update(c)
                best["members"].add(s.id)
            else:
                sketches.append({"window": w, "counts": counts, "members": {s.id}})
        views = [self.view(sk["counts"]) for sk in sketches]
        reach = self.cfg.comparison_interval - 1
        linked = []
        for i in range(len(sketches)):
            for j in range(i + 1, len(sketches)):
                dw = abs(sketches[i]["window"] - sketches[j]["window"])
                if dw == 0 or dw > reach:
                    continue
                if self.comparable(views[i], views[j]) and self.score(views[i], views[j]) >= self.cfg.alpha_v:
                    linked.append((i, j))
        return [[sketches[i] for i in group] for group in _components(len(sketches), linked)]

    def alignment(self, snippets):
        """(edges, aligned partition) with clusters named by their snippet sets."""
        nodes = []  # (source, snippet set, span -> view)
        for src, clusters in sorted(self.clusters(snippets).items()):
            for cl in clusters:
                spans = defaultdict(dict)
                for sk in cl:
                    span = sk["window"] // self.cfg.top_window_span
                    for n, c in sk["counts"].items():
                        spans[span].setdefault(n, Counter()).update(c)
                tops = {span: self.view(c) for span, c in spans.items()}
                members = frozenset(m for sk in cl for m in sk["members"])
                nodes.append((src, members, tops))
        edges, linked = {}, []
        for i in range(len(nodes)):
            for j in range(i + 1, len(nodes)):
                (sa, ma, ta), (sb, mb, tb) = nodes[i], nodes[j]
                shared = sorted(set(ta) & set(tb))
                if sa == sb or not any(self.comparable(ta[s], tb[s]) for s in shared):
                    continue
                # one top per span per cluster, so both directions average the same pairs
                w = math.fsum(self.score(ta[s], tb[s]) for s in shared) / len(shared)
                if w > 0:
                    edges[frozenset((ma, mb))] = w
                    if w >= self.cfg.alpha_c:
                        linked.append((i, j))
        aligned = {
            frozenset(nodes[i][1] for i in group)
            for group in _components(len(nodes), linked)
        }
        return edges, aligned


def engine_partitions(engine):
    return {src: set(cs.values()) for src, cs in engine.clusters().items()}


def engine_alignment(engine):
    members = {}
    for cs in engine.clusters().values():
        members.update(cs)
    edges = {frozenset((members[a], members[b])): w for (a, b), w in engine.crg.edges().items()}
    aligned = {
        frozenset(members[c] for c in group) for group in engine.crg.aligned_stories().values()
    }
    return edges, aligned
