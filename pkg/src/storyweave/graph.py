"""Weighted undirected graph whose clusters are threshold components.

Clusters are the connected components of the subgraph made of edges with
weight >= threshold (transitive closure). A component is named after its
smallest member under ``order_key``, so ids are a pure function of
membership. Edge increases are handled by union; any strong edge that weakens
or disappears triggers an exact recomputation of the affected component.
"""

from __future__ import annotations

from typing import Callable, Generic, Hashable, Iterable, Mapping, TypeVar

N = TypeVar("N", bound=Hashable)


class ThresholdGraph(Generic[N]):
    def __init__(self, threshold: float, order_key: Callable[[N], object] | None = None) -> None:
        self.threshold = threshold
        self._key = order_key or (lambda n: n)
        self.adj: dict[N, dict[N, float]] = {}
        self.component: dict[N, N] = {}
        self.members: dict[N, set[N]] = {}

    def __contains__(self, node: N) -> bool:
        return node in self.adj

    def __len__(self) -> int:
        return len(self.adj)

    def nodes(self) -> Iterable[N]:
        return self.adj.keys()

    def weight(self, a: N, b: N) -> float:
        return self.adj.get(a, {}).get(b, 0.0)

    def edges(self) -> dict[tuple[N, N], float]:
        out = {}
        for a, nbrs in self.adj.items():
            for b, w in nbrs.items():
                if self._key(a) < self._key(b):
                    out[(a, b)] = w
        return out

    def components(self) -> dict[N, set[N]]:
        return self.members

    def add_node(self, node: N) -> set[N]:
        if node in self.adj:
            return set()
        self.adj[node] = {}
        self.component[node] = node
        self.members[node] = {node}
        return {node}

    def remove_node(self, node: N) -> set[N]:
        nbrs = self.adj.pop(node)
        strong = any(w >= self.threshold for w in nbrs.values())
        for b in nbrs:
            del self.adj[b][node]
        cid = self.component.pop(node)
        group = self.members.pop(cid)
        group.discard(node)
        dirty = {cid}
        if not group:
            return dirty
        if strong:
            dirty |= self._rebuild(group)
        else:
            dirty |= self._rename(group)
        return dirty

    def upsert_edge(self, a: N, b: N, weight: float) -> set[N]:
        if a == b:
            raise ValueError("self loops are not allowed")
        old = self.weight(a, b)
        self._store(a, b, weight)
        dirty: set[N] = set()
        if old >= self.threshold > weight:
            dirty |= self._rebuild(self.members[self.component[a]])
        if weight >= self.threshold:
            dirty |= self._union(a, b)
        return dirty

    def set_node_edges(self, node: N, weights: Mapping[N, float]) -> set[N]:
        """Replace every edge incident to ``node`` with ``weights``."""
        t = self.threshold
        old = self.adj[node]
        weakened = any(w >= t and weights.get(b, 0.0) < t for b, w in old.items())
        for b in list(old):
            if b not in weights:
                self._store(node, b, 0.0)
        for b, w in weights.items():
            if b == node:
                raise ValueError("self loops are not allowed")
            self._store(node, b, w)
        dirty: set[N] = set()
        if weakened:
            dirty |= self._rebuild(self.members[self.component[node]])
        for b, w in weights.items():
            if w >= t:
                dirty |= self._union(node, b)
        return dirty

    def _store(self, a: N, b: N, weight: float) -> None:
        if weight > 0:
            self.adj[a][b] = weight
            self.adj[b][a] = weight
        else:
            self.adj[a].pop(b, None)
            self.adj[b].pop(a, None)

    def _union(self, a: N, b: N) -> set[N]:
        ca, cb = self.component[a], self.component[b]
        if ca == cb:
            return set()
        big, small = (ca, cb) if len(self.members[ca]) >= len(self.members[cb]) else (cb, ca)
        merged = self.members.pop(big)
        moved = self.members.pop(small)
        merged |= moved
        new_id = min(ca, cb, key=self._key)
        self.members[new_id] = merged
        relabel = merged if new_id != big else moved
        for n in relabel:
            self.component[n] = new_id
        return {ca, cb, new_id}

    def _rebuild(self, group: set[N]) -> set[N]:
        """Recompute strong components inside ``group``; returns changed ids."""
        t = self.threshold
        old_id = self.component[next(iter(group))]
        self.members.pop(old_id, None)
        pieces = []
        seen: set[N] = set()
        for start in group:
            if start in seen:
                continue
            piece = {start}
            stack = [start]
            seen.add(start)
            while stack:
                n = stack.pop()
                for b, w in self.adj[n].items():
                    # edges leaving the group were just stored; unions handle them
                    if w >= t and b in group and b not in seen:
                        seen.add(b)
                        piece.add(b)
                        stack.append(b)
            pieces.append(piece)
        dirty = {old_id}
        for piece in pieces:
            cid = min(piece, key=self._key)
            self.members[cid] = piece
            for n in piece:
                self.component[n] = cid
            if len(pieces) > 1 or cid != old_id:
                dirty.add(cid)
        if len(pieces) == 1 and min(group, key=self._key) == old_id:
            return set()
        return dirty

    def _rename(self, group: set[N]) -> set[N]:
        cid = min(group, key=self._key)
        self.members[cid] = group
        for n in group:
            self.component[n] = cid
        return {cid}
