"""Multi-level candidate index: dimension -> source -> token -> window -> ids.

Each indexed sketch also carries a bloom filter over its ``dim:token`` keys,
used to drop candidates that match the probe in too few dimensions before
any similarity is computed.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

from .bloom import BloomFilter
from .errors import DuplicateId, UnknownId
from .model import EngineConfig, Sketch, Snippet, Views, snippet_views, window_of
from .similarity import match_threshold, nonempty_dimensions


@dataclass(frozen=True)
class _Entry:
    source: str
    window: int
    postings: tuple[tuple[str, str], ...]
    bloom: BloomFilter
    nonempty: int


def _key(dim: str, token: str) -> str:
    return f"{dim}:{token}"


class DimensionIndex:
    def __init__(self, cfg: EngineConfig, level: int = 0) -> None:
        self.cfg = cfg
        self.level = level
        self.postings: dict[str, dict[str, dict[str, dict[int, set[str]]]]] = {
            d: {} for d in cfg.dimension_names
        }
        self._entries: dict[str, _Entry] = {}

    def __contains__(self, sketch_id: str) -> bool:
        return sketch_id in self._entries

    def __len__(self) -> int:
        return len(self._entries)

    def ids(self) -> set[str]:
        return set(self._entries)

    def insert(self, sketch: Sketch) -> None:
        if sketch.id in self._entries:
            raise DuplicateId(f"sketch {sketch.id} is already indexed")
        views = sketch.views(self.cfg)
        postings = tuple((d, t) for d, toks in views.items() for t in toks)
        for d, t in postings:
            (
                self.postings[d]
                .setdefault(sketch.source, {})
                .setdefault(t, {})
                .setdefault(sketch.window, set())
                .add(sketch.id)
            )
        bloom = BloomFilter((_key(d, t) for d, t in postings), self.cfg.bloom_fpr)
        self._entries[sketch.id] = _Entry(
            sketch.source, sketch.window, postings, bloom, nonempty_dimensions(views, self.cfg)
        )

    def remove(self, sketch_id: str) -> None:
        entry = self._entries.pop(sketch_id, None)
        if entry is None:
            raise UnknownId(f"sketch {sketch_id} is not indexed")
        for d, t in entry.postings:
            by_token = self.postings[d][entry.source]
            by_window = by_token[t]
            ids = by_window[entry.window]
            ids.discard(sketch_id)
            if not ids:
                del by_window[entry.window]
                if not by_window:
                    del by_token[t]

    def update(self, sketch: Sketch) -> None:
        if sketch.id in self._entries:
            self.remove(sketch.id)
        self.insert(sketch)

    def lookup(self, dim: str, source: str, token: str, window: int) -> set[str]:
        return set(self.postings.get(dim, {}).get(source, {}).get(token, {}).get(window, ()))

    def matches(self, views: Views, source: str, windows: Iterable[int]) -> dict[int, set[str]]:
        """Posting union per window, then the bloom/min-dimensions prefilter."""
        wanted = set(windows)
        found: dict[int, set[str]] = {}
        if not wanted:
            return found
        for d, toks in views.items():
            by_token = self.postings[d].get(source)
            if not by_token:
                continue
            for t in toks:
                by_window = by_token.get(t)
                if not by_window:
                    continue
                if len(by_window) <= len(wanted):
                    hits = ((w, ids) for w, ids in by_window.items() if w in wanted)
                else:
                    hits = ((w, by_window[w]) for w in wanted if w in by_window)
                for w, ids in hits:
                    found.setdefault(w, set()).update(ids)
        if not found:
            return found
        probe_nonempty = nonempty_dimensions(views, self.cfg)
        probe_keys = [
            [_key(d, t) for t in views.get(d, ())] for d in self.cfg.scored_dimensions
        ]
        for w in list(found):
            kept = {i for i in found[w] if self._admits(i, probe_keys, probe_nonempty)}
            if kept:
                found[w] = kept
            else:
                del found[w]
        return found

    def _admits(self, sketch_id: str, probe_keys: list[list[str]], probe_nonempty: int) -> bool:
        entry = self._entries[sketch_id]
        need = match_threshold(self.cfg, probe_nonempty, entry.nonempty)
        if need <= 0:
            return False
        bloom = entry.bloom
        hits = 0
        for keys in probe_keys:
            if keys and any(k in bloom for k in keys):
                hits += 1
                if hits >= need:
                    return True
        return False

    def candidates_same_window(self, probe: Snippet) -> set[str]:
        window = window_of(probe.timestamp, self.cfg)
        views = snippet_views(probe, self.cfg)
        return self.matches(views, probe.source, (window,)).get(window, set())

    def horizon(self, window: int) -> list[int]:
        """Windows within the comparison interval of ``window``, excluding it."""
        reach = self.cfg.comparison_interval - 1
        return [w for w in range(window - reach, window + reach + 1) if w != window]

    def candidates_cross_window(self, sketch: Sketch) -> dict[int, set[str]]:
        found = self.matches(sketch.views(self.cfg), sketch.source, self.horizon(sketch.window))
        for ids in found.values():
            ids.discard(sketch.id)
        return {w: ids for w, ids in found.items() if ids}
