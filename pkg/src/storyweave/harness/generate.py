"""Synthetic multi-source corpora with planted stories.

Each story owns a token set per dimension that drifts from event to event.
Events are handed to sources round robin, so one story is reported by several
sources and can only be fully recovered through alignment. Gaps between
events are counted in windows inclusively: a gap of ``g`` puts the next event
``g - 1`` windows after the previous one, so a comparison interval of ``g``
windows is exactly enough to link them.
"""

from __future__ import annotations

import json
import math
import random
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Callable, Iterable, Mapping

from ..errors import InvalidSpec
from ..model import Snippet


@dataclass(frozen=True)
class Vocabulary:
    size: int
    per_event: int

    def validate(self, name: str) -> None:
        if self.per_event < 1 or self.size < self.per_event:
            raise InvalidSpec(f"vocabulary {name!r}: need 1 <= per_event <= size")


def _default_vocab() -> dict[str, Vocabulary]:
    return {
        "entities": Vocabulary(4000, 4),
        "topics": Vocabulary(400, 2),
        "title": Vocabulary(8000, 6),
    }


@dataclass(frozen=True)
class GenSpec:
    sources: int = 3
    stories: int = 50
    events_per_story: tuple[int, int] = (6, 12)
    gap: tuple[int, int] = (1, 3)
    snippets_per_event: tuple[int, int] = (1, 3)
    start_windows: int = 20
    window_hours: float = 12.0
    origin: float = 0.0
    evolution: float = 0.2
    noise: float = 0.05
    vocabulary: Mapping[str, Vocabulary] = field(default_factory=_default_vocab)

    def __post_init__(self) -> None:
        for name in ("events_per_story", "gap", "snippets_per_event"):
            object.__setattr__(self, name, _range(name, getattr(self, name)))
        object.__setattr__(self, "vocabulary", {
            k: v if isinstance(v, Vocabulary) else Vocabulary(**v)
            for k, v in dict(self.vocabulary).items()
        })
        self.validate()

    def validate(self) -> None:
        if self.sources < 1 or self.stories < 1:
            raise InvalidSpec("sources and stories must be >= 1")
        if self.events_per_story[0] < 1 or self.snippets_per_event[0] < 1:
            raise InvalidSpec("events_per_story and snippets_per_event must be >= 1")
        if self.gap[0] < 1:
            raise InvalidSpec("gap must be >= 1 (a gap of 1 stays in the same window)")
        if self.start_windows < 1:
            raise InvalidSpec("start_windows must be >= 1")
        if not self.window_hours > 0:
            raise InvalidSpec("window_hours must be > 0")
        for name in ("evolution", "noise"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise InvalidSpec(f"{name} must lie in [0, 1]")
        if not self.vocabulary:
            raise InvalidSpec("at least one vocabulary is required")
        for name, vocab in self.vocabulary.items():
            vocab.validate(name)

    @property
    def source_names(self) -> list[str]:
        return [f"s{i + 1}" for i in range(self.sources)]

    @classmethod
    def from_json(cls, obj: Mapping[str, Any]) -> GenSpec:
        unknown = set(obj) - set(cls.__dataclass_fields__)
        if unknown:
            raise InvalidSpec(f"unknown spec field(s): {', '.join(sorted(unknown))}")
        try:
            return cls(**obj)
        except (TypeError, ValueError) as exc:
            if isinstance(exc, InvalidSpec):
                raise
            raise InvalidSpec(str(exc)) from None

    @classmethod
    def load(cls, path: str | Path) -> GenSpec:
        try:
            obj = json.loads(Path(path).read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise InvalidSpec(f"{path}: invalid JSON: {exc.msg}") from None
        if not isinstance(obj, dict):
            raise InvalidSpec(f"{path}: expected a JSON object")
        return cls.from_json(obj)

    def to_json(self) -> dict[str, Any]:
        out = asdict(self)
        for name in ("events_per_story", "gap", "snippets_per_event"):
            out[name] = list(out[name])
        return out


def _range(name: str, value: Any) -> tuple[int, int]:
    if isinstance(value, int):
        return (value, value)
    try:
        lo, hi = (int(v) for v in value)
    except (TypeError, ValueError):
        raise InvalidSpec(f"{name} must be an integer or a [min, max] pair") from None
    if lo > hi:
        raise InvalidSpec(f"{name}: min exceeds max")
    return (lo, hi)


class _Story:
    def __init__(self, label: str, tokens: dict[str, list[str]]) -> None:
        self.label = label
        self.tokens = tokens


def _token(dim: str, i: int) -> str:
    return f"{dim}_{i}"


def _evolve(rng: random.Random, tokens: list[str], dim: str, vocab: Vocabulary,
            rate: float) -> list[str]:
    expected = rate * len(tokens)
    n = int(expected) + (rng.random() < expected - int(expected))
    if n == 0:
        return tokens
    out = list(tokens)
    for pos in rng.sample(range(len(out)), n):
        taken = set(out)
        while True:
            fresh = _token(dim, rng.randrange(vocab.size))
            if fresh not in taken or len(taken) >= vocab.size:
                break
        out[pos] = fresh
    return out


def generate(spec: GenSpec, seed: int) -> tuple[list[Snippet], dict[str, str]]:
    """Deterministic corpus and ground truth (snippet id -> story label)."""
    rng = random.Random(seed)
    dims = sorted(spec.vocabulary)
    window_s = spec.window_hours * 3600.0
    sources = spec.source_names
    stories = [
        _Story(f"story{k}", {
            d: [_token(d, i) for i in rng.sample(range(v.size), v.per_event)]
            for d, v in ((d, spec.vocabulary[d]) for d in dims)
        })
        for k in range(spec.stories)
    ]
    # (window, story index, event index): events of all stories on one timeline
    events: list[tuple[int, int, int]] = []
    for k in range(spec.stories):
        w = rng.randrange(spec.start_windows)
        for i in range(rng.randint(*spec.events_per_story)):
            if i:
                w += rng.randint(*spec.gap) - 1
            events.append((w, k, i))
    events.sort()

    raw: list[tuple[int, str, dict[str, tuple[str, ...]], str]] = []
    current: dict[int, int] = {}  # story -> index of the event its tokens reflect
    for w, k, i in events:
        story = stories[k]
        if current.get(k, 0) != i:
            story.tokens = {
                d: _evolve(rng, story.tokens[d], d, spec.vocabulary[d], spec.evolution)
                for d in dims
            }
        current[k] = i
        source = sources[(k + i) % len(sources)]
        for _ in range(rng.randint(*spec.snippets_per_event)):
            dimensions = {}
            for d in dims:
                toks = []
                for tok in story.tokens[d]:
                    if spec.noise and spec.stories > 1 and rng.random() < spec.noise:
                        other = rng.randrange(spec.stories - 1)
                        other += other >= k
                        tok = rng.choice(stories[other].tokens[d])
                    toks.append(tok)
                dimensions[d] = tuple(toks)
            lo = math.ceil(spec.origin + w * window_s)
            hi = math.ceil(spec.origin + (w + 1) * window_s)
            ts = lo + rng.randrange(max(1, hi - lo))
            raw.append((ts, source, dimensions, story.label))

    raw.sort(key=lambda r: r[0])
    snippets, truth = [], {}
    for n, (ts, source, dimensions, label) in enumerate(raw):
        sid = f"r{n:06d}"
        snippets.append(Snippet(sid, source, float(ts), dimensions))
        truth[sid] = label
    return snippets, truth


def blocking_as_sources(snippets: Iterable[Snippet],
                        key: Callable[[Snippet], str]) -> list[Snippet]:
    """Replace each snippet's source with its block key."""
    return [Snippet(s.id, str(key(s)), s.timestamp, s.dimensions) for s in snippets]
