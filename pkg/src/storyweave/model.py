"""Domain types, window arithmetic and sketch aggregation."""

from __future__ import annotations

import enum
import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Any, Iterable, Mapping

from .errors import (
    ConfigError,
    SourceMismatch,
    SpanViolation,
    ValidationError,
    WindowMismatch,
)

Views = dict[str, dict[str, int]]


class Metric(str, enum.Enum):
    JACCARD = "jaccard"
    COSINE_TF = "cosine_tf"


class Mode(str, enum.Enum):
    SP = "sp"
    ROUND = "round"
    SEQU = "sequ"


# Short categorical dimensions compare as sets, free text as term vectors.
_TEXT_DIMENSIONS = {"title", "text", "body", "summary"}


@dataclass(frozen=True)
class DimensionConfig:
    name: str
    weight: float = 1.0
    metric: Metric = Metric.JACCARD
    top_k: int | None = None  # None keeps every token

    def __post_init__(self) -> None:
        if not self.name:
            raise ConfigError("dimension name must be non-empty")
        if not (self.weight >= 0 and math.isfinite(self.weight)):
            raise ConfigError(f"dimension {self.name!r}: weight must be a finite value >= 0")
        object.__setattr__(self, "metric", Metric(self.metric))
        if self.top_k is not None and self.top_k < 1:
            raise ConfigError(f"dimension {self.name!r}: top_k must be >= 1")

    @classmethod
    def default(cls, name: str, weight: float = 1.0, top_k: int | None = None) -> DimensionConfig:
        metric = Metric.COSINE_TF if name in _TEXT_DIMENSIONS else Metric.JACCARD
        return cls(name, weight, metric, top_k)


DEFAULT_DIMENSIONS = (
    DimensionConfig("entities", 1.0, Metric.JACCARD),
    DimensionConfig("topics", 1.0, Metric.JACCARD),
    DimensionConfig("title", 1.0, Metric.COSINE_TF),
)


@dataclass(frozen=True)
class EngineConfig:
    window_hours: float = 12.0
    comparison_interval: int = 30
    alpha_v: float = 0.3
    alpha_c: float = 0.1
    min_match_dims: int = 2
    top_window_span: int = 14
    bloom_fpr: float = 0.01
    mode: Mode = Mode.SP
    workers: int = 1
    origin: float = 0.0
    dimensions: tuple[DimensionConfig, ...] = DEFAULT_DIMENSIONS

    def __post_init__(self) -> None:
        object.__setattr__(self, "mode", Mode(self.mode))
        object.__setattr__(self, "dimensions", tuple(self.dimensions))
        if not (self.window_hours > 0 and math.isfinite(self.window_hours)):
            raise ConfigError("window_hours must be > 0")
        if self.comparison_interval < 1:
            raise ConfigError("comparison_interval must be >= 1")
        for name in ("alpha_v", "alpha_c", "bloom_fpr"):
            value = getattr(self, name)
            if not 0 < value < 1:
                raise ConfigError(f"{name} must lie in (0, 1), got {value}")
        if self.top_window_span < 1:
            raise ConfigError("top_window_span must be >= 1")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        if not math.isfinite(self.origin):
            raise ConfigError("origin must be finite")
        if not self.dimensions:
            raise ConfigError("at least one dimension is required")
        names = [d.name for d in self.dimensions]
        if len(set(names)) != len(names):
            raise ConfigError("duplicate dimension names")
        if sum(d.weight for d in self.dimensions) <= 0:
            raise ConfigError("dimension weights must sum to a positive value")
        if not 1 <= self.min_match_dims <= len(self.dimensions):
            raise ConfigError("min_match_dims must be between 1 and the number of dimensions")

    @property
    def window_seconds(self) -> float:
        return self.window_hours * 3600.0

    @property
    def dimension_names(self) -> tuple[str, ...]:
        return tuple(d.name for d in self.dimensions)

    @property
    def weight_total(self) -> float:
        return sum(d.weight for d in self.dimensions)

    @property
    def scored_dimensions(self) -> tuple[str, ...]:
        """Dimensions that can move a score; zero-weight ones are ignored by matching."""
        return tuple(d.name for d in self.dimensions if d.weight > 0)

    def dimension(self, name: str) -> DimensionConfig:
        for d in self.dimensions:
            if d.name == name:
                return d
        raise KeyError(name)


@dataclass(frozen=True)
class Snippet:
    id: str
    source: str
    timestamp: float
    dimensions: Mapping[str, tuple[str, ...]] = field(default_factory=dict)

    def __post_init__(self) -> None:
        object.__setattr__(
            self, "dimensions", {k: tuple(v) for k, v in self.dimensions.items()}
        )

    @classmethod
    def from_json(cls, obj: Mapping[str, Any]) -> Snippet:
        try:
            dims = obj.get("dims", {})
            if not isinstance(dims, Mapping):
                raise ValidationError("'dims' must be an object")
            for name, tokens in dims.items():
                if isinstance(tokens, str) or not isinstance(tokens, (list, tuple)):
                    raise ValidationError(f"dimension {name!r} must be a list of tokens")
            return cls(str(obj["id"]), str(obj["source"]), float(obj["ts"]), dims)
        except KeyError as exc:
            raise ValidationError(f"missing field {exc.args[0]!r}") from None
        except (TypeError, ValueError) as exc:
            if isinstance(exc, ValidationError):
                raise
            raise ValidationError(str(exc)) from None

    def to_json(self) -> dict[str, Any]:
        ts = int(self.timestamp) if float(self.timestamp).is_integer() else self.timestamp
        return {
            "id": self.id,
            "source": self.source,
            "ts": ts,
            "dims": {k: list(v) for k, v in self.dimensions.items()},
        }


def validate_snippet(snippet: Snippet, cfg: EngineConfig) -> None:
    if not snippet.id:
        raise ValidationError("snippet id must be non-empty")
    if not snippet.source:
        raise ValidationError(f"snippet {snippet.id}: source must be non-empty")
    if not math.isfinite(snippet.timestamp):
        raise ValidationError(f"snippet {snippet.id}: timestamp must be finite")
    unknown = sorted(set(snippet.dimensions) - set(cfg.dimension_names))
    if unknown:
        raise ValidationError(
            f"snippet {snippet.id}: unknown dimension(s): {', '.join(unknown)}"
        )


def window_of(timestamp: float, cfg: EngineConfig) -> int:
    return math.floor((timestamp - cfg.origin) / cfg.window_seconds)


def span_of(window: int, cfg: EngineConfig) -> int:
    """Index of the top-level span that contains a base window."""
    return window // cfg.top_window_span


def top_k_view(counts: Mapping[str, int], k: int | None) -> dict[str, int]:
    """Most frequent ``k`` tokens; ties broken by token order."""
    ordered = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
    if k is not None:
        ordered = ordered[:k]
    return dict(ordered)


def snippet_views(snippet: Snippet, cfg: EngineConfig) -> Views:
    views: Views = {}
    for d in cfg.dimensions:
        tokens = snippet.dimensions.get(d.name, ())
        views[d.name] = top_k_view(Counter(tokens), d.top_k) if tokens else {}
    return views


class Sketch:
    """Aggregate of snippets (level 0) or of base sketches (level 1).

    Full token counts are always kept; ``views`` is the top-k truncation used
    for scoring and indexing.
    """

    __slots__ = ("id", "source", "window", "level", "seq", "counts", "members", "_views")

    def __init__(
        self,
        id: str,
        source: str,
        window: int,
        level: int = 0,
        seq: int = 0,
        counts: dict[str, Counter] | None = None,
        members: set[str] | None = None,
    ) -> None:
        self.id = id
        self.source = source
        self.window = window
        self.level = level
        self.seq = seq
        self.counts = counts if counts is not None else {}
        self.members = members if members is not None else set()
        self._views: Views | None = None

    def views(self, cfg: EngineConfig) -> Views:
        if self._views is None:
            self._views = {
                d.name: top_k_view(self.counts.get(d.name, {}), d.top_k)
                for d in cfg.dimensions
            }
        return self._views

    def invalidate(self) -> None:
        self._views = None

    def __repr__(self) -> str:
        return (
            f"Sketch({self.id!r}, source={self.source!r}, window={self.window}, "
            f"level={self.level}, members={len(self.members)})"
        )

    def __getstate__(self):
        return (self.id, self.source, self.window, self.level, self.seq, self.counts, self.members, self._views)

    def __setstate__(self, state) -> None:
        (self.id, self.source, self.window, self.level, self.seq, self.counts, self.members, self._views) = state


def create_sketch(snippet: Snippet, cfg: EngineConfig, sketch_id: str | None = None, seq: int = 0) -> Sketch:
    counts = {name: Counter(tokens) for name, tokens in snippet.dimensions.items() if tokens}
    return Sketch(
        id=sketch_id or f"{snippet.source}/v:{snippet.id}",
        source=snippet.source,
        window=window_of(snippet.timestamp, cfg),
        level=0,
        seq=seq,
        counts=counts,
        members={snippet.id},
    )


def merge_snippet(sketch: Sketch, snippet: Snippet, cfg: EngineConfig) -> Sketch:
    if snippet.source != sketch.source:
        raise SourceMismatch(f"snippet {snippet.id} is from {snippet.source}, sketch {sketch.id} from {sketch.source}")
    if sketch.level != 0:
        raise ValueError("snippets merge into level-0 sketches only")
    window = window_of(snippet.timestamp, cfg)
    if window != sketch.window:
        raise WindowMismatch(f"snippet {snippet.id} lies in window {window}, sketch {sketch.id} in {sketch.window}")
    for name, tokens in snippet.dimensions.items():
        if tokens:
            sketch.counts.setdefault(name, Counter()).update(tokens)
    sketch.members.add(snippet.id)
    sketch.invalidate()
    return sketch


def build_top_sketch(children: Iterable[Sketch], cfg: EngineConfig, sketch_id: str | None = None) -> Sketch:
    children = list(children)
    if not children:
        raise ValueError("build_top_sketch needs at least one child")
    source = children[0].source
    span = span_of(children[0].window, cfg)
    counts: dict[str, Counter] = {}
    members: set[str] = set()
    for child in children:
        if child.source != source:
            raise SourceMismatch(f"child {child.id} is from {child.source}, expected {source}")
        if child.level != 0:
            raise ValueError("top sketches are built from level-0 sketches")
        if span_of(child.window, cfg) != span:
            raise SpanViolation(
                f"child {child.id} (window {child.window}) falls outside span {span} "
                f"of {cfg.top_window_span} windows"
            )
        for name, c in child.counts.items():
            counts.setdefault(name, Counter()).update(c)
        members.add(child.id)
    return Sketch(
        id=sketch_id or f"{source}/top:{span}:{min(c.id for c in children)}",
        source=source,
        window=span,
        level=1,
        seq=min(c.seq for c in children),
        counts=counts,
        members=members,
    )
