"""Time-compressed replay of a snippet log against a running engine."""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from ..errors import ParseError, ValidationError
from ..model import EngineConfig, Mode, Snippet
from ..pipeline import Engine
from .evaluate import QualityReport, evaluate
from .io import read_snippets

DAY = 86400.0


@dataclass(frozen=True)
class ReplaySpec:
    data: str | Path | None = None
    # virtual seconds per wall second; inf replays as fast as possible
    compression: float = math.inf
    mode: Mode | str | None = None
    schedule: Sequence[tuple[float, str]] = ()
    workers: int | None = None
    backend: str | None = None

    def __post_init__(self) -> None:
        if not self.compression > 0:
            raise ValidationError("compression must be > 0")
        schedule = tuple((float(d), str(s)) for d, s in self.schedule)
        days = [d for d, _ in schedule]
        if days != sorted(days):
            raise ValidationError("schedule days must be non-decreasing")
        if any(d < 0 for d in days):
            raise ValidationError("schedule days must be >= 0")
        if len({s for _, s in schedule}) != len(schedule):
            raise ValidationError("a source may be scheduled only once")
        object.__setattr__(self, "schedule", schedule)


@dataclass(frozen=True)
class PerfRow:
    virtual_day: int
    throughput: int
    mean_latency_ms: float


@dataclass
class PerfReport:
    rows: list[PerfRow] = field(default_factory=list)
    snippets: int = 0
    wall_seconds: float = 0.0

    @property
    def throughput_per_second(self) -> float:
        return self.snippets / self.wall_seconds if self.wall_seconds > 0 else math.inf


@dataclass
class ReplayResult:
    quality: QualityReport | None
    perf: PerfReport
    engine: Engine
    # ticket -> virtual day in which the snippet was released to the engine
    release_day: dict[int, int] = field(default_factory=dict)

    def __iter__(self):
        return iter((self.quality, self.perf))


def read_schedule(path: str | Path) -> list[tuple[float, str]]:
    """Lines of ``day,source`` (or whitespace separated); ``#`` starts a comment."""
    out = []
    for n, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.replace(",", " ").split()
        if len(parts) != 2:
            raise ParseError("expected 'day,source'", n)
        try:
            out.append((float(parts[0]), parts[1]))
        except ValueError:
            raise ParseError(f"bad day {parts[0]!r}", n) from None
    return out


def replay(spec: ReplaySpec, cfg: EngineConfig, truth: Mapping[str, str] | None = None,
           snippets: Iterable[Snippet] | None = None) -> ReplayResult:
    """Release snippets on a virtual clock and collect per-day metrics.

    Virtual time starts at the earliest snippet. Sources named in the schedule
    join at their day with everything they produced before it as backlog.
    """
    if snippets is None:
        if spec.data is None:
            raise ValidationError("replay needs a dataset path or snippets")
        snippets = read_snippets(spec.data)
    stream = sorted(snippets, key=lambda s: s.timestamp)
    start = stream[0].timestamp if stream else 0.0
    scheduled = {src: day for day, src in spec.schedule}
    initial = list(dict.fromkeys(s.source for s in stream if s.source not in scheduled))

    engine = Engine(cfg, initial)
    release_day: dict[int, int] = {}
    held: dict[str, list[Snippet]] = {src: [] for src in scheduled}
    pending = list(spec.schedule)
    batch: list[Snippet] = []
    t0 = time.perf_counter()

    def vday(ts: float) -> int:
        return math.floor((ts - start) / DAY)

    def wait_until(virtual: float) -> None:
        if math.isinf(spec.compression):
            return
        delay = (virtual - start) / spec.compression - (time.perf_counter() - t0)
        if delay > 0:
            time.sleep(delay)

    def flush(day: int) -> None:
        if batch:
            for ticket in engine.submit_many(batch):
                release_day[ticket] = day
            batch.clear()

    def admit(day: float, source: str) -> None:
        wait_until(start + day * DAY)
        flush(math.floor(day))
        before = set(engine.reports)
        engine.add_source(source, held.pop(source))
        for ticket in set(engine.reports) - before:
            release_day[ticket] = math.floor(day)

    engine.run_mode(spec.mode, spec.workers, spec.backend)
    try:
        for snippet in stream:
            while pending and snippet.timestamp >= start + pending[0][0] * DAY:
                admit(*pending.pop(0))
            if snippet.source in held:
                held[snippet.source].append(snippet)
                continue
            if not math.isinf(spec.compression):
                flush(vday(snippet.timestamp))
                wait_until(snippet.timestamp)
            elif batch and vday(batch[-1].timestamp) != vday(snippet.timestamp):
                flush(vday(batch[-1].timestamp))
            batch.append(snippet)
        if batch:
            flush(vday(batch[-1].timestamp))
        while pending:
            admit(*pending.pop(0))
        engine.quiesce()
    finally:
        engine.stop()
    wall = time.perf_counter() - t0

    buckets: dict[int, list[float]] = {}
    for report in engine.ordered_reports():
        buckets.setdefault(release_day[report.ticket], []).append(report.latency_ms)
    rows = [
        PerfRow(day, len(lat), math.fsum(lat) / len(lat))
        for day, lat in sorted(buckets.items())
    ]
    perf = PerfReport(rows, len(engine.reports), wall)
    quality = evaluate(engine.assignments(), truth) if truth is not None else None
    return ReplayResult(quality, perf, engine, release_day)
