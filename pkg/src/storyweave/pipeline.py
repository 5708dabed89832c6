"""Ingestion orchestration under the SP, ROUND and SEQU execution models.

Every mode runs the same two steps per snippet: the owning source partition
integrates it (sketch, graph, clusters, top sketches) and emits a
:class:`LaneResult`; the coordinator then publishes the changed top sketches
and realigns the dirty clusters across sources. The modes differ only in who
runs those steps and when:

* SEQU: one worker, strict arrival order, alignment after every snippet.
* SP: one lane per source (threads or processes) with window-parallel
  candidate search inside a lane; a single coordinator coalesces lane results
  and aligns with a per-foreign-source pool.
* ROUND: ``workers`` threads take snippets round robin regardless of source
  and share the partitions; a per-source turnstile keeps each source's
  snippets in order, so workers stall on each other instead of corrupting
  state.
"""

from __future__ import annotations

import enum
import logging
import multiprocessing as mp
import queue
import threading
import time
import traceback
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable

from .alignment import ClusterRelationshipGraph, refresh_top_sketches
from .errors import AlreadyRunning, DuplicateSource, StoryweaveError, UnknownSource
from .model import EngineConfig, Mode, Sketch, Snippet, span_of, validate_snippet
from .srg import Path, SketchRelationshipGraph

log = logging.getLogger(__name__)


class LaneState(str, enum.Enum):
    CATCHING_UP = "CATCHING_UP"
    STREAMING = "STREAMING"


@dataclass
class IngestReport:
    ticket: int
    snippet_id: str
    source: str
    enqueued_at: float
    completed_at: float | None = None
    sketch_id: str | None = None
    cluster_id: str | None = None
    aligned_story_id: str | None = None
    path: Path | None = None

    @property
    def latency_ms(self) -> float:
        return self.completed_at - self.enqueued_at


@dataclass
class SourceLane:
    source: str
    state: LaneState = LaneState.STREAMING
    backlog_pending: int = 0
    submitted: int = 0


@dataclass
class LaneResult:
    ticket: int
    snippet_id: str
    source: str
    sketch_id: str
    path: Path
    dirty: set[str]
    # (cluster id, top sketches by span or None when retired, full replacement?)
    deltas: list[tuple[str, dict | None, bool]] = field(default_factory=list)


def _wire(top: Sketch, cfg: EngineConfig) -> Sketch:
    """Copy of a top sketch that carries only its scoring view."""
    views = top.views(cfg)
    return Sketch(top.id, top.source, top.window, top.level, top.seq,
                  counts={d: dict(v) for d, v in views.items() if v}, members=set(top.members))


class SourcePartition:
    """Everything one source owns: its sketch graph and its clusters' top sketches."""

    def __init__(self, source: str, cfg: EngineConfig, window_pool=None, pool_width: int = 1) -> None:
        self.source = source
        self.cfg = cfg
        self.srg = SketchRelationshipGraph(source, cfg, window_pool, pool_width)

    def process(self, ticket: int, snippet: Snippet) -> LaneResult:
        step = self.srg.integrate_snippet(snippet)
        sketch = self.srg.sketches[step.sketch_id]
        deltas: list[tuple[str, dict | None, bool]] = []
        # retirements first so a successor's publish wins
        for cid in sorted(step.dirty, key=lambda c: self.srg.root_of(c) is not None):
            if self.srg.root_of(cid) is None:
                deltas.append((cid, None, True))
                continue
            members = self.srg.cluster_members(cid)
            full = cid in step.reshaped
            spans = None if full else (span_of(sketch.window, self.cfg),)
            tops = refresh_top_sketches(cid, members, self.cfg, spans)
            tops = {s: (None if t is None else _wire(t, self.cfg)) for s, t in tops.items()}
            deltas.append((cid, tops, full))
        return LaneResult(ticket, snippet.id, self.source, step.sketch_id, step.path, step.dirty, deltas)


class _Coordinator:
    """Publishes lane results, runs alignment and completes reports."""

    def __init__(self, engine: Engine, pool=None) -> None:
        self.engine = engine
        self.crg = engine.crg
        self.crg.pool = pool
        self.lock = threading.RLock()

    def absorb(self, results: list[LaneResult]) -> None:
        eng = self.engine
        with self.lock:
            dirty: set[str] = set()
            for r in results:
                eng.snippet_sketch[r.snippet_id] = r.sketch_id
                eng.snippet_source[r.snippet_id] = r.source
                for cid, tops, full in r.deltas:
                    self.crg.publish(r.source, cid, tops, full)
                    if tops:
                        for top in tops.values():
                            if top is not None:
                                for child in top.members:
                                    eng.sketch_cluster[child] = cid
                dirty |= r.dirty
            self.crg.align(dirty)
            now = eng.clock()
            for r in results:
                rep = eng.reports[r.ticket]
                rep.sketch_id = r.sketch_id
                rep.path = r.path
                rep.cluster_id = eng.sketch_cluster[r.sketch_id]
                rep.aligned_story_id = self.crg.aligned_story_of(rep.cluster_id)
                rep.completed_at = now
                lane = eng.lanes[r.source]
                if lane.backlog_pending and r.ticket in eng.backlog_tickets:
                    eng.backlog_tickets.discard(r.ticket)
                    lane.backlog_pending -= 1
                    if not lane.backlog_pending:
                        lane.state = LaneState.STREAMING
        eng._completed(len(results))


class _Runner:
    def __init__(self, engine: Engine, workers: int) -> None:
        self.engine = engine
        self.cfg = engine.cfg
        self.workers = workers

    def start(self) -> None:
        raise NotImplementedError

    def add_source(self, source: str, dedicated: bool) -> None:
        pass

    def submit(self, ticket: int, snippet: Snippet) -> None:
        raise NotImplementedError

    def stop(self) -> None:
        raise NotImplementedError

    def _guard(self, fn, *args) -> None:
        try:
            fn(*args)
        except BaseException as exc:  # surfaced by quiesce()
            self.engine._fail(exc)


class _SequentialRunner(_Runner):
    def start(self) -> None:
        self.coordinator = _Coordinator(self.engine)
        self.inbox: queue.Queue = queue.Queue()
        self.thread = threading.Thread(target=self._guard, args=(self._loop,), name="sequ", daemon=True)
        self.thread.start()

    def submit(self, ticket, snippet) -> None:
        self.inbox.put((ticket, snippet))

    def _loop(self) -> None:
        eng = self.engine
        while True:
            item = self.inbox.get()
            if item is None:
                return
            ticket, snippet = item
            result = eng.partition(snippet.source).process(ticket, snippet)
            self.coordinator.absorb([result])

    def stop(self) -> None:
        self.inbox.put(None)
        self.thread.join()


class _RoundRobinRunner(_Runner):
    def start(self) -> None:
        self.coordinator = _Coordinator(self.engine)
        self.turn_cond = threading.Condition()
        self.turn: dict[str, int] = {}
        self.seq_of: dict[int, int] = {}
        self.next_seq: dict[str, int] = {}
        self.inboxes = [queue.Queue() for _ in range(self.workers)]
        self.threads = [
            threading.Thread(target=self._guard, args=(self._loop, q), name=f"round-{i}", daemon=True)
            for i, q in enumerate(self.inboxes)
        ]
        self.dispatched = 0
        for t in self.threads:
            t.start()

    def submit(self, ticket, snippet) -> None:
        with self.turn_cond:
            seq = self.next_seq.get(snippet.source, 0)
            self.next_seq[snippet.source] = seq + 1
            self.turn.setdefault(snippet.source, 0)
        self.inboxes[self.dispatched % self.workers].put((ticket, seq, snippet))
        self.dispatched += 1

    def _loop(self, inbox: queue.Queue) -> None:
        eng = self.engine
        while True:
            item = inbox.get()
            if item is None:
                return
            ticket, seq, snippet = item
            source = snippet.source
            with self.turn_cond:
                self.turn_cond.wait_for(lambda: self.turn[source] == seq)
            try:
                result = eng.partition(source).process(ticket, snippet)
                self.coordinator.absorb([result])
            finally:
                with self.turn_cond:
                    self.turn[source] = seq + 1
                    self.turn_cond.notify_all()

    def stop(self) -> None:
        for q in self.inboxes:
            q.put(None)
        for t in self.threads:
            t.join()


class _ThreadLanesRunner(_Runner):
    """SP with one thread per source lane, sharing memory with the coordinator."""

    def start(self) -> None:
        width = min(self.cfg.comparison_interval, self.workers)
        self.window_pool = ThreadPoolExecutor(width, thread_name_prefix="window") if width > 1 else None
        self.width = width
        self.align_pool = ThreadPoolExecutor(self.workers, thread_name_prefix="align") if self.workers > 1 else None
        self.coordinator = _Coordinator(self.engine, self.align_pool)
        self.results: queue.Queue = queue.Queue()
        self.inboxes: dict[str, queue.Queue] = {}
        self.threads: list[threading.Thread] = []
        self.collector = threading.Thread(target=self._guard, args=(self._collect,), name="coordinator", daemon=True)
        self.collector.start()
        for source in list(self.engine.lanes):
            self.add_source(source, dedicated=False)

    def add_source(self, source: str, dedicated: bool) -> None:
        part = self.engine.partition(source)
        part.srg.window_pool = self.window_pool
        part.srg.pool_width = self.width
        inbox: queue.Queue = queue.Queue()
        self.inboxes[source] = inbox
        t = threading.Thread(target=self._guard, args=(self._lane, part, inbox), name=f"lane-{source}", daemon=True)
        self.threads.append(t)
        t.start()

    def submit(self, ticket, snippet) -> None:
        self.inboxes[snippet.source].put((ticket, snippet))

    def _lane(self, part: SourcePartition, inbox: queue.Queue) -> None:
        while True:
            item = inbox.get()
            if item is None:
                return
            self.results.put(part.process(*item))

    def _collect(self) -> None:
        while True:
            first = self.results.get()
            if first is None:
                return
            batch = [first]
            stop = False
            while True:
                try:
                    item = self.results.get_nowait()
                except queue.Empty:
                    break
                if item is None:
                    stop = True
                    break
                batch.append(item)
            self.coordinator.absorb(batch)
            if stop:
                return

    def stop(self) -> None:
        for q in self.inboxes.values():
            q.put(None)
        for t in self.threads:
            t.join()
        self.results.put(None)
        self.collector.join()
        for pool in (self.window_pool, self.align_pool):
            if pool is not None:
                pool.shutdown()


def _lane_process_main(cfg: EngineConfig, inbox, outbox, width: int) -> None:
    pool = ThreadPoolExecutor(width) if width > 1 else None
    parts: dict[str, SourcePartition] = {}
    try:
        while True:
            batch = inbox.get()
            if batch is None:
                break
            results = []
            for ticket, snippet in batch:
                part = parts.get(snippet.source)
                if part is None:
                    part = parts[snippet.source] = SourcePartition(snippet.source, cfg, pool, width)
                results.append(part.process(ticket, snippet))
            outbox.put(results)
    except BaseException:
        outbox.put(("error", traceback.format_exc()))
    finally:
        if pool is not None:
            pool.shutdown()


class _ProcessLanesRunner(_Runner):
    """SP with source lanes sharded over worker processes.

    Each source is pinned to one process for its lifetime, so per-source
    order and state ownership hold exactly as with lane threads; sources
    added later get a process of their own.
    """

    def start(self) -> None:
        self.ctx = mp.get_context("forkserver" if "forkserver" in mp.get_all_start_methods() else "spawn")
        self.align_pool = ThreadPoolExecutor(self.workers, thread_name_prefix="align") if self.workers > 1 else None
        self.coordinator = _Coordinator(self.engine, self.align_pool)
        self.outbox = self.ctx.Queue()
        self.procs: list = []
        self.inboxes: list = []
        self.home: dict[str, int] = {}
        sources = list(self.engine.lanes)
        count = max(1, min(self.workers, len(sources)))
        self.width = max(1, min(self.cfg.comparison_interval, self.workers // count))
        for _ in range(count):
            self._spawn()
        for i, source in enumerate(sources):
            self.home[source] = i % count
        self.pending: dict[int, list] = {}
        self.collector = threading.Thread(target=self._guard, args=(self._collect,), name="coordinator", daemon=True)
        self.collector.start()

    def _spawn(self) -> int:
        inbox = self.ctx.Queue()
        proc = self.ctx.Process(target=_lane_process_main, args=(self.cfg, inbox, self.outbox, self.width), daemon=True)
        proc.start()
        self.procs.append(proc)
        self.inboxes.append(inbox)
        return len(self.procs) - 1

    def add_source(self, source: str, dedicated: bool) -> None:
        self.home[source] = self._spawn() if dedicated else len(self.home) % len(self.procs)

    def submit(self, ticket, snippet) -> None:
        self.inboxes[self.home[snippet.source]].put([(ticket, snippet)])

    def submit_many(self, items: list[tuple[int, Snippet]]) -> None:
        by_proc: dict[int, list] = {}
        for ticket, snippet in items:
            by_proc.setdefault(self.home[snippet.source], []).append((ticket, snippet))
        for i, batch in by_proc.items():
            self.inboxes[i].put(batch)

    def _next(self):
        while True:
            try:
                return self.outbox.get(timeout=0.5)
            except queue.Empty:
                dead = [p for p in self.procs if p.exitcode not in (None, 0)]
                if dead:
                    raise StoryweaveError(f"lane process exited with code {dead[0].exitcode}") from None

    def _collect(self) -> None:
        while True:
            item = self._next()
            if item is None:
                return
            if isinstance(item, tuple) and item[0] == "error":
                raise StoryweaveError(f"lane process failed:\n{item[1]}")
            batch = list(item)
            while True:
                try:
                    more = self.outbox.get_nowait()
                except queue.Empty:
                    break
                if more is None:
                    self.coordinator.absorb(batch)
                    return
                if isinstance(more, tuple) and more[0] == "error":
                    raise StoryweaveError(f"lane process failed:\n{more[1]}")
                batch.extend(more)
            self.coordinator.absorb(batch)

    def stop(self) -> None:
        for q in self.inboxes:
            q.put(None)
        for p in self.procs:
            p.join()
        self.outbox.put(None)
        self.collector.join()
        if self.align_pool is not None:
            self.align_pool.shutdown()


class Engine:
    """Online event-integration engine.

    >>> eng = Engine(cfg, sources=["s1", "s2"])      # doctest: +SKIP
    >>> eng.run_mode(Mode.SP, workers=4)             # doctest: +SKIP
    >>> eng.submit(snippet); eng.quiesce()           # doctest: +SKIP
    """

    def __init__(self, cfg: EngineConfig, sources: Iterable[str] = ()) -> None:
        self.cfg = cfg
        self.crg = ClusterRelationshipGraph(cfg)
        self.lanes: dict[str, SourceLane] = {}
        self.partitions: dict[str, SourcePartition] = {}
        self.reports: dict[int, IngestReport] = {}
        self.snippet_sketch: dict[str, str] = {}
        self.snippet_source: dict[str, str] = {}
        self.sketch_cluster: dict[str, str] = {}
        self.backlog_tickets: set[int] = set()
        self.mode: Mode | None = None
        self.backend: str | None = None
        self._runner: _Runner | None = None
        self._cond = threading.Condition()
        self._submitted = 0
        self._done = 0
        self._error: BaseException | None = None
        self._t0 = time.perf_counter()
        for s in sources:
            self.register_source(s)

    def clock(self) -> float:
        """Engine clock in milliseconds."""
        return (time.perf_counter() - self._t0) * 1000.0

    @property
    def running(self) -> bool:
        return self._runner is not None

    def register_source(self, source: str) -> None:
        if not source:
            raise StoryweaveError("source id must be non-empty")
        if source in self.lanes:
            raise DuplicateSource(f"source {source} is already registered")
        self.lanes[source] = SourceLane(source)
        if self._runner is not None:
            self._runner.add_source(source, dedicated=False)

    def partition(self, source: str) -> SourcePartition:
        part = self.partitions.get(source)
        if part is None:
            if source not in self.lanes:
                raise UnknownSource(f"source {source} is not registered")
            part = self.partitions[source] = SourcePartition(source, self.cfg)
        return part

    def run_mode(self, mode: Mode | str | None = None, workers: int | None = None,
                 backend: str | None = None) -> None:
        if self._runner is not None:
            raise AlreadyRunning(f"engine is already running in {self.mode.value} mode")
        mode = Mode(mode or self.cfg.mode)
        workers = workers or self.cfg.workers
        if mode is Mode.SEQU:
            runner, backend = _SequentialRunner(self, 1), "thread"
        elif mode is Mode.ROUND:
            runner, backend = _RoundRobinRunner(self, workers), "thread"
        else:
            backend = backend or "thread"
            if backend == "process":
                runner = _ProcessLanesRunner(self, workers)
            elif backend == "thread":
                runner = _ThreadLanesRunner(self, workers)
            else:
                raise ValueError(f"unknown backend {backend!r}")
        self.mode, self.backend = mode, backend
        runner.start()
        self._runner = runner

    def _ticket(self, snippet: Snippet) -> int:
        validate_snippet(snippet, self.cfg)
        lane = self.lanes.get(snippet.source)
        if lane is None:
            raise UnknownSource(f"source {snippet.source} is not registered")
        with self._cond:
            ticket = self._submitted
            self._submitted += 1
        lane.submitted += 1
        self.reports[ticket] = IngestReport(ticket, snippet.id, snippet.source, self.clock())
        return ticket

    def submit(self, snippet: Snippet) -> int:
        if self._runner is None:
            raise StoryweaveError("engine is not running; call run_mode() first")
        ticket = self._ticket(snippet)
        self._runner.submit(ticket, snippet)
        return ticket

    def submit_many(self, snippets: Iterable[Snippet]) -> list[int]:
        if self._runner is None:
            raise StoryweaveError("engine is not running; call run_mode() first")
        items = [(self._ticket(s), s) for s in snippets]
        if isinstance(self._runner, _ProcessLanesRunner):
            self._runner.submit_many(items)
        else:
            for ticket, s in items:
                self._runner.submit(ticket, s)
        return [t for t, _ in items]

    def add_source(self, source: str, backlog: Iterable[Snippet] = ()) -> None:
        """Attach a source while running; its backlog drains before streaming."""
        if source in self.lanes:
            raise DuplicateSource(f"source {source} is already registered")
        backlog = list(backlog)
        for s in backlog:
            if s.source != source:
                raise StoryweaveError(f"backlog snippet {s.id} belongs to {s.source}")
            validate_snippet(s, self.cfg)
        lane = SourceLane(source, LaneState.CATCHING_UP if backlog else LaneState.STREAMING)
        lane.backlog_pending = len(backlog)
        self.lanes[source] = lane
        if self._runner is not None:
            self._runner.add_source(source, dedicated=True)
            for s in backlog:
                ticket = self._ticket(s)
                self.backlog_tickets.add(ticket)
                self._runner.submit(ticket, s)

    def _completed(self, n: int) -> None:
        with self._cond:
            self._done += n
            self._cond.notify_all()

    def _fail(self, exc: BaseException) -> None:
        log.error("worker failed: %s", exc)
        with self._cond:
            if self._error is None:
                self._error = exc
            self._cond.notify_all()

    def quiesce(self, timeout: float | None = None) -> None:
        """Block until every submitted snippet is integrated and aligned."""
        with self._cond:
            ok = self._cond.wait_for(lambda: self._error is not None or self._done >= self._submitted, timeout)
            if self._error is not None:
                raise StoryweaveError(f"ingestion failed: {self._error}") from self._error
            if not ok:
                raise TimeoutError("quiesce timed out")

    def stop(self) -> None:
        if self._runner is None:
            return
        try:
            self.quiesce()
        finally:
            runner, self._runner = self._runner, None
            runner.stop()

    def __enter__(self) -> Engine:
        return self

    def __exit__(self, *exc) -> None:
        self.stop()

    # -- quiesced views -------------------------------------------------

    def story_rows(self) -> list[tuple[str, str, str, str]]:
        """(snippet_id, source, sketch_id, cluster_id) per integrated snippet."""
        return sorted(
            (sid, self.snippet_source[sid], sk, self.sketch_cluster[sk])
            for sid, sk in self.snippet_sketch.items()
        )

    def aligned_rows(self) -> list[tuple[str, str, str]]:
        return self.crg.rows()

    def assignments(self) -> dict[str, str]:
        """Snippet id -> aligned story id."""
        return {
            sid: self.crg.aligned_story_of(self.sketch_cluster[sk])
            for sid, sk in self.snippet_sketch.items()
        }

    def clusters(self) -> dict[str, dict[str, frozenset[str]]]:
        """source -> cluster id -> snippet ids."""
        out: dict[str, dict[str, set[str]]] = {}
        for sid, source, _, cid in self.story_rows():
            out.setdefault(source, {}).setdefault(cid, set()).add(sid)
        return {s: {c: frozenset(m) for c, m in cs.items()} for s, cs in out.items()}

    def ordered_reports(self) -> list[IngestReport]:
        return [self.reports[t] for t in sorted(self.reports)]


def run(snippets: Iterable[Snippet], cfg: EngineConfig, mode: Mode | str | None = None,
        workers: int | None = None, backend: str | None = None) -> Engine:
    """Integrate a finite snippet sequence and return the quiesced, stopped engine."""
    snippets = list(snippets)
    eng = Engine(cfg, dict.fromkeys(s.source for s in snippets))
    eng.run_mode(mode, workers, backend)
    try:
        eng.submit_many(snippets)
    finally:
        eng.stop()
    return eng
