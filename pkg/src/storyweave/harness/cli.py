"""Command line entry point: run, gen, eval, stats."""

from __future__ import annotations

import argparse
import csv
import logging
import math
import sys
from collections import Counter
from pathlib import Path

from ..errors import StoryweaveError, ValidationError
from ..model import EngineConfig
from .evaluate import evaluate
from .generate import GenSpec, generate
from .io import (
    ALIGNED_HEADER,
    METRICS_HEADER,
    STORY_HEADER,
    read_assignments,
    read_config,
    read_snippets,
    read_truth,
    write_csv,
    write_snippets,
    write_truth,
)
from .replay import DAY, ReplaySpec, read_schedule, replay

log = logging.getLogger("storyweave")

EXIT_OK, EXIT_VALIDATION, EXIT_RUNTIME = 0, 1, 2


def _compression(text: str) -> float:
    value = float(text)
    if not value > 0:
        raise argparse.ArgumentTypeError("compression must be > 0")
    return value


def cmd_run(args: argparse.Namespace) -> int:
    cfg = read_config(args.config) if args.config else EngineConfig()
    schedule = read_schedule(args.schedule) if args.schedule else ()
    spec = ReplaySpec(args.data, args.compression, args.mode, schedule, args.workers, args.backend)
    truth = read_truth(args.truth) if args.truth else None
    result = replay(spec, cfg, truth)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_csv(out / "metrics.csv", METRICS_HEADER,
              ((r.virtual_day, r.throughput, f"{r.mean_latency_ms:.3f}") for r in result.perf.rows))
    write_csv(out / "stories.csv", STORY_HEADER, result.engine.story_rows())
    write_csv(out / "aligned.csv", ALIGNED_HEADER, result.engine.aligned_rows())
    log.info("integrated %d snippets in %.2fs", result.perf.snippets, result.perf.wall_seconds)
    if result.quality is not None:
        print("precision,recall,f_measure")
        print(",".join(f"{v:.6f}" for v in result.quality.row()))
    return EXIT_OK


def cmd_gen(args: argparse.Namespace) -> int:
    spec = GenSpec.load(args.spec)
    snippets, truth = generate(spec, args.seed)
    write_snippets(snippets, args.out)
    truth_path = Path(args.truth) if args.truth else Path(args.out).with_suffix(".truth.csv")
    write_truth(truth_path, truth)
    log.info("wrote %d snippets to %s and truth to %s", len(snippets), args.out, truth_path)
    return EXIT_OK


def cmd_eval(args: argparse.Namespace) -> int:
    assignments = read_assignments(args.stories, args.aligned)
    report = evaluate(assignments, read_truth(args.truth))
    print("precision,recall,f_measure")
    print(",".join(f"{v:.6f}" for v in report.row()))
    return EXIT_OK


def cmd_stats(args: argparse.Namespace) -> int:
    snippets = read_snippets(args.data)
    counts: Counter[tuple[int, str]] = Counter()
    if snippets:
        start = min(s.timestamp for s in snippets)
        for s in snippets:
            counts[(math.floor((s.timestamp - start) / DAY), s.source)] += 1
    w = csv.writer(sys.stdout, lineterminator="\n")
    w.writerow(("day", "source", "snippets"))
    for (day, source), n in sorted(counts.items()):
        w.writerow((day, source, n))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="storyweave", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="replay a snippet log and dump stories and metrics")
    p.add_argument("--data", required=True, help="snippets as JSON Lines")
    p.add_argument("--config", help="key=value engine config")
    p.add_argument("--mode", choices=("sp", "round", "sequ"))
    p.add_argument("--compression", type=_compression, default=math.inf,
                   help="virtual seconds per wall second (default: inf)")
    p.add_argument("--schedule", help="source additions, one 'day,source' per line")
    p.add_argument("--workers", type=int)
    p.add_argument("--backend", choices=("thread", "process"))
    p.add_argument("--truth", help="ground truth CSV; prints P,R,F when given")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("gen", help="generate a synthetic corpus with ground truth")
    p.add_argument("--spec", required=True, help="generator spec (JSON)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="output JSON Lines file")
    p.add_argument("--truth", help="truth CSV path (default: <out>.truth.csv)")
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("eval", help="pairwise precision, recall and F of a story dump")
    p.add_argument("--stories", required=True, help="stories.csv from 'run'")
    p.add_argument("--truth", required=True, help="truth CSV (snippet_id,story)")
    p.add_argument("--aligned", help="aligned.csv; scores aligned stories instead of clusters")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("stats", help="snippets per day and source as CSV")
    p.add_argument("--data", required=True)
    p.set_defaults(func=cmd_stats)
    return parser


def main(argv: list[str] | None = None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        # argparse exits with 2 on usage errors; those are validation failures here
        return EXIT_VALIDATION if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (ValidationError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except StoryweaveError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
