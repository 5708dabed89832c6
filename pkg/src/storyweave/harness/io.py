"""File formats: snippet JSON Lines, flat key=value configs, CSV dumps."""

from __future__ import annotations

import csv
import json
import math
from datetime import datetime, timezone
from pathlib import Path
from typing import Iterable, Iterator, Sequence, TextIO

from ..errors import ConfigError, ParseError, ValidationError
from ..model import DimensionConfig, EngineConfig, Metric, Snippet


def iter_snippets(lines: Iterable[str]) -> Iterator[Snippet]:
    """Parse JSON Lines; blank lines are skipped, errors carry the line number."""
    for n, line in enumerate(lines, 1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ParseError(f"invalid JSON: {exc.msg}", n) from None
        if not isinstance(obj, dict):
            raise ParseError("expected a JSON object", n)
        try:
            yield Snippet.from_json(obj)
        except ValidationError as exc:
            raise ParseError(str(exc), n) from None


def read_snippets(path: str | Path) -> list[Snippet]:
    with open(path, encoding="utf-8") as fh:
        return list(iter_snippets(fh))


def write_snippets(snippets: Iterable[Snippet], out: str | Path | TextIO) -> None:
    def dump(fh: TextIO) -> None:
        for s in snippets:
            fh.write(json.dumps(s.to_json(), sort_keys=True, separators=(",", ":")) + "\n")

    if hasattr(out, "write"):
        dump(out)
    else:
        with open(out, "w", encoding="utf-8") as fh:
            dump(fh)


# -- config ----------------------------------------------------------------

_INT_KEYS = {"comparison_interval", "min_match_dims", "top_window_span", "workers"}
_FLOAT_KEYS = {"window_hours", "alpha_v", "alpha_c", "bloom_fpr"}


def _parse_origin(value: str) -> float:
    try:
        return float(value)
    except ValueError:
        pass
    stamp = datetime.fromisoformat(value)
    if stamp.tzinfo is None:
        stamp = stamp.replace(tzinfo=timezone.utc)
    return stamp.timestamp()


def _parse_dimension(name: str, value: str) -> DimensionConfig:
    """``weight[,metric[,top_k]]`` where top_k may be ``inf``."""
    parts = [p.strip() for p in value.split(",")]
    weight = float(parts[0])
    if len(parts) > 1 and parts[1]:
        metric = Metric(parts[1].lower())
    else:
        metric = DimensionConfig.default(name).metric
    top_k = None
    if len(parts) > 2 and parts[2]:
        k = float(parts[2])
        if not math.isinf(k):
            if not k.is_integer():
                raise ValueError(f"top_k must be an integer, got {parts[2]}")
            top_k = int(k)
    if len(parts) > 3:
        raise ValueError("expected weight,metric,top_k")
    return DimensionConfig(name, weight, metric, top_k)


def parse_config(text: str) -> EngineConfig:
    """Build an EngineConfig from ``key=value`` lines.

    Dimensions are given as ``dim.<name>=weight,metric,top_k``; when any are
    present they replace the default dimension set, in file order.
    """
    fields: dict[str, object] = {}
    dims: list[DimensionConfig] = []
    for n, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if not sep or not key:
            raise ParseError(f"expected key=value, got {raw.strip()!r}", n)
        try:
            if key.startswith("dim."):
                dims.append(_parse_dimension(key[4:], value))
            elif key in _INT_KEYS:
                fields[key] = int(value)
            elif key in _FLOAT_KEYS:
                fields[key] = float(value)
            elif key == "origin":
                fields[key] = _parse_origin(value)
            elif key == "mode":
                fields[key] = value.lower()
            else:
                raise ConfigError(f"unknown config key {key!r}")
        except ConfigError as exc:
            raise ParseError(str(exc), n) from None
        except ValueError as exc:
            raise ParseError(f"{key}: {exc}", n) from None
    if dims:
        fields["dimensions"] = tuple(dims)
    return EngineConfig(**fields)


def read_config(path: str | Path) -> EngineConfig:
    return parse_config(Path(path).read_text(encoding="utf-8"))


def format_config(cfg: EngineConfig) -> str:
    lines = [
        f"window_hours={cfg.window_hours!r}",
        f"comparison_interval={cfg.comparison_interval}",
        f"alpha_v={cfg.alpha_v!r}",
        f"alpha_c={cfg.alpha_c!r}",
        f"min_match_dims={cfg.min_match_dims}",
        f"top_window_span={cfg.top_window_span}",
        f"bloom_fpr={cfg.bloom_fpr!r}",
        f"mode={cfg.mode.value}",
        f"workers={cfg.workers}",
        f"origin={cfg.origin!r}",
    ]
    for d in cfg.dimensions:
        k = "inf" if d.top_k is None else d.top_k
        lines.append(f"dim.{d.name}={d.weight!r},{d.metric.value},{k}")
    return "\n".join(lines) + "\n"


# -- CSV -------------------------------------------------------------------

STORY_HEADER = ("snippet_id", "source", "sketch_id", "cluster_id")
ALIGNED_HEADER = ("cluster_id", "source", "aligned_story_id")
METRICS_HEADER = ("virtual_day", "throughput", "mean_latency_ms")


def write_csv(path: str | Path, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)


def read_csv(path: str | Path, required: Sequence[str]) -> list[dict[str, str]]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        missing = [c for c in required if c not in (reader.fieldnames or ())]
        if missing:
            raise ParseError(f"{path}: missing column(s) {', '.join(missing)}", 1)
        return list(reader)


def read_truth(path: str | Path) -> dict[str, str]:
    """Ground truth CSV with columns ``snippet_id,story``."""
    return {r["snippet_id"]: r["story"] for r in read_csv(path, ("snippet_id", "story"))}


def write_truth(path: str | Path, truth: dict[str, str]) -> None:
    write_csv(path, ("snippet_id", "story"), sorted(truth.items()))


def read_assignments(stories: str | Path, aligned: str | Path | None = None) -> dict[str, str]:
    """Snippet -> story from a story dump, lifted to aligned stories if given."""
    rows = read_csv(stories, STORY_HEADER)
    out = {r["snippet_id"]: r["cluster_id"] for r in rows}
    if aligned is not None:
        lift = {r["cluster_id"]: r["aligned_story_id"] for r in read_csv(aligned, ALIGNED_HEADER)}
        out = {sid: lift.get(cid, cid) for sid, cid in out.items()}
    return out
