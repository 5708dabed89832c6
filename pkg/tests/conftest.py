from __future__ import annotations

import pytest

from storyweave.model import DimensionConfig, EngineConfig, Metric, Snippet

AUG12 = 1439337600  # 2015-08-12T00:00:00Z
DAY = 86400

# (id, day offset, entities, topics) for source s1 and s2 of the running example
TABLE1_S1 = [
    ("r1_1", 0, ["Kos", "Refugees"], ["Politics", "War"]),
    ("r2_1", 0, ["Kos", "Refugees"], ["Politics"]),
    ("r3_1", 0, ["Spain"], ["People", "Politics"]),
    ("r4_1", 0, ["China"], ["Disaster"]),
    ("r5_1", 1, ["China", "Tianjin"], ["Disaster"]),
    ("r6_1", 1, ["Greece", "Kos"], ["Politics", "War"]),
    ("r7_1", 1, ["Japan", "Tianjin"], ["Disaster"]),
    ("r8_1", 1, ["Italy"], ["Crime", "Politics"]),
    ("r9_1", 2, ["Greece"], ["War"]),
]
TABLE1_S2 = [
    ("r1_2", 0, ["Isis"], ["Politics", "War"]),
    ("r2_2", 0, ["Refugees", "Turkey"], ["People", "War"]),
    ("r3_2", 1, ["Refugees", "Greece"], ["Politics", "War"]),
    ("r4_2", 1, ["Kos", "Refugees"], ["People"]),
    ("r5_2", 1, ["China", "Tianjin"], ["Disaster"]),
]


def table1_snippet(row, source: str, minute: int = 0) -> Snippet:
    sid, day, ents, tops = row
    ts = AUG12 + day * DAY + 12 * 3600 + minute * 60
    return Snippet(sid, source, ts, {"entities": tuple(ents), "topics": tuple(tops)})


def table1(source: str = "s1") -> dict[str, Snippet]:
    rows = TABLE1_S1 if source == "s1" else TABLE1_S2
    return {row[0]: table1_snippet(row, source, i) for i, row in enumerate(rows)}


def example_config(**overrides) -> EngineConfig:
    base = dict(
        window_hours=24,
        origin=AUG12,
        alpha_v=0.3,
        dimensions=(
            DimensionConfig("entities", 0.5, Metric.JACCARD),
            DimensionConfig("topics", 0.5, Metric.JACCARD),
        ),
    )
    base.update(overrides)
    return EngineConfig(**base)


@pytest.fixture
def cfg() -> EngineConfig:
    return example_config()


@pytest.fixture
def s1() -> dict[str, Snippet]:
    return table1("s1")


@pytest.fixture
def s2() -> dict[str, Snippet]:
    return table1("s2")


# one verdict line per acceptance criterion, echoed in the terminal summary
VERDICTS: list[str] = []


@pytest.fixture
def verdict():
    def record(number: int, ok: bool | None, detail: str) -> None:
        tag = {True: "PASS", False: "FAIL", None: "SKIP"}[ok]
        VERDICTS.append(f"criterion {number:>2}: {tag}  {detail}")
        if ok is None:
            pytest.skip(detail)
        assert ok, detail

    return record


def pytest_terminal_summary(terminalreporter):
    if VERDICTS:
        terminalreporter.section("acceptance criteria")
        for line in sorted(VERDICTS, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
