"""Pairwise linkage quality of a story assignment against ground truth."""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from typing import Mapping

from ..errors import MissingAssignment


@dataclass(frozen=True)
class QualityReport:
    precision: float
    recall: float
    f_measure: float
    true_pairs: int
    predicted_pairs: int
    correct_pairs: int
    # story size -> number of predicted stories of that size
    histogram: dict[int, int] = field(default_factory=dict)

    def row(self) -> tuple[float, float, float]:
        return (self.precision, self.recall, self.f_measure)


def _pairs(sizes) -> int:
    return sum(n * (n - 1) // 2 for n in sizes)


def evaluate(assignments: Mapping[str, str], truth: Mapping[str, str]) -> QualityReport:
    """Pairwise precision/recall over the ids of ``truth``.

    An empty denominator counts as perfect: precision is 1 when the assignment
    links no pair, recall is 1 when the truth holds no pair.
    """
    missing = sorted(set(truth) - set(assignments))
    if missing:
        raise MissingAssignment(missing)
    predicted = Counter(assignments[i] for i in truth)
    actual = Counter(truth.values())
    joint = Counter((assignments[i], t) for i, t in truth.items())
    p_pairs = _pairs(predicted.values())
    t_pairs = _pairs(actual.values())
    both = _pairs(joint.values())
    precision = both / p_pairs if p_pairs else 1.0
    recall = both / t_pairs if t_pairs else 1.0
    f = 2 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0
    histogram = dict(sorted(Counter(predicted.values()).items()))
    return QualityReport(precision, recall, f, t_pairs, p_pairs, both, histogram)
