"""Evaluation arithmetic: ETR, BDR, micro P/R/F1, error gaps, plateau stats,
and the buggy/non-buggy confusion matrix.

Undefined ratios (zero denominators) come back as None rather than a fake
zero, so report renderers can flag them.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence


@dataclass
class SessionMetrics:
    generated: int = 0
    effective: int = 0
    etr: Optional[float] = None
    bdr: int = 0
    tests_to_next_error: list[int] = field(default_factory=list)
    plateau_intervals: list[tuple[int, int]] = field(default_factory=list)
    total_plateau: int = 0
    verified: bool = False

    def to_dict(self) -> dict:
        return {
            "generated": self.generated,
            "effective": self.effective,
            "etr": self.etr,
            "bdr": self.bdr,
            "tests_to_next_error": list(self.tests_to_next_error),
            "plateau_intervals": [list(iv) for iv in self.plateau_intervals],
            "total_plateau": self.total_plateau,
            "verified": self.verified,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "SessionMetrics":
        return cls(
            generated=data["generated"],
            effective=data["effective"],
            etr=data["etr"],
            bdr=data["bdr"],
            tests_to_next_error=list(data["tests_to_next_error"]),
            plateau_intervals=[tuple(iv) for iv in data["plateau_intervals"]],
            total_plateau=data["total_plateau"],
            verified=data.get("verified", False),
        )


@dataclass
class CorpusMetrics:
    tp: int = 0
    fp: int = 0
    fn: int = 0
    precision: Optional[float] = None
    recall: Optional[float] = None
    f1: Optional[float] = None
    averaging: str = "micro"

    def to_dict(self) -> dict:
        return {
            "tp": self.tp,
            "fp": self.fp,
            "fn": self.fn,
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
            "averaging": self.averaging,
        }


@dataclass
class ConfusionMatrix:
    tp: int = 0
    fn: int = 0
    fp: int = 0
    tn: int = 0

    @property
    def total(self) -> int:
        return self.tp + self.fn + self.fp + self.tn

    @property
    def accuracy(self) -> Optional[float]:
        if self.total == 0:
            return None
        return (self.tp + self.tn) / self.total

    def to_dict(self) -> dict:
        return {
            "tp": self.tp,
            "fn": self.fn,
            "fp": self.fp,
            "tn": self.tn,
            "accuracy": self.accuracy,
        }


def compute_etr(generated: int, effective: int) -> Optional[float]:
    """Percent of retained test cases that were effective; None when no
    test case was generated."""
    if generated < 0 or effective < 0 or effective > generated:
        raise ValueError(f"need generated >= effective >= 0, got ({generated}, {effective})")
    if generated == 0:
        return None
    return 100.0 * effective / generated


def harmonic_f1(precision: Optional[float], recall: Optional[float]) -> Optional[float]:
    if precision is None or recall is None or precision + recall == 0:
        return None
    return 2.0 * precision * recall / (precision + recall)


def compute_prf(pairs: Iterable[tuple[set[str], set[str]]]) -> CorpusMetrics:
    """Micro-averaged precision/recall/F1 over (detected, truth) name sets."""
    tp = fp = fn = 0
    for detected, truth in pairs:
        tp += len(detected & truth)
        fp += len(detected - truth)
        fn += len(truth - detected)
    precision = tp / (tp + fp) if (tp + fp) > 0 else None
    recall = tp / (tp + fn) if (tp + fn) > 0 else None
    return CorpusMetrics(
        tp=tp,
        fp=fp,
        fn=fn,
        precision=precision,
        recall=recall,
        f1=harmonic_f1(precision, recall),
    )


def compute_confusion(labels: Iterable[tuple[bool, bool]]) -> ConfusionMatrix:
    """Counts over (predicted_buggy, actual_buggy) pairs."""
    matrix = ConfusionMatrix()
    for predicted, actual in labels:
        if actual and predicted:
            matrix.tp += 1
        elif actual and not predicted:
            matrix.fn += 1
        elif not actual and predicted:
            matrix.fp += 1
        else:
            matrix.tn += 1
    return matrix


def tests_to_next_unique_error(first_trigger_ids: Sequence[int]) -> list[int]:
    """Gaps between consecutive first-trigger test ids; the first gap is the
    first id itself."""
    gaps = []
    previous = 0
    for test_id in first_trigger_ids:
        gaps.append(test_id - previous)
        previous = test_id
    return gaps


def average_gaps_by_position(gap_lists: Sequence[Sequence[int]]) -> list[float]:
    """Positional mean across sessions: mean of first gaps, of second gaps, ..."""
    if not gap_lists:
        return []
    width = max(len(g) for g in gap_lists)
    averages = []
    for position in range(width):
        column = [g[position] for g in gap_lists if len(g) > position]
        averages.append(sum(column) / len(column))
    return averages


def plateau_stats(history: Sequence[float]) -> tuple[list[tuple[int, int]], int]:
    """Plateau intervals of a nondecreasing coverage history.

    Every maximal run of >= 2 equal consecutive values is an interval
    (1-based start/end iteration); total is the summed no-gain iteration
    count, sum(run length - 1).
    """
    for a, b in zip(history, history[1:]):
        if b < a:
            raise ValueError("history must be nondecreasing")
    intervals: list[tuple[int, int]] = []
    total = 0
    start = 0
    for i in range(1, len(history) + 1):
        if i < len(history) and history[i] == history[start]:
            continue
        run_length = i - start
        if run_length >= 2:
            intervals.append((start + 1, i))
            total += run_length - 1
        start = i
    return intervals, total
