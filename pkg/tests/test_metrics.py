"""Metric arithmetic against published reference values plus oracles."""

from __future__ import annotations

import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from predfuzz.metrics import tests_to_next_unique_error as error_gaps
from predfuzz.metrics import (
    ConfusionMatrix,
    average_gaps_by_position,
    compute_confusion,
    compute_etr,
    compute_prf,
    harmonic_f1,
    plateau_stats,
)


class TestEtr:
    @pytest.mark.parametrize(
        "generated,effective,expected",
        [
            (9, 3, 33.33),
            (84, 15, 17.85),
            (3_123_232, 300_830, 9.63),
        ],
    )
    def test_reference_pairs(self, generated, effective, expected):
        assert compute_etr(generated, effective) == pytest.approx(expected, abs=0.01)

    def test_zero_generated_is_undefined(self):
        assert compute_etr(0, 0) is None

    def test_invalid_counts_rejected(self):
        with pytest.raises(ValueError):
            compute_etr(3, 5)

    @given(st.integers(1, 10_000), st.data())
    @settings(max_examples=200, deadline=None)
    def test_bounds_and_monotonicity(self, generated, data):
        effective = data.draw(st.integers(0, generated))
        value = compute_etr(generated, effective)
        assert 0.0 <= value <= 100.0
        if effective < generated:
            assert compute_etr(generated, effective + 1) > value


class TestPrf:
    @pytest.mark.parametrize(
        "precision,recall,expected,tol",
        [
            (0.72, 0.56, 0.63, 0.005),
            (0.58, 0.41, 0.48, 0.005),
            (0.7429, 0.7981, 0.7695, 0.0005),
        ],
    )
    def test_reference_f1(self, precision, recall, expected, tol):
        assert harmonic_f1(precision, recall) == pytest.approx(expected, abs=tol)

    def test_f1_symmetric(self):
        assert harmonic_f1(0.3, 0.9) == harmonic_f1(0.9, 0.3)

    def test_micro_counts(self):
        metrics = compute_prf([
            ({"A", "B"}, {"A"}),
            ({"C"}, {"C", "D"}),
        ])
        assert (metrics.tp, metrics.fp, metrics.fn) == (2, 1, 1)
        assert metrics.precision == pytest.approx(2 / 3)
        assert metrics.recall == pytest.approx(2 / 3)

    def test_empty_everything_is_undefined(self):
        metrics = compute_prf([(set(), set())])
        assert metrics.precision is None
        assert metrics.recall is None
        assert metrics.f1 is None


def brute_force_prf(pairs):
    """Exhaustive per-name counting oracle; no set arithmetic."""
    tp = fp = fn = 0
    for detected, truth in pairs:
        for name in detected:
            if name in truth:
                tp += 1
            else:
                fp += 1
        for name in truth:
            if name not in detected:
                fn += 1
    precision = tp / (tp + fp) if (tp + fp) else None
    recall = tp / (tp + fn) if (tp + fn) else None
    if precision is None or recall is None or precision + recall == 0:
        f1 = None
    else:
        f1 = 2 * precision * recall / (precision + recall)
    return tp, fp, fn, precision, recall, f1


def random_prf_instances(count: int, seed: int = 20240):
    rng = random.Random(seed)
    alphabet = ["A", "B", "C", "D", "E", "F", "G"]
    for _ in range(count):
        pairs = []
        for _ in range(rng.randint(1, 5)):
            detected = set(rng.sample(alphabet, rng.randint(0, 4)))
            truth = set(rng.sample(alphabet, rng.randint(0, 4)))
            pairs.append((detected, truth))
        yield pairs


class TestPrfOracle:
    def test_matches_brute_force_on_random_instances(self):
        for pairs in random_prf_instances(600):
            metrics = compute_prf(pairs)
            tp, fp, fn, precision, recall, f1 = brute_force_prf(pairs)
            assert (metrics.tp, metrics.fp, metrics.fn) == (tp, fp, fn)
            assert metrics.precision == precision
            assert metrics.recall == recall
            if f1 is None:
                assert metrics.f1 is None
            else:
                assert metrics.f1 == pytest.approx(f1)


class TestConfusion:
    def test_reference_accuracy(self):
        matrix = ConfusionMatrix(tp=36, fn=21, fp=8, tn=42)
        assert 100.0 * matrix.accuracy == pytest.approx(72.89, abs=0.01)
        assert 100.0 * 36 / 57 == pytest.approx(63.15, abs=0.01)

    def test_counted_from_labels(self):
        labels = (
            [(True, True)] * 36 + [(False, True)] * 21 + [(True, False)] * 8 + [(False, False)] * 42
        )
        matrix = compute_confusion(labels)
        assert (matrix.tp, matrix.fn, matrix.fp, matrix.tn) == (36, 21, 8, 42)
        assert 100.0 * matrix.accuracy == pytest.approx(72.89, abs=0.01)

    def test_all_correct_toy(self):
        matrix = compute_confusion([(True, True), (False, False)])
        assert matrix.accuracy == 1.0

    def test_empty_is_undefined(self):
        assert compute_confusion([]).accuracy is None


class TestGaps:
    def test_evenly_spaced(self):
        assert error_gaps([2, 4, 6]) == [2, 2, 2]

    def test_slow_start_sequence(self):
        assert error_gaps([9, 15, 17, 19]) == [9, 6, 2, 2]

    def test_no_errors(self):
        assert error_gaps([]) == []

    def test_positional_average(self):
        assert average_gaps_by_position([[2, 2], [4]]) == [3.0, 2.0]
        assert average_gaps_by_position([]) == []


class TestPlateauStats:
    def test_two_short_plateaus(self):
        intervals, total = plateau_stats([12, 54, 55, 81, 81, 83, 83, 89])
        assert intervals == [(4, 5), (6, 7)]
        assert total == 2

    def test_strictly_increasing(self):
        intervals, total = plateau_stats([1, 2, 3, 4])
        assert intervals == []
        assert total == 0

    def test_long_constant_history(self):
        intervals, total = plateau_stats([27] * 125)
        assert intervals == [(1, 125)]
        assert total == 124

    def test_late_spike_history(self):
        # 23% for 123 iterations, then 28 and 55
        history = [23] * 123 + [28, 55]
        _, total = plateau_stats(history)
        assert total == 122

    def test_decreasing_rejected(self):
        with pytest.raises(ValueError):
            plateau_stats([5, 4])

    @given(
        st.lists(st.integers(0, 20), min_size=1, max_size=60).map(
            lambda deltas: [sum(deltas[: i + 1]) + 1 for i in range(len(deltas))]
        )
    )
    @settings(max_examples=300, deadline=None)
    def test_total_complements_strict_increases(self, history):
        strict_increases = sum(1 for a, b in zip(history, history[1:]) if b > a)
        _, total = plateau_stats(history)
        assert total == len(history) - strict_increases - 1
