"""
Test accuracy, average precision, MAP and the evaluation report.
"""

import itertools
import math

import numpy as np
import pytest

from src.pofsm.errors import DataError
from src.pofsm.services.evaluation import (
    average_precision,
    evaluate_scores,
    ranked_classes,
    top_k_accuracy,
)


def _brute_force_ap(scores, positives):
    order = sorted(range(len(scores)), key=lambda i: (-scores[i], i))
    hits, precisions = 0, []
    for rank, index in enumerate(order, start=1):
        if positives[index]:
            hits += 1
            precisions.append(hits / rank)
    return sum(precisions) / len(precisions)


class TestAveragePrecision:
    """Test per-class AP."""

    def test_hand_example(self):
        """Test positives at ranks 1 and 3 of 4: (1 + 2/3) / 2."""
        scores = np.array([0.9, 0.8, 0.7, 0.6])
        positives = np.array([True, False, True, False])
        assert average_precision(scores, positives) == pytest.approx(0.8333, abs=1e-4)

    @pytest.mark.parametrize("seed", range(30))
    def test_matches_brute_force(self, seed):
        """Test against the rank-by-rank definition on short lists."""
        rng = np.random.default_rng(seed)
        n = int(rng.integers(1, 21))
        scores = rng.integers(0, 5, size=n).astype(float)
        positives = rng.random(n) < 0.4
        if not positives.any():
            positives[0] = True
        assert average_precision(scores, positives) == pytest.approx(
            _brute_force_ap(list(scores), list(positives)), rel=1e-12)

    def test_perfect_ranking(self):
        """Test AP 1 when all positives come first."""
        assert average_precision(np.array([3.0, 2.0, 1.0]), np.array([1, 1, 0])) == 1.0

    def test_no_positives(self):
        """Test NaN for a class without positives."""
        assert math.isnan(average_precision(np.array([1.0, 2.0]), np.array([False, False])))


class TestTopK:
    """Test top-k accuracy."""

    def test_ranked_ties_keep_lower_index(self):
        """Test stable descending order."""
        np.testing.assert_array_equal(ranked_classes(np.array([[0.2, 0.5, 0.5]])), [[1, 2, 0]])

    def test_top1_and_top2(self):
        """Test hand-computed accuracies."""
        scores = np.array([[0.6, 0.3, 0.1], [0.2, 0.3, 0.5], [0.1, 0.7, 0.2]])
        labels = np.array([0, 1, 2])
        assert top_k_accuracy(scores, labels, 1) == pytest.approx(1 / 3)
        assert top_k_accuracy(scores, labels, 2) == pytest.approx(1.0)

    @pytest.mark.parametrize("seed", range(10))
    def test_top5_at_least_top1(self, seed):
        """Test that top-5 never falls below top-1."""
        rng = np.random.default_rng(seed)
        scores = rng.random((40, 8))
        labels = rng.integers(0, 8, size=40)
        assert top_k_accuracy(scores, labels, 5) >= top_k_accuracy(scores, labels, 1)

    def test_empty(self):
        """Test that empty sets are data errors."""
        with pytest.raises(DataError):
            top_k_accuracy(np.zeros((0, 3)), np.zeros(0, dtype=int), 1)


class TestEvalReport:
    """Test the aggregated report."""

    GROUPS = {"up": "vertical", "down": "vertical", "still": "static"}

    def test_perfect_classifier(self):
        """Test top-1, top-5 and MAP of 1 with a diagonal confusion matrix."""
        labels = np.array([0, 1, 2, 0, 1, 2])
        scores = np.eye(3)[labels]
        report = evaluate_scores(scores, labels, ["down", "still", "up"], self.GROUPS)
        assert report.top1 == 1.0
        assert report.top5 == 1.0
        assert report.map_overall == 1.0
        assert report.group_map == {"static": 1.0, "vertical": 1.0}
        np.testing.assert_array_equal(report.confusion, 2 * np.eye(3, dtype=int))

    @pytest.mark.parametrize("seed", range(5))
    def test_map_is_mean_of_ap(self, seed):
        """Test MAP overall and per group against per-class AP."""
        rng = np.random.default_rng(seed)
        labels = np.concatenate([np.arange(3), rng.integers(0, 3, size=27)])
        report = evaluate_scores(rng.random((30, 3)), labels, ["down", "still", "up"], self.GROUPS)
        ap = report.per_class_ap
        assert report.map_overall == pytest.approx(np.mean(list(ap.values())))
        assert report.group_map["vertical"] == pytest.approx((ap["up"] + ap["down"]) / 2)
        assert report.group_map["static"] == pytest.approx(ap["still"])
        assert report.confusion.sum() == 30

    def test_absent_class_excluded_from_map(self):
        """Test that a class with no test positives does not count."""
        labels = np.array([0, 0, 1])
        scores = np.array([[0.9, 0.1, 0.0], [0.8, 0.2, 0.0], [0.1, 0.9, 0.0]])
        report = evaluate_scores(scores, labels, ["a", "b", "c"])
        assert math.isnan(report.per_class_ap["c"])
        assert report.map_overall == 1.0

    def test_shape_mismatch(self):
        """Test a score matrix that does not fit the labels."""
        with pytest.raises(DataError):
            evaluate_scores(np.zeros((2, 3)), np.array([0, 1, 2]), ["a", "b", "c"])

    def test_csv(self, tmp_path):
        """Test the per-class block followed by the summary block."""
        labels = np.array([0, 1])
        report = evaluate_scores(np.eye(2), labels, ["a", "b"], {"a": "g", "b": "g"})
        text = report.to_csv(tmp_path / "eval.csv").read_text()
        blocks = text.split("\n\n")
        assert blocks[0].splitlines() == ["class,ap", "a,1.000000", "b,1.000000"]
        summary = dict(line.split(",") for line in blocks[1].strip().splitlines()[1:])
        assert float(summary["top1"]) == 1.0
        assert float(summary["map_g"]) == 1.0
        assert float(summary["count"]) == 2

    def test_ranking_is_order_independent(self):
        """Test that permuting the rows leaves the metrics unchanged."""
        rng = np.random.default_rng(0)
        scores = rng.random((12, 4))
        labels = np.tile(np.arange(4), 3)
        base = evaluate_scores(scores, labels, list("abcd"))
        for perm in itertools.islice(itertools.permutations(range(12)), 1, 4):
            perm = np.array(perm)
            other = evaluate_scores(scores[perm], labels[perm], list("abcd"))
            assert other.top1 == base.top1
