import numpy as np
import pytest

from capml.metrics import (
    MetricError,
    average_precision,
    cf1_of1,
    mean_average_precision,
    pseudo_label_error,
    pseudo_label_report,
)


class TestAveragePrecision:
    def test_hand_enumeration(self):
        ap = average_precision(np.array([0.9, 0.8, 0.7]), np.array([1, 0, 1]))
        assert ap == pytest.approx((1.0 + 2.0 / 3.0) / 2.0)

    def test_perfect_ranking(self):
        ap = average_precision(np.array([0.9, 0.8, 0.2, 0.1]), np.array([1, 1, 0, 0]))
        assert ap == 1.0

    def test_reversed_single_positive(self):
        n = 5
        scores = np.arange(n, 0, -1).astype(float)
        truth = np.zeros(n, dtype=int)
        truth[-1] = 1
        assert average_precision(scores, truth) == pytest.approx(1.0 / n)

    def test_monotone_transform_invariance(self, rng):
        scores = rng.random((30, 4))
        truth = (rng.random((30, 4)) < 0.4).astype(int)
        truth[0] = 1  # ensure every class has a positive
        a = mean_average_precision(scores, truth)
        b = mean_average_precision(np.exp(3 * scores), truth)
        assert a == pytest.approx(b)

    def test_no_positives_error(self):
        with pytest.raises(MetricError):
            mean_average_precision(np.random.rand(4, 2), np.zeros((4, 2), dtype=int))

    def test_skips_empty_class(self):
        scores = np.array([[0.9, 0.5], [0.1, 0.4]])
        truth = np.array([[1, 0], [0, 0]])
        assert mean_average_precision(scores, truth) == 1.0

    def test_permutation_invariant(self, rng):
        scores = rng.random((25, 3))
        truth = (rng.random((25, 3)) < 0.5).astype(int)
        truth[0] = 1
        perm = rng.permutation(25)
        assert mean_average_precision(scores, truth) == pytest.approx(
            mean_average_precision(scores[perm], truth[perm])
        )


class TestF1:
    def test_perfect(self):
        truth = np.array([[1, 0], [0, 1]])
        cf1, of1 = cf1_of1(truth, truth)
        assert cf1 == 1.0 and of1 == 1.0

    def test_all_ignored(self):
        truth = np.array([[1, 0], [0, 1]])
        cf1, of1 = cf1_of1(np.full((2, 2), -1), truth)
        assert cf1 == 0.0 and of1 == 0.0

    def test_two_class_worked_example(self):
        # class A: TP=1, FP=1, FN=0; class B: TP=0, FP=0, FN=1
        pseudo = np.array([[1, 0], [1, 0]])
        truth = np.array([[1, 1], [0, 0]])
        cf1, of1 = cf1_of1(pseudo, truth)
        assert cf1 == pytest.approx((2.0 / 3.0 + 0.0) / 2.0)
        assert of1 == pytest.approx(0.5)

    def test_coincide_single_class(self, rng):
        pseudo = rng.choice([0, 1], size=(20, 1))
        truth = rng.choice([0, 1], size=(20, 1))
        cf1, of1 = cf1_of1(pseudo, truth)
        assert cf1 == pytest.approx(of1)


class TestPseudoLabelError:
    def test_zero_when_exact(self):
        truth = np.array([[1, 0], [0, 1]])
        eps, e1, e0 = pseudo_label_error(truth, truth)
        assert eps == 0.0

    def test_worked_example(self):
        truth = np.array([1, 1, 0, 0]).reshape(4, 1)
        pseudo = np.array([1, 0, 1, 0]).reshape(4, 1)
        eps, e1, e0 = pseudo_label_error(pseudo, truth)
        assert e1[0] == pytest.approx(0.25)
        assert e0[0] == pytest.approx(0.25)
        assert eps == pytest.approx(0.5)

    def test_all_ignored_counts_as_negative(self):
        truth = np.array([[1, 0], [1, 0], [0, 0], [0, 1]])
        pseudo = np.full((4, 2), -1)
        eps, e1, e0 = pseudo_label_error(pseudo, truth)
        assert np.allclose(e1, truth.mean(axis=0))
        assert np.allclose(e0, 0.0)

    def test_decomposition_exact(self, rng):
        pseudo = rng.choice([-1, 0, 1], size=(50, 6))
        truth = rng.choice([0, 1], size=(50, 6))
        eps, e1, e0 = pseudo_label_error(pseudo, truth)
        assert eps == pytest.approx((e1 + e0).max())

    def test_report_fields_consistent(self, rng):
        pseudo = rng.choice([-1, 0, 1], size=(50, 6))
        truth = rng.choice([0, 1], size=(50, 6))
        report = pseudo_label_report(pseudo, truth)
        assert report.epsilon == pytest.approx(report.epsilon_pos + report.epsilon_neg)
        assert 0.0 <= report.cf1 <= 1.0
        assert 0.0 <= report.epsilon <= 1.0
        assert ((report.precision >= 0) & (report.precision <= 1)).all()
