import numpy as np
import pytest

from capml._accel import (
    NUMBA_ENABLED,
    _asym_loss_elementwise_np,
    asym_loss_elementwise,
)
from capml.loss import (
    LossConfig,
    PseudoValueError,
    negative_term,
    positive_term,
    supervised_loss,
    unlabeled_loss,
)
from conftest import finite_diff_loss, rel_err

LOG2 = 0.6931471805599453


class TestTerms:
    def test_positive_plain_log(self):
        assert positive_term(0.5, 0.0) == pytest.approx(LOG2, abs=1e-9)

    def test_positive_focused(self):
        assert positive_term(0.5, 2.0) == pytest.approx(0.25 * LOG2, abs=1e-9)

    def test_positive_vanishes_at_one(self):
        assert positive_term(1.0 - 1e-9, 1.0) < 1e-8

    def test_negative_plain_log(self):
        assert negative_term(0.5, 0.0) == pytest.approx(LOG2, abs=1e-9)

    def test_negative_focused(self):
        assert negative_term(0.5, 1.0) == pytest.approx(0.5 * LOG2, abs=1e-9)

    def test_negative_vanishes_at_zero(self):
        assert negative_term(1e-9, 1.0) < 1e-8

    def test_monotone_on_grid(self):
        grid = np.linspace(0.01, 0.99, 200)
        pos = positive_term(grid, 1.5)
        neg = negative_term(grid, 3.0)
        assert (np.diff(pos) < 0).all()
        assert (np.diff(neg) > 0).all()

    def test_non_negative(self, rng):
        f = rng.uniform(0.001, 0.999, size=500)
        assert (positive_term(f, 2.0) >= 0).all()
        assert (negative_term(f, 4.0) >= 0).all()


class TestSupervisedLoss:
    def test_reduces_to_bce(self, rng):
        probs = rng.uniform(0.01, 0.99, size=(16, 5))
        labels = (rng.random((16, 5)) < 0.4).astype(int)
        asl0 = LossConfig(kind="asl", lambda_pos=0.0, lambda_neg=0.0)
        value, _ = supervised_loss(probs, labels, asl0)
        bce = -np.mean(labels * np.log(probs) + (1 - labels) * np.log1p(-probs))
        assert abs(value - bce) < 1e-12

    def test_single_instance_value(self):
        value, _ = supervised_loss(
            np.array([[0.5]]), np.array([[1]]), LossConfig(lambda_pos=2.0)
        )
        assert value == pytest.approx(0.25 * LOG2, abs=1e-6)

    def test_gradient_matches_finite_differences(self, rng):
        config = LossConfig(lambda_pos=1.0, lambda_neg=4.0)
        probs = rng.uniform(0.05, 0.95, size=(8, 4))
        labels = (rng.random((8, 4)) < 0.5).astype(int)

        def scalar(p):
            return supervised_loss(p, labels, config)[0]

        _, grad = supervised_loss(probs, labels, config)
        numeric = finite_diff_loss(scalar, probs)
        assert rel_err(grad, numeric) < 1e-6

    def test_rejects_bad_labels(self):
        with pytest.raises(PseudoValueError):
            supervised_loss(np.full((2, 2), 0.5), np.full((2, 2), 2), LossConfig())

    def test_non_negative(self, rng):
        probs = rng.uniform(0.001, 0.999, size=(32, 6))
        labels = (rng.random((32, 6)) < 0.3).astype(int)
        value, _ = supervised_loss(probs, labels, LossConfig())
        assert value >= 0


class TestUnlabeledLoss:
    def test_all_ignored_is_zero(self):
        probs = np.full((3, 2), 0.7)
        pseudo = np.full((3, 2), -1)
        value, grad = unlabeled_loss(probs, pseudo, LossConfig())
        assert value == 0.0
        assert np.all(grad == 0)

    def test_no_ignored_equals_supervised(self, rng):
        probs = rng.uniform(0.05, 0.95, size=(10, 4))
        pseudo = (rng.random((10, 4)) < 0.5).astype(int)
        config = LossConfig(lambda_pos=1.0, lambda_neg=4.0)
        assert unlabeled_loss(probs, pseudo, config)[0] == pytest.approx(
            supervised_loss(probs, pseudo, config)[0], abs=1e-12
        )

    def test_single_counted_entry(self):
        probs = np.full((2, 3), 0.5)
        pseudo = np.full((2, 3), -1)
        pseudo[0, 0] = 1
        value, _ = unlabeled_loss(probs, pseudo, LossConfig(lambda_pos=0.0))
        assert value == pytest.approx(LOG2, abs=1e-6)

    def test_ignore_mask_linearity(self, rng):
        # counted entries alone reproduce the value under their own normalizer
        probs = rng.uniform(0.05, 0.95, size=(6, 5))
        pseudo = (rng.random((6, 5)) < 0.5).astype(int)
        mask = rng.random((6, 5)) < 0.4
        masked = np.where(mask, -1, pseudo)
        config = LossConfig()
        value, _ = unlabeled_loss(probs, masked, config)
        kept = ~mask
        from capml.loss import elementwise

        entries, _ = elementwise(probs, pseudo.astype(float), config)
        assert value == pytest.approx(entries[kept].sum() / kept.sum(), abs=1e-12)

    def test_ignored_entries_zero_gradient(self, rng):
        probs = rng.uniform(0.05, 0.95, size=(6, 5))
        pseudo = (rng.random((6, 5)) < 0.5).astype(int)
        pseudo[2, :] = -1
        _, grad = unlabeled_loss(probs, pseudo, LossConfig())
        assert np.all(grad[2, :] == 0)

    def test_gradient_matches_finite_differences(self, rng):
        config = LossConfig(lambda_pos=2.0, lambda_neg=1.0)
        probs = rng.uniform(0.05, 0.95, size=(7, 3))
        pseudo = rng.choice([-1, 0, 1], size=(7, 3))

        def scalar(p):
            return unlabeled_loss(p, pseudo, config)[0]

        _, grad = unlabeled_loss(probs, pseudo, config)
        numeric = finite_diff_loss(scalar, probs)
        assert rel_err(grad, numeric) < 1e-6

    def test_rejects_invalid_value(self):
        with pytest.raises(PseudoValueError):
            unlabeled_loss(np.full((2, 2), 0.5), np.full((2, 2), 2), LossConfig())


@pytest.mark.skipif(not NUMBA_ENABLED, reason="numba path disabled")
def test_numba_numpy_parity(rng):
    probs = rng.uniform(0.001, 0.999, size=(50, 8))
    targets = rng.choice([-1.0, 0.0, 1.0], size=(50, 8))
    for lam_pos, lam_neg in [(0.0, 0.0), (1.0, 4.0), (2.5, 0.5)]:
        l_nb, g_nb = asym_loss_elementwise(probs, targets, lam_pos, lam_neg, 1e-7)
        l_np, g_np = _asym_loss_elementwise_np(probs, targets, lam_pos, lam_neg, 1e-7)
        assert np.allclose(l_nb, l_np, atol=1e-12)
        assert np.allclose(g_nb, g_np, atol=1e-12)
