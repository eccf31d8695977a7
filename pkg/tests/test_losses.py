"""Ranking losses: frozen values, the single-negative equivalence, gradients."""

import numpy as np
import pytest

from mgdcf.errors import ConfigurationError
from mgdcf.losses import (
    LossConfig,
    TrainingBatch,
    bpr_from_scores,
    bpr_loss,
    combined_loss,
    info_bpr_from_scores,
    info_bpr_loss,
    l2_loss,
    loss_grad_z,
    score,
)

LOG_2 = 0.6931471805599453


def random_batch(rng, num_users, num_items, size, n_neg):
    return TrainingBatch(
        user_rows=rng.integers(0, num_users, size=size),
        pos_rows=num_users + rng.integers(0, num_items, size=size),
        neg_rows=num_users + rng.integers(0, num_items, size=(size, n_neg)),
    )


class TestBatch:
    def test_single_negative_column_is_promoted(self):
        batch = TrainingBatch(
            user_rows=np.array([0]),
            pos_rows=np.array([2]),
            neg_rows=np.array([3]),
        )
        assert batch.neg_rows.shape == (1, 1)
        assert batch.n_neg == 1

    def test_empty_batch_rejected(self):
        with pytest.raises(ConfigurationError, match="empty"):
            TrainingBatch(
                user_rows=np.array([], dtype=np.int64),
                pos_rows=np.array([], dtype=np.int64),
                neg_rows=np.zeros((0, 1), dtype=np.int64),
            )

    def test_size_disagreement_rejected(self):
        with pytest.raises(ConfigurationError, match="batch size"):
            TrainingBatch(
                user_rows=np.array([0, 1]),
                pos_rows=np.array([2]),
                neg_rows=np.array([[3], [4]]),
            )

    def test_config_validation(self):
        with pytest.raises(ConfigurationError):
            LossConfig(n_neg=0)
        with pytest.raises(ConfigurationError):
            LossConfig(l2_coeff=-1.0)


class TestPairwiseLoss:
    def test_equal_scores_give_log_two(self):
        assert bpr_from_scores(1.0, 1.0) == pytest.approx(LOG_2, abs=1e-15)

    def test_unit_margin_value(self):
        # log(1 + e^-1)
        assert bpr_from_scores(1.0, 0.0) == pytest.approx(
            0.31326168751822286, abs=1e-15
        )

    def test_large_scores_do_not_overflow(self):
        value = bpr_from_scores(1000.0, 2000.0)
        assert np.isfinite(value)
        assert value == pytest.approx(1000.0)

    def test_requires_single_negative(self):
        z = np.eye(4)
        batch = random_batch(np.random.default_rng(0), 2, 2, 4, 2)
        with pytest.raises(ConfigurationError, match="one negative"):
            bpr_loss(z, batch)


class TestSoftmaxLoss:
    def test_two_negative_example(self):
        # positive score 1 against two zero negatives: log(e + 2) - 1
        value = info_bpr_from_scores(np.array([1.0]), np.array([[0.0, 0.0]]))
        assert value[0] == pytest.approx(0.5514447139320511, abs=1e-15)

    def test_equal_scores_give_log_group_size(self):
        for n_neg in (1, 2, 5, 50):
            value = info_bpr_from_scores(
                np.array([0.3]), np.full((1, n_neg), 0.3)
            )
            assert value[0] == pytest.approx(np.log(n_neg + 1), abs=1e-12)

    def test_shift_invariance(self):
        rng = np.random.default_rng(7)
        pos = rng.normal(size=8)
        neg = rng.normal(size=(8, 5))
        base = info_bpr_from_scores(pos, neg)
        shifted = info_bpr_from_scores(pos + 100.0, neg + 100.0)
        np.testing.assert_allclose(shifted, base, atol=1e-12)

    def test_monotone_in_scores(self):
        base = info_bpr_from_scores(np.array([0.5]), np.array([[0.2, 0.1]]))[0]
        better = info_bpr_from_scores(np.array([0.9]), np.array([[0.2, 0.1]]))[0]
        worse = info_bpr_from_scores(np.array([0.5]), np.array([[0.8, 0.1]]))[0]
        assert better < base < worse

    def test_extreme_scores_stay_finite(self):
        value = info_bpr_from_scores(np.array([-500.0]), np.array([[500.0]]))
        assert np.isfinite(value[0])
        assert value[0] == pytest.approx(1000.0)

    def test_single_negative_reduces_to_pairwise(self):
        """With one negative the softmax loss is the softplus loss exactly."""
        rng = np.random.default_rng(11)
        for _ in range(50):
            z = rng.normal(size=(20, 6))
            batch = random_batch(rng, 8, 12, 16, 1)
            gap = abs(info_bpr_loss(z, batch) - bpr_loss(z, batch))
            assert gap <= 1e-12

    def test_batch_width_checked_against_config(self):
        z = np.eye(6)
        batch = random_batch(np.random.default_rng(0), 2, 4, 4, 3)
        with pytest.raises(ConfigurationError, match="negatives"):
            info_bpr_loss(z, batch, LossConfig(n_neg=5))

    def test_more_negatives_never_decrease_the_loss(self):
        """Appending a negative adds softmax mass, so the loss grows."""
        rng = np.random.default_rng(13)
        pos = rng.normal(size=10)
        neg = rng.normal(size=(10, 6))
        for width in range(1, 6):
            narrow = info_bpr_from_scores(pos, neg[:, :width])
            wide = info_bpr_from_scores(pos, neg[:, : width + 1])
            assert np.all(wide > narrow)


class TestPenalty:
    def test_single_occupied_row(self):
        z = np.array([[3.0, 4.0], [0.0, 0.0], [0.0, 0.0]])
        batch = TrainingBatch(
            user_rows=np.array([0]),
            pos_rows=np.array([1]),
            neg_rows=np.array([[2]]),
        )
        assert l2_loss(z, batch) == pytest.approx(12.5)

    def test_counts_each_occurrence(self):
        """A row sampled twice as a negative is penalized twice."""
        z = np.array([[1.0, 0.0], [0.0, 1.0], [2.0, 0.0]])
        batch = TrainingBatch(
            user_rows=np.array([0]),
            pos_rows=np.array([1]),
            neg_rows=np.array([[2, 2]]),
        )
        # 0.5 * (1 + 1 + 2 * 4) / 1
        assert l2_loss(z, batch) == pytest.approx(5.0)

    def test_mean_over_batch(self):
        z = np.array([[2.0], [0.0], [0.0], [0.0]])
        batch = TrainingBatch(
            user_rows=np.array([0, 0]),
            pos_rows=np.array([1, 2]),
            neg_rows=np.array([[3], [3]]),
        )
        # row 0 occurs twice: 0.5 * 2 * 4 / 2
        assert l2_loss(z, batch) == pytest.approx(2.0)

    def test_combined_is_sum_of_parts(self):
        z = np.array([[1.0, 0.0], [1.0, 0.0], [0.0, 1.0], [0.0, 1.0]])
        batch = TrainingBatch(
            user_rows=np.array([0]),
            pos_rows=np.array([1]),
            neg_rows=np.array([[2, 3]]),
        )
        config = LossConfig(n_neg=2, l2_coeff=0.01)
        expected = 0.5514447139320511 + 0.01 * 2.0
        assert combined_loss(z, batch, config) == pytest.approx(
            expected, abs=1e-12
        )


class TestGradient:
    def test_balanced_pair_hand_values(self):
        """Equal positive and negative scores split the pull evenly."""
        z = np.array([[1.0, 0.0], [0.0, 1.0], [0.0, -1.0]])
        batch = TrainingBatch(
            user_rows=np.array([0]),
            pos_rows=np.array([1]),
            neg_rows=np.array([[2]]),
        )
        grad = loss_grad_z(z, batch, LossConfig(n_neg=1, l2_coeff=0.0))
        expected = np.array([[0.0, -1.0], [-0.5, 0.0], [0.5, 0.0]])
        np.testing.assert_allclose(grad, expected, atol=1e-15)

    def test_zero_at_perfect_separation_limit(self):
        """A huge positive margin leaves almost no ranking gradient."""
        z = np.array([[10.0, 0.0], [10.0, 0.0], [-10.0, 0.0]])
        batch = TrainingBatch(
            user_rows=np.array([0]),
            pos_rows=np.array([1]),
            neg_rows=np.array([[2]]),
        )
        grad = loss_grad_z(z, batch, LossConfig(n_neg=1, l2_coeff=0.0))
        assert np.abs(grad).max() <= 1e-10

    def test_matches_finite_differences(self):
        rng = np.random.default_rng(21)
        config = LossConfig(n_neg=4, l2_coeff=0.01)
        z = 0.1 * rng.normal(size=(30, 5))
        batch = random_batch(rng, 10, 20, 24, 4)
        grad = loss_grad_z(z, batch, config)
        h = 1e-6
        touched = np.flatnonzero(np.abs(grad).sum(axis=1))
        for row in touched:
            for col in range(z.shape[1]):
                bumped = z.copy()
                bumped[row, col] += h
                up = combined_loss(bumped, batch, config)
                bumped[row, col] -= 2 * h
                down = combined_loss(bumped, batch, config)
                numeric = (up - down) / (2 * h)
                assert grad[row, col] == pytest.approx(numeric, abs=5e-8)

    def test_untouched_rows_have_zero_gradient(self):
        rng = np.random.default_rng(22)
        z = rng.normal(size=(40, 4))
        batch = random_batch(rng, 10, 10, 8, 2)
        grad = loss_grad_z(z, batch, LossConfig(n_neg=2, l2_coeff=0.1))
        involved = set(batch.user_rows) | set(batch.pos_rows)
        involved |= set(batch.neg_rows.ravel())
        for row in range(40):
            if row not in involved:
                assert np.all(grad[row] == 0.0)

    def test_repeated_rows_accumulate(self):
        """Computing pairs one at a time and averaging gives the same grad."""
        rng = np.random.default_rng(23)
        z = 0.3 * rng.normal(size=(12, 3))
        config = LossConfig(n_neg=2, l2_coeff=0.05)
        users = np.array([0, 0, 1])
        pos = np.array([5, 6, 5])
        negs = np.array([[7, 8], [5, 7], [9, 9]])
        batch = TrainingBatch(users, pos, negs)
        grad = loss_grad_z(z, batch, config)
        total = np.zeros_like(z)
        for b in range(3):
            single = TrainingBatch(users[b : b + 1], pos[b : b + 1], negs[b : b + 1])
            total += loss_grad_z(z, single, config)
        np.testing.assert_allclose(grad, total / 3.0, atol=1e-14)

    def test_bitwise_deterministic(self):
        rng = np.random.default_rng(24)
        z = rng.normal(size=(50, 8))
        batch = random_batch(rng, 20, 30, 64, 8)
        config = LossConfig(n_neg=8, l2_coeff=0.01)
        first = loss_grad_z(z, batch, config)
        second = loss_grad_z(z, batch, config)
        assert np.array_equal(first, second)

    def test_width_mismatch_rejected(self):
        rng = np.random.default_rng(25)
        z = rng.normal(size=(10, 3))
        batch = random_batch(rng, 4, 6, 4, 2)
        with pytest.raises(ConfigurationError, match="negatives"):
            loss_grad_z(z, batch, LossConfig(n_neg=3))


class TestScore:
    def test_dot_product(self):
        z = np.array([[1.0, 2.0], [3.0, -1.0]])
        assert score(z, 0, 1) == pytest.approx(1.0)
        assert score(z, 0, 0) == pytest.approx(5.0)
