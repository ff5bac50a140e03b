import numpy as np
import pytest

from vtprune import (
    LARGER_IS_BETTER,
    SMALLER_IS_BETTER,
    ScoreVector,
    cls_saliency,
    key_l2_norm,
    select_top_k,
)
from vtprune.oracles import key_norm_reference, saliency_reference, top_k_reference


class TestClsSaliency:
    def test_single_head_is_identity(self):
        scores = cls_saliency(np.array([[0.5, 0.3, 0.2]]))
        assert np.allclose(scores.values, [0.5, 0.3, 0.2])
        assert scores.direction == LARGER_IS_BETTER

    def test_two_heads_sum_per_column(self):
        scores = cls_saliency(np.array([[0.1, 0.9], [0.4, 0.6]]))
        assert np.allclose(scores.values, [0.5, 1.5])

    def test_matches_elementwise_loop(self):
        rng = np.random.default_rng(11)
        att = rng.uniform(0.0, 1.0, (4, 16))
        assert np.allclose(cls_saliency(att).values, saliency_reference(att), rtol=1e-12)

    def test_head_permutation_equivariance(self):
        # permuting heads reorders the summation, so equality is up to
        # float rounding
        rng = np.random.default_rng(12)
        att = rng.uniform(0.0, 1.0, (5, 9))
        perm = rng.permutation(5)
        assert np.allclose(
            cls_saliency(att).values, cls_saliency(att[perm]).values, rtol=1e-12
        )

    def test_empty_matrix_raises(self):
        with pytest.raises(ValueError, match="no tokens"):
            cls_saliency(np.zeros((2, 0)))

    def test_negative_entries_raise(self):
        with pytest.raises(ValueError, match="nonnegative"):
            cls_saliency(np.array([[0.5, -0.1]]))


class TestKeyL2Norm:
    def test_three_four_five(self):
        keys = np.array([[[3.0, 4.0]]])   # H=1, n=1, d_head=2
        assert key_l2_norm(keys).values[0] == pytest.approx(5.0)

    def test_concatenation_identity_across_heads(self):
        keys = np.array([[[3.0, 0.0]], [[0.0, 4.0]]])   # H=2, n=1
        scores = key_l2_norm(keys)
        assert scores.values[0] == pytest.approx(5.0)
        assert scores.direction == SMALLER_IS_BETTER

    def test_matches_flattened_norm(self):
        rng = np.random.default_rng(13)
        keys = rng.normal(0.0, 1.5, (8, 32, 16))
        got = key_l2_norm(keys).values
        flat = keys.transpose(1, 0, 2).reshape(32, -1)
        want = np.linalg.norm(flat, axis=1)
        assert np.allclose(got, want, rtol=1e-9)
        assert np.allclose(got, key_norm_reference(keys), rtol=1e-9)

    def test_absolute_homogeneity(self):
        rng = np.random.default_rng(14)
        keys = rng.normal(0.0, 1.0, (3, 7, 5))
        for c in (-2.5, 0.0, 3.0):
            assert np.allclose(
                key_l2_norm(c * keys).values, abs(c) * key_l2_norm(keys).values, atol=1e-12
            )

    def test_squared_norm_is_per_head_sum(self):
        rng = np.random.default_rng(15)
        keys = rng.normal(0.0, 1.0, (4, 6, 3))
        total_sq = key_l2_norm(keys).values ** 2
        per_head_sq = sum(
            key_l2_norm(keys[h : h + 1]).values ** 2 for h in range(keys.shape[0])
        )
        assert np.allclose(total_sq, per_head_sq, rtol=1e-9)

    def test_zero_length_head_dim_raises(self):
        with pytest.raises(ValueError, match="head dimension"):
            key_l2_norm(np.zeros((2, 3, 0)))


class TestSelectTopK:
    def test_larger_is_better_ordering(self):
        scores = ScoreVector(np.array([0.9, 0.1, 0.5]), LARGER_IS_BETTER)
        assert select_top_k(scores, 2) == [0, 2]

    def test_tie_break_prefers_lower_index(self):
        scores = ScoreVector(np.array([2.0, 2.0, 1.0]), SMALLER_IS_BETTER)
        assert select_top_k(scores, 2) == [0, 2]

    def test_matches_sort_oracle(self):
        rng = np.random.default_rng(16)
        for _ in range(50):
            n = int(rng.integers(1, 40))
            values = np.round(rng.normal(0.0, 1.0, n), 1)
            direction = LARGER_IS_BETTER if rng.random() < 0.5 else SMALLER_IS_BETTER
            k = int(rng.integers(1, n + 1))
            got = select_top_k(ScoreVector(values, direction), k)
            assert got == top_k_reference(list(values), direction, k)

    def test_monotone_transform_invariance(self):
        rng = np.random.default_rng(17)
        values = rng.normal(0.0, 1.0, 25)
        scores = ScoreVector(values, LARGER_IS_BETTER)
        warped = ScoreVector(np.exp(2.0 * values) + 1.0, LARGER_IS_BETTER)
        for k in (1, 5, 25):
            assert select_top_k(scores, k) == select_top_k(warped, k)

    def test_budget_exceeds_population(self):
        scores = ScoreVector(np.array([1.0, 2.0]), LARGER_IS_BETTER)
        with pytest.raises(ValueError, match="budget exceeds population"):
            select_top_k(scores, 3)

    def test_nonpositive_k_raises(self):
        scores = ScoreVector(np.array([1.0]), LARGER_IS_BETTER)
        with pytest.raises(ValueError):
            select_top_k(scores, 0)

    def test_nonfinite_scores_rejected(self):
        with pytest.raises(ValueError, match="finite"):
            ScoreVector(np.array([1.0, np.inf]), LARGER_IS_BETTER)
