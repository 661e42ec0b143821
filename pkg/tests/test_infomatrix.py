import numpy as np
import pytest

from pairrank.data import ComparisonHistory, ItemPool
from pairrank.errors import RankDeficiencyError, ValidationError
from pairrank.infomatrix import (
    InfoMatrix,
    observed_fisher,
    sample_gaussian,
    sherman_morrison_update,
    weighted_norm,
)


class TestObservedFisher:
    def test_empty_history_is_prior_only(self):
        pool = ItemPool(np.eye(3))
        m = observed_fisher(ComparisonHistory(), pool, np.zeros(3), ridge=1.0)
        np.testing.assert_array_equal(m.h, np.eye(3))
        np.testing.assert_array_equal(m.hinv, np.eye(3))

    def test_single_record_at_theta_zero(self):
        # dsigma(0) = 1/4, so H = ridge I + 0.25 z z^T
        pool = ItemPool(np.array([[1.0, 1.0], [0.0, 1.0]]))
        history = ComparisonHistory()
        history.add(0, 1, 1)
        m = observed_fisher(history, pool, np.zeros(2), ridge=0.5)
        z = np.array([1.0, 0.0])
        np.testing.assert_allclose(m.h, 0.5 * np.eye(2) + 0.25 * np.outer(z, z))

    def test_orthogonal_directions_no_ridge(self):
        pool = ItemPool(np.array([[1.0, 0.0], [0.0, 0.0], [0.0, 1.0]]))
        history = ComparisonHistory()
        history.add(0, 1, 1)
        history.add(2, 1, 0)
        m = observed_fisher(history, pool, np.zeros(2), ridge=0.0)
        np.testing.assert_allclose(m.h, 0.25 * np.eye(2))
        np.testing.assert_allclose(m.hinv, 4.0 * np.eye(2))

    def test_rank_deficiency_names_missing_directions(self):
        pool = ItemPool(np.array([[1.0, 0.0, 0.0], [0.0, 0.0, 0.0]]))
        history = ComparisonHistory()
        history.add(0, 1, 1)
        with pytest.raises(RankDeficiencyError) as err:
            observed_fisher(history, pool, np.zeros(3), ridge=0.0)
        assert err.value.deficiency == 2


class TestShermanMorrison:
    def test_zero_weight_is_identity(self):
        m = InfoMatrix.identity(3, 2.0)
        before = m.hinv.copy()
        sherman_morrison_update(m, np.array([1.0, 2.0, 3.0]), 0.0)
        np.testing.assert_array_equal(m.hinv, before)

    def test_scalar_example(self):
        # Hinv = [2], z = [1], w = 1/4: H becomes 3/4 and Hinv 4/3
        m = InfoMatrix(np.array([[0.5]]), np.array([[2.0]]))
        sherman_morrison_update(m, np.array([1.0]), 0.25)
        np.testing.assert_allclose(m.h, [[0.75]])
        np.testing.assert_allclose(m.hinv, [[4.0 / 3.0]])

    def test_matches_direct_inverse_100_updates(self):
        rng = np.random.default_rng(0)
        m = InfoMatrix.identity(10, 1.0)
        for _ in range(100):
            sherman_morrison_update(m, rng.standard_normal(10), float(rng.uniform(0, 0.25)))
        direct = np.linalg.inv(m.h)
        rel = np.linalg.norm(m.hinv - direct) / np.linalg.norm(direct)
        assert rel < 1e-8

    def test_maintained_inverse_over_1000_updates(self):
        # module invariant at d <= 20 over 1e3 updates, relative Frobenius < 1e-6
        for d in (3, 10, 20):
            rng = np.random.default_rng(d)
            m = InfoMatrix.identity(d, 1.0)
            for _ in range(1000):
                sherman_morrison_update(m, rng.standard_normal(d), float(rng.uniform(0, 0.25)))
            direct = np.linalg.inv(m.h)
            rel = np.linalg.norm(m.hinv - direct) / np.linalg.norm(direct)
            assert rel < 1e-6

    def test_norm_monotone_decreasing(self):
        rng = np.random.default_rng(42)
        m = InfoMatrix.identity(5, 1.0)
        probes = rng.standard_normal((8, 5))
        previous = [m.quad(v) for v in probes]
        for _ in range(50):
            z = rng.standard_normal(5)
            sherman_morrison_update(m, z, 0.2)
            current = [m.quad(v) for v in probes]
            for before, after in zip(previous, current):
                assert after <= before + 1e-15
            previous = current

    def test_played_pair_norm_strictly_decreases(self):
        m = InfoMatrix.identity(4, 1.0)
        z = np.array([1.0, -1.0, 0.5, 0.0])
        before = m.quad(z)
        sherman_morrison_update(m, z, 0.25)
        assert m.quad(z) < before

    def test_h_stays_symmetric(self):
        rng = np.random.default_rng(3)
        m = InfoMatrix.identity(6, 1.0)
        for _ in range(200):
            sherman_morrison_update(m, rng.standard_normal(6), 0.25)
        assert np.max(np.abs(m.h - m.h.T)) == 0.0

    def test_negative_weight_rejected(self):
        m = InfoMatrix.identity(2, 1.0)
        with pytest.raises(ValidationError):
            m.update(np.ones(2), -0.1)


class TestWeightedNorm:
    def test_zero_vector(self):
        m = InfoMatrix.identity(3, 1.0)
        assert weighted_norm(m, np.zeros(3)) == 0.0

    def test_identity_metric_is_euclidean(self):
        m = InfoMatrix.identity(4, 1.0)
        z = np.array([3.0, 0.0, 4.0, 0.0])
        assert weighted_norm(m, z) == pytest.approx(5.0)

    def test_diagonal_quadratic_form(self):
        m = InfoMatrix(np.diag([0.25, 1.0]), np.diag([4.0, 1.0]))
        assert weighted_norm(m, np.array([1.0, 1.0])) == pytest.approx(np.sqrt(5.0))

    def test_negative_form_clamps_and_counts(self):
        m = InfoMatrix.identity(2, 1.0)
        m.hinv = np.array([[-1.0, 0.0], [0.0, -1.0]])  # force a numerically bad inverse
        assert weighted_norm(m, np.array([1.0, 0.0])) == 0.0
        assert m.clamp_count == 1


class TestSampleGaussian:
    def test_degenerate_covariance_collapses_to_mean(self):
        mean = np.array([2.0, -1.0])
        draws = sample_gaussian(mean, np.zeros((2, 2)), 5, np.random.default_rng(0))
        np.testing.assert_allclose(draws, np.tile(mean, (5, 1)), atol=1e-4)

    def test_moments_match_at_scale(self):
        rng = np.random.default_rng(123)
        draws = sample_gaussian(np.zeros(3), np.eye(3), 10**5, rng)
        assert np.max(np.abs(draws.mean(axis=0))) < 0.02
        cov = np.cov(draws.T)
        assert np.max(np.abs(cov - np.eye(3))) < 0.05

    def test_same_seed_reproduces(self):
        cov = np.array([[2.0, 0.3], [0.3, 1.0]])
        a = sample_gaussian(np.zeros(2), cov, 10, np.random.default_rng(7))
        b = sample_gaussian(np.zeros(2), cov, 10, np.random.default_rng(7))
        np.testing.assert_array_equal(a, b)

    def test_count_must_be_positive(self):
        with pytest.raises(ValidationError):
            sample_gaussian(np.zeros(2), np.eye(2), 0, np.random.default_rng(0))
