import numpy as np
import pytest

from pairrank.data import ComparisonHistory, ItemPool
from pairrank.errors import ValidationError
from pairrank.logistic import sigmoid
from pairrank.models import (
    HybridModel,
    LinearModel,
    TrueSkillState,
    fit_hybrid,
    fit_map,
    fit_mle,
    induced_ranking,
    loglik_grad,
    predict_prob,
    trueskill_update,
    trueskill_win_prob,
)


def random_history(pool, rng, count, theta=None):
    history = ComparisonHistory()
    for _ in range(count):
        i, j = rng.choice(pool.n, size=2, replace=False)
        if theta is None:
            c = int(rng.integers(2))
        else:
            p = sigmoid(theta @ (pool.features[i] - pool.features[j]))
            c = int(rng.random() < p)
        history.add(int(i), int(j), c)
    return history


@pytest.fixture
def pool5():
    return ItemPool(np.random.default_rng(11).standard_normal((5, 3)))


class TestPredictProb:
    def test_uninformed_model_is_even(self, pool5):
        model = LinearModel(np.zeros(3))
        assert predict_prob(model, pool5, 0, 1) == 0.5

    def test_unit_logit(self):
        pool = ItemPool(np.array([[1.0], [0.0]]))
        model = LinearModel(np.array([1.0]))
        assert predict_prob(model, pool, 0, 1) == pytest.approx(1 / (1 + np.exp(-1.0)), abs=1e-12)

    def test_hybrid_reduces_to_per_item_offsets(self):
        pool = ItemPool(np.zeros((3, 2)) + np.array([[0.0, 0], [0, 0], [0, 0]]))
        model = HybridModel(np.zeros(2), np.array([2.5, 0.5, 0.0]))
        assert predict_prob(model, pool, 0, 1) == pytest.approx(sigmoid(2.0), abs=1e-12)

    def test_complement_is_exactly_one(self, pool5):
        rng = np.random.default_rng(0)
        model = LinearModel(rng.standard_normal(3) * 3)
        hybrid = HybridModel(rng.standard_normal(3), rng.standard_normal(5) * 2)
        for _ in range(200):
            i, j = rng.choice(5, size=2, replace=False)
            assert predict_prob(model, pool5, i, j) + predict_prob(model, pool5, j, i) == 1.0
            assert predict_prob(hybrid, pool5, i, j) + predict_prob(hybrid, pool5, j, i) == 1.0


class TestFitMle:
    def test_empty_history(self, pool5):
        model = fit_mle(ComparisonHistory(), pool5, reg=1.0)
        np.testing.assert_array_equal(model.theta, np.zeros(3))
        assert model.converged

    def test_balanced_labels_give_zero(self, pool5):
        history = ComparisonHistory()
        history.add(0, 1, 1)
        history.add(0, 1, 0)
        model = fit_mle(history, pool5, reg=1.0)
        np.testing.assert_allclose(model.theta, np.zeros(3), atol=1e-12)

    def test_one_dimensional_bisection_oracle(self):
        # ten identical wins on z = 1 with unit ridge:
        # the optimum solves 10 (1 - sigma(theta)) - theta = 0
        pool = ItemPool(np.array([[1.0], [0.0]]))
        history = ComparisonHistory()
        for _ in range(10):
            history.add(0, 1, 1)

        def grad(theta):
            return 10.0 * (1.0 - sigmoid(theta)) - theta

        lo, hi = 0.0, 10.0
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if grad(mid) > 0:
                lo = mid
            else:
                hi = mid
        expected = 0.5 * (lo + hi)
        model = fit_mle(history, pool, reg=1.0)
        assert model.theta[0] == pytest.approx(expected, abs=1e-9)

    def test_history_order_invariance(self, pool5):
        rng = np.random.default_rng(5)
        history = random_history(pool5, rng, 40)
        model_a = fit_mle(history, pool5, reg=1.0)
        shuffled = ComparisonHistory()
        order = rng.permutation(len(history.records))
        for k in order:
            rec = history.records[k]
            shuffled.add(rec.i, rec.j, rec.c)
        model_b = fit_mle(shuffled, pool5, reg=1.0)
        np.testing.assert_allclose(model_a.theta, model_b.theta, atol=1e-8)

    def test_nonfinite_features_rejected(self):
        pool = ItemPool(np.array([[1.0, np.nan], [0.0, 1.0]]))
        with pytest.raises(ValidationError):
            fit_mle(ComparisonHistory(), pool, reg=1.0)

    def test_nonconvergence_flag_with_tiny_budget(self, pool5):
        rng = np.random.default_rng(9)
        history = random_history(pool5, rng, 60, theta=np.array([3.0, -2.0, 1.0]))
        model = fit_mle(history, pool5, reg=1.0, max_iter=1)
        assert not model.converged

    def test_reg_must_be_positive(self, pool5):
        with pytest.raises(ValidationError):
            fit_mle(ComparisonHistory(), pool5, reg=0.0)


class TestFitMap:
    def test_empty_history_returns_prior(self, pool5):
        mean = np.array([0.3, -0.2, 0.5])
        model = fit_map(ComparisonHistory(), pool5, mean, np.eye(3))
        np.testing.assert_allclose(model.theta_map, mean, atol=1e-12)
        np.testing.assert_allclose(model.posterior.h, np.eye(3), atol=1e-12)

    def test_identity_prior_equals_unit_ridge_mle(self, pool5):
        rng = np.random.default_rng(21)
        for _ in range(5):
            history = random_history(pool5, rng, 30)
            mle = fit_mle(history, pool5, reg=1.0)
            bayes = fit_map(history, pool5, np.zeros(3), np.eye(3))
            np.testing.assert_allclose(bayes.theta_map, mle.theta, atol=1e-8)

    def test_posterior_matches_hessian_definition(self, pool5):
        rng = np.random.default_rng(2)
        history = random_history(pool5, rng, 25)
        model = fit_map(history, pool5, np.zeros(3), np.eye(3))
        design, _ = history.matrices(pool5)
        probs = sigmoid(design @ model.theta_map)
        expected = np.eye(3) + (design.T * (probs * (1 - probs))) @ design
        np.testing.assert_allclose(model.posterior.h, expected, atol=1e-10)

    def test_indefinite_prior_rejected(self, pool5):
        with pytest.raises(ValidationError):
            fit_map(ComparisonHistory(), pool5, np.zeros(3), -np.eye(3))


class TestFitHybrid:
    def test_empty_history(self, pool5):
        model = fit_hybrid(ComparisonHistory(), pool5, 1.0, 1.0)
        np.testing.assert_array_equal(model.theta, np.zeros(3))
        np.testing.assert_array_equal(model.zeta, np.zeros(5))

    def test_zero_features_match_per_item_fit(self):
        # with no contextual signal the hybrid fit must agree with a pure
        # per-item logistic fit, here computed through one-hot features
        n = 6
        pool = ItemPool(np.zeros((n, 2)))
        rng = np.random.default_rng(3)
        history = random_history(pool, rng, 80)
        hybrid = fit_hybrid(history, pool, 1.0, 1.0)
        np.testing.assert_allclose(hybrid.theta, np.zeros(2), atol=1e-9)

        onehot_pool = ItemPool(np.eye(n))
        onehot_history = ComparisonHistory()
        for rec in history.records:
            onehot_history.add(rec.i, rec.j, rec.c)
        per_item = fit_mle(onehot_history, onehot_pool, reg=1.0)
        np.testing.assert_allclose(hybrid.zeta, per_item.theta, atol=1e-7)
        np.testing.assert_array_equal(
            induced_ranking(hybrid, pool), induced_ranking(per_item, onehot_pool)
        )

    def test_offsets_sum_to_zero(self, pool5):
        rng = np.random.default_rng(17)
        history = random_history(pool5, rng, 50)
        model = fit_hybrid(history, pool5, 1.0, 1.0)
        assert abs(model.zeta.sum()) < 1e-8

    def test_new_item_keeps_zero_offset(self, pool5):
        rng = np.random.default_rng(23)
        history = random_history(pool5, rng, 40)
        model = fit_hybrid(history, pool5, 1.0, 1.0)
        extended = ItemPool(np.vstack([pool5.features, rng.standard_normal((1, 3))]))
        refit = fit_hybrid(history, extended, 1.0, 1.0, theta0=model.theta)
        assert refit.zeta[-1] == pytest.approx(0.0, abs=1e-10)
        np.testing.assert_allclose(refit.theta, model.theta, atol=1e-7)


class TestLoglikGrad:
    def test_zero_at_optimum(self, pool5):
        rng = np.random.default_rng(31)
        history = random_history(pool5, rng, 35)
        model = fit_mle(history, pool5, reg=1.0)
        assert np.max(np.abs(loglik_grad(model, history, pool5))) < 1e-6

    def test_penalty_only_gradient(self, pool5):
        theta = np.array([0.4, -1.0, 2.0])
        model = LinearModel(theta, reg=1.0)
        np.testing.assert_allclose(loglik_grad(model, ComparisonHistory(), pool5), -theta)

    def test_matches_central_finite_differences(self):
        pool = ItemPool(np.random.default_rng(7).standard_normal((8, 5)))
        rng = np.random.default_rng(8)
        history = random_history(pool, rng, 60)

        def objective(theta):
            design, labels = history.matrices(pool)
            logits = design @ theta
            loglik = -np.sum(
                np.logaddexp(0, -logits) * labels + np.logaddexp(0, logits) * (1 - labels)
            )
            return loglik - 0.5 * theta @ theta

        step = 1e-5
        for _ in range(20):
            theta = rng.standard_normal(5)
            model = LinearModel(theta, reg=1.0)
            grad = loglik_grad(model, history, pool)
            numeric = np.zeros(5)
            for k in range(5):
                offset = np.zeros(5)
                offset[k] = step
                numeric[k] = (objective(theta + offset) - objective(theta - offset)) / (2 * step)
            rel = np.linalg.norm(grad - numeric) / max(np.linalg.norm(numeric), 1e-12)
            assert rel < 1e-4


class TestTrueSkill:
    def test_equal_prior_update_is_symmetric(self):
        state = TrueSkillState.create(2)
        updated = trueskill_update(state, 0, 1, 1)
        assert updated.mu[0] > updated.mu[1]
        assert updated.mu[0] - state.mu[0] == pytest.approx(state.mu[1] - updated.mu[1])
        assert np.all(updated.sigma2 < state.sigma2)

    def test_repeated_wins_drive_probability_up(self):
        state = TrueSkillState.create(2)
        probs = []
        for _ in range(50):
            state = trueskill_update(state, 0, 1, 1)
            probs.append(trueskill_win_prob(state, 0, 1))
        assert all(b >= a for a, b in zip(probs, probs[1:]))
        assert probs[-1] > 0.95

    def test_variance_stays_positive(self):
        rng = np.random.default_rng(0)
        state = TrueSkillState.create(4)
        for _ in range(500):
            i, j = rng.choice(4, size=2, replace=False)
            state = trueskill_update(state, int(i), int(j), int(rng.integers(2)))
        assert np.all(state.sigma2 > 0)

    def test_monte_carlo_moment_matching(self):
        # one win from default priors against a rejection-sampling oracle:
        # draw skills and performances, keep samples where the winner's
        # performance is higher, and moment-match the winner's skill
        state = TrueSkillState.create(2)
        updated = trueskill_update(state, 0, 1, 1)

        rng = np.random.default_rng(6)
        count = 10**6
        var0 = state.sigma2_0 + state.tau2
        skills = rng.standard_normal((count, 2)) * np.sqrt(var0) + state.mu0
        perfs = skills + rng.standard_normal((count, 2)) * np.sqrt(state.beta2)
        won = perfs[:, 0] > perfs[:, 1]
        mu_w = skills[won, 0].mean()
        sd_w = skills[won, 0].std(ddof=1)
        mu_l = skills[won, 1].mean()
        sd_l = skills[won, 1].std(ddof=1)

        assert updated.mu[0] == pytest.approx(mu_w, abs=1e-2)
        assert updated.mu[1] == pytest.approx(mu_l, abs=1e-2)
        assert np.sqrt(updated.sigma2[0]) == pytest.approx(sd_w, abs=1e-2)
        assert np.sqrt(updated.sigma2[1]) == pytest.approx(sd_l, abs=1e-2)


class TestInducedRanking:
    def test_ties_break_by_item_id(self, pool5):
        model = LinearModel(np.zeros(3))
        np.testing.assert_array_equal(induced_ranking(model, pool5), np.arange(5))

    def test_one_dimensional_sort(self):
        pool = ItemPool(np.array([[3.0], [1.0], [2.0]]))
        model = LinearModel(np.array([1.0]))
        np.testing.assert_array_equal(induced_ranking(model, pool), [0, 2, 1])

    def test_ranking_agrees_with_pairwise_signs(self):
        pool = ItemPool(np.random.default_rng(2).standard_normal((20, 4)))
        model = LinearModel(np.random.default_rng(3).standard_normal(4))
        ranking = induced_ranking(model, pool)
        position = np.empty(20, dtype=int)
        position[ranking] = np.arange(20)
        scores = pool.features @ model.theta
        for i in range(20):
            for j in range(20):
                if i == j or scores[i] == scores[j]:
                    continue
                assert (position[i] < position[j]) == (scores[i] > scores[j])
