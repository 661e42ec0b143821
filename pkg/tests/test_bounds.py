import math

import numpy as np
import pytest

from pairrank.bounds import (
    BoundConstants,
    MarginSpec,
    concentration_terms,
    oracle_margins,
    ordering_error_bound,
)
from pairrank.data import ItemPool
from pairrank.errors import TieError, ValidationError
from pairrank.infomatrix import InfoMatrix
from pairrank.logistic import sigmoid
from pairrank.samplers import all_pairs


def unit_info(scale=1.0, d=1):
    return InfoMatrix(np.eye(d) / scale, np.eye(d) * scale)


class TestBoundConstants:
    def test_rho_and_c1_formulas(self):
        consts = BoundConstants(s_norm=2.0, q_norm=3.0, lambda0=0.5, dim=4)
        rho2 = 3.0 + 2.0 * math.log(1.0 + 4.0 * 9.0 / 0.5)
        assert consts.rho2 == pytest.approx(rho2)
        assert consts.c1 == pytest.approx(rho2 * 25.0)

    def test_c1_at_least_three(self):
        for s, q, lam in [(0.01, 0.01, 100.0), (5.0, 2.0, 0.1), (0.1, 10.0, 1e-6)]:
            assert BoundConstants(s, q, lam, 2).c1 >= 3.0

    def test_positivity_required(self):
        with pytest.raises(ValidationError):
            BoundConstants(0.0, 1.0, 1.0, 2)


class TestConcentrationTerms:
    def _consts_c1_3(self):
        # lambda0 large enough that rho2 == 3 and s_norm tiny: C1 ~ 3
        consts = BoundConstants(s_norm=1e-12, q_norm=1e-9, lambda0=1.0, dim=1)
        assert consts.c1 == pytest.approx(3.0, rel=1e-6)
        return consts

    def test_arithmetic_example(self):
        # d=1, C1=3, T=100, normalized quad 1, sdot=1/4, delta=0.1
        consts = self._consts_c1_3()
        info = unit_info(scale=1.0 / 100.0)  # quad_H = 1/100 so T * quad = 1
        alpha, beta = concentration_terms(
            np.array([1.0]), np.array([0.0]), info, delta=0.1, t=100, consts=consts
        )
        assert alpha == pytest.approx(math.exp(-(0.1**2) * 100 / (8 * 3 * 0.25**2)))
        assert beta == pytest.approx(math.exp(-0.1 * 100 / 3.0))

    def test_large_delta_limit(self):
        consts = self._consts_c1_3()
        alpha, beta = concentration_terms(
            np.array([1.0]), np.array([0.0]), unit_info(), delta=1e6, t=10, consts=consts
        )
        assert alpha < 1e-300 and beta < 1e-120

    def test_vanishing_slope_kills_first_order_only(self):
        consts = self._consts_c1_3()
        info = unit_info()
        # theta . z huge: dsigma underflows to zero, beta unaffected
        alpha, beta = concentration_terms(
            np.array([1.0]), np.array([800.0]), info, delta=0.1, t=10, consts=consts
        )
        alpha_mid, beta_mid = concentration_terms(
            np.array([1.0]), np.array([0.0]), info, delta=0.1, t=10, consts=consts
        )
        assert alpha == 0.0
        assert beta == beta_mid and beta > 0
        assert alpha_mid > 0

    def test_zero_vector_convention(self):
        consts = self._consts_c1_3()
        alpha, beta = concentration_terms(
            np.zeros(1), np.array([0.0]), unit_info(), delta=0.1, t=10, consts=consts
        )
        assert (alpha, beta) == (0.0, 0.0)

    def test_in_unit_interval_and_decreasing_in_t(self):
        # fixed normalized norms: H grows linearly with t, so both exponents
        # scale with t and the terms strictly decrease
        consts = BoundConstants(1.0, 2.0, 0.3, 3)
        rng = np.random.default_rng(0)
        z = rng.standard_normal(3)
        theta = rng.standard_normal(3)
        alphas, betas = [], []
        for t in (10, 100, 1000):
            info = InfoMatrix(np.eye(3) * 0.5 * t)
            a, b = concentration_terms(z, theta, info, 0.2, t, consts)
            assert 0.0 < a <= 1.0 and 0.0 < b <= 1.0
            alphas.append(a)
            betas.append(b)
        assert alphas[0] > alphas[1] > alphas[2]
        assert betas[0] > betas[1] > betas[2]


class TestOrderingErrorBound:
    def _setup(self, scale=1.0):
        rng = np.random.default_rng(1)
        pool = ItemPool(rng.standard_normal((12, 3)))
        theta = rng.standard_normal(3)
        margins = oracle_margins(pool, theta)
        consts = BoundConstants(float(np.linalg.norm(theta)), 3.0, 0.2, 3)
        info = InfoMatrix(np.eye(3) / scale)
        return pool, theta, margins, consts, info

    def test_early_run_is_vacuous(self):
        pool, theta, margins, consts, info = self._setup()
        result = ordering_error_bound(pool, theta, info, 5, 0.2, consts, margins)
        assert result.vacuous and result.value == 1.0

    def test_monotone_in_eps(self):
        pool, theta, margins, consts, info = self._setup(scale=1e-10)
        values = [
            ordering_error_bound(pool, theta, info, 1000, eps, consts, margins).value
            for eps in (0.05, 0.2, 0.5, 0.9)
        ]
        assert values[0] > values[-1]  # genuinely sensitive to eps at this scale
        for lo, hi in zip(values, values[1:]):
            assert hi <= lo

    def test_tight_information_is_nonvacuous_and_in_unit_interval(self):
        pool, theta, margins, consts, info = self._setup(scale=1e-10)
        result = ordering_error_bound(pool, theta, info, 1000, 0.2, consts, margins)
        assert not result.vacuous
        assert 0.0 < result.value < 1.0
        assert result.approx >= 0.0

    def test_shrinking_uncertainty_shrinks_bound(self):
        pool, theta, margins, consts, _ = self._setup()
        values = []
        for scale in (1e-8, 1e-10, 1e-11):
            info = InfoMatrix(np.eye(3) / scale)
            values.append(
                ordering_error_bound(pool, theta, info, 1000, 0.2, consts, margins).value
            )
        assert values[0] > values[1] > values[2]

    def test_eps_domain(self):
        pool, theta, margins, consts, info = self._setup()
        with pytest.raises(ValidationError):
            ordering_error_bound(pool, theta, info, 10, 0.0, consts, margins)


class TestOracleMargins:
    def test_exact_tie_raises(self):
        pool = ItemPool(np.array([[1.0, 0.0], [1.0, 0.0], [0.0, 1.0]]))
        with pytest.raises(TieError):
            oracle_margins(pool, np.array([1.0, 1.0]))

    def test_two_items(self):
        pool = ItemPool(np.array([[1.0], [0.0]]))
        spec = oracle_margins(pool, np.array([0.7]))
        assert spec.delta_star == pytest.approx(abs(sigmoid(0.7) - 0.5))

    def test_four_item_brute_force(self):
        rng = np.random.default_rng(3)
        pool = ItemPool(rng.standard_normal((4, 2)))
        theta = rng.standard_normal(2)
        spec = oracle_margins(pool, theta)

        scores = pool.features @ theta
        order = np.argsort(-scores)
        position = np.empty(4, dtype=int)
        position[order] = np.arange(4)
        best = np.inf
        for a in range(4):
            for b in range(a + 1, 4):
                z = pool.features[a] - pool.features[b]
                margin = abs(sigmoid(float(theta @ z)) - 0.5)
                best = min(best, margin / abs(position[a] - position[b]))
        assert spec.delta_star == pytest.approx(best)

    def test_margin_inequality_against_delta_star(self):
        rng = np.random.default_rng(8)
        pool = ItemPool(rng.standard_normal((10, 3)))
        theta = rng.standard_normal(3)
        spec = oracle_margins(pool, theta)
        pairs = all_pairs(10)
        scores = pool.features @ theta
        position = np.empty(10, dtype=int)
        position[np.argsort(-scores, kind="stable")] = np.arange(10)
        dist = np.abs(position[pairs[:, 0]] - position[pairs[:, 1]])
        assert np.all(spec.pair_margins >= dist * spec.delta_star - 1e-15)

    def test_margin_spec_positive(self):
        with pytest.raises(ValidationError):
            MarginSpec(0.0)
