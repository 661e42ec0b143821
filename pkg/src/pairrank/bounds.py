"""Computable concentration terms and the ordering-error bound.

The bound machinery works in the per-step-normalized information metric:
with H the accumulated matrix after T comparisons,
||z||^2 in the normalized inverse metric equals T * ||z||^2_{H^-1}.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .data import ItemPool
from .errors import TieError, ValidationError
from .infomatrix import InfoMatrix
from .logistic import dsigmoid, sigmoid
from .samplers import all_pairs


@dataclass
class BoundConstants:
    """Problem constants entering the concentration exponents.

    s_norm bounds ||theta_true||, q_norm bounds max ||x_i||, lambda0 floors
    the minimum eigenvalue of the normalized information matrix.
    """

    s_norm: float
    q_norm: float
    lambda0: float
    dim: int

    def __post_init__(self):
        if min(self.s_norm, self.q_norm, self.lambda0) <= 0 or self.dim < 1:
            raise ValidationError("bound constants must be positive")

    @property
    def rho2(self) -> float:
        return 3.0 + 2.0 * math.log(1.0 + 4.0 * self.q_norm**2 / self.lambda0)

    @property
    def c1(self) -> float:
        return self.rho2 * (1.0 + 2.0 * self.s_norm) ** 2


@dataclass
class MarginSpec:
    """Smallest comparison margin per unit of rank distance."""

    delta_star: float
    pair_margins: np.ndarray | None = None  # aligned with all_pairs(n)

    def __post_init__(self):
        if self.delta_star <= 0:
            raise ValidationError("delta_star must be positive")


@dataclass
class BoundResult:
    value: float
    vacuous: bool
    approx: float
    alpha_star: float
    beta_star: float


def concentration_terms(
    z: np.ndarray,
    theta: np.ndarray,
    hinv: InfoMatrix,
    delta: float,
    t: int,
    consts: BoundConstants,
) -> tuple[float, float]:
    """First- and second-order concentration terms (alpha, beta) for one pair.

    alpha = exp(-delta^2 t / (8 d C1 (sdot * ||z||)^2)) and
    beta  = exp(-delta t / (d C1 ||z||^2)), norms taken in the normalized
    inverse metric. A zero difference vector maps to (0, 0) by convention.
    """
    if delta <= 0:
        raise ValidationError("delta must be positive")
    if t < 1:
        raise ValidationError("t must be >= 1")
    z = np.asarray(z, dtype=float)
    quad_tilde = t * hinv.quad(z)
    if quad_tilde == 0.0:
        return 0.0, 0.0
    sdot = dsigmoid(float(np.asarray(theta, dtype=float) @ z))
    d, c1 = consts.dim, consts.c1
    first = sdot * sdot * quad_tilde
    alpha = 0.0 if first == 0.0 else math.exp(-(delta**2) * t / (8.0 * d * c1 * first))
    beta = math.exp(-delta * t / (d * c1 * quad_tilde))
    return alpha, beta


def _inv_expm1(exponent: float) -> float:
    """(e^x - 1)^-1 for x > 0, returning 0 when x overflows exp."""
    if exponent > 700.0:
        return 0.0
    return 1.0 / math.expm1(exponent)


def ordering_error_bound(
    pool: ItemPool,
    theta_t: np.ndarray,
    hinv: InfoMatrix,
    t: int,
    eps: float,
    consts: BoundConstants,
    margins: MarginSpec,
) -> BoundResult:
    """Upper bound on P(ordering error >= eps) after t comparisons.

    Valid only while both worst-case concentration terms are at most
    1/(4 d t); otherwise the bound is reported as 1 with the vacuous flag.
    The uncapped approximation 4 d t / (eps n) * (alpha + beta) is returned
    alongside for trend diagnostics.
    """
    if not 0.0 < eps < 1.0:
        raise ValidationError("eps must be in (0, 1)")
    theta_t = np.asarray(theta_t, dtype=float)
    pairs = all_pairs(pool.n)
    z = pool.features[pairs[:, 0]] - pool.features[pairs[:, 1]]
    quads_tilde = t * hinv.quads(z)
    sdots = dsigmoid(z @ theta_t)
    worst_first = float(np.max((sdots**2) * quads_tilde))
    worst_second = float(np.max(quads_tilde))
    delta = margins.delta_star
    d, c1, n = consts.dim, consts.c1, pool.n

    alpha_exp = math.inf if worst_first == 0 else delta**2 * t / (8.0 * d * c1 * worst_first)
    beta_exp = math.inf if worst_second == 0 else delta * t / (d * c1 * worst_second)
    alpha_star = math.exp(-alpha_exp) if alpha_exp != math.inf else 0.0
    beta_star = math.exp(-beta_exp) if beta_exp != math.inf else 0.0

    prefactor = 4.0 * d * t / (eps * n)
    approx = prefactor * (alpha_star + beta_star)
    threshold = 1.0 / (4.0 * d * t)
    if alpha_star > threshold or beta_star > threshold:
        return BoundResult(1.0, True, approx, alpha_star, beta_star)
    value = min(1.0, prefactor * (_inv_expm1(alpha_exp) + _inv_expm1(beta_exp)))
    return BoundResult(value, False, approx, alpha_star, beta_star)


def oracle_margins(pool: ItemPool, theta_star: np.ndarray) -> MarginSpec:
    """Exact margins |sigma(theta_true . z) - 1/2| from a known parameter.

    delta_star is the smallest margin per unit of rank distance in the
    parameter's induced ranking. Exact ties are rejected: the setting
    assumes a strict ground-truth ordering.
    """
    theta_star = np.asarray(theta_star, dtype=float)
    pairs = all_pairs(pool.n)
    z = pool.features[pairs[:, 0]] - pool.features[pairs[:, 1]]
    margins = np.abs(sigmoid(z @ theta_star) - 0.5)
    if np.any(margins == 0.0):
        k = int(np.argmax(margins == 0.0))
        raise TieError(f"pair {tuple(pairs[k])} has exactly even comparison odds")
    scores = pool.features @ theta_star
    position = np.empty(pool.n, dtype=int)
    position[np.argsort(-scores, kind="stable")] = np.arange(pool.n)
    rank_dist = np.abs(position[pairs[:, 0]] - position[pairs[:, 1]])
    return MarginSpec(float(np.min(margins / rank_dist)), margins)
