"""Preference models: penalized logistic MLE, MAP with Laplace posterior,
hybrid per-item correction, and a two-player Gaussian skill-rating model.

All logistic fits run damped Newton on the penalized log-likelihood. The
inner loop iterates to a gradient infinity-norm of 1e-10 (or 100 iterations)
so that independently fitted models agree to well below 1e-8; the exported
``converged`` flag uses the looser 1e-6 threshold.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import ndtr

from .data import ComparisonHistory, ItemPool, _check_pair, validate_pool_finite
from .errors import ValidationError
from .infomatrix import InfoMatrix
from .logistic import comparison_prob, dsigmoid, sigmoid

CONVERGENCE_TOL = 1e-6
_INNER_TOL = 1e-10
_MAX_ITER = 100


@dataclass
class LinearModel:
    """Fully contextual model: score(i) = theta . x_i."""

    theta: np.ndarray
    reg: float = 1.0
    converged: bool = True


@dataclass
class BayesLinearModel:
    """MAP estimate with a Gaussian (Laplace) posterior around it."""

    theta_map: np.ndarray
    prior_mean: np.ndarray
    prior_precision: np.ndarray
    posterior: InfoMatrix
    converged: bool = True


@dataclass
class HybridModel:
    """Contextual score plus a free per-item offset: theta . x_i + zeta_i."""

    theta: np.ndarray
    zeta: np.ndarray
    reg_theta: float = 1.0
    reg_zeta: float = 1.0
    converged: bool = True

    def extend(self, k: int) -> None:
        """Append k new items; their offsets start at zero."""
        self.zeta = np.concatenate([self.zeta, np.zeros(k)])


@dataclass
class TrueSkillState:
    """Per-item Gaussian skill beliefs for the non-contextual baseline."""

    mu: np.ndarray
    sigma2: np.ndarray
    beta2: float
    tau2: float
    mu0: float = 25.0
    sigma2_0: float = field(default=(25.0 / 3.0) ** 2)

    @classmethod
    def create(
        cls,
        n: int,
        mu0: float = 25.0,
        sigma0: float = 25.0 / 3.0,
        beta: float | None = None,
        tau: float | None = None,
    ) -> "TrueSkillState":
        beta = sigma0 / 2.0 if beta is None else beta
        tau = sigma0 / 100.0 if tau is None else tau
        return cls(
            mu=np.full(n, mu0, dtype=float),
            sigma2=np.full(n, sigma0**2, dtype=float),
            beta2=beta**2,
            tau2=tau**2,
            mu0=mu0,
            sigma2_0=sigma0**2,
        )

    def extend(self, k: int) -> None:
        self.mu = np.concatenate([self.mu, np.full(k, self.mu0)])
        self.sigma2 = np.concatenate([self.sigma2, np.full(k, self.sigma2_0)])

    def copy(self) -> "TrueSkillState":
        return TrueSkillState(
            self.mu.copy(), self.sigma2.copy(), self.beta2, self.tau2, self.mu0, self.sigma2_0
        )


def _newton_penalized(
    design: np.ndarray,
    labels: np.ndarray,
    prior_mean: np.ndarray,
    prior_precision: np.ndarray,
    theta0: np.ndarray,
    max_iter: int = _MAX_ITER,
) -> tuple[np.ndarray, bool, np.ndarray]:
    """Damped Newton ascent on loglik - (1/2)(theta-m)^T P (theta-m).

    Returns (optimum, converged-at-1e-6, Hessian of the negative objective
    at the optimum). The objective is strictly concave for positive-definite
    P, so halving the step until the objective stops decreasing terminates.
    """

    def objective(th: np.ndarray) -> float:
        logits = design @ th
        loglik = -float(
            np.sum(np.logaddexp(0.0, -logits) * labels + np.logaddexp(0.0, logits) * (1 - labels))
        )
        diff = th - prior_mean
        return loglik - 0.5 * float(diff @ prior_precision @ diff)

    theta = theta0.astype(float).copy()
    grad_inf = np.inf
    hess = prior_precision.copy()
    for _ in range(max_iter):
        probs = sigmoid(design @ theta)
        grad = design.T @ (labels - probs) - prior_precision @ (theta - prior_mean)
        grad_inf = float(np.max(np.abs(grad))) if grad.size else 0.0
        if grad_inf < _INNER_TOL:
            break
        weights = probs * (1.0 - probs)
        hess = prior_precision + (design.T * weights) @ design
        step = np.linalg.solve(hess, grad)
        current = objective(theta)
        scale = 1.0
        while scale > 1e-12:
            candidate = theta + scale * step
            if objective(candidate) >= current:
                theta = candidate
                break
            scale *= 0.5
        else:
            break  # no ascent direction left; numerical floor reached
        probs = sigmoid(design @ theta)
        grad = design.T @ (labels - probs) - prior_precision @ (theta - prior_mean)
        grad_inf = float(np.max(np.abs(grad))) if grad.size else 0.0
    weights = dsigmoid(design @ theta)
    hess = prior_precision + (design.T * weights) @ design
    return theta, grad_inf < CONVERGENCE_TOL, hess


def fit_mle(
    history: ComparisonHistory,
    pool: ItemPool,
    reg: float = 1.0,
    theta0: np.ndarray | None = None,
    max_iter: int = _MAX_ITER,
) -> LinearModel:
    """Ridge-penalized logistic fit: minimizes NLL + reg * ||theta||^2 / 2."""
    if reg <= 0:
        raise ValidationError("reg must be positive")
    validate_pool_finite(pool)
    design, labels = history.matrices(pool)
    d = pool.d
    theta0 = np.zeros(d) if theta0 is None else np.asarray(theta0, dtype=float)
    theta, converged, _ = _newton_penalized(
        design, labels, np.zeros(d), reg * np.eye(d), theta0, max_iter
    )
    return LinearModel(theta, reg, converged)


def fit_map(
    history: ComparisonHistory,
    pool: ItemPool,
    prior_mean: np.ndarray,
    prior_precision: np.ndarray,
    theta0: np.ndarray | None = None,
    max_iter: int = _MAX_ITER,
) -> BayesLinearModel:
    """MAP fit; the Laplace posterior covariance is the inverse Hessian at the optimum."""
    validate_pool_finite(pool)
    prior_mean = np.asarray(prior_mean, dtype=float)
    prior_precision = np.asarray(prior_precision, dtype=float)
    try:
        np.linalg.cholesky(prior_precision)
    except np.linalg.LinAlgError as exc:
        raise ValidationError("prior precision must be positive-definite") from exc
    design, labels = history.matrices(pool)
    theta0 = prior_mean if theta0 is None else np.asarray(theta0, dtype=float)
    theta, converged, hess = _newton_penalized(
        design, labels, prior_mean, prior_precision, theta0, max_iter
    )
    return BayesLinearModel(theta, prior_mean, prior_precision, InfoMatrix(hess), converged)


def _hybrid_design(history: ComparisonHistory, pool: ItemPool) -> tuple[np.ndarray, np.ndarray]:
    """Design matrix over the stacked (theta, zeta) parameter vector."""
    n, d = pool.n, pool.d
    z, labels = history.matrices(pool)
    design = np.zeros((len(z), d + n))
    design[:, :d] = z
    for row, rec in enumerate(history.records):
        design[row, d + rec.i] = 1.0
        design[row, d + rec.j] = -1.0
    return design, labels


def fit_hybrid(
    history: ComparisonHistory,
    pool: ItemPool,
    reg_theta: float = 1.0,
    reg_zeta: float = 1.0,
    theta0: np.ndarray | None = None,
    zeta0: np.ndarray | None = None,
    max_iter: int = _MAX_ITER,
) -> HybridModel:
    """Joint penalized fit of (theta, zeta).

    The offsets enter only through differences, so the L2 penalty pins their
    sum to zero at the optimum.
    """
    if reg_theta <= 0 or reg_zeta <= 0:
        raise ValidationError("both regularization strengths must be positive")
    validate_pool_finite(pool)
    n, d = pool.n, pool.d
    design, labels = _hybrid_design(history, pool)
    start = np.zeros(d + n)
    if theta0 is not None:
        start[:d] = theta0
    if zeta0 is not None:
        start[d:] = zeta0
    precision = np.diag(np.concatenate([np.full(d, reg_theta), np.full(n, reg_zeta)]))
    params, converged, _ = _newton_penalized(
        design, labels, np.zeros(d + n), precision, start, max_iter
    )
    return HybridModel(params[:d], params[d:], reg_theta, reg_zeta, converged)


def score_difference(model, pool: ItemPool, i: int, j: int) -> float:
    """Model score difference f(i, j); positive means i is ranked higher."""
    z = pool.features[i] - pool.features[j]
    if isinstance(model, LinearModel):
        return float(model.theta @ z)
    if isinstance(model, BayesLinearModel):
        return float(model.theta_map @ z)
    if isinstance(model, HybridModel):
        return float(model.theta @ z) + float(model.zeta[i] - model.zeta[j])
    raise ValidationError(f"unsupported model type {type(model).__name__}")


def predict_prob(model, pool: ItemPool, i: int, j: int) -> float:
    """P(i preferred over j); complements to exactly 1 when the pair flips."""
    _check_pair(pool.n, i, j)
    return comparison_prob(score_difference(model, pool, i, j))


def model_scores(model, pool: ItemPool) -> np.ndarray:
    """Per-item scores inducing the model's ranking."""
    if isinstance(model, LinearModel):
        return pool.features @ model.theta
    if isinstance(model, BayesLinearModel):
        return pool.features @ model.theta_map
    if isinstance(model, HybridModel):
        return pool.features @ model.theta + model.zeta
    if isinstance(model, TrueSkillState):
        return model.mu.copy()
    raise ValidationError(f"unsupported model type {type(model).__name__}")


def induced_ranking(model, pool: ItemPool) -> np.ndarray:
    """Items sorted by decreasing score; ties break by ascending item id."""
    scores = model_scores(model, pool)
    return np.argsort(-scores, kind="stable")


def loglik_grad(model, history: ComparisonHistory, pool: ItemPool) -> np.ndarray:
    """Exact gradient of the penalized log-likelihood at the model's parameters."""
    if isinstance(model, LinearModel):
        design, labels = history.matrices(pool)
        return design.T @ (labels - sigmoid(design @ model.theta)) - model.reg * model.theta
    if isinstance(model, BayesLinearModel):
        design, labels = history.matrices(pool)
        fit_term = design.T @ (labels - sigmoid(design @ model.theta_map))
        return fit_term - model.prior_precision @ (model.theta_map - model.prior_mean)
    if isinstance(model, HybridModel):
        design, labels = _hybrid_design(history, pool)
        params = np.concatenate([model.theta, model.zeta])
        penalty = np.concatenate(
            [model.reg_theta * model.theta, model.reg_zeta * model.zeta]
        )
        return design.T @ (labels - sigmoid(design @ params)) - penalty
    raise ValidationError(f"unsupported model type {type(model).__name__}")


def _norm_pdf(x: float) -> float:
    return math.exp(-0.5 * x * x) / math.sqrt(2.0 * math.pi)


def _truncation_v(t: float) -> float:
    """phi(t) / Phi(t) with the asymptote -t for far-negative t."""
    denom = float(ndtr(t))
    if denom < 1e-300:
        return -t
    return _norm_pdf(t) / denom


def trueskill_update(state: TrueSkillState, i: int, j: int, c: int) -> TrueSkillState:
    """Closed-form two-player update (no draws); c=1 means i won.

    Dynamics variance tau2 is added to both items before moment matching,
    and the variance multiplier w * sigma^2 / c^2 < 1 keeps sigma2 positive.
    """
    if c not in (0, 1):
        raise ValidationError("label must be 0 or 1")
    _check_pair(len(state.mu), i, j)
    winner, loser = (i, j) if c == 1 else (j, i)
    out = state.copy()
    var_w = state.sigma2[winner] + state.tau2
    var_l = state.sigma2[loser] + state.tau2
    c2 = var_w + var_l + 2.0 * state.beta2
    scale = math.sqrt(c2)
    t = (state.mu[winner] - state.mu[loser]) / scale
    v = _truncation_v(t)
    w = v * (v + t)
    w = min(w, 1.0 - 1e-12)
    out.mu[winner] = state.mu[winner] + (var_w / scale) * v
    out.mu[loser] = state.mu[loser] - (var_l / scale) * v
    out.sigma2[winner] = var_w * (1.0 - w * var_w / c2)
    out.sigma2[loser] = var_l * (1.0 - w * var_l / c2)
    return out


def trueskill_win_prob(state: TrueSkillState, i: int, j: int) -> float:
    """P(i beats j) under the current Gaussian beliefs."""
    spread = math.sqrt(state.sigma2[i] + state.sigma2[j] + 2.0 * state.beta2)
    return float(ndtr((state.mu[i] - state.mu[j]) / spread))
