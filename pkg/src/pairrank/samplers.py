"""Pair-selection strategies and candidate subsampling.

All criteria are symmetric in (i, j), so only unordered pairs with i < j are
scored. Ties break lexicographically: the eligible-pair array is kept in
lexicographic order and argmax returns the first maximizer.

Sampler names addressable from configs and the service API:
``guro``, ``bayes-guro``, ``bald``, ``normmin``, ``uniform``, ``colstim``,
``trueskill``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
from scipy.special import xlogy

from .data import ItemPool
from .errors import NoEligiblePairsError, ValidationError
from .infomatrix import InfoMatrix, sample_gaussian
from .logistic import dsigmoid, sigmoid
from .models import BayesLinearModel, HybridModel, LinearModel, TrueSkillState

SAMPLER_KINDS = ("guro", "bayes-guro", "bald", "normmin", "uniform", "colstim", "trueskill")

_BALD_C2 = 4.0 * math.log(2.0)  # Taylor constant C^2 for the entropy integral
_DEGENERATE_VARIANCE = 1e-10  # below this, posterior prediction variance is round-off


@dataclass
class SamplerSpec:
    """Which criterion picks the next pair, plus its hyperparameters."""

    kind: str
    posterior_samples: int = 50
    candidate_cap: int | None = None
    confidence_width: float | None = None
    bald_half_exponent: bool = False

    def __post_init__(self):
        if self.kind not in SAMPLER_KINDS:
            raise ValidationError(
                f"unknown sampler '{self.kind}'; valid kinds: {', '.join(SAMPLER_KINDS)}"
            )
        if self.kind == "bayes-guro" and self.posterior_samples < 2:
            raise ValidationError("bayes-guro needs at least 2 posterior samples")
        if self.candidate_cap is not None and self.candidate_cap < 1:
            raise ValidationError("candidate cap must be >= 1")


@dataclass
class SelectionContext:
    """Read-only state a selector scores pairs against.

    ``pairs`` holds the eligible unordered pairs (i < j, lexicographic) and
    ``pair_z`` the matching difference vectors. ``rng`` is the stream owned
    by the active selector; subsampling draws from ``rng_subsample``.
    """

    pool: ItemPool
    model: object
    info: InfoMatrix | None
    rng: np.random.Generator
    pairs: np.ndarray
    pair_z: np.ndarray | None = None
    zeta_prec: np.ndarray | None = None
    design: InfoMatrix | None = None
    rng_subsample: np.random.Generator | None = None


def all_pairs(n: int) -> np.ndarray:
    """All unordered pairs of n items in lexicographic order, shape (P, 2)."""
    i, j = np.triu_indices(n, k=1)
    return np.column_stack([i, j])


def _require_pairs(ctx: SelectionContext) -> None:
    if ctx.pairs is None or len(ctx.pairs) == 0:
        raise NoEligiblePairsError("no eligible pairs remain")


def _pair_z(ctx: SelectionContext) -> np.ndarray:
    if ctx.pair_z is not None:
        return ctx.pair_z
    return ctx.pool.features[ctx.pairs[:, 0]] - ctx.pool.features[ctx.pairs[:, 1]]


def _point_theta(model) -> np.ndarray:
    if isinstance(model, LinearModel):
        return model.theta
    if isinstance(model, BayesLinearModel):
        return model.theta_map
    if isinstance(model, HybridModel):
        return model.theta
    raise ValidationError(f"selector needs a contextual model, got {type(model).__name__}")


def pair_logits(ctx: SelectionContext) -> np.ndarray:
    """Score differences for every eligible pair under the point estimate."""
    mu = _pair_z(ctx) @ _point_theta(ctx.model)
    if isinstance(ctx.model, HybridModel):
        mu = mu + ctx.model.zeta[ctx.pairs[:, 0]] - ctx.model.zeta[ctx.pairs[:, 1]]
    return mu


def pair_quads(ctx: SelectionContext) -> np.ndarray:
    """Squared inverse-information norms ||z||^2 for every eligible pair.

    For hybrid models the per-item offset block is kept diagonal, adding
    1/prec_i + 1/prec_j to the contextual quadratic form.
    """
    if ctx.info is None:
        raise ValidationError("selector needs an information matrix")
    q = ctx.info.quads(_pair_z(ctx))
    if isinstance(ctx.model, HybridModel):
        if ctx.zeta_prec is None:
            raise ValidationError("hybrid selection needs per-item precisions")
        q = q + 1.0 / ctx.zeta_prec[ctx.pairs[:, 0]] + 1.0 / ctx.zeta_prec[ctx.pairs[:, 1]]
    return q


def _argmax_pair(ctx: SelectionContext, scores: np.ndarray) -> tuple[int, int]:
    k = int(np.argmax(scores))
    return int(ctx.pairs[k, 0]), int(ctx.pairs[k, 1])


def guro_scores(ctx: SelectionContext) -> np.ndarray:
    """Aleatoric-times-epistemic uncertainty product per pair."""
    return dsigmoid(pair_logits(ctx)) * np.sqrt(pair_quads(ctx))


def guro_select(ctx: SelectionContext) -> tuple[int, int]:
    """Pair maximizing dsigma(theta . z) * ||z|| in the inverse-information norm."""
    _require_pairs(ctx)
    return _argmax_pair(ctx, guro_scores(ctx))


def bayes_guro_select(ctx: SelectionContext, k: int = 50) -> tuple[int, int]:
    """Pair with the largest sample variance of predicted preference.

    Draws k parameter samples from the Gaussian posterior and scores each
    pair by the unbiased variance of sigma(theta_s . z) over the draws.
    """
    _require_pairs(ctx)
    if k < 2:
        raise ValidationError("need at least 2 posterior samples")
    model = ctx.model
    if isinstance(model, BayesLinearModel):
        draws = sample_gaussian(model.theta_map, ctx.info.hinv, k, ctx.rng)
        logits = _pair_z(ctx) @ draws.T
    elif isinstance(model, HybridModel):
        if ctx.zeta_prec is None:
            raise ValidationError("hybrid selection needs per-item precisions")
        draws = sample_gaussian(model.theta, ctx.info.hinv, k, ctx.rng)
        zeta_sd = np.sqrt(1.0 / ctx.zeta_prec)
        zeta_draws = model.zeta + ctx.rng.standard_normal((k, len(model.zeta))) * zeta_sd
        logits = _pair_z(ctx) @ draws.T
        logits += zeta_draws[:, ctx.pairs[:, 0]].T - zeta_draws[:, ctx.pairs[:, 1]].T
    else:
        raise ValidationError("bayes-guro needs a Bayesian or hybrid model")
    probs = sigmoid(logits)
    variances = probs.var(axis=1, ddof=1)
    # a collapsed posterior leaves only round-off noise; treat it as all-tied
    if float(variances.max(initial=0.0)) <= _DEGENERATE_VARIANCE:
        return int(ctx.pairs[0, 0]), int(ctx.pairs[0, 1])
    return _argmax_pair(ctx, variances)


def binary_entropy_bits(p: np.ndarray) -> np.ndarray:
    """Shannon entropy of a Bernoulli(p) in bits."""
    p = np.asarray(p, dtype=float)
    return -(xlogy(p, p) + xlogy(1.0 - p, 1.0 - p)) / math.log(2.0)


def bald_scores(mu: np.ndarray, s2: np.ndarray, half_exponent: bool = False) -> np.ndarray:
    """Probit-approximated mutual information between the label and parameters.

    ``half_exponent`` switches the second term's exponent to
    -mu^2 / (2 (s^2 + C^2)) for sensitivity checks.
    """
    c2 = _BALD_C2
    marginal = binary_entropy_bits(sigmoid(mu / np.sqrt(1.0 + math.pi * s2 / 8.0)))
    denom = s2 + c2
    exponent = -(mu**2) / (2.0 * denom) if half_exponent else -(mu**2) / denom
    expected = math.sqrt(c2) / np.sqrt(denom) * np.exp(exponent)
    return marginal - expected


def bald_select(ctx: SelectionContext, half_exponent: bool = False) -> tuple[int, int]:
    """Pair maximizing the approximate posterior-entropy reduction."""
    _require_pairs(ctx)
    return _argmax_pair(ctx, bald_scores(pair_logits(ctx), pair_quads(ctx), half_exponent))


def normmin_select(ctx: SelectionContext) -> tuple[int, int]:
    """Pair with the largest inverse-information norm; ignores label noise."""
    _require_pairs(ctx)
    return _argmax_pair(ctx, pair_quads(ctx))


def uniform_select(ctx: SelectionContext) -> tuple[int, int]:
    """Uniform draw over eligible unordered pairs."""
    _require_pairs(ctx)
    k = int(ctx.rng.integers(len(ctx.pairs)))
    return int(ctx.pairs[k, 0]), int(ctx.pairs[k, 1])


def colstim_select(ctx: SelectionContext, c1: float) -> tuple[int, int]:
    """Perturbed-leader first arm plus an optimistic challenger.

    The first item maximizes theta . x + c1 * eps * ||x|| over items with at
    least one eligible partner (eps i.i.d. standard Gumbel, one draw per item
    each round); the challenger maximizes theta . x_j + c1 * ||x_i - x_j||.
    Norms use the unweighted design matrix, not the Fisher information.
    """
    _require_pairs(ctx)
    if ctx.design is None:
        raise ValidationError("colstim needs the unweighted design matrix")
    theta = _point_theta(ctx.model)
    x = ctx.pool.features
    n = ctx.pool.n
    utilities = x @ theta
    noise = ctx.rng.gumbel(size=n)
    item_norms = np.sqrt(ctx.design.quads(x))
    candidates = np.unique(ctx.pairs)
    perturbed = utilities[candidates] + c1 * noise[candidates] * item_norms[candidates]
    first = int(candidates[int(np.argmax(perturbed))])
    mask = (ctx.pairs[:, 0] == first) | (ctx.pairs[:, 1] == first)
    partners = np.where(ctx.pairs[mask, 0] == first, ctx.pairs[mask, 1], ctx.pairs[mask, 0])
    order = np.argsort(partners)
    partners = partners[order]
    z = x[first] - x[partners]
    bonus = c1 * np.sqrt(ctx.design.quads(z))
    second = int(partners[int(np.argmax(utilities[partners] + bonus))])
    return (first, second) if first < second else (second, first)


def default_confidence_width(d: int, budget: int) -> float:
    """Default colstim width sqrt(d log T) for a budget of T comparisons."""
    return math.sqrt(d * math.log(max(budget, 2)))


def trueskill_quality(state: TrueSkillState, pairs: np.ndarray) -> np.ndarray:
    """Match quality sqrt(2 b^2 / c^2) * exp(-(mu_i - mu_j)^2 / (2 c^2))."""
    i, j = pairs[:, 0], pairs[:, 1]
    c2 = 2.0 * state.beta2 + state.sigma2[i] + state.sigma2[j]
    gap = state.mu[i] - state.mu[j]
    return np.sqrt(2.0 * state.beta2 / c2) * np.exp(-(gap**2) / (2.0 * c2))


def trueskill_select(ctx: SelectionContext) -> tuple[int, int]:
    """Most uncertain item, paired with its best-quality opponent.

    A global quality argmax would lock onto one low-variance evenly-matched
    pair forever (shrinking sigma raises q), so the first item is the
    eligible item with the largest skill variance (ties by id) and the
    partner maximizes q against it (ties lexicographic).
    """
    _require_pairs(ctx)
    state = ctx.model
    if not isinstance(state, TrueSkillState):
        raise ValidationError("trueskill selection needs a TrueSkillState model")
    candidates = np.unique(ctx.pairs)
    first = int(candidates[int(np.argmax(state.sigma2[candidates]))])
    mask = (ctx.pairs[:, 0] == first) | (ctx.pairs[:, 1] == first)
    pairs = ctx.pairs[mask]
    k = int(np.argmax(trueskill_quality(state, pairs)))
    return int(pairs[k, 0]), int(pairs[k, 1])


def subsample_candidates(
    ctx: SelectionContext, m: int, rng: np.random.Generator | None = None
) -> SelectionContext:
    """Restrict the context to a uniform subset of at most m eligible pairs.

    Identity (no rng consumed) when m covers the eligible set; the subset
    keeps lexicographic order.
    """
    _require_pairs(ctx)
    if m < 1:
        raise ValidationError("candidate cap must be >= 1")
    total = len(ctx.pairs)
    if m >= total:
        return ctx
    rng = rng if rng is not None else (ctx.rng_subsample or ctx.rng)
    keep = np.sort(rng.choice(total, size=m, replace=False))
    pair_z = None if ctx.pair_z is None else ctx.pair_z[keep]
    return replace(ctx, pairs=ctx.pairs[keep], pair_z=pair_z)


def select_pair(spec: SamplerSpec, ctx: SelectionContext) -> tuple[int, int]:
    """Dispatch to the configured criterion, applying the candidate cap first."""
    _require_pairs(ctx)
    if spec.candidate_cap is not None:
        ctx = subsample_candidates(ctx, spec.candidate_cap)
    if spec.kind == "guro":
        return guro_select(ctx)
    if spec.kind == "bayes-guro":
        return bayes_guro_select(ctx, spec.posterior_samples)
    if spec.kind == "bald":
        return bald_select(ctx, spec.bald_half_exponent)
    if spec.kind == "normmin":
        return normmin_select(ctx)
    if spec.kind == "uniform":
        return uniform_select(ctx)
    if spec.kind == "colstim":
        if spec.confidence_width is None:
            raise ValidationError("colstim needs a confidence width")
        return colstim_select(ctx, spec.confidence_width)
    if spec.kind == "trueskill":
        return trueskill_select(ctx)
    raise ValidationError(f"unknown sampler '{spec.kind}'")
