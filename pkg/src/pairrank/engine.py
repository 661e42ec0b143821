"""Seeded select -> annotate -> update loop shared by the experiment harness
and the annotation service.

The service replays its event logs through this same class, so service
sessions cannot drift from what the library computes. Between refits the
information matrix advances by Sherman-Morrison updates with weights taken
at the parameter estimate current at observation time; refits never rebuild
it (only the periodic inverse refresh does).
"""

from __future__ import annotations

from dataclasses import replace

import numpy as np

from .data import ComparisonHistory, ItemPool
from .errors import NoEligiblePairsError, ValidationError
from .infomatrix import InfoMatrix
from .logistic import dsigmoid
from .models import (
    BayesLinearModel,
    HybridModel,
    LinearModel,
    TrueSkillState,
    fit_hybrid,
    fit_map,
    fit_mle,
    induced_ranking,
    model_scores,
    score_difference,
    trueskill_update,
)
from .rng import substream
from .samplers import (
    SamplerSpec,
    SelectionContext,
    all_pairs,
    default_confidence_width,
    select_pair,
)

MODEL_KINDS = ("contextual", "bayes", "hybrid", "trueskill")

# Above this many pair-vector entries the difference matrix is built per call
# instead of cached.
_PAIR_CACHE_LIMIT = 20_000_000

_SAMPLER_MODELS = {
    "guro": ("contextual", "bayes", "hybrid"),
    "bayes-guro": ("bayes", "hybrid"),
    "bald": ("bayes", "hybrid"),
    "normmin": ("contextual", "bayes", "hybrid"),
    "uniform": MODEL_KINDS,
    "colstim": ("contextual",),
    "trueskill": ("trueskill",),
}


def check_compatible(sampler_kind: str, model_kind: str) -> None:
    if model_kind not in MODEL_KINDS:
        raise ValidationError(
            f"unknown model '{model_kind}'; valid kinds: {', '.join(MODEL_KINDS)}"
        )
    if model_kind not in _SAMPLER_MODELS[sampler_kind]:
        raise ValidationError(
            f"sampler '{sampler_kind}' does not work with model '{model_kind}'"
        )


class ActiveRun:
    """One seeded run: owns the model, information matrix, and history."""

    def __init__(
        self,
        pool: ItemPool,
        sampler: SamplerSpec,
        model_kind: str,
        seed: int,
        *,
        ridge: float = 1.0,
        reg_zeta: float = 1.0,
        refit_stride: int = 1,
        budget: int | None = None,
        eligible_counts: np.ndarray | None = None,
        consume_on_observe: bool = False,
    ):
        check_compatible(sampler.kind, model_kind)
        if refit_stride < 1:
            raise ValidationError("refit stride must be >= 1")
        self.pool = pool
        self.sampler = sampler
        self.model_kind = model_kind
        self.seed = int(seed)
        self.ridge = float(ridge)
        self.reg_zeta = float(reg_zeta)
        self.refit_stride = int(refit_stride)
        self.budget = budget
        self.consume_on_observe = consume_on_observe

        self.rng_sampler = substream(seed, "sampler")
        self.rng_posterior = substream(seed, "posterior")
        self.rng_subsample = substream(seed, "subsample")

        self.history = ComparisonHistory()
        self.t = 0
        self._eligible_mask_fn = None

        self._init_items()
        self._init_model()

        if eligible_counts is not None:
            eligible_counts = np.asarray(eligible_counts, dtype=int).copy()
            if eligible_counts.shape != (len(self.pairs),):
                raise ValidationError("eligible counts must align with the pair set")
        self.eligible_counts = eligible_counts

        if sampler.kind == "colstim" and sampler.confidence_width is None:
            width = default_confidence_width(pool.d, budget or 1000)
            self.sampler = replace(sampler, confidence_width=width)

    def _init_items(self) -> None:
        self.pairs = all_pairs(self.pool.n)
        if self.pairs.size // 2 * self.pool.d <= _PAIR_CACHE_LIMIT:
            self.pair_z = self.pool.features[self.pairs[:, 0]] - self.pool.features[self.pairs[:, 1]]
        else:
            self.pair_z = None

    def _init_model(self) -> None:
        d, n = self.pool.d, self.pool.n
        kind = self.model_kind
        self.info: InfoMatrix | None = None
        self.design: InfoMatrix | None = None
        self.zeta_prec: np.ndarray | None = None
        if kind == "contextual":
            self.model = LinearModel(np.zeros(d), self.ridge)
        elif kind == "bayes":
            self.model = BayesLinearModel(
                np.zeros(d),
                np.zeros(d),
                self.ridge * np.eye(d),
                InfoMatrix.identity(d, self.ridge),
            )
        elif kind == "hybrid":
            self.model = HybridModel(np.zeros(d), np.zeros(n), self.ridge, self.reg_zeta)
            self.zeta_prec = np.full(n, self.reg_zeta)
        elif kind == "trueskill":
            self.model = TrueSkillState.create(n)
        else:  # pragma: no cover - guarded by check_compatible
            raise ValidationError(f"unknown model '{kind}'")
        if kind != "trueskill":
            self.info = InfoMatrix.identity(d, self.ridge)
        if self.sampler.kind == "colstim":
            self.design = InfoMatrix.identity(d, self.ridge)

    def set_eligibility(self, mask_fn) -> None:
        """Install a callable pairs -> bool mask (replay pools)."""
        self._eligible_mask_fn = mask_fn

    def eligible_indices(self) -> np.ndarray:
        if self.eligible_counts is not None:
            return np.flatnonzero(self.eligible_counts > 0)
        if self._eligible_mask_fn is not None:
            return np.flatnonzero(self._eligible_mask_fn(self.pairs))
        return np.arange(len(self.pairs))

    def exhausted(self) -> bool:
        if self.budget is not None and self.t >= self.budget:
            return True
        return len(self.eligible_indices()) == 0

    def _context(self, idx: np.ndarray) -> SelectionContext:
        rng = self.rng_posterior if self.sampler.kind == "bayes-guro" else self.rng_sampler
        if len(idx) == len(self.pairs):  # skip the slice copy when all eligible
            pairs, pair_z = self.pairs, self.pair_z
        else:
            pairs = self.pairs[idx]
            pair_z = None if self.pair_z is None else self.pair_z[idx]
        return SelectionContext(
            pool=self.pool,
            model=self.model,
            info=self.info,
            rng=rng,
            pairs=pairs,
            pair_z=pair_z,
            zeta_prec=self.zeta_prec,
            design=self.design,
            rng_subsample=self.rng_subsample,
        )

    def propose(self) -> tuple[int, int]:
        """Run the sampler over the currently eligible pairs."""
        idx = self.eligible_indices()
        if len(idx) == 0:
            raise NoEligiblePairsError("no eligible pairs remain")
        return select_pair(self.sampler, self._context(idx))

    def _pair_index(self, i: int, j: int) -> int:
        a, b = (i, j) if i < j else (j, i)
        n = self.pool.n
        # row offset of pair (a, b) in lexicographic triu order
        return a * (2 * n - a - 1) // 2 + (b - a - 1)

    def observe(self, i: int, j: int, c: int) -> None:
        """Record one comparison: append, update matrices, refit on stride."""
        self.history.add(i, j, c)
        self.t += 1
        z = self.pool.features[i] - self.pool.features[j]
        if self.model_kind == "trueskill":
            self.model = trueskill_update(self.model, i, j, c)
        else:
            weight = dsigmoid(score_difference(self.model, self.pool, i, j))
            self.info.update(z, weight)
            if self.zeta_prec is not None:
                self.zeta_prec[i] += weight
                self.zeta_prec[j] += weight
            if self.design is not None:
                self.design.update(z, 1.0)
            if self.t % self.refit_stride == 0:
                self.refit()
        if self.consume_on_observe and self.eligible_counts is not None:
            k = self._pair_index(i, j)
            if self.eligible_counts[k] <= 0:
                raise ValidationError(f"pair ({i}, {j}) has no eligibility budget left")
            self.eligible_counts[k] -= 1

    def refit(self) -> None:
        if self.model_kind == "contextual":
            self.model = fit_mle(self.history, self.pool, self.ridge, theta0=self.model.theta)
        elif self.model_kind == "bayes":
            self.model = fit_map(
                self.history,
                self.pool,
                self.model.prior_mean,
                self.model.prior_precision,
                theta0=self.model.theta_map,
            )
        elif self.model_kind == "hybrid":
            self.model = fit_hybrid(
                self.history,
                self.pool,
                self.ridge,
                self.reg_zeta,
                theta0=self.model.theta,
                zeta0=self.model.zeta,
            )

    def scores(self) -> np.ndarray:
        return model_scores(self.model, self.pool)

    def score_stds(self) -> np.ndarray | None:
        """Per-item score standard deviations where a posterior exists."""
        if self.model_kind == "trueskill":
            return np.sqrt(self.model.sigma2)
        if self.model_kind == "bayes":
            return np.sqrt(self.info.quads(self.pool.features))
        if self.model_kind == "hybrid":
            return np.sqrt(self.info.quads(self.pool.features) + 1.0 / self.zeta_prec)
        return None

    def ranking(self) -> np.ndarray:
        return induced_ranking(self.model, self.pool)

    def add_items(self, features: np.ndarray, scores: np.ndarray | None = None) -> None:
        """Append items mid-run; offsets and skill beliefs start at priors."""
        features = np.asarray(features, dtype=float)
        k = features.shape[0]
        new_scores = None
        if self.pool.true_scores is not None:
            if scores is None:
                raise ValidationError("pool tracks true scores; provide them for new items")
            new_scores = np.concatenate([self.pool.true_scores, np.asarray(scores, dtype=float)])
        self.pool = ItemPool(np.vstack([self.pool.features, features]), new_scores)
        self._init_items()
        if isinstance(self.model, HybridModel):
            self.model.extend(k)
            self.zeta_prec = np.concatenate([self.zeta_prec, np.full(k, self.reg_zeta)])
        if isinstance(self.model, TrueSkillState):
            self.model.extend(k)
        if self.eligible_counts is not None:
            raise ValidationError("cannot add items to an eligibility-constrained run")

    # -- state capture for service checkpoints ------------------------------

    def get_state(self) -> dict:
        state: dict = {
            "t": self.t,
            "history": [[r.i, r.j, r.c] for r in self.history.records],
            "rng": {
                "sampler": self.rng_sampler.bit_generator.state,
                "posterior": self.rng_posterior.bit_generator.state,
                "subsample": self.rng_subsample.bit_generator.state,
            },
        }
        if self.model_kind == "contextual":
            state["theta"] = self.model.theta.tolist()
        elif self.model_kind == "bayes":
            state["theta"] = self.model.theta_map.tolist()
            state["posterior_h"] = self.model.posterior.h.tolist()
        elif self.model_kind == "hybrid":
            state["theta"] = self.model.theta.tolist()
            state["zeta"] = self.model.zeta.tolist()
            state["zeta_prec"] = self.zeta_prec.tolist()
        else:
            state["mu"] = self.model.mu.tolist()
            state["sigma2"] = self.model.sigma2.tolist()
        if self.info is not None:
            state["info_h"] = self.info.h.tolist()
            state["info_hinv"] = self.info.hinv.tolist()
            state["info_updates"] = self.info.updates_since_refresh
        if self.design is not None:
            state["design_h"] = self.design.h.tolist()
            state["design_hinv"] = self.design.hinv.tolist()
        if self.eligible_counts is not None:
            state["eligible_counts"] = self.eligible_counts.tolist()
        return state

    def set_state(self, state: dict) -> None:
        self.t = int(state["t"])
        self.history = ComparisonHistory()
        for i, j, c in state["history"]:
            self.history.add(int(i), int(j), int(c))
        self.rng_sampler.bit_generator.state = state["rng"]["sampler"]
        self.rng_posterior.bit_generator.state = state["rng"]["posterior"]
        self.rng_subsample.bit_generator.state = state["rng"]["subsample"]
        if self.model_kind == "contextual":
            self.model = LinearModel(np.asarray(state["theta"]), self.ridge)
        elif self.model_kind == "bayes":
            self.model = BayesLinearModel(
                np.asarray(state["theta"]),
                np.zeros(self.pool.d),
                self.ridge * np.eye(self.pool.d),
                InfoMatrix(np.asarray(state["posterior_h"])),
            )
        elif self.model_kind == "hybrid":
            self.model = HybridModel(
                np.asarray(state["theta"]), np.asarray(state["zeta"]), self.ridge, self.reg_zeta
            )
            self.zeta_prec = np.asarray(state["zeta_prec"], dtype=float)
        else:
            self.model = TrueSkillState.create(self.pool.n)
            self.model.mu = np.asarray(state["mu"], dtype=float)
            self.model.sigma2 = np.asarray(state["sigma2"], dtype=float)
        if self.info is not None:
            self.info = InfoMatrix(
                np.asarray(state["info_h"]), np.asarray(state["info_hinv"]), self.ridge
            )
            self.info.updates_since_refresh = int(state["info_updates"])
        if self.design is not None:
            self.design = InfoMatrix(
                np.asarray(state["design_h"]), np.asarray(state["design_hinv"]), self.ridge
            )
        if "eligible_counts" in state:
            self.eligible_counts = np.asarray(state["eligible_counts"], dtype=int)
