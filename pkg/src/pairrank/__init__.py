"""pairrank: active preference learning over item pools.

Orders items from adaptively selected pairwise comparisons using a
contextual logistic preference model, uncertainty-directed sampling
criteria, and a computable ordering-error bound. Ships as a library, a
reproducible experiment CLI, and an HTTP annotation service.
"""

from .data import (
    ComparisonHistory,
    ComparisonPool,
    ComparisonRecord,
    ItemPool,
    diff_vector,
    load_dataset,
    split_generalization,
)
from .engine import ActiveRun
from .bounds import BoundConstants, MarginSpec, concentration_terms, ordering_error_bound, oracle_margins
from .infomatrix import InfoMatrix, observed_fisher, sample_gaussian, sherman_morrison_update, weighted_norm
from .models import (
    BayesLinearModel,
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
)
from .samplers import SamplerSpec, SelectionContext, select_pair, subsample_candidates
from .simenv import (
    LogisticAnnotator,
    ReplayAnnotator,
    generalization_gap,
    holdout_error,
    kendall_tau_error,
)
from .harness import ExperimentConfig, aggregate_runs, emit_report, run_experiment

__version__ = "0.1.0"
