"""Annotator simulators, replay environments, and evaluation metrics."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .data import ComparisonPool, ItemPool
from .errors import PairExhaustedError, ValidationError
from .logistic import sigmoid
from .models import model_scores


@dataclass
class LogisticAnnotator:
    """Draws labels from sigma(noise_scale * theta_star . z)."""

    theta_star: np.ndarray
    noise_scale: float
    rng: np.random.Generator = field(default_factory=np.random.default_rng)

    def __post_init__(self):
        self.theta_star = np.asarray(self.theta_star, dtype=float)
        if self.noise_scale <= 0:
            raise ValidationError("noise scale must be positive")

    def annotate(self, z: np.ndarray) -> int:
        p = sigmoid(self.noise_scale * float(self.theta_star @ np.asarray(z, dtype=float)))
        return int(self.rng.random() < p)


class ReplayAnnotator:
    """Answers queries by consuming pre-collected annotations.

    Each unordered pair holds a multiset of labels (oriented low-id-first);
    a query draws one uniformly at random and removes it from the pool.
    """

    def __init__(self, pool: ComparisonPool, rng: np.random.Generator):
        self.labels = pool.replay_labels()
        self.rng = rng

    def remaining(self, i: int, j: int) -> int:
        key = (i, j) if i < j else (j, i)
        return len(self.labels.get(key, ()))

    def eligible_mask(self, pairs: np.ndarray) -> np.ndarray:
        return np.fromiter(
            (len(self.labels.get((int(a), int(b)), ())) > 0 for a, b in pairs),
            dtype=bool,
            count=len(pairs),
        )

    def total_remaining(self) -> int:
        return sum(len(v) for v in self.labels.values())

    def annotate(self, i: int, j: int) -> int:
        """Label for the query orientation (i, j): 1 means i preferred."""
        key = (i, j) if i < j else (j, i)
        bucket = self.labels.get(key)
        if not bucket:
            raise PairExhaustedError(f"no annotations remain for pair {key}")
        label = bucket.pop(int(self.rng.integers(len(bucket))))
        if not bucket:
            del self.labels[key]
        return label if i < j else 1 - label


def _count_inversions(seq: np.ndarray) -> int:
    """Merge-sort inversion count."""
    seq = list(seq)
    if len(seq) < 2:
        return 0

    def merge_count(values):
        if len(values) < 2:
            return values, 0
        mid = len(values) // 2
        left, a = merge_count(values[:mid])
        right, b = merge_count(values[mid:])
        merged, count, li, ri = [], a + b, 0, 0
        while li < len(left) and ri < len(right):
            if left[li] <= right[ri]:
                merged.append(left[li])
                li += 1
            else:
                merged.append(right[ri])
                count += len(left) - li
                ri += 1
        merged.extend(left[li:])
        merged.extend(right[ri:])
        return merged, count

    return merge_count(seq)[1]


def kendall_tau_error(ranking: np.ndarray, truth: np.ndarray) -> float:
    """Fraction of unordered pairs the two permutations order differently."""
    ranking = np.asarray(ranking, dtype=int)
    truth = np.asarray(truth, dtype=int)
    n = len(truth)
    if n < 2:
        raise ValidationError("need at least 2 items")
    if len(ranking) != n or not np.array_equal(np.sort(ranking), np.sort(truth)):
        raise ValidationError("rankings must be permutations of the same item set")
    position = np.empty(truth.max() + 1, dtype=int)
    position[truth] = np.arange(n)
    inversions = _count_inversions(position[ranking])
    return inversions / (n * (n - 1) / 2)


def holdout_error(model, pool: ItemPool, holdout: list[tuple[int, int, int]]) -> float:
    """Disagreement rate between hard model decisions and held-out labels.

    The decision for (i, j) is the sign of the score difference; exact score
    ties rank the lower item id higher, matching the induced ranking.
    """
    if not holdout:
        raise ValidationError("holdout set is empty")
    scores = model_scores(model, pool)
    arr = np.asarray(holdout, dtype=int)
    ii, jj, cc = arr[:, 0], arr[:, 1], arr[:, 2]
    si, sj = scores[ii], scores[jj]
    decisions = (si > sj) | ((si == sj) & (ii < jj))
    return float(np.mean(decisions.astype(int) != cc))


def generalization_gap(
    model,
    train_pool: ItemPool,
    eval_pool: ItemPool,
    truth_train: np.ndarray,
    truth_eval: np.ndarray,
) -> float:
    """Ordering error on the evaluation pool minus error on the training pool."""
    from .models import induced_ranking

    err_train = kendall_tau_error(induced_ranking(model, train_pool), truth_train)
    err_eval = kendall_tau_error(induced_ranking(model, eval_pool), truth_eval)
    return err_eval - err_train
