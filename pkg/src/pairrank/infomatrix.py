"""Observed Fisher information with an incrementally maintained inverse.

The matrix accumulates weighted rank-one terms w * z z^T on top of a ridge
prior; the inverse is kept current with Sherman-Morrison updates and
refreshed from a direct factorization every REFRESH_INTERVAL updates to
bound floating-point drift.
"""

from __future__ import annotations

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .data import ComparisonHistory, ItemPool
from .errors import RankDeficiencyError, ValidationError
from .logistic import dsigmoid

REFRESH_INTERVAL = 1000
RESIDUAL_CHECK_INTERVAL = 100
RESIDUAL_TOL = 1e-6
_RANK_TOL = 1e-10


def _sym_inv(h: np.ndarray) -> np.ndarray:
    """Inverse of a symmetric positive-definite matrix via Cholesky."""
    factor = cho_factor(h, lower=True)
    inv = cho_solve(factor, np.eye(h.shape[0]))
    return 0.5 * (inv + inv.T)


class InfoMatrix:
    """d x d information matrix H and its maintained inverse."""

    def __init__(self, h: np.ndarray, hinv: np.ndarray | None = None, ridge: float = 0.0):
        self.h = np.array(h, dtype=float)
        if self.h.ndim != 2 or self.h.shape[0] != self.h.shape[1]:
            raise ValidationError("H must be square")
        self.ridge = float(ridge)
        self.hinv = _sym_inv(self.h) if hinv is None else np.array(hinv, dtype=float)
        self.updates_since_refresh = 0
        self.clamp_count = 0  # negative quadratic forms clamped to zero

    @classmethod
    def identity(cls, d: int, ridge: float = 1.0) -> "InfoMatrix":
        if ridge <= 0:
            raise ValidationError("ridge must be positive for a prior-only matrix")
        return cls(ridge * np.eye(d), np.eye(d) / ridge, ridge=ridge)

    @property
    def d(self) -> int:
        return self.h.shape[0]

    def copy(self) -> "InfoMatrix":
        out = InfoMatrix(self.h, self.hinv, self.ridge)
        out.updates_since_refresh = self.updates_since_refresh
        out.clamp_count = self.clamp_count
        return out

    def update(self, z: np.ndarray, w: float) -> "InfoMatrix":
        """Rank-one update H += w z z^T with the matching inverse downdate.

        The inverse denominator 1 + w z^T Hinv z stays >= 1 for w >= 0, so
        the update never divides by zero.
        """
        if w < 0:
            raise ValidationError("update weight must be nonnegative")
        z = np.asarray(z, dtype=float)
        self.h += w * np.outer(z, z)
        if w > 0:
            u = self.hinv @ z
            denom = 1.0 + w * float(z @ u)
            self.hinv -= (w / denom) * np.outer(u, u)
        self.updates_since_refresh += 1
        if self.updates_since_refresh >= REFRESH_INTERVAL or (
            self.updates_since_refresh % RESIDUAL_CHECK_INTERVAL == 0
            and self.identity_residual() > RESIDUAL_TOL
        ):
            self.refresh()
        return self

    def refresh(self) -> None:
        """Recompute the inverse from H by direct factorization."""
        self.hinv = _sym_inv(self.h)
        self.updates_since_refresh = 0

    def identity_residual(self) -> float:
        return float(np.max(np.abs(self.h @ self.hinv - np.eye(self.d))))

    def quad(self, z: np.ndarray) -> float:
        """z^T Hinv z, clamped at zero if round-off turns it negative."""
        q = float(z @ self.hinv @ z)
        if q < 0:
            self.clamp_count += 1
            return 0.0
        return q

    def quads(self, zs: np.ndarray) -> np.ndarray:
        """Row-wise z^T Hinv z for a stack of vectors."""
        q = np.einsum("ij,ij->i", zs @ self.hinv, zs)
        neg = q < 0
        if np.any(neg):
            self.clamp_count += int(neg.sum())
            q = np.where(neg, 0.0, q)
        return q

    def norm(self, z: np.ndarray) -> float:
        return float(np.sqrt(self.quad(z)))


def observed_fisher(
    history: ComparisonHistory, pool: ItemPool, theta: np.ndarray, ridge: float
) -> InfoMatrix:
    """ridge * I + sum over records of dsigma(theta^T z) z z^T, with inverse."""
    if ridge < 0:
        raise ValidationError("ridge must be nonnegative")
    z, _ = history.matrices(pool)
    theta = np.asarray(theta, dtype=float)
    d = pool.d
    weights = dsigmoid(z @ theta) if len(z) else np.zeros(0)
    h = ridge * np.eye(d) + (z.T * weights) @ z
    if ridge == 0:
        eigvals = np.linalg.eigvalsh(h)
        scale = max(eigvals[-1], 1.0)
        deficiency = int(np.sum(eigvals <= _RANK_TOL * scale))
        if deficiency > 0:
            raise RankDeficiencyError(deficiency)
    return InfoMatrix(h, ridge=ridge)


def sherman_morrison_update(m: InfoMatrix, z: np.ndarray, w: float) -> InfoMatrix:
    """In-place rank-one update of H and its maintained inverse."""
    return m.update(z, w)


def weighted_norm(m: InfoMatrix, z: np.ndarray) -> float:
    """sqrt(z^T Hinv z)."""
    return m.norm(z)


def sample_gaussian(
    mean: np.ndarray, cov: np.ndarray, k: int, rng: np.random.Generator
) -> np.ndarray:
    """k draws from N(mean, cov) via Cholesky; jitters up to 3 times on failure."""
    if k < 1:
        raise ValidationError("sample count must be >= 1")
    mean = np.asarray(mean, dtype=float)
    cov = np.asarray(cov, dtype=float)
    d = mean.shape[0]
    jitter = 0.0
    chol = None
    for _ in range(4):
        try:
            chol = np.linalg.cholesky(cov + jitter * np.eye(d))
            break
        except np.linalg.LinAlgError:
            jitter += 1e-10
    if chol is None:
        raise np.linalg.LinAlgError("covariance factorization failed after jitter retries")
    return mean + rng.standard_normal((k, d)) @ chol.T
