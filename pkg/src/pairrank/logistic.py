"""Numerically stable logistic primitives used throughout the package."""

import numpy as np
from scipy.special import expit


def sigmoid(x):
    """Logistic function 1 / (1 + exp(-x)), stable for large |x|."""
    out = expit(np.asarray(x, dtype=float))
    return float(out) if out.ndim == 0 else out


def dsigmoid(x):
    """Derivative of the logistic function, sigma(x) * (1 - sigma(x))."""
    s = sigmoid(x)
    return s * (1.0 - s)


def log_sigmoid(x):
    """log(sigma(x)) without overflow."""
    x = np.asarray(x, dtype=float)
    return -np.logaddexp(0.0, -x)


def comparison_prob(f: float) -> float:
    """P(first item preferred) for score difference f.

    Evaluated through sigma(|f|) so that comparison_prob(f) +
    comparison_prob(-f) == 1.0 exactly in floating point (1 - s is exact
    by Sterbenz for s in [1/2, 1]).
    """
    s = sigmoid(abs(f))
    return s if f >= 0 else 1.0 - s
