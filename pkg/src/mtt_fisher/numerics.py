"""Shared numerical helpers: log-space densities, weights, batch-means errors."""

from __future__ import annotations

import math

import numpy as np
from scipy.special import gammaln

from .errors import NumericalCollapseError

LOG_2PI = math.log(2.0 * math.pi)

# exp() underflows to 0 below roughly -745; clamp exponents there so weight
# computations never trip floating-point underflow traps.
LOG_FLOOR = -745.0


def log_gauss(y, mean, var):
    """Log density of N(mean, var) evaluated at y (broadcasts)."""
    y = np.asarray(y, dtype=float)
    return -0.5 * (LOG_2PI + np.log(var)) - (y - mean) ** 2 / (2.0 * var)


def log_poisson_pmf(k, rate: float):
    """Log pmf of a Poisson count; ``rate == 0`` is the point mass at zero."""
    k = np.asarray(k)
    if rate == 0.0:
        return np.where(k == 0, 0.0, -np.inf)
    return k * math.log(rate) - rate - gammaln(k + 1.0)


def log_weights_to_probs(logw: np.ndarray, axis: int = -1) -> np.ndarray:
    """Normalize log weights into probabilities along ``axis``.

    Raises NumericalCollapseError when every weight in a slice is -inf.
    """
    logw = np.asarray(logw, dtype=float)
    top = np.max(logw, axis=axis, keepdims=True)
    if not np.all(np.isfinite(top)):
        raise NumericalCollapseError("all weights are zero; cannot normalize")
    w = np.exp(np.maximum(logw - top, LOG_FLOOR))
    return w / np.sum(w, axis=axis, keepdims=True)


def batch_means_se(values: np.ndarray, n_batches: int = 20) -> float:
    """Standard error of the mean of ``values`` by non-overlapping batch means.

    Falls back to the naive iid standard error when there are too few values
    to fill two points per batch.
    """
    values = np.asarray(values, dtype=float).ravel()
    n = values.size
    if n < 2:
        return math.inf
    if n < 2 * n_batches:
        return float(np.std(values, ddof=1) / math.sqrt(n))
    per = n // n_batches
    means = values[: per * n_batches].reshape(n_batches, per).mean(axis=1)
    return float(np.std(means, ddof=1) / math.sqrt(n_batches))


def mean_with_se(values: np.ndarray, n_batches: int = 20) -> tuple[float, float]:
    values = np.asarray(values, dtype=float).ravel()
    return float(values.mean()), batch_means_se(values, n_batches)
