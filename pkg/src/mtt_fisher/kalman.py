"""Exact filtering for the scalar linear-Gaussian state-space model.

State: random walk ``x_t = x_{t-1} + noise`` with known variance, started at
a fixed point.  Observation: ``y_t = x_t + e_t`` where either the noise
variance is the scalar parameter ("variance") or the mean offset is
("location", with fixed noise variance).  Frames may be missing (detection
mask).  Alongside the filter we propagate tangents with respect to the
scalar parameter, which yields the exact log-likelihood gradient through
the prediction-error decomposition.  Everything is vectorized over a batch
of sequences.
"""

from __future__ import annotations

import numpy as np

from .errors import ConfigError
from .numerics import LOG_2PI


def kalman_loglik_score(
    y: np.ndarray,
    detected: np.ndarray,
    x0: float,
    motion_var: float,
    theta: float,
    kind: str = "variance",
    obs_const: float = 1.0,
    return_step_scores: bool = False,
):
    """Exact log-likelihood and score of masked observation sequences.

    Parameters
    ----------
    y : (B, n) observation values; entries at undetected steps are ignored.
    detected : (B, n) boolean mask.
    theta : scalar parameter (observation variance, or mean offset whose
        noise variance is ``obs_const``).

    Returns
    -------
    loglik : (B,) ndarray
    score : (B,) ndarray, d loglik / d theta
    step_scores : (B, n) ndarray, only when ``return_step_scores`` is set;
        per-step conditional scores (zero at undetected steps).
    """
    y = np.atleast_2d(np.asarray(y, dtype=float))
    detected = np.atleast_2d(np.asarray(detected, dtype=bool))
    if y.shape != detected.shape:
        raise ConfigError(f"shape mismatch {y.shape} vs {detected.shape}")
    if kind not in ("variance", "location"):
        raise ConfigError(f"unknown parameter kind {kind!r}")
    if kind == "variance" and theta <= 0:
        raise ConfigError("observation variance must be positive")

    batch, n = y.shape
    m = np.full(batch, float(x0))
    p = np.zeros(batch)
    dm = np.zeros(batch)
    dp = np.zeros(batch)
    loglik = np.zeros(batch)
    score = np.zeros(batch)
    steps = np.zeros((batch, n)) if return_step_scores else None

    for t in range(n):
        p = p + motion_var  # predict; the mean is unchanged by the walk
        det = detected[:, t]
        if not np.any(det):
            continue
        if kind == "variance":
            yhat, dyhat = m, dm
            s, ds = p + theta, dp + 1.0
        else:
            yhat, dyhat = m + theta, dm + 1.0
            s, ds = p + obs_const, dp
        innov = y[:, t] - yhat
        step = -ds / (2.0 * s) + innov * dyhat / s + innov**2 * ds / (2.0 * s**2)
        ll = -0.5 * (LOG_2PI + np.log(s)) - innov**2 / (2.0 * s)
        loglik = np.where(det, loglik + ll, loglik)
        score = np.where(det, score + step, score)
        if steps is not None:
            steps[:, t] = np.where(det, step, 0.0)

        gain = p / s
        dgain = (dp * s - p * ds) / s**2
        m_new = m + gain * innov
        dm_new = dm + dgain * innov - gain * dyhat
        p_new = (1.0 - gain) * p
        dp_new = (1.0 - gain) * dp - dgain * p
        m = np.where(det, m_new, m)
        dm = np.where(det, dm_new, dm)
        p = np.where(det, p_new, p)
        dp = np.where(det, dp_new, dp)

    if return_step_scores:
        return loglik, score, steps
    return loglik, score
