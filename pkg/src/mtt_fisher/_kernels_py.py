"""NumPy implementations of the hot kernels.

These are the reference implementations behind :mod:`mtt_fisher.kernels`;
a compiled extension with identical signatures and draw schedules is
preferred at import time when available.  Both kernels are pure functions
of their inputs (all randomness is passed in as pre-drawn arrays), so the
two backends can be compared element-wise.
"""

from __future__ import annotations

import math

import numpy as np

LOG_2PI = math.log(2.0 * math.pi)


def batch_permanent_gradient(values: np.ndarray, grads: np.ndarray):
    """Permanents and their parameter derivatives for a batch of matrices.

    Parameters
    ----------
    values : (B, K, K) nonnegative matrix entries.
    grads : (B, K, K) entrywise derivatives w.r.t. the scalar parameter;
        must be zero wherever the entry itself is zero.

    Returns
    -------
    log_perm : (B,) log of the permanent (-inf for a zero permanent).
    score : (B,) derivative of ``log_perm``; NaN where the permanent is zero.

    Uses the inclusion-exclusion expansion over column subsets in Gray-code
    order with the gradient carried through dual-number products; rows are
    rescaled by their maximum so the alternating sum stays in a safe range.
    """
    g = np.ascontiguousarray(values, dtype=np.float64)
    gd = np.ascontiguousarray(grads, dtype=np.float64)
    if g.ndim != 3 or g.shape[1] != g.shape[2]:
        raise ValueError(f"expected (B, K, K), got {g.shape}")
    batch, k, _ = g.shape
    if k == 0:
        return np.zeros(batch), np.zeros(batch)
    if k > 24:
        raise ValueError(f"matrix order {k} too large for subset expansion")

    row_max = g.max(axis=2)
    zero_row = row_max <= 0.0
    safe = np.where(zero_row, 1.0, row_max)
    gs = g / safe[:, :, None]
    gds = gd / safe[:, :, None]

    rs = np.zeros((batch, k))
    rsd = np.zeros((batch, k))
    acc = np.zeros(batch)
    dacc = np.zeros(batch)
    gray_prev = 0
    popcount = 0
    ones = np.ones((batch, 1))
    for i in range(1, 1 << k):
        gray = i ^ (i >> 1)
        bit = gray ^ gray_prev
        j = bit.bit_length() - 1
        if gray & bit:
            rs += gs[:, :, j]
            rsd += gds[:, :, j]
            popcount += 1
        else:
            rs -= gs[:, :, j]
            rsd -= gds[:, :, j]
            popcount -= 1
        gray_prev = gray
        sign = 1.0 if (k - popcount) % 2 == 0 else -1.0
        prefix = np.cumprod(rs, axis=1)
        before = np.concatenate([ones, prefix[:, :-1]], axis=1)
        suffix = np.concatenate(
            [np.cumprod(rs[:, ::-1], axis=1)[:, -2::-1], ones], axis=1
        )
        acc += sign * prefix[:, -1]
        dacc += sign * (rsd * before * suffix).sum(axis=1)

    log_scale = np.where(zero_row, -np.inf, np.log(safe)).sum(axis=1)
    positive = acc > 0.0
    log_perm = np.where(positive, np.log(np.where(positive, acc, 1.0)), -np.inf)
    log_perm = log_perm + log_scale
    score = np.where(positive, dacc / np.where(positive, acc, 1.0), np.nan)
    return log_perm, score


def pf_masked_score(
    y: np.ndarray,
    detected: np.ndarray,
    x0: float,
    motion_std: float,
    theta: float,
    kind: int,
    obs_const: float,
    noise: np.ndarray,
    res_u: np.ndarray,
    resample_threshold: float = 0.5,
):
    """Bootstrap-filter smoothed score of masked single-target sequences.

    Particles follow the random walk; at detected steps they are weighted
    by the observation density and accumulate the per-step parameter score
    along their ancestral line.  Systematic resampling is triggered when
    the effective sample size drops below ``resample_threshold * N``; the
    per-step resampling uniforms are consumed whether or not a row
    resamples, so the draw schedule is input-determined.

    Parameters
    ----------
    y, detected : (B, n) observations and mask.
    kind : 0 for the variance parameter, 1 for the location parameter.
    noise : (B, n, N) standard normal motion increments.
    res_u : (B, n) resampling offsets in [0, 1).

    Returns
    -------
    score : (B,) self-normalized smoothed score estimates.
    loglik : (B,) marginal log-likelihood estimates.
    """
    y = np.ascontiguousarray(y, dtype=np.float64)
    det = np.ascontiguousarray(detected).astype(bool)
    noise = np.ascontiguousarray(noise, dtype=np.float64)
    res_u = np.ascontiguousarray(res_u, dtype=np.float64)
    batch, n_steps = y.shape
    n_particles = noise.shape[2]

    x = np.full((batch, n_particles), float(x0))
    logw = np.zeros((batch, n_particles))
    acc = np.zeros((batch, n_particles))
    loglik = np.zeros(batch)
    log_n = math.log(n_particles)
    grid = np.arange(n_particles)

    for t in range(n_steps):
        x = x + motion_std * noise[:, t, :]
        row = det[:, t]
        if np.any(row):
            if kind == 0:
                diff = y[:, t, None] - x
                ll = -0.5 * (LOG_2PI + math.log(theta)) - diff**2 / (2.0 * theta)
                sc = (diff**2 - theta) / (2.0 * theta**2)
            else:
                diff = y[:, t, None] - x - theta
                ll = -0.5 * (LOG_2PI + math.log(obs_const)) - diff**2 / (2.0 * obs_const)
                sc = diff / obs_const
            logw = np.where(row[:, None], logw + ll, logw)
            acc = np.where(row[:, None], acc + sc, acc)

        top = logw.max(axis=1)
        w = np.exp(logw - top[:, None])
        sw = w.sum(axis=1)
        ess = sw**2 / (w * w).sum(axis=1)
        need = ess < resample_threshold * n_particles
        if np.any(need):
            cum = np.cumsum(w / sw[:, None], axis=1)
            pos = (res_u[:, t, None] + grid[None, :]) / n_particles
            # rows of cum live in [0, 1]; shifting row r by 2r makes the
            # flattened array globally sorted, so one searchsorted call
            # resamples the whole batch
            offs = 2.0 * np.arange(batch)[:, None]
            idx = np.searchsorted((cum + offs).ravel(), (pos + offs).ravel())
            idx = idx.reshape(batch, n_particles) - np.arange(batch)[:, None] * n_particles
            idx = np.clip(idx, 0, n_particles - 1)
            x_res = np.take_along_axis(x, idx, axis=1)
            acc_res = np.take_along_axis(acc, idx, axis=1)
            x = np.where(need[:, None], x_res, x)
            acc = np.where(need[:, None], acc_res, acc)
            loglik = np.where(need, loglik + top + np.log(sw) - log_n, loglik)
            logw = np.where(need[:, None], 0.0, logw)

    top = logw.max(axis=1)
    w = np.exp(logw - top[:, None])
    sw = w.sum(axis=1)
    loglik = loglik + top + np.log(sw) - log_n
    score = (w / sw[:, None] * acc).sum(axis=1)
    return score, loglik
