# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled implementations of the hot kernels.

Signatures, semantics and randomness consumption mirror
``mtt_fisher._kernels_py`` exactly; see that module for documentation.
"""

import math

import numpy as np

from libc.math cimport INFINITY, NAN, exp, log

LOG_2PI = math.log(2.0 * math.pi)


def batch_permanent_gradient(values, grads):
    g = np.ascontiguousarray(values, dtype=np.float64)
    gd = np.ascontiguousarray(grads, dtype=np.float64)
    if g.ndim != 3 or g.shape[1] != g.shape[2]:
        raise ValueError(f"expected (B, K, K), got {g.shape}")
    cdef Py_ssize_t batch = g.shape[0]
    cdef Py_ssize_t k = g.shape[1]
    log_perm = np.zeros(batch, dtype=np.float64)
    score = np.zeros(batch, dtype=np.float64)
    if k == 0:
        return log_perm, score
    if k > 24:
        raise ValueError(f"matrix order {k} too large for subset expansion")
    _permanent_impl(g, gd, log_perm, score)
    return log_perm, score


cdef void _permanent_impl(
    double[:, :, ::1] g,
    double[:, :, ::1] gd,
    double[::1] out_lp,
    double[::1] out_sc,
) noexcept:
    cdef Py_ssize_t batch = g.shape[0]
    cdef Py_ssize_t k = g.shape[1]
    cdef Py_ssize_t b, i, j, r
    cdef unsigned long long sub, gray, prev_gray, bit, n_sub
    cdef int popcount, sign_flip
    cdef double row_max, log_scale, acc, dacc, prod, dprod, sign, u
    cdef double mat[576]
    cdef double matd[576]
    cdef double rs[24]
    cdef double rsd[24]
    cdef double pre[25]
    cdef double suf[25]
    cdef bint zero_row

    n_sub = (<unsigned long long>1) << k
    for b in range(batch):
        zero_row = False
        log_scale = 0.0
        for i in range(k):
            row_max = 0.0
            for j in range(k):
                if g[b, i, j] > row_max:
                    row_max = g[b, i, j]
            if row_max <= 0.0:
                zero_row = True
                break
            log_scale += log(row_max)
            for j in range(k):
                mat[i * k + j] = g[b, i, j] / row_max
                matd[i * k + j] = gd[b, i, j] / row_max
        if zero_row:
            out_lp[b] = -INFINITY
            out_sc[b] = NAN
            continue

        for i in range(k):
            rs[i] = 0.0
            rsd[i] = 0.0
        acc = 0.0
        dacc = 0.0
        prev_gray = 0
        popcount = 0
        for sub in range(1, n_sub):
            gray = sub ^ (sub >> 1)
            bit = gray ^ prev_gray
            prev_gray = gray
            j = 0
            while not (bit >> j) & 1:
                j += 1
            if gray & bit:
                popcount += 1
                for i in range(k):
                    rs[i] += mat[i * k + j]
                    rsd[i] += matd[i * k + j]
            else:
                popcount -= 1
                for i in range(k):
                    rs[i] -= mat[i * k + j]
                    rsd[i] -= matd[i * k + j]
            sign = 1.0 if ((k - popcount) & 1) == 0 else -1.0
            pre[0] = 1.0
            for r in range(k):
                pre[r + 1] = pre[r] * rs[r]
            suf[k] = 1.0
            for r in range(k - 1, -1, -1):
                suf[r] = suf[r + 1] * rs[r]
            dprod = 0.0
            for r in range(k):
                dprod += rsd[r] * pre[r] * suf[r + 1]
            acc += sign * pre[k]
            dacc += sign * dprod
        if acc > 0.0:
            out_lp[b] = log(acc) + log_scale
            out_sc[b] = dacc / acc
        else:
            out_lp[b] = -INFINITY
            out_sc[b] = NAN


def pf_masked_score(
    y,
    detected,
    double x0,
    double motion_std,
    double theta,
    int kind,
    double obs_const,
    noise,
    res_u,
    double resample_threshold=0.5,
):
    y_arr = np.ascontiguousarray(y, dtype=np.float64)
    det_arr = np.ascontiguousarray(detected, dtype=np.uint8)
    noise_arr = np.ascontiguousarray(noise, dtype=np.float64)
    res_arr = np.ascontiguousarray(res_u, dtype=np.float64)
    cdef Py_ssize_t batch = y_arr.shape[0]
    cdef Py_ssize_t n_steps = y_arr.shape[1]
    cdef Py_ssize_t n_particles = noise_arr.shape[2]
    score = np.zeros(batch, dtype=np.float64)
    loglik = np.zeros(batch, dtype=np.float64)
    work = np.empty((7, n_particles), dtype=np.float64)
    _pf_impl(
        y_arr,
        det_arr,
        x0,
        motion_std,
        theta,
        kind,
        obs_const,
        noise_arr,
        res_arr,
        resample_threshold,
        work,
        score,
        loglik,
    )
    return score, loglik


cdef void _pf_impl(
    double[:, ::1] y,
    unsigned char[:, ::1] det,
    double x0,
    double motion_std,
    double theta,
    int kind,
    double obs_const,
    double[:, :, ::1] noise,
    double[:, ::1] res_u,
    double resample_threshold,
    double[:, ::1] work,
    double[::1] out_score,
    double[::1] out_loglik,
) noexcept:
    cdef Py_ssize_t batch = y.shape[0]
    cdef Py_ssize_t n_steps = y.shape[1]
    cdef Py_ssize_t n_particles = noise.shape[2]
    cdef Py_ssize_t b, t, i, j
    cdef double[::1] x = work[0]
    cdef double[::1] logw = work[1]
    cdef double[::1] acc = work[2]
    cdef double[::1] w = work[3]
    cdef double[::1] cum = work[4]
    cdef double[::1] xr = work[5]
    cdef double[::1] accr = work[6]
    cdef double half_log_var, inv_two_var, inv_two_var_sq, diff, ll_c
    cdef double top, sw, sw2, ess, u, c, yt, loglik_b, log_n
    cdef double log2pi = LOG_2PI

    if kind == 0:
        half_log_var = 0.5 * (log2pi + log(theta))
        inv_two_var = 1.0 / (2.0 * theta)
        inv_two_var_sq = 1.0 / (2.0 * theta * theta)
    else:
        half_log_var = 0.5 * (log2pi + log(obs_const))
        inv_two_var = 1.0 / (2.0 * obs_const)
    log_n = log(<double>n_particles)

    for b in range(batch):
        loglik_b = 0.0
        for i in range(n_particles):
            x[i] = x0
            logw[i] = 0.0
            acc[i] = 0.0
        for t in range(n_steps):
            for i in range(n_particles):
                x[i] += motion_std * noise[b, t, i]
            if det[b, t]:
                yt = y[b, t]
                if kind == 0:
                    for i in range(n_particles):
                        diff = yt - x[i]
                        logw[i] += -half_log_var - diff * diff * inv_two_var
                        acc[i] += (diff * diff - theta) * inv_two_var_sq
                else:
                    for i in range(n_particles):
                        diff = yt - x[i] - theta
                        logw[i] += -half_log_var - diff * diff * inv_two_var
                        acc[i] += diff / obs_const
            top = logw[0]
            for i in range(1, n_particles):
                if logw[i] > top:
                    top = logw[i]
            sw = 0.0
            sw2 = 0.0
            for i in range(n_particles):
                w[i] = exp(logw[i] - top)
                sw += w[i]
                sw2 += w[i] * w[i]
            ess = sw * sw / sw2
            if ess < resample_threshold * n_particles:
                c = 0.0
                for i in range(n_particles):
                    c += w[i] / sw
                    cum[i] = c
                j = 0
                for i in range(n_particles):
                    u = (res_u[b, t] + i) / n_particles
                    while j < n_particles - 1 and cum[j] < u:
                        j += 1
                    xr[i] = x[j]
                    accr[i] = acc[j]
                for i in range(n_particles):
                    x[i] = xr[i]
                    acc[i] = accr[i]
                    logw[i] = 0.0
                loglik_b += top + log(sw) - log_n
        top = logw[0]
        for i in range(1, n_particles):
            if logw[i] > top:
                top = logw[i]
        sw = 0.0
        for i in range(n_particles):
            w[i] = exp(logw[i] - top)
            sw += w[i]
        out_loglik[b] = loglik_b + top + log(sw) - log_n
        c = 0.0
        for i in range(n_particles):
            c += (w[i] / sw) * acc[i]
        out_score[b] = c
