"""Association-marginalized multi-target likelihood evaluators.

Frames are variable-length vectors of scalar observation points.  The frame
density marginalizes over the detection mask, the Poisson clutter count and
the uniform random permutation that scrambles detected-target observations
and clutter together.  An optimized evaluator sums over injective
target-to-observation assignments; a literal brute-force sum over
(mask, permutation) pairs is kept as an independent oracle.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import logsumexp

from .errors import (
    ConfigError,
    DataError,
    ModelViolationError,
    NumericalCollapseError,
    ResourceLimitError,
)
from .models import MttModel
from .numerics import log_poisson_pmf, log_weights_to_probs
from .permassoc import (
    UNBOUNDED,
    PerturbationSpec,
    detection_mask_law,
    enumerate_constrained,
    hamming_distance,
)

DP_MAX_POINTS = 16
ENUM_TERM_CAP = 10**6

FULL_SPEC = PerturbationSpec(alpha=UNBOUNDED, beta=UNBOUNDED)


@dataclass(frozen=True)
class ObservationFrame:
    """One time step of observations; the length may be zero."""

    points: np.ndarray

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float).ravel()
        if pts.size and not np.all(np.isfinite(pts)):
            raise DataError("observation points must be finite")
        object.__setattr__(self, "points", pts)

    def __len__(self) -> int:
        return self.points.size


@dataclass(frozen=True)
class MultiTargetState:
    """States of all targets at one time step."""

    states: np.ndarray

    def __post_init__(self):
        st = np.asarray(self.states, dtype=float).ravel()
        if not np.all(np.isfinite(st)):
            raise DataError("states must be finite")
        object.__setattr__(self, "states", st)

    def __len__(self) -> int:
        return self.states.size


def _as_points(frame) -> np.ndarray:
    pts = frame.points if isinstance(frame, ObservationFrame) else np.asarray(frame, dtype=float)
    pts = np.atleast_1d(pts.ravel()) if pts.size else pts.reshape(0)
    if pts.size and not np.all(np.isfinite(pts)):
        raise DataError("observation points must be finite")
    return pts


def _as_states(x) -> np.ndarray:
    st = x.states if isinstance(x, MultiTargetState) else np.asarray(x, dtype=float)
    return np.atleast_1d(st.ravel())


# ---------------------------------------------------------------------------
# subset bookkeeping for the assignment dynamic program


@lru_cache(maxsize=None)
def _subset_tables(m: int):
    """Index tables over the 2^m subsets of observation slots.

    Returns (popcount, with_j, without_j) where ``with_j[j]`` lists the
    subsets containing slot j and ``without_j[j]`` those subsets with slot
    j removed (aligned elementwise).
    """
    n = 1 << m
    pop = np.zeros(n, dtype=np.int64)
    for s in range(1, n):
        pop[s] = pop[s >> 1] + (s & 1)
    with_j, without_j = [], []
    for j in range(m):
        wj = np.asarray([s for s in range(n) if s >> j & 1], dtype=np.int64)
        with_j.append(wj)
        without_j.append(wj ^ (1 << j))
    return pop, with_j, without_j


def _assignment_dp(fdet, fdet_d, log_q):
    """Sum detected/undetected products over (detected set, assignment).

    ``fdet[b, t, j]`` is the scaled detected factor of target t matched to
    observation j; ``log_q`` the scaled log undetected factor.  Returns
    ``(h, hd)`` of shape (B, 2^M): for each subset S of observations,
    the total weight of all ways to match a subset of targets bijectively
    onto S (others undetected), and its theta derivative.
    """
    batch, n_targets, m = fdet.shape
    _, with_j, without_j = _subset_tables(m)
    h = np.zeros((batch, 1 << m))
    h[:, 0] = 1.0
    hd = np.zeros_like(h)
    q = np.exp(log_q)  # (B, K)
    for t in range(n_targets):
        new_h = q[:, t, None] * h
        new_hd = q[:, t, None] * hd
        for j in range(m):
            src, dst = without_j[j], with_j[j]
            f = fdet[:, t, j, None]
            fd = fdet_d[:, t, j, None]
            new_h[:, dst] += f * h[:, src]
            new_hd[:, dst] += f * hd[:, src] + fd * h[:, src]
        h, hd = new_h, new_hd
    return h, hd


def dp_loglik_score_from_logs(
    lg: np.ndarray,
    sg: np.ndarray,
    lp: np.ndarray,
    detect_prob: float,
    rate: float,
    min_detected: int = 0,
    log_mask_norm: float = 0.0,
    want_score: bool = False,
):
    """Frame log-density (and score) from per-pair log-densities.

    Parameters
    ----------
    lg : (B, K, M) log target-observation densities.
    sg : (B, K, M) their theta-derivatives (finite everywhere; must vanish
        wherever the density is zero).
    lp : (B, M) log clutter density at each observation.
    min_detected : smallest admissible number of detections (mask
        restriction); ``log_mask_norm`` is the log normalizer of the
        restricted mask law.

    The permutation sum is collapsed to a sum over injective assignments:
    a permutation enters the frame density only through which observation
    each detected slot receives, and the clutter factor is the product over
    the complementary observations in any order, so the (M - D)!
    permutations sharing an assignment contribute identical terms.  With
    the uniform 1/M! weight this leaves the coefficient (M - D)! / M! per
    assignment of D detected targets.
    """
    lg = np.asarray(lg, dtype=float)
    sg = np.asarray(sg, dtype=float)
    lp = np.asarray(lp, dtype=float)
    batch, n_targets, m = lg.shape
    if m > DP_MAX_POINTS:
        raise ResourceLimitError(
            f"{m} observations exceed the exact-evaluation cap {DP_MAX_POINTS}; "
            "use a Monte Carlo marginalization"
        )
    pop, _, _ = _subset_tables(m)

    log_p = math.log(detect_prob) if detect_prob > 0 else -math.inf
    log_q = math.log1p(-detect_prob) if detect_prob < 1 else -math.inf

    # per-(frame, target) scaling keeps the DP in a safe linear range; each
    # monomial has exactly one factor per target, so scales multiply out
    if m == 0:
        row_top = np.full((batch, n_targets), -np.inf)
    else:
        with np.errstate(invalid="ignore"):
            row_top = np.max(lg, axis=2)  # (B, K)
    scale = np.maximum(log_q, log_p + row_top)
    dead = ~np.isfinite(scale)  # no admissible factor for that target
    scale = np.where(dead, 0.0, scale)
    fdet = np.exp(np.clip(log_p + lg - scale[:, :, None], -745.0, 50.0))
    fdet_d = fdet * sg
    h, hd = _assignment_dp(fdet, fdet_d, np.broadcast_to(log_q - scale, scale.shape))

    # assemble: coefficient per subset S is Po(M-|S|) (M-|S|)!/M! times the
    # clutter density of the unmatched observations
    n_sub = 1 << m
    size_coef = np.full(m + 1, -np.inf)
    top = min(n_targets, m)
    for d in range(max(0, min_detected), top + 1):
        size_coef[d] = (
            float(log_poisson_pmf(m - d, rate))
            + math.lgamma(m - d + 1)
            - math.lgamma(m + 1)
            - log_mask_norm
        )
    comp_lp = np.empty((batch, n_sub))
    for s in range(n_sub):
        outside = [j for j in range(m) if not s >> j & 1]
        comp_lp[:, s] = lp[:, outside].sum(axis=1) if outside else 0.0

    with np.errstate(divide="ignore"):
        log_terms = np.log(h) + comp_lp + size_coef[pop][None, :]
    log_terms += scale.sum(axis=1)[:, None]
    log_terms[dead.any(axis=1)] = -np.inf
    loglik = logsumexp(log_terms, axis=1)
    if not want_score:
        return loglik, None

    score = np.zeros(batch)
    ok = np.isfinite(loglik)
    if np.any(ok):
        probs = np.exp(log_terms[ok] - loglik[ok, None])
        ratio = np.where(h[ok] > 0.0, hd[ok] / np.where(h[ok] > 0.0, h[ok], 1.0), 0.0)
        score[ok] = (probs * ratio).sum(axis=1)
    score[~ok] = np.nan
    return loglik, score


# ---------------------------------------------------------------------------
# model-level wrappers


def _batch_frame_arrays(points: np.ndarray, states: np.ndarray, model: MttModel):
    """(B, K, M) log-density, score and (B, M) clutter arrays."""
    y = points[:, None, :]
    x = states[None, :, None]
    theta = model.params.theta
    lg = model.target.log_obs(y, x, theta)
    sg = model.target.score_obs(y, x, theta)
    if model.clutter is not None:
        lp = model.clutter.spatial.log_pdf(points)
    else:
        # no clutter component; any term that needs one carries Po(k>0) = 0
        lp = np.zeros_like(points)
    return lg, sg, lp


def _resolve_spec(spec: PerturbationSpec | None) -> PerturbationSpec:
    return FULL_SPEC if spec is None else spec


def batch_log_perturbed_likelihood(
    points_batch: np.ndarray,
    x,
    model: MttModel,
    spec: PerturbationSpec | None = None,
    want_score: bool = False,
):
    """Vectorized frame density over a batch of equal-length frames.

    ``points_batch`` has shape (B, M).  With unbounded ``alpha`` the
    permutation law is uniform over the whole symmetric group and the
    optimized assignment sum applies; with finite ``alpha`` the constrained
    permutation set is enumerated directly.
    """
    points = np.atleast_2d(np.asarray(points_batch, dtype=float))
    if points.size and not np.all(np.isfinite(points)):
        raise DataError("observation points must be finite")
    states = _as_states(x)
    spec = _resolve_spec(spec)
    params = model.params
    if states.size != params.n_targets:
        raise ConfigError(f"{states.size} states for {params.n_targets} targets")
    m = points.shape[1]
    law = detection_mask_law(params.n_targets, params.detect_prob, spec.beta)
    lg, sg, lp = _batch_frame_arrays(points, states, model)

    if spec.alpha == UNBOUNDED or spec.alpha >= max(m, 1):
        loglik, score = dp_loglik_score_from_logs(
            lg,
            sg,
            lp,
            params.detect_prob,
            params.clutter_rate,
            min_detected=law.min_detected,
            log_mask_norm=math.log(law.normalizer),
            want_score=want_score,
        )
    else:
        loglik, score = _enumerated_loglik_score(
            lg, sg, lp, params, spec, law, want_score=want_score
        )
    if want_score:
        return loglik, score
    return loglik


def log_perturbed_likelihood(
    frame, x, model: MttModel, spec: PerturbationSpec | None = None, want_score: bool = False
):
    """Log frame density under association/detection perturbation limits."""
    points = _as_points(frame)
    out = batch_log_perturbed_likelihood(points[None, :], x, model, spec, want_score)
    if want_score:
        return float(out[0][0]), float(out[1][0])
    return float(out[0])


@lru_cache(maxsize=None)
def _constrained_perm_array(m: int, alpha) -> np.ndarray:
    perms = [p.mapping for p in enumerate_constrained(m, alpha)]
    return np.asarray(perms, dtype=np.intp).reshape(len(perms), m)


def count_enumeration_terms(n_targets: int, m: int, spec: PerturbationSpec) -> int:
    """Number of (mask, permutation) terms an exact enumeration would visit."""
    from .permassoc import count_constrained, detection_mask_law

    law = detection_mask_law(n_targets, 0.5, spec.beta)
    n_masks = sum(
        math.comb(n_targets, d)
        for d in range(law.min_detected, n_targets + 1)
        if d <= m
    )
    return n_masks * int(count_constrained(m, spec.alpha))


def _enumerated_loglik_score(lg, sg, lp, params, spec, law, want_score=False):
    """Literal sum over (mask, constrained permutation) pairs, vectorized
    over the batch axis of the input arrays."""
    batch, n_targets, m = lg.shape
    n_terms = count_enumeration_terms(n_targets, m, spec)
    if n_terms > ENUM_TERM_CAP:
        raise ResourceLimitError(
            f"{n_terms} enumeration terms exceed cap {ENUM_TERM_CAP}; "
            "use latent Monte Carlo"
        )
    perms = _constrained_perm_array(m, spec.alpha)
    masks = [d for d in law.support() if d.detected_count <= m]
    if not masks:  # impossible data: more detections required than points
        nan = np.full(batch, np.nan) if want_score else None
        return np.full(batch, -np.inf), nan
    log_u = -math.log(len(perms))
    terms = []
    dterms = []
    for mask in masks:
        detected = mask.detected_indices()
        d = len(detected)
        const = float(log_poisson_pmf(m - d, params.clutter_rate)) + law.log_pmf(mask) + log_u
        for sigma in perms:
            t = np.full(batch, const)
            td = np.zeros(batch)
            if d:
                rows = np.asarray(detected)
                cols = sigma[:d]
                t = t + lg[:, rows, cols].sum(axis=1)
                if want_score:
                    td = sg[:, rows, cols].sum(axis=1)
            if m - d:
                t = t + lp[:, sigma[d:]].sum(axis=1)
            terms.append(t)
            dterms.append(td)
    log_terms = np.stack(terms, axis=1)
    loglik = logsumexp(log_terms, axis=1)
    if not want_score:
        return loglik, None
    dmat = np.stack(dterms, axis=1)
    score = np.full(batch, np.nan)
    ok = np.isfinite(loglik)
    if np.any(ok):
        w = np.exp(log_terms[ok] - loglik[ok, None])
        score[ok] = (w * dmat[ok]).sum(axis=1)
    return loglik, score


def log_multi_likelihood(frame, x, model: MttModel) -> float:
    """Log frame density marginalized over the full association model."""
    return log_perturbed_likelihood(frame, x, model, FULL_SPEC)


def _leave_one_out_sums(lp: np.ndarray) -> tuple[float, np.ndarray]:
    """Total and leave-one-out sums of log clutter densities, tolerating
    zero-density points (a -inf entry zeroes every sum not excluding it)."""
    finite = np.isfinite(lp)
    n_zero = int((~finite).sum())
    finite_total = float(lp[finite].sum())
    if n_zero == 0:
        return finite_total, finite_total - lp
    total = -math.inf
    loo = np.full(lp.shape, -math.inf)
    if n_zero == 1:
        loo[~finite] = finite_total
    return total, loo


def log_multi_likelihood_k1(frame, x, model: MttModel) -> float:
    """Closed two-term form of the single-target frame density.

    Either the target is undetected and all observations are clutter, or it
    produced one of the m observations (each equally likely to sit in any
    slot) and the rest are clutter.
    """
    points = _as_points(frame)
    if model.params.n_targets != 1:
        raise ConfigError("single-target form requires n_targets == 1")
    x0 = float(_as_states(x)[0])
    params = model.params
    m = points.size
    rate = params.clutter_rate
    log_p = math.log(params.detect_prob) if params.detect_prob > 0 else -math.inf
    log_q = math.log1p(-params.detect_prob) if params.detect_prob < 1 else -math.inf
    lp = (
        model.clutter.spatial.log_pdf(points)
        if model.clutter is not None
        else np.zeros(m)
    )
    lp_total, lp_loo = _leave_one_out_sums(lp) if m else (0.0, np.zeros(0))
    terms = [log_q + float(log_poisson_pmf(m, rate)) + lp_total]
    if m:
        lg = model.target.log_obs(points, x0, params.theta)
        detected = log_p - math.log(m) + float(log_poisson_pmf(m - 1, rate)) + lp_loo + lg
        terms.extend(np.atleast_1d(detected))
    return float(logsumexp(np.asarray(terms)))


def brute_force_log_likelihood(
    frame, x, model: MttModel, spec: PerturbationSpec | None = None
) -> float:
    """Literal (mask, permutation) double sum over the whole symmetric group.

    Intentionally naive; this is the oracle the optimized evaluators are
    checked against.
    """
    points = _as_points(frame)
    states = _as_states(x)
    spec = _resolve_spec(spec)
    params = model.params
    m = points.size
    law = detection_mask_law(params.n_targets, params.detect_prob, spec.beta)
    identity = tuple(range(m))
    total_terms = []
    for mask in law.support():
        d = mask.detected_count
        if d > m:
            continue
        detected = mask.detected_indices()
        log_const = float(log_poisson_pmf(m - d, params.clutter_rate)) + law.log_pmf(mask)
        admissible = [
            sigma
            for sigma in itertools.permutations(range(m))
            if spec.alpha == UNBOUNDED or hamming_distance(identity, sigma) <= spec.alpha
        ]
        log_u = -math.log(len(admissible)) if admissible else -math.inf
        for sigma in admissible:
            term = log_const + log_u
            for i in range(d):
                term += float(
                    model.target.log_obs(points[sigma[i]], states[detected[i]], params.theta)
                )
            for i in range(d, m):
                if model.clutter is None:
                    if m - d > 0:
                        term = -math.inf
                else:
                    term += float(model.clutter.spatial.log_pdf(points[sigma[i]]))
            total_terms.append(term)
    if not total_terms:
        return -math.inf
    return float(logsumexp(np.asarray(total_terms)))


# ---------------------------------------------------------------------------
# joint and sequence likelihoods


def log_joint_known_association(frames, states_trajectory, model: MttModel, initial_states=None):
    """Complete-data log density with identity association and full detection.

    The first ``K`` points of every frame are the target observations in
    target order, the rest is clutter.  When ``initial_states`` is given the
    Markov transition terms from it are included; otherwise the states are
    treated as known (static targets).
    """
    params = model.params
    k = params.n_targets
    states = np.atleast_2d(np.asarray(states_trajectory, dtype=float))
    if states.shape[0] == 1 and len(frames) > 1:
        states = np.broadcast_to(states, (len(frames), k))
    total = 0.0
    prev = None if initial_states is None else np.asarray(initial_states, dtype=float)
    for t, frame in enumerate(frames):
        points = _as_points(frame)
        if points.size < k:
            raise ModelViolationError(
                f"frame {t} has {points.size} observations for {k} targets"
            )
        xt = states[t]
        total += float(model.target.log_obs(points[:k], xt, params.theta).sum())
        total += float(log_poisson_pmf(points.size - k, params.clutter_rate))
        if points.size > k:
            if model.clutter is None:
                return -math.inf
            total += float(model.clutter.spatial.log_pdf(points[k:]).sum())
        if prev is not None:
            total += float(model.target.log_transition(xt, prev).sum())
            prev = xt
    return total


def marginal_log_likelihood_sequence(
    frames,
    model: MttModel,
    integration: str = "exact-static",
    static_states=None,
    x0: float = 0.0,
    n_particles: int = 1000,
    rng: np.random.Generator | None = None,
) -> float:
    """Log likelihood of an observation sequence.

    "exact-static": frames are independent given fixed known states, so the
    value is the sum of per-frame densities.  "mc": single dynamic target;
    bootstrap particle marginalization (propagate from the transition,
    weight by the frame density, accumulate log-mean-exp per step).
    """
    if len(frames) == 0:
        return 0.0
    if integration == "exact-static":
        if static_states is None:
            raise ConfigError("exact-static integration requires static states")
        return sum(log_multi_likelihood(f, static_states, model) for f in frames)
    if integration != "mc":
        raise ConfigError(f"unknown integration {integration!r}")
    if n_particles < 100:
        raise ConfigError(f"need at least 100 particles, got {n_particles}")
    if model.params.n_targets != 1:
        raise ConfigError("mc integration implemented for a single target")
    if rng is None:
        raise ConfigError("mc integration requires an rng")

    params = model.params
    particles = np.full(n_particles, float(x0))
    loglik = 0.0
    for t, frame in enumerate(frames):
        points = _as_points(frame)
        particles = model.target.sample_transition(particles, rng)
        logw = _k1_frame_logpdf_particles(points, particles, model)
        step = logsumexp(logw) - math.log(n_particles)
        if not np.isfinite(step):
            raise NumericalCollapseError(
                f"all particle weights vanished at step {t} (max logw "
                f"{np.max(logw):.1f})"
            )
        loglik += float(step)
        idx = _systematic_resample_indices(log_weights_to_probs(logw), rng)
        particles = particles[idx]
    return loglik


def _k1_frame_logpdf_particles(points: np.ndarray, particles: np.ndarray, model: MttModel):
    """Vectorized single-target frame density across particles."""
    params = model.params
    m = points.size
    rate = params.clutter_rate
    log_p = math.log(params.detect_prob) if params.detect_prob > 0 else -math.inf
    log_q = math.log1p(-params.detect_prob) if params.detect_prob < 1 else -math.inf
    lp = (
        model.clutter.spatial.log_pdf(points)
        if model.clutter is not None
        else np.zeros(m)
    )
    lp_total, lp_loo = _leave_one_out_sums(lp) if m else (0.0, np.zeros(0))
    base = log_q + float(log_poisson_pmf(m, rate)) + lp_total
    cols = [np.full((particles.size, 1), base)]
    if m:
        lg = model.target.log_obs(points[None, :], particles[:, None], params.theta)
        cols.append(
            log_p - math.log(m) + float(log_poisson_pmf(m - 1, rate)) + lp_loo[None, :] + lg
        )
    return logsumexp(np.concatenate(cols, axis=1), axis=1)


def _systematic_resample_indices(probs: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    n = probs.size
    positions = (rng.random() + np.arange(n)) / n
    return np.minimum(np.searchsorted(np.cumsum(probs), positions), n - 1)
