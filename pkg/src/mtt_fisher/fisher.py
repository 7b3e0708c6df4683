"""Scores via the Fisher identity and Monte Carlo information estimates.

The marginal score is the posterior expectation of the complete-data score
over the latent mask, permutation and (in dynamic regimes) trajectory.
Static frames are scored exactly by enumeration or the assignment dynamic
program when feasible, otherwise by self-normalized latent sampling from
the prior.  Dynamic single-target sequences are scored by a bootstrap
filter that accumulates per-step scores along ancestral lines, or exactly
by the tangent Kalman filter for cross-checks.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from . import kernels
from .errors import ConfigError, ModelViolationError, NumericalCollapseError
from .estimates import FisherEstimate, InformationLossReport
from .kalman import kalman_loglik_score
from .likelihood import (
    DP_MAX_POINTS,
    ENUM_TERM_CAP,
    _as_points,
    _as_states,
    batch_log_perturbed_likelihood,
    count_enumeration_terms,
    log_perturbed_likelihood,
)
from .models import GroundTruth, MttModel
from .numerics import batch_means_se, log_poisson_pmf
from .permassoc import (
    UNBOUNDED,
    PerturbationSpec,
    detection_mask_law,
    sample_uniform_constrained,
)

__all__ = [
    "FisherEstimate",
    "InformationLossReport",
    "association_weights_ci",
    "association_weights_cik",
    "score_fisher_identity",
    "score_hmm_sequence",
    "StaticRegime",
    "HmmRegime",
    "fisher_mc",
    "loss_false_alarm_worst_case",
    "expected_inverse_count_plus_one",
    "loss_detection_failure",
    "cardinality_information",
    "additivity_unperturbed_targets",
    "score_conditional_expectation_identity_check",
]


# ---------------------------------------------------------------------------
# association weights


def association_weights_ci(frame, x, model: MttModel) -> np.ndarray:
    """Posterior probability that each observation is the target's.

    Single almost-surely-detected target with clutter: the weight of
    observation i is its target-to-clutter density ratio, normalized.
    """
    points = _as_points(frame)
    params = model.params
    if params.n_targets != 1 or params.detect_prob != 1.0:
        raise ConfigError("weights defined for one always-detected target")
    if points.size == 0:
        raise ConfigError("need at least one observation")
    x0 = float(_as_states(x)[0])
    lg = model.target.log_obs(points, x0, params.theta)
    lp = model.clutter.spatial.log_pdf(points) if model.clutter is not None else np.zeros_like(lg)
    if not np.all(np.isfinite(lp)):
        raise ModelViolationError("clutter density vanishes at an observation")
    ratio = lg - lp
    w = np.exp(ratio - ratio.max())
    return w / w.sum()


def association_weights_cik(frame, x, model: MttModel) -> np.ndarray:
    """Posterior matrix c[i, k]: target i generated observation k.

    Defined for fully detected static targets without clutter and exactly
    as many observations as targets; each row and column sums to one.
    Computed from permanents of the density matrix and its minors.
    """
    points = _as_points(frame)
    states = _as_states(x)
    params = model.params
    k = params.n_targets
    if params.detect_prob != 1.0 or params.clutter_rate != 0.0:
        raise ConfigError("weights defined for full detection without clutter")
    if states.size != k or points.size != k:
        raise ConfigError(f"need exactly {k} states and observations")
    lg = model.target.log_obs(points[None, :], states[:, None], params.theta)
    # scaling any column leaves the weights invariant; pull out column peaks
    lg = lg - lg.max(axis=0, keepdims=True)
    g = np.exp(lg)
    if k == 1:
        return np.ones((1, 1))
    log_full, _ = kernels.batch_permanent_gradient(g[None], np.zeros_like(g)[None])
    if not np.isfinite(log_full[0]):
        raise NumericalCollapseError("zero permanent; observations incompatible with states")
    minors = np.empty((k * k, k - 1, k - 1))
    rows = np.arange(k)
    for i in range(k):
        sub = g[rows != i]
        for c in range(k):
            minors[i * k + c] = sub[:, rows != c]
    log_minors, _ = kernels.batch_permanent_gradient(minors, np.zeros_like(minors))
    with np.errstate(divide="ignore"):
        logc = np.log(g).ravel() + log_minors - log_full[0]
    return np.exp(logc).reshape(k, k)


# ---------------------------------------------------------------------------
# static scores


def _as_frame_list(frames) -> list[np.ndarray]:
    """Normalize input into a list of point arrays.

    A flat sequence of numbers is one frame; a sequence of frames (arrays,
    ObservationFrame objects, nested lists) is many.
    """
    from .likelihood import ObservationFrame

    if isinstance(frames, ObservationFrame):
        return [frames.points]
    if isinstance(frames, np.ndarray):
        if frames.ndim <= 1:
            return [_as_points(np.atleast_1d(frames))]
        return [_as_points(row) for row in frames]
    if isinstance(frames, (list, tuple)):
        if len(frames) == 0:
            return []
        if all(np.isscalar(f) and not isinstance(f, str) for f in frames):
            return [_as_points(np.asarray(frames, dtype=float))]
        return [_as_points(f) for f in frames]
    return [_as_points(np.atleast_1d(np.asarray(frames, dtype=float)))]


def _score_frames_batch(
    points: np.ndarray,
    states: np.ndarray,
    model: MttModel,
    spec: PerturbationSpec,
    latent_handling: str = "auto",
    n_latent: int = 2000,
    rng: np.random.Generator | None = None,
):
    """Scores of a batch of equal-length static frames; returns (B,) array."""
    params = model.params
    m = points.shape[1]
    law = detection_mask_law(params.n_targets, params.detect_prob, spec.beta)
    collapsed = spec.alpha == UNBOUNDED or spec.alpha >= max(m, 1)
    enum_terms = None if collapsed else count_enumeration_terms(params.n_targets, m, spec)

    mode = latent_handling
    if mode == "auto":
        if collapsed and m <= DP_MAX_POINTS:
            mode = "exact"
        elif not collapsed and enum_terms <= ENUM_TERM_CAP:
            mode = "exact"
        else:
            mode = "mc"

    if mode == "exact":
        loglik, score = batch_log_perturbed_likelihood(
            points, states, model, spec, want_score=True
        )
        if np.any(~np.isfinite(loglik)):
            raise NumericalCollapseError("zero-likelihood frame; score undefined")
        return score
    if mode != "mc":
        raise ConfigError(f"unknown latent handling {mode!r}")
    if rng is None:
        raise ConfigError("latent Monte Carlo scoring requires an rng")
    return np.array(
        [_score_frame_latent_mc(row, states, model, spec, law, n_latent, rng) for row in points]
    )


def _score_frame_latent_mc(points, states, model, spec, law, n_latent, rng):
    """Self-normalized score with (mask, permutation) drawn from the prior."""
    params = model.params
    m = points.size
    lg = model.target.log_obs(points[None, :], states[:, None], params.theta)
    sg = model.target.score_obs(points[None, :], states[:, None], params.theta)
    lp = model.clutter.spatial.log_pdf(points) if model.clutter is not None else np.zeros(m)
    logw = np.full(n_latent, -np.inf)
    contrib = np.zeros(n_latent)
    for r in range(n_latent):
        mask = law.sample(rng)
        d = mask.detected_count
        if d > m:
            continue
        sigma = sample_uniform_constrained(m, spec.alpha, rng).as_array()
        detected = np.asarray(mask.detected_indices(), dtype=np.intp)
        w = float(log_poisson_pmf(m - d, params.clutter_rate))
        s = 0.0
        if d:
            w += float(lg[detected, sigma[:d]].sum())
            s = float(sg[detected, sigma[:d]].sum())
        if m - d:
            w += float(lp[sigma[d:]].sum())
        logw[r] = w
        contrib[r] = s
    top = logw.max()
    if not np.isfinite(top):
        raise NumericalCollapseError("all latent weights vanished")
    w = np.exp(logw - top)
    return float((w * contrib).sum() / w.sum())


def score_fisher_identity(
    frames,
    x,
    model: MttModel,
    spec: PerturbationSpec | None = None,
    latent_handling: str = "auto",
    n_latent: int = 2000,
    rng: np.random.Generator | None = None,
) -> float:
    """Marginal score of static frames via the Fisher identity.

    The score of a set of independent frames is the sum of per-frame
    posterior expectations of the complete-data score over the latent
    (mask, permutation) pair.  ``latent_handling`` picks exact enumeration
    ("exact"), prior sampling ("mc"), or a size-based choice ("auto").
    """
    spec = PerturbationSpec(UNBOUNDED, UNBOUNDED) if spec is None else spec
    states = _as_states(x)
    pts = _as_frame_list(frames)
    total = 0.0
    by_len: dict[int, list[int]] = {}
    for i, p in enumerate(pts):
        by_len.setdefault(p.size, []).append(i)
    for m, idx in sorted(by_len.items()):
        batch = np.stack([pts[i] for i in idx]) if m else np.zeros((len(idx), 0))
        scores = _score_frames_batch(
            batch, states, model, spec, latent_handling, n_latent, rng
        )
        total += float(np.sum(scores))
    return total


# ---------------------------------------------------------------------------
# dynamic single-target scores


def score_hmm_sequence(
    y: np.ndarray,
    detected: np.ndarray,
    model: MttModel,
    x0: float = 0.0,
    method: str = "pf",
    n_inner: int = 1000,
    rng: np.random.Generator | None = None,
    split: bool = False,
):
    """Score of masked single-target sequences (no clutter).

    ``method="exact"`` integrates the trajectory with the tangent Kalman
    filter; ``method="pf"`` uses the bootstrap-filter smoothed score.  With
    ``split=True`` two independent half-budget filters are run and both
    estimates returned: their product is an unbiased estimate of the
    squared score, free of the single-filter variance inflation.
    """
    params = model.params
    if params.n_targets != 1 or params.clutter_rate != 0.0:
        raise ConfigError("sequence scoring requires one target and no clutter")
    y = np.atleast_2d(np.asarray(y, dtype=float))
    detected = np.atleast_2d(np.asarray(detected, dtype=bool))
    if method == "exact":
        _, score = kalman_loglik_score(
            y,
            detected,
            x0,
            model.target.motion_std**2,
            params.theta,
            kind=model.target.obs_kind,
            obs_const=model.target.obs_const,
        )
        return (score, score.copy()) if split else score
    if method != "pf":
        raise ConfigError(f"unknown method {method!r}")
    if rng is None:
        raise ConfigError("particle scoring requires an rng")
    kind = 0 if model.target.obs_kind == "variance" else 1

    def run(n_particles: int) -> np.ndarray:
        batch, n = y.shape
        noise = rng.standard_normal((batch, n, n_particles))
        res_u = rng.random((batch, n))
        score, _ = kernels.pf_masked_score(
            y,
            detected,
            x0,
            model.target.motion_std,
            params.theta,
            kind,
            model.target.obs_const,
            noise,
            res_u,
        )
        return score

    if split:
        half = max(2, n_inner // 2)
        return run(half), run(n_inner - half if n_inner - half >= 2 else half)
    return run(n_inner)


# ---------------------------------------------------------------------------
# Monte Carlo Fisher information


@dataclass(frozen=True)
class StaticRegime:
    """Independent frames around fixed states; information is per frame."""


@dataclass(frozen=True)
class HmmRegime:
    """Moving target(s) observed over a window; information is per step."""

    n_steps: int = 50
    inner_method: str = "pf"  # "pf" | "exact"


_PF_CHUNK_BUDGET = 1 << 22  # doubles of pre-drawn noise per chunk


def fisher_mc(
    truth: GroundTruth,
    spec: PerturbationSpec,
    regime,
    mc_outer: int,
    rng: np.random.Generator,
    mc_inner: int = 1000,
    n_batches: int = 20,
    latent_handling: str = "auto",
) -> FisherEstimate:
    """Estimate the observed-model information by squared identity scores.

    Simulates ``mc_outer`` replicates from the truth, scores each one via
    the Fisher identity, and averages score products; standard errors come
    from 20 batch means.  Static regimes score exactly whenever the latent
    enumeration fits the cap; the dynamic single-target regime uses two
    independent half-budget particle filters per replicate so that the
    averaged product is free of inner-variance inflation.
    """
    if mc_outer < 100:
        raise ConfigError(f"need mc_outer >= 100, got {mc_outer}")
    model = truth.model
    params = model.params
    if isinstance(regime, StaticRegime):
        from .simulate import simulate_static

        frames = simulate_static(truth, spec, mc_outer, rng)
        pts = [f.observed.points for f in frames]
        scores = np.empty(mc_outer)
        by_len: dict[int, list[int]] = {}
        for i, p in enumerate(pts):
            by_len.setdefault(p.size, []).append(i)
        for m, idx in sorted(by_len.items()):
            batch = np.stack([pts[i] for i in idx]) if m else np.zeros((len(idx), 0))
            scores[idx] = _score_frames_batch(
                batch,
                truth.initial_states,
                model,
                spec,
                latent_handling=latent_handling,
                n_latent=mc_inner,
                rng=rng,
            )
        sq = scores**2
        config = {"regime": "static", "mc_outer": mc_outer}
    elif isinstance(regime, HmmRegime):
        sq = _hmm_squared_scores(truth, spec, regime, mc_outer, mc_inner, rng)
        config = {
            "regime": "hmm",
            "n_steps": regime.n_steps,
            "mc_outer": mc_outer,
            "mc_inner": mc_inner,
            "inner_method": regime.inner_method,
        }
    else:
        raise ConfigError(f"unknown regime {regime!r}")
    value = float(sq.mean())
    se = batch_means_se(sq, n_batches)
    return FisherEstimate(
        matrix=np.array([[value]]),
        std_error=np.array([[se]]),
        n_samples=mc_outer,
        config=config | {"alpha": spec.alpha, "beta": spec.beta},
    )


def _hmm_squared_scores(truth, spec, regime, mc_outer, mc_inner, rng):
    """Per-replicate squared-score estimates, normalized per step."""
    model = truth.model
    params = model.params
    n = regime.n_steps
    k = params.n_targets

    if spec.is_unperturbed:
        # identity association, full detection: the score decomposes into a
        # sum of exact per-target trajectory scores; clutter carries no
        # information about the target parameter
        scores = np.zeros(mc_outer)
        for i in range(k):
            x0 = float(truth.initial_states[i])
            x, y = _simulate_target_paths(model, x0, mc_outer, n, rng, truth.static)
            det = np.ones((mc_outer, n), dtype=bool)
            _, s = kalman_loglik_score(
                y,
                det,
                x0,
                0.0 if truth.static else model.target.motion_std**2,
                params.theta,
                kind=model.target.obs_kind,
                obs_const=model.target.obs_const,
            )
            scores += s
        return scores**2 / n

    if k != 1 or params.clutter_rate != 0.0 or spec.alpha != 1:
        raise ConfigError(
            "dynamic scoring supports one clutter-free target (any beta) or "
            "the fully unperturbed model"
        )
    x0 = float(truth.initial_states[0])
    beta_zero = spec.beta == 0
    sq = np.empty(mc_outer)
    chunk = max(1, _PF_CHUNK_BUDGET // max(1, n * max(2, mc_inner // 2)))
    done = 0
    while done < mc_outer:
        b = min(chunk, mc_outer - done)
        x, y = _simulate_target_paths(model, x0, b, n, rng, truth.static)
        det = (
            np.ones((b, n), dtype=bool)
            if beta_zero
            else rng.random((b, n)) < params.detect_prob
        )
        if regime.inner_method == "exact":
            s = score_hmm_sequence(y, det, model, x0, method="exact")
            sq[done : done + b] = s**2 / n
        else:
            s_a, s_b = score_hmm_sequence(
                y, det, model, x0, method="pf", n_inner=mc_inner, rng=rng, split=True
            )
            sq[done : done + b] = s_a * s_b / n
        done += b
    return sq


def _simulate_target_paths(model, x0, batch, n, rng, static):
    if static:
        x = np.full((batch, n), x0)
    else:
        x = x0 + model.target.motion_std * np.cumsum(rng.standard_normal((batch, n)), axis=1)
    y = model.target.sample_obs(x, model.params.theta, rng, size=x.shape)
    return x, y


# ---------------------------------------------------------------------------
# closed-form special cases


def expected_inverse_count_plus_one(rate: float) -> float:
    """E[1/(N+1)] for a Poisson count, by truncated series."""
    if rate < 0:
        raise ConfigError(f"rate must be >= 0, got {rate}")
    if rate == 0.0:
        return 1.0
    kmax = int(rate + 60.0 * math.sqrt(rate + 1.0) + 60.0)
    ks = np.arange(kmax + 1)
    pmf = np.exp(log_poisson_pmf(ks, rate))
    return float((pmf / (ks + 1.0)).sum())


def loss_false_alarm_worst_case(rate: float) -> float:
    """Relative information loss when clutter matches the target density.

    Equals E[N/(N+1)] for the Poisson clutter count N: strictly increasing
    in the rate, zero at zero, and approaching one as the rate grows.
    """
    if rate < 0:
        raise ConfigError(f"rate must be >= 0, got {rate}")
    if rate == 0.0:
        return 0.0
    return 1.0 - expected_inverse_count_plus_one(rate)


def loss_detection_failure(
    detect_prob: float, n_targets: int, info_single: float
) -> InformationLossReport:
    """Loss under known association with unconstrained detection failures.

    The surviving information is the detection probability times the full
    information, so the relative loss is exactly ``1 - detect_prob``.
    """
    if not 0.0 < detect_prob <= 1.0:
        raise ConfigError(f"detect_prob must be in (0, 1], got {detect_prob}")
    baseline = n_targets * info_single
    return InformationLossReport(
        baseline=baseline,
        baseline_se=0.0,
        perturbed=detect_prob * baseline,
        perturbed_se=0.0,
        spec=PerturbationSpec(alpha=1, beta=UNBOUNDED),
        provenance="closed-form",
    )


def cardinality_information(detect_prob: float, n_targets: int) -> float:
    """Information carried by the detected-count law about the detection
    probability; diverges at the endpoints and is minimal at one half."""
    if not 0.0 < detect_prob < 1.0:
        raise ConfigError(f"detect_prob must be in (0, 1), got {detect_prob}")
    return n_targets / (detect_prob * (1.0 - detect_prob))


def additivity_unperturbed_targets(
    fisher_k, n_extra: int, detect_prob: float, info_single: float
) -> float:
    """Predicted information after adding targets free of association
    uncertainty: each contributes its detection-weighted information."""
    base = fisher_k.perturbed if isinstance(fisher_k, InformationLossReport) else float(fisher_k)
    return base + detect_prob * n_extra * info_single


# ---------------------------------------------------------------------------
# identity diagnostics


@dataclass(frozen=True)
class IdentityCheckReport:
    score_identity: float
    score_finite_difference: float
    gap: float


def score_conditional_expectation_identity_check(
    sim_frames: Sequence,
    model: MttModel,
    spec: PerturbationSpec,
    states=None,
    h: float = 1e-5,
) -> IdentityCheckReport:
    """Compare the identity-based score with a finite difference of the
    marginal log-likelihood on simulated frames."""
    if states is None:
        states = sim_frames[0].truth_states
    frames = [f.observed for f in sim_frames]
    s_id = score_fisher_identity(frames, states, model, spec)
    theta = model.params.theta
    up = sum(
        log_perturbed_likelihood(f, states, model.with_theta(theta + h), spec) for f in frames
    )
    dn = sum(
        log_perturbed_likelihood(f, states, model.with_theta(theta - h), spec) for f in frames
    )
    s_fd = (up - dn) / (2.0 * h)
    return IdentityCheckReport(
        score_identity=float(s_id),
        score_finite_difference=float(s_fd),
        gap=abs(float(s_id) - float(s_fd)),
    )
