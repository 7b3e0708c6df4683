"""Vectorized Monte Carlo engines behind the experiment CLI.

Each engine simulates replicates of one figure protocol and reduces them to
an information-loss report.  They are algebraically the same computations
as :func:`mtt_fisher.fisher.fisher_mc` (tests pin the agreement) but
generate and score whole replicate batches at once, with the per-replicate
inner loops delegated to :mod:`mtt_fisher.kernels`.
"""

from __future__ import annotations

import math

import numpy as np

from . import kernels
from .errors import ConfigError
from .estimates import InformationLossReport
from .fisher import HmmRegime, fisher_mc
from .likelihood import _constrained_perm_array
from .models import (
    ClutterModel,
    GaussianClutterDensity,
    GroundTruth,
    ModelParams,
    MttModel,
    SingleTargetModel,
    UniformClutterDensity,
    WindowedGaussianModel,
)
from .numerics import batch_means_se
from .permassoc import UNBOUNDED, PerturbationSpec

_BIG_RATIO = 1e4  # stands in for an infinite target-to-clutter ratio


def false_alarm_loss(
    rate: float,
    clutter_kind: str,
    n_samples: int,
    rng: np.random.Generator,
    theta_star: float = 1.0,
    uniform_halfwidth: float | None = None,
    n_batches: int = 20,
    chunk: int = 200_000,
) -> InformationLossReport:
    """Relative information loss for one static, always-detected target
    whose frame is contaminated by Poisson clutter.

    The frame score is the weighted average of per-observation scores with
    posterior origin weights; with clutter distributed like the target the
    weights are uniform.  The baseline is the closed-form single-
    observation information.
    """
    if clutter_kind == "gaussian":
        spatial = GaussianClutterDensity(0.0, theta_star)
    elif clutter_kind == "uniform":
        if uniform_halfwidth is None:
            raise ConfigError("uniform clutter needs a halfwidth")
        spatial = UniformClutterDensity(uniform_halfwidth)
    else:
        raise ConfigError(f"unknown clutter kind {clutter_kind!r}")
    target = SingleTargetModel(obs_kind="variance")
    info_single = target.obs_fisher_static(theta_star)

    # keep the flattened point buffer bounded regardless of the rate
    chunk = max(1000, min(chunk, int(4e6 / (1.0 + rate))))
    sq = np.empty(n_samples)
    done = 0
    while done < n_samples:
        b = min(chunk, n_samples - done)
        counts = rng.poisson(rate, b) if rate > 0 else np.zeros(b, dtype=np.int64)
        sizes = counts + 1
        offsets = np.zeros(b + 1, dtype=np.int64)
        np.cumsum(sizes, out=offsets[1:])
        total = int(offsets[-1])
        pts = np.empty(total)
        # slot 0 of each frame is the target observation; order is
        # irrelevant because the weights are exchangeable
        pts[offsets[:-1]] = math.sqrt(theta_star) * rng.standard_normal(b)
        mask = np.ones(total, dtype=bool)
        mask[offsets[:-1]] = False
        pts[mask] = spatial.sample(rng, int(counts.sum()))

        lg = -0.5 * (math.log(2 * math.pi * theta_star)) - pts**2 / (2 * theta_star)
        lp = spatial.log_pdf(pts)
        ratio = np.where(np.isfinite(lp), lg - lp, _BIG_RATIO)
        scores = (pts**2 - theta_star) / (2.0 * theta_star**2)

        seg = offsets[:-1]
        top = np.maximum.reduceat(ratio, seg)
        frame_of = np.repeat(np.arange(b), sizes)
        w = np.exp(ratio - top[frame_of])
        denom = np.add.reduceat(w, seg)
        num = np.add.reduceat(w * scores, seg)
        sq[done : done + b] = (num / denom) ** 2
        done += b

    perturbed = float(sq.mean())
    return InformationLossReport(
        baseline=info_single,
        baseline_se=0.0,
        perturbed=perturbed,
        perturbed_se=batch_means_se(sq, n_batches),
        spec=PerturbationSpec(alpha=UNBOUNDED, beta=0),
        provenance="monte-carlo",
    )


def _uniform_permutations(k: int, batch: int, rng: np.random.Generator) -> np.ndarray:
    return rng.permuted(np.tile(np.arange(k), (batch, 1)), axis=1)


def static_association_loss(
    positions,
    alpha,
    n_samples: int,
    rng: np.random.Generator,
    theta_star: float = 1.0,
    n_batches: int = 20,
    chunk: int = 100_000,
) -> InformationLossReport:
    """Loss for fully detected static Gaussian targets whose frame order is
    scrambled by a displacement-bounded uniform permutation (no clutter)."""
    positions = np.asarray(positions, dtype=float)
    k = positions.size
    target = SingleTargetModel(obs_kind="variance")
    info_single = target.obs_fisher_static(theta_star)
    full_group = alpha == UNBOUNDED or alpha >= k
    perms = None if full_group else _constrained_perm_array(k, alpha)

    sq = np.empty(n_samples)
    done = 0
    while done < n_samples:
        b = min(chunk, n_samples - done)
        y = positions[None, :] + math.sqrt(theta_star) * rng.standard_normal((b, k))
        if full_group:
            sigma = _uniform_permutations(k, b, rng)
        else:
            sigma = perms[rng.integers(0, len(perms), b)]
        z = np.take_along_axis(y, sigma, axis=1)

        diff = z[:, None, :] - positions[None, :, None]  # (b, target, obs)
        lg = -0.5 * math.log(2 * math.pi * theta_star) - diff**2 / (2 * theta_star)
        sg = (diff**2 - theta_star) / (2 * theta_star**2)
        if full_group:
            scale = lg.max(axis=1, keepdims=True)
            g = np.exp(lg - scale)
            _, score = kernels.batch_permanent_gradient(g, g * sg)
        else:
            score = _enumerated_perm_score(lg, sg, perms)
        sq[done : done + b] = score**2
        done += b

    perturbed = float(sq.mean())
    return InformationLossReport(
        baseline=k * info_single,
        baseline_se=0.0,
        perturbed=perturbed,
        perturbed_se=batch_means_se(sq, n_batches),
        spec=PerturbationSpec(alpha=alpha, beta=0),
        provenance="monte-carlo",
    )


def _enumerated_perm_score(lg: np.ndarray, sg: np.ndarray, perms: np.ndarray) -> np.ndarray:
    """Posterior-weighted score over an explicit permutation list."""
    b, k, _ = lg.shape
    rows = np.arange(k)
    logw = np.empty((b, len(perms)))
    dsum = np.empty((b, len(perms)))
    for p, sigma in enumerate(perms):
        logw[:, p] = lg[:, rows, sigma].sum(axis=1)
        dsum[:, p] = sg[:, rows, sigma].sum(axis=1)
    top = logw.max(axis=1, keepdims=True)
    w = np.exp(logw - top)
    w /= w.sum(axis=1, keepdims=True)
    return (w * dsum).sum(axis=1)


def make_windowed_model(
    n_targets: int,
    spacing: float = 4.0,
    epsilon: float = 0.1,
    adaptive: bool = True,
    reference_targets: int = 10,
    margin: float = 0.05,
) -> WindowedGaussianModel:
    """Windowed observation family with evenly spaced targets.

    In the adaptive layout the interval grows affinely with the number of
    targets, which keeps the uniform-floor width per target constant (the
    small boundary margin is the only deviation from exact proportionality);
    the constant layout freezes the interval at the reference size.
    """
    probe = WindowedGaussianModel(
        centers=(0.0,), extent=(-50.0, 50.0), epsilon=epsilon, shift_margin=margin
    )
    radius = probe.radius
    span = reference_targets if not adaptive else n_targets
    half = 0.5 * (spacing * (span - 1) + 2.0 * radius) + margin
    centers = spacing * (np.arange(n_targets) - (n_targets - 1) / 2.0)
    return WindowedGaussianModel(
        centers=tuple(centers),
        extent=(-half, half),
        epsilon=epsilon,
        shift_margin=margin,
    )


def windowed_association_loss(
    wmodel: WindowedGaussianModel,
    n_samples: int,
    rng: np.random.Generator,
    n_batches: int = 20,
    chunk: int = 50_000,
) -> InformationLossReport:
    """Loss under full association uncertainty for the windowed family."""
    k = wmodel.n_targets
    info_single = wmodel.single_target_info()

    sq = np.empty(n_samples)
    done = 0
    while done < n_samples:
        b = min(chunk, n_samples - done)
        y = np.column_stack([wmodel.sample(i, 0.0, rng, size=b) for i in range(k)])
        sigma = _uniform_permutations(k, b, rng)
        z = np.take_along_axis(y, sigma, axis=1)
        lg = np.empty((b, k, k))
        sg = np.empty((b, k, k))
        for i in range(k):
            lg[:, i, :] = wmodel.log_pdf(z, i)
            sg[:, i, :] = wmodel.score_shift(z, i)
        scale = lg.max(axis=1, keepdims=True)
        g = np.exp(lg - scale)
        _, score = kernels.batch_permanent_gradient(g, g * sg)
        sq[done : done + b] = score**2
        done += b

    perturbed = float(sq.mean())
    return InformationLossReport(
        baseline=k * info_single,
        baseline_se=0.0,
        perturbed=perturbed,
        perturbed_se=batch_means_se(sq, n_batches),
        spec=PerturbationSpec(alpha=UNBOUNDED, beta=0),
        provenance="monte-carlo",
    )


def detection_failure_loss(
    detect_prob: float,
    n_steps: int,
    mc_outer: int,
    mc_inner: int,
    rng: np.random.Generator,
    motion_std: float = 0.1,
    theta_star: float = 1.0,
    x0: float = 0.0,
    inner_method: str = "pf",
) -> InformationLossReport:
    """Loss of a moving, clutter-free target with missed detections.

    Both the perturbed information (detection probability below one,
    unconstrained misses) and the baseline (full detection) are estimated
    with the same inner integration so their biases cancel in the ratio.
    """
    target = SingleTargetModel(motion_std=motion_std, obs_kind="variance")

    def estimate(p_d: float, spec: PerturbationSpec):
        params = ModelParams(theta=theta_star, n_targets=1, detect_prob=p_d)
        truth = GroundTruth(
            model=MttModel(target=target, params=params),
            initial_states=np.array([x0]),
        )
        return fisher_mc(
            truth,
            spec,
            HmmRegime(n_steps=n_steps, inner_method=inner_method),
            mc_outer,
            rng,
            mc_inner=mc_inner,
        )

    perturbed = estimate(detect_prob, PerturbationSpec(alpha=1, beta=UNBOUNDED))
    baseline = estimate(1.0, PerturbationSpec(alpha=1, beta=0))
    return InformationLossReport(
        baseline=baseline.scalar,
        baseline_se=baseline.scalar_se,
        perturbed=perturbed.scalar,
        perturbed_se=perturbed.scalar_se,
        spec=PerturbationSpec(alpha=1, beta=UNBOUNDED),
        provenance="monte-carlo",
    )


def worst_case_clutter_model(rate: float, theta_star: float = 1.0) -> MttModel:
    """Single static target with clutter matching its observation density."""
    return MttModel(
        target=SingleTargetModel(obs_kind="variance"),
        params=ModelParams(theta=theta_star, n_targets=1, detect_prob=1.0, clutter_rate=rate),
        clutter=ClutterModel(rate=rate, spatial=GaussianClutterDensity(0.0, theta_star))
        if rate > 0
        else None,
    )
