"""Scalar maximum-likelihood estimation and its asymptotic experiments."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DataError
from .likelihood import (
    _as_points,
    batch_log_perturbed_likelihood,
    marginal_log_likelihood_sequence,
)
from .models import GroundTruth, MttModel
from .permassoc import PerturbationSpec
from .rngstream import rng_stream
from .simulate import simulate_sequence

GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class MleResult:
    theta_hat: float
    loglik_at_hat: float
    n: int
    bounds: tuple[float, float]
    trace: tuple = field(repr=False, default=())

    @property
    def n_evaluations(self) -> int:
        return len(self.trace)


def golden_section_maximize(objective, lo: float, hi: float, tol: float = 1e-4):
    """Golden-section search for the maximizer of a unimodal objective.

    Returns ``(theta, value, trace)`` where the reported point is the best
    one actually evaluated (bracket endpoints included), so its value never
    falls below either endpoint's.
    """
    if not hi > lo:
        raise ConfigError(f"invalid bracket [{lo}, {hi}]")
    trace = []

    def f(theta):
        value = float(objective(theta))
        trace.append((theta, value))
        return value

    f(lo)
    f(hi)
    a, b = lo, hi
    x1 = b - GOLDEN * (b - a)
    x2 = a + GOLDEN * (b - a)
    f1, f2 = f(x1), f(x2)
    while b - a > tol:
        if f1 < f2:
            a, x1, f1 = x1, x2, f2
            x2 = a + GOLDEN * (b - a)
            f2 = f(x2)
        else:
            b, x2, f2 = x2, x1, f1
            x1 = b - GOLDEN * (b - a)
            f1 = f(x1)
    if not any(math.isfinite(v) for _, v in trace):
        raise DataError("objective is non-finite on the entire bracket")
    theta, value = max(trace, key=lambda tv: tv[1] if math.isfinite(tv[1]) else -math.inf)
    return theta, value, tuple(trace)


def default_bounds(theta_star: float, kind: str) -> tuple[float, float]:
    """Compact search interval: decade around a scale, +-5 around a location."""
    if kind == "variance":
        return theta_star / 10.0, theta_star * 10.0
    return theta_star - 5.0, theta_star + 5.0


def _grouped_points(frames):
    groups: dict[int, list[np.ndarray]] = {}
    for f in frames:
        p = _as_points(f)
        groups.setdefault(p.size, []).append(p)
    return {
        m: (np.stack(rows) if m else np.zeros((len(rows), 0))) for m, rows in groups.items()
    }


def make_static_objective(frames, states, model_template: MttModel, spec: PerturbationSpec):
    """Deterministic sequence log-likelihood as a function of theta."""
    groups = _grouped_points(frames)

    def objective(theta: float) -> float:
        model = model_template.with_theta(theta)
        total = 0.0
        for _, batch in groups.items():
            total += float(
                np.sum(batch_log_perturbed_likelihood(batch, states, model, spec))
            )
        return total

    return objective


def maximize_loglik(
    frames,
    model_template: MttModel,
    spec: PerturbationSpec | None = None,
    free_param: str = "theta",
    bounds: tuple[float, float] | None = None,
    tol: float = 1e-4,
    static_states=None,
    integration: str = "exact-static",
    n_particles: int = 1000,
    seed: int | None = None,
) -> MleResult:
    """Maximize the sequence log-likelihood over the scalar free parameter.

    Golden-section search on a compact bracket.  Monte Carlo objectives are
    made deterministic by re-seeding the latent draws identically at every
    evaluation (common random numbers), which keeps the objective smooth
    in theta.
    """
    if len(frames) == 0:
        raise ConfigError("no data: cannot maximize over an empty sequence")
    if free_param != "theta":
        raise ConfigError(f"only the scalar 'theta' is optimized, got {free_param!r}")
    if bounds is None:
        bounds = default_bounds(model_template.params.theta, model_template.target.obs_kind)

    if integration == "exact-static":
        if static_states is None:
            raise ConfigError("exact-static objective requires static states")
        objective = make_static_objective(frames, static_states, model_template, spec)
    elif integration == "mc":
        if seed is None:
            raise ConfigError("mc objective requires a seed for common random numbers")

        def objective(theta: float) -> float:
            return marginal_log_likelihood_sequence(
                frames,
                model_template.with_theta(theta),
                integration="mc",
                n_particles=n_particles,
                rng=rng_stream(seed, 777),
            )

    else:
        raise ConfigError(f"unknown integration {integration!r}")

    theta, value, trace = golden_section_maximize(objective, bounds[0], bounds[1], tol)
    return MleResult(
        theta_hat=float(theta),
        loglik_at_hat=float(value),
        n=len(frames),
        bounds=bounds,
        trace=trace,
    )


# ---------------------------------------------------------------------------
# experiments


def consistency_experiment(
    truth: GroundTruth,
    spec: PerturbationSpec,
    n_grid,
    replicates: int,
    rng: np.random.Generator,
    bounds: tuple[float, float] | None = None,
    tol: float = 1e-4,
):
    """Mean absolute estimation error per sequence length.

    Returns rows ``(n, mean_abs_error, sd_abs_error)``; under consistency
    the error trend is non-increasing in n.
    """
    rows = []
    theta_star = truth.model.params.theta
    for n in n_grid:
        errors = []
        for _ in range(replicates):
            frames = [f.observed for f in simulate_sequence(truth, spec, int(n), rng)]
            result = maximize_loglik(
                frames,
                truth.model,
                spec,
                bounds=bounds,
                tol=tol,
                static_states=truth.initial_states,
            )
            errors.append(abs(result.theta_hat - theta_star))
        errors = np.asarray(errors)
        rows.append((int(n), float(errors.mean()), float(errors.std(ddof=1) if len(errors) > 1 else 0.0)))
    return rows


def error_rate_slope(rows) -> float:
    """Least-squares slope of log mean-error against log n."""
    n = np.log([r[0] for r in rows])
    e = np.log([r[1] for r in rows])
    return float(np.polyfit(n, e, 1)[0])


@dataclass(frozen=True)
class NormalityReport:
    n: int
    replicates: int
    var_ratio: float  # Var[sqrt(n)(theta_hat - theta*)] times the information
    ad_statistic: float
    ad_pvalue: float
    mean_bias: float
    bias_se: float


def normality_experiment(
    truth: GroundTruth,
    spec: PerturbationSpec,
    n: int,
    replicates: int,
    fisher_value: float,
    rng: np.random.Generator,
    bounds: tuple[float, float] | None = None,
    tol: float = 1e-4,
) -> NormalityReport:
    """Compare the replicate variance of the scaled estimator with the
    inverse information and test the estimates for normality."""
    theta_star = truth.model.params.theta
    hats = np.empty(replicates)
    for r in range(replicates):
        frames = [f.observed for f in simulate_sequence(truth, spec, n, rng)]
        hats[r] = maximize_loglik(
            frames,
            truth.model,
            spec,
            bounds=bounds,
            tol=tol,
            static_states=truth.initial_states,
        ).theta_hat
    scaled = math.sqrt(n) * (hats - theta_star)
    var_ratio = float(np.var(scaled, ddof=1) * fisher_value)
    stat, pvalue = anderson_darling_normal(hats)
    return NormalityReport(
        n=n,
        replicates=replicates,
        var_ratio=var_ratio,
        ad_statistic=stat,
        ad_pvalue=pvalue,
        mean_bias=float(hats.mean() - theta_star),
        bias_se=float(hats.std(ddof=1) / math.sqrt(replicates)),
    )


def anderson_darling_normal(sample) -> tuple[float, float]:
    """Anderson-Darling statistic against normality (estimated moments)
    with the small-sample-adjusted p-value approximation."""
    x = np.sort(np.asarray(sample, dtype=float))
    n = x.size
    if n < 8:
        raise ConfigError(f"need at least 8 values, got {n}")
    z = (x - x.mean()) / x.std(ddof=1)
    from scipy.special import ndtr

    cdf = np.clip(ndtr(z), 1e-300, 1.0 - 1e-16)
    i = np.arange(1, n + 1)
    a2 = -n - np.mean((2 * i - 1) * (np.log(cdf) + np.log1p(-cdf[::-1])))
    a2_star = a2 * (1.0 + 0.75 / n + 2.25 / n**2)
    if a2_star >= 0.6:
        p = math.exp(1.2937 - 5.709 * a2_star + 0.0186 * a2_star**2)
    elif a2_star > 0.34:
        p = math.exp(0.9177 - 4.279 * a2_star - 1.38 * a2_star**2)
    elif a2_star > 0.2:
        p = 1.0 - math.exp(-8.318 + 42.796 * a2_star - 59.938 * a2_star**2)
    else:
        p = 1.0 - math.exp(-13.436 + 101.14 * a2_star - 223.73 * a2_star**2)
    return float(a2), float(min(max(p, 0.0), 1.0))


def likelihood_gap_experiment(
    truth: GroundTruth,
    spec: PerturbationSpec,
    theta_grid,
    n: int,
    rng: np.random.Generator,
):
    """Per-frame log-likelihood ratio against the truth over a theta grid.

    Returns rows ``(theta, gap, se)`` where ``gap`` estimates the expected
    per-frame log ratio; it is non-positive in the limit and maximized at
    the true parameter.
    """
    frames = [f.observed for f in simulate_sequence(truth, spec, n, rng)]
    states = truth.initial_states
    groups = _grouped_points(frames)

    def per_frame(theta):
        vals = []
        model = truth.model.with_theta(theta)
        for _, batch in groups.items():
            vals.append(batch_log_perturbed_likelihood(batch, states, model, spec))
        return np.concatenate(vals)

    base = per_frame(truth.model.params.theta)
    rows = []
    for theta in theta_grid:
        diff = per_frame(float(theta)) - base
        rows.append(
            (
                float(theta),
                float(diff.mean()),
                float(diff.std(ddof=1) / math.sqrt(len(diff))),
            )
        )
    return rows
