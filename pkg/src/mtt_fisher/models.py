"""Parameter vectors and the Gaussian model families used by the experiments.

The single-target families are fixed as a Gaussian random walk transition
and a linear-Gaussian observation; the scalar parameter under study is
selected by a variant tag (observation variance, or observation mean
offset).  A separate windowed observation family concentrates a Gaussian
bump inside a window around each target and spreads a fixed mass uniformly
over the rest of the observation interval; its scalar parameter is the
common displacement of the windows.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy.optimize import brentq
from scipy.special import ndtr, ndtri

from .errors import ConfigError, ParameterDomainError, RestrictedParameterError
from .estimates import FisherEstimate
from .kalman import kalman_loglik_score
from .numerics import LOG_2PI, batch_means_se, log_gauss


@dataclass(frozen=True)
class ModelParams:
    """Full parameter vector of the multi-target model.

    ``fixed`` lists field names locked by a restriction (e.g. a known
    zero clutter rate); :meth:`replace` refuses to change them, so an
    optimizer can never perturb a restricted coordinate.
    """

    theta: float
    n_targets: int = 1
    detect_prob: float = 1.0
    clutter_rate: float = 0.0
    fixed: frozenset = frozenset()

    def __post_init__(self):
        if self.n_targets < 1:
            raise ParameterDomainError(f"n_targets must be >= 1, got {self.n_targets}")
        if not 0.0 < self.detect_prob <= 1.0:
            raise ParameterDomainError(f"detect_prob must be in (0, 1], got {self.detect_prob}")
        if self.clutter_rate < 0.0:
            raise ParameterDomainError(f"clutter_rate must be >= 0, got {self.clutter_rate}")
        object.__setattr__(self, "fixed", frozenset(self.fixed))

    def replace(self, **changes) -> "ModelParams":
        for name, value in changes.items():
            if name in self.fixed and value != getattr(self, name):
                raise RestrictedParameterError(f"parameter {name!r} is fixed")
        return dataclasses.replace(self, **changes)


@dataclass(frozen=True)
class SingleTargetModel:
    """Gaussian random-walk target with a linear-Gaussian observation.

    ``obs_kind`` selects the scalar observation parameter: "variance" means
    y ~ N(x, theta); "location" means y ~ N(x + theta, obs_const).
    """

    motion_std: float = 0.1
    obs_kind: str = "variance"
    obs_const: float = 1.0

    def __post_init__(self):
        if self.motion_std <= 0:
            raise ParameterDomainError(f"motion_std must be positive, got {self.motion_std}")
        if self.obs_kind not in ("variance", "location"):
            raise ParameterDomainError(f"unknown obs_kind {self.obs_kind!r}")
        if self.obs_const <= 0:
            raise ParameterDomainError(f"obs_const must be positive, got {self.obs_const}")

    # -- transition ---------------------------------------------------
    def log_transition(self, x, x_prev, std: float | None = None):
        std = self.motion_std if std is None else std
        if std <= 0:
            raise ParameterDomainError(f"transition std must be positive, got {std}")
        return log_gauss(x, np.asarray(x_prev, dtype=float), std**2)

    def sample_transition(self, x_prev, rng: np.random.Generator):
        x_prev = np.asarray(x_prev, dtype=float)
        return x_prev + self.motion_std * rng.standard_normal(x_prev.shape)

    # -- observation --------------------------------------------------
    def _obs_moments(self, x, theta: float):
        if self.obs_kind == "variance":
            if theta <= 0:
                raise ParameterDomainError(f"observation variance must be positive, got {theta}")
            return np.asarray(x, dtype=float), theta
        return np.asarray(x, dtype=float) + theta, self.obs_const

    def log_obs(self, y, x, theta: float):
        mean, var = self._obs_moments(x, theta)
        return log_gauss(y, mean, var)

    def score_obs(self, y, x, theta: float):
        """Derivative of ``log_obs`` with respect to the scalar parameter."""
        mean, var = self._obs_moments(x, theta)
        y = np.asarray(y, dtype=float)
        if self.obs_kind == "variance":
            return ((y - mean) ** 2 - var) / (2.0 * var**2)
        return (y - mean) / var

    def sample_obs(self, x, theta: float, rng: np.random.Generator, size=None):
        mean, var = self._obs_moments(x, theta)
        shape = np.broadcast(mean).shape if size is None else size
        return mean + math.sqrt(var) * rng.standard_normal(shape)

    def obs_fisher_static(self, theta: float) -> float:
        """Closed-form single-observation information at a fixed state."""
        if self.obs_kind == "variance":
            if theta <= 0:
                raise ParameterDomainError(f"observation variance must be positive, got {theta}")
            return 1.0 / (2.0 * theta**2)
        return 1.0 / self.obs_const


class GaussianClutterDensity:
    """Gaussian false-alarm density; with the target's own moments this is
    the hardest case, clutter being indistinguishable from the target."""

    def __init__(self, center: float, var: float):
        if var <= 0:
            raise ParameterDomainError(f"variance must be positive, got {var}")
        self.center = float(center)
        self.var = float(var)

    def log_pdf(self, y):
        return log_gauss(y, self.center, self.var)

    def sample(self, rng: np.random.Generator, size=None):
        return self.center + math.sqrt(self.var) * rng.standard_normal(size)


class UniformClutterDensity:
    """Uniform false-alarm density over [-halfwidth, halfwidth]."""

    def __init__(self, halfwidth: float):
        if halfwidth <= 0:
            raise ParameterDomainError(f"halfwidth must be positive, got {halfwidth}")
        self.halfwidth = float(halfwidth)

    def log_pdf(self, y):
        y = np.asarray(y, dtype=float)
        inside = np.abs(y) <= self.halfwidth
        return np.where(inside, -math.log(2.0 * self.halfwidth), -np.inf)

    def sample(self, rng: np.random.Generator, size=None):
        return rng.uniform(-self.halfwidth, self.halfwidth, size)


@dataclass(frozen=True)
class ClutterModel:
    """Poisson count paired with a spatial false-alarm density."""

    rate: float
    spatial: object  # GaussianClutterDensity | UniformClutterDensity

    def __post_init__(self):
        if self.rate < 0:
            raise ParameterDomainError(f"rate must be >= 0, got {self.rate}")


@dataclass(frozen=True)
class MttModel:
    """Bundle of the target family, clutter model and scalar parameters."""

    target: SingleTargetModel
    params: ModelParams
    clutter: ClutterModel | None = None

    def __post_init__(self):
        rate = 0.0 if self.clutter is None else self.clutter.rate
        if rate != self.params.clutter_rate:
            raise ConfigError(
                f"clutter rate {rate} disagrees with params.clutter_rate "
                f"{self.params.clutter_rate}"
            )
        if self.params.clutter_rate > 0 and self.clutter is None:
            raise ConfigError("positive clutter rate requires a clutter model")

    def with_theta(self, theta: float) -> "MttModel":
        return dataclasses.replace(self, params=self.params.replace(theta=theta))


@dataclass(frozen=True)
class GroundTruth:
    """Truth configuration used only by the simulator, never by estimators."""

    model: MttModel
    initial_states: np.ndarray
    static: bool = False

    def __post_init__(self):
        states = np.asarray(self.initial_states, dtype=float).ravel()
        object.__setattr__(self, "initial_states", states)
        if states.size != self.model.params.n_targets:
            raise ConfigError(
                f"{states.size} initial states for {self.model.params.n_targets} targets"
            )


# ---------------------------------------------------------------------------
# spec-level free functions


def log_f(model: SingleTargetModel, x, x_prev, theta: float):
    """Log transition density with the walk std dev as the scalar argument."""
    return model.log_transition(x, x_prev, std=theta)


def log_g(model: SingleTargetModel, y, x, theta: float):
    return model.log_obs(y, x, theta)


def score_g(model: SingleTargetModel, y, x, theta: float):
    return model.score_obs(y, x, theta)


# ---------------------------------------------------------------------------
# windowed observation family


@dataclass(frozen=True)
class WindowedGaussianModel:
    """Unit-variance Gaussian bump inside a window per target, uniform floor
    elsewhere on a compact observation interval.

    A mass ``1 - epsilon`` sits inside the window ``(c_k + shift - r,
    c_k + shift + r)`` around each (shifted) center; the remaining
    ``epsilon`` spreads uniformly over the rest of the interval.  The window
    radius ``r`` is solved from the mass constraint.  The scalar parameter
    is the common ``shift`` of all windows; ``shift_margin`` is the largest
    displacement for which the windows are guaranteed to stay inside the
    interval.
    """

    centers: tuple
    extent: tuple
    epsilon: float = 0.1
    shift_margin: float = 0.5
    radius: float = field(init=False)

    def __post_init__(self):
        centers = tuple(float(c) for c in self.centers)
        object.__setattr__(self, "centers", centers)
        if not 0.0 < self.epsilon < 1.0:
            raise ParameterDomainError(f"epsilon must be in (0, 1), got {self.epsilon}")
        lo, hi = (float(v) for v in self.extent)
        if hi <= lo:
            raise ParameterDomainError(f"empty observation interval {self.extent}")
        object.__setattr__(self, "extent", (lo, hi))
        # mass constraint: integral of N(0, 1) over (-r, r) equals 1 - epsilon
        radius = brentq(
            lambda r: (ndtr(r) - ndtr(-r)) - (1.0 - self.epsilon), 1e-12, 40.0, xtol=1e-14
        )
        object.__setattr__(self, "radius", float(radius))
        order = sorted(centers)
        for a, b in zip(order, order[1:]):
            if b - a <= 2.0 * radius:
                raise ParameterDomainError(
                    f"windows overlap: centers {a} and {b} closer than {2 * radius:.4f}"
                )
        m = self.shift_margin
        if order[0] - radius - m < lo or order[-1] + radius + m > hi:
            raise ParameterDomainError(
                "windows leave the observation interval within the shift margin"
            )

    @cached_property
    def slab_width(self) -> float:
        lo, hi = self.extent
        return (hi - lo) - 2.0 * self.radius

    @cached_property
    def log_slab_density(self) -> float:
        return math.log(self.epsilon / self.slab_width)

    @property
    def n_targets(self) -> int:
        return len(self.centers)

    def _check_shift(self, shift: float):
        if abs(shift) > self.shift_margin:
            raise ParameterDomainError(
                f"shift {shift} exceeds margin {self.shift_margin}"
            )

    def log_pdf(self, y, k: int, shift: float = 0.0):
        self._check_shift(shift)
        y = np.asarray(y, dtype=float)
        mu = self.centers[k] + shift
        inside = np.abs(y - mu) < self.radius
        return np.where(inside, -0.5 * LOG_2PI - (y - mu) ** 2 / 2.0, self.log_slab_density)

    def score_shift(self, y, k: int, shift: float = 0.0):
        """Derivative of ``log_pdf`` in the shift; zero on the uniform floor."""
        self._check_shift(shift)
        y = np.asarray(y, dtype=float)
        mu = self.centers[k] + shift
        inside = np.abs(y - mu) < self.radius
        return np.where(inside, y - mu, 0.0)

    def sample(self, k: int, shift: float, rng: np.random.Generator, size=None):
        self._check_shift(shift)
        shape = () if size is None else tuple(np.atleast_1d(size))
        mu = self.centers[k] + shift
        n = int(np.prod(shape)) if shape else 1
        out = np.empty(n)
        in_window = rng.random(n) < 1.0 - self.epsilon
        n_in = int(in_window.sum())
        if n_in:
            lo_u, hi_u = ndtr(-self.radius), ndtr(self.radius)
            out[in_window] = mu + ndtri(rng.uniform(lo_u, hi_u, n_in))
        n_out = n - n_in
        if n_out:
            lo, hi = self.extent
            wlo, whi = mu - self.radius, mu + self.radius
            left = wlo - lo
            u = rng.uniform(0.0, self.slab_width, n_out)
            out[~in_window] = np.where(u < left, lo + u, whi + (u - left))
        return out.reshape(shape) if shape else float(out[0])

    def single_target_info(self) -> float:
        """Information of one isolated target: second moment of the score.

        Integrating z^2 N(z; 0, 1) over (-r, r) by parts gives
        (1 - epsilon) - 2 r phi(r); the uniform floor has zero score.
        """
        r = self.radius
        phi_r = math.exp(-0.5 * r * r) / math.sqrt(2.0 * math.pi)
        return (1.0 - self.epsilon) - 2.0 * r * phi_r


# ---------------------------------------------------------------------------


def single_target_fisher(
    model: SingleTargetModel,
    theta_star: float,
    regime: str,
    n_samples: int,
    rng: np.random.Generator,
    static_state: float = 0.0,
    x0: float = 0.0,
    n_batches: int = 20,
) -> FisherEstimate:
    """Monte Carlo information of a single unperturbed target.

    ``regime="iid-static"`` holds the state fixed and averages squared
    observation scores; ``regime="hmm"`` simulates one long trajectory and
    averages squared conditional (prediction-error) scores, computed
    exactly by the tangent Kalman filter.
    """
    if n_samples < 2:
        raise ConfigError(f"need at least 2 samples, got {n_samples}")
    if regime == "iid-static":
        y = model.sample_obs(static_state, theta_star, rng, size=n_samples)
        sq = model.score_obs(y, static_state, theta_star) ** 2
    elif regime == "hmm":
        x = x0 + model.motion_std * np.cumsum(rng.standard_normal(n_samples))
        y = model.sample_obs(x, theta_star, rng)
        _, _, steps = kalman_loglik_score(
            y[None, :],
            np.ones((1, n_samples), dtype=bool),
            x0,
            model.motion_std**2,
            theta_star,
            kind=model.obs_kind,
            obs_const=model.obs_const,
            return_step_scores=True,
        )
        sq = steps[0] ** 2
    else:
        raise ConfigError(f"unknown regime {regime!r}")
    value = float(sq.mean())
    se = batch_means_se(sq, n_batches)
    return FisherEstimate(
        matrix=np.array([[value]]),
        std_error=np.array([[se]]),
        n_samples=n_samples,
        config={"regime": regime, "theta_star": theta_star},
    )
