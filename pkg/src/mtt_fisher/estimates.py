"""Result containers for Monte Carlo information estimates."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from .errors import MttFisherError


@dataclass(frozen=True)
class FisherEstimate:
    """Symmetric matrix estimate with Monte Carlo standard errors.

    All implemented experiments have a scalar parameter, so the matrix is
    1x1 in practice; the container keeps matrix shape for generality.
    """

    matrix: np.ndarray
    std_error: np.ndarray
    n_samples: int
    config: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        m = np.atleast_2d(np.asarray(self.matrix, dtype=float))
        se = np.atleast_2d(np.asarray(self.std_error, dtype=float))
        object.__setattr__(self, "matrix", m)
        object.__setattr__(self, "std_error", se)
        if m.shape[0] != m.shape[1]:
            raise MttFisherError(f"estimate must be square, got {m.shape}")
        if not np.allclose(m, m.T, atol=1e-12):
            raise MttFisherError("estimate matrix is not symmetric")
        if np.any(np.diag(m) < -3.0 * np.diag(se)):
            raise MttFisherError("diagonal of the estimate is negative beyond MC noise")

    @property
    def scalar(self) -> float:
        return float(self.matrix[0, 0])

    @property
    def scalar_se(self) -> float:
        return float(self.std_error[0, 0])


@dataclass(frozen=True)
class InformationLossReport:
    """Baseline-vs-perturbed information comparison with propagated errors."""

    baseline: float
    baseline_se: float
    perturbed: float
    perturbed_se: float
    spec: Any
    provenance: str  # "closed-form" | "monte-carlo"

    @property
    def loss(self) -> float:
        return self.baseline - self.perturbed

    @property
    def relative_loss(self) -> float:
        return self.loss / self.baseline

    @property
    def relative_loss_se(self) -> float:
        """Delta-method error of the relative loss."""
        b, p = self.baseline, self.perturbed
        return math.sqrt((self.perturbed_se / b) ** 2 + (p * self.baseline_se / b**2) ** 2)

    def check(self) -> None:
        tol = 3.0 * self.relative_loss_se
        if not (-tol <= self.relative_loss <= 1.0 + tol):
            raise MttFisherError(
                f"relative loss {self.relative_loss:.4f} outside [0, 1] beyond noise {tol:.4f}"
            )

    def as_dict(self) -> dict[str, Any]:
        return {
            "baseline": self.baseline,
            "baseline_se": self.baseline_se,
            "perturbed": self.perturbed,
            "perturbed_se": self.perturbed_se,
            "loss": self.loss,
            "relative_loss": self.relative_loss,
            "relative_loss_se": self.relative_loss_se,
            "alpha": None if self.spec is None else self.spec.alpha,
            "beta": None if self.spec is None else self.spec.beta,
            "provenance": self.provenance,
        }
