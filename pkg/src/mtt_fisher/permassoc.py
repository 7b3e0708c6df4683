"""Combinatorics of the association model.

Permutations act on ``{0, ..., k-1}`` internally (docs use 1-based labels)
and are stored as index arrays: ``sigma[i]`` is the image of slot ``i``.
The displacement of a permutation is the number of points it moves, i.e.
the Hamming distance to the identity.  ``A(k, alpha)`` denotes the set of
permutations of ``k`` letters with displacement at most ``alpha``; masks in
``B(n, beta)`` are binary detection vectors with at most ``beta`` zeros.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterator, Sequence

import numpy as np

from .errors import ConfigError, ParameterDomainError, ResourceLimitError

#: Sentinel for "no constraint" values of alpha or beta.
UNBOUNDED = float("inf")

ENUMERATION_CAP = 10**7


def _as_limit(value) -> int | float:
    """Normalize an alpha/beta argument to an int or the UNBOUNDED sentinel."""
    if value == UNBOUNDED or value is None:
        return UNBOUNDED
    iv = int(value)
    if iv != value:
        raise ConfigError(f"constraint must be an integer or unbounded, got {value!r}")
    return iv


@dataclass(frozen=True)
class PerturbationSpec:
    """Knobs of the perturbed observation model.

    ``alpha`` bounds how many points the association permutation may move
    (``alpha=1`` pins it to the identity); ``beta`` bounds the number of
    missed detections per frame (``beta=0`` forces full detection).
    """

    alpha: int | float = 1
    beta: int | float = 0

    def __post_init__(self):
        object.__setattr__(self, "alpha", _as_limit(self.alpha))
        object.__setattr__(self, "beta", _as_limit(self.beta))
        if self.alpha < 1:
            raise ConfigError(f"alpha must be >= 1, got {self.alpha}")
        if self.beta < 0:
            raise ConfigError(f"beta must be >= 0, got {self.beta}")

    @property
    def is_unperturbed(self) -> bool:
        return self.alpha == 1 and self.beta == 0


@dataclass(frozen=True)
class ConstrainedPermutation:
    """A permutation together with its cached displacement."""

    mapping: tuple[int, ...]
    displacement: int = field(init=False)

    def __post_init__(self):
        k = len(self.mapping)
        if sorted(self.mapping) != list(range(k)):
            raise ConfigError(f"not a bijection on 0..{k - 1}: {self.mapping}")
        moved = sum(1 for i, j in enumerate(self.mapping) if i != j)
        object.__setattr__(self, "displacement", moved)

    def __len__(self) -> int:
        return len(self.mapping)

    def as_array(self) -> np.ndarray:
        return np.asarray(self.mapping, dtype=np.intp)

    @staticmethod
    def identity(k: int) -> "ConstrainedPermutation":
        return ConstrainedPermutation(tuple(range(k)))


@dataclass(frozen=True)
class DetectionMask:
    """Binary detection vector; ``bits[i] == 1`` iff target i is detected."""

    bits: tuple[int, ...]

    def __post_init__(self):
        if any(b not in (0, 1) for b in self.bits):
            raise ConfigError(f"mask bits must be 0/1: {self.bits}")

    @property
    def detected_count(self) -> int:
        return sum(self.bits)

    def detected_indices(self) -> tuple[int, ...]:
        """Indices of detected targets in increasing order.

        Position ``i`` of the result is the target producing the i-th
        retained observation slot, matching the mask-then-concatenate
        assembly of a frame.
        """
        return tuple(i for i, b in enumerate(self.bits) if b)

    def as_array(self) -> np.ndarray:
        return np.asarray(self.bits, dtype=np.int8)


def hamming_distance(sigma: Sequence[int], sigma_prime: Sequence[int]) -> int:
    """Number of points moved by composing one permutation with the other's inverse.

    Equals ``|{j : sigma[j] != sigma_prime[j]}|``; symmetric and zero iff equal.
    """
    a = _mapping_of(sigma)
    b = _mapping_of(sigma_prime)
    if len(a) != len(b):
        raise ConfigError(f"size mismatch: {len(a)} vs {len(b)}")
    return sum(1 for x, y in zip(a, b) if x != y)


def _mapping_of(sigma) -> tuple[int, ...]:
    if isinstance(sigma, ConstrainedPermutation):
        return sigma.mapping
    return tuple(int(i) for i in sigma)


@lru_cache(maxsize=None)
def subfactorial(i: int) -> int:
    """Number of derangements of ``i`` letters (exact integer)."""
    if i < 0:
        raise ParameterDomainError(f"subfactorial undefined for {i}")
    if i == 0:
        return 1
    if i == 1:
        return 0
    return (i - 1) * (subfactorial(i - 1) + subfactorial(i - 2))


def count_constrained(k: int, alpha: int | float) -> int:
    """Cardinality of ``A(k, alpha)``: sum of C(k, i) * subfactorial(i), i <= alpha.

    Exact arbitrary-precision integer for every ``k``; equals ``k!`` once
    ``alpha >= k``.
    """
    if k < 0:
        raise ParameterDomainError(f"k must be >= 0, got {k}")
    alpha = _as_limit(alpha)
    top = k if alpha == UNBOUNDED else min(int(alpha), k)
    return sum(math.comb(k, i) * subfactorial(i) for i in range(top + 1))


def _derangements(points: tuple[int, ...]) -> Iterator[tuple[tuple[int, int], ...]]:
    """Yield fixed-point-free rearrangements of ``points`` as (src, dst) pairs."""
    for perm in itertools.permutations(points):
        if all(p != q for p, q in zip(points, perm)):
            yield tuple(zip(points, perm))


def enumerate_constrained(
    k: int, alpha: int | float, cap: int = ENUMERATION_CAP
) -> Iterator[ConstrainedPermutation]:
    """Yield every element of ``A(k, alpha)`` exactly once.

    Enumerates by displacement class: choose the moved subset, then a
    derangement of it.  Raises ResourceLimitError when the set is larger
    than ``cap`` (use :func:`sample_uniform_constrained` instead).
    """
    total = count_constrained(k, alpha)
    if total > cap:
        raise ResourceLimitError(
            f"A({k}, {alpha}) has {total} elements (> cap {cap}); "
            "use sample_uniform_constrained"
        )
    alpha = _as_limit(alpha)
    top = k if alpha == UNBOUNDED else min(int(alpha), k)
    for i in range(top + 1):
        if subfactorial(i) == 0 and i > 0:
            continue
        for subset in itertools.combinations(range(k), i):
            for moves in _derangements(subset):
                mapping = list(range(k))
                for src, dst in moves:
                    mapping[src] = dst
                yield ConstrainedPermutation(tuple(mapping))


@lru_cache(maxsize=None)
def _displacement_class_cdf(k: int, top: int) -> np.ndarray:
    weights = [math.comb(k, i) * subfactorial(i) for i in range(top + 1)]
    total = sum(weights)
    return np.cumsum([w / total for w in weights])


def sample_uniform_constrained(
    k: int, alpha: int | float, rng: np.random.Generator
) -> ConstrainedPermutation:
    """Draw uniformly from ``A(k, alpha)``.

    Stratified and exact: pick the displacement class i with probability
    C(k, i) * subfactorial(i) / |A(k, alpha)|, then a uniform i-subset of
    moved points, then a uniform derangement of that subset (rejection from
    uniform permutations of the subset, acceptance rate ~ 1/e).
    """
    if k < 0:
        raise ParameterDomainError(f"k must be >= 0, got {k}")
    alpha = _as_limit(alpha)
    top = k if alpha == UNBOUNDED else min(int(alpha), k)
    cdf = _displacement_class_cdf(k, top)
    i = int(np.searchsorted(cdf, rng.random(), side="right"))
    i = min(i, top)
    mapping = list(range(k))
    if i > 0:
        subset = np.sort(rng.choice(k, size=i, replace=False))
        while True:
            dest = rng.permutation(subset)
            if np.all(dest != subset):
                break
        for src, dst in zip(subset, dest):
            mapping[int(src)] = int(dst)
    return ConstrainedPermutation(tuple(mapping))


class DetectionMaskLaw:
    """Distribution of the detection mask restricted to at most ``beta`` misses.

    The pmf is proportional to ``p_d^|d| (1-p_d)^(n-|d|)`` on the masks with
    ``n - |d| <= beta``, so it depends on the bits only through their sum.
    """

    def __init__(self, n_targets: int, detect_prob: float, beta: int | float):
        if not 0 < detect_prob <= 1:
            raise ParameterDomainError(f"detect_prob must be in (0, 1], got {detect_prob}")
        if n_targets < 1:
            raise ParameterDomainError(f"n_targets must be >= 1, got {n_targets}")
        beta = _as_limit(beta)
        if beta < 0:
            raise ParameterDomainError(f"beta must be >= 0, got {beta}")
        self.n_targets = int(n_targets)
        self.detect_prob = float(detect_prob)
        # beta > n_targets behaves as "unconstrained misses"
        self.max_misses = n_targets if beta == UNBOUNDED else min(int(beta), n_targets)
        self.min_detected = self.n_targets - self.max_misses
        p, q, n = self.detect_prob, 1.0 - self.detect_prob, self.n_targets
        self._class_weights = np.array(
            [
                math.comb(n, m) * p**m * q ** (n - m) if m >= self.min_detected else 0.0
                for m in range(n + 1)
            ]
        )
        self.normalizer = float(self._class_weights.sum())
        self._class_cdf = np.cumsum(self._class_weights / self.normalizer)

    def log_pmf(self, mask: DetectionMask | Sequence[int]) -> float:
        bits = mask.bits if isinstance(mask, DetectionMask) else tuple(mask)
        if len(bits) != self.n_targets:
            raise ConfigError(f"mask length {len(bits)} != {self.n_targets}")
        m = sum(bits)
        if m < self.min_detected:
            return -math.inf
        p, q = self.detect_prob, 1.0 - self.detect_prob
        if q == 0.0:
            return 0.0 if m == self.n_targets else -math.inf
        return m * math.log(p) + (self.n_targets - m) * math.log(q) - math.log(self.normalizer)

    def pmf(self, mask: DetectionMask | Sequence[int]) -> float:
        return math.exp(self.log_pmf(mask))

    def detected_count_probs(self) -> np.ndarray:
        """Probability of each detected count 0..n (zero below the floor)."""
        return self._class_weights / self.normalizer

    def sample(self, rng: np.random.Generator) -> DetectionMask:
        cdf = self._class_cdf
        m = min(int(np.searchsorted(cdf, rng.random(), side="right")), self.n_targets)
        bits = [0] * self.n_targets
        if m == self.n_targets:
            bits = [1] * self.n_targets
        else:
            for i in rng.choice(self.n_targets, size=m, replace=False):
                bits[int(i)] = 1
        return DetectionMask(tuple(bits))

    def support(self) -> Iterator[DetectionMask]:
        for bits in itertools.product((0, 1), repeat=self.n_targets):
            if self.n_targets - sum(bits) <= self.max_misses:
                yield DetectionMask(bits)


def detection_mask_law(n_targets: int, detect_prob: float, beta: int | float) -> DetectionMaskLaw:
    """Construct the restricted detection-mask distribution."""
    return DetectionMaskLaw(n_targets, detect_prob, beta)
