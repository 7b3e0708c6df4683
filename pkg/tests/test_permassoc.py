import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.stats import chisquare

from mtt_fisher.errors import ConfigError, ResourceLimitError
from mtt_fisher.permassoc import (
    UNBOUNDED,
    ConstrainedPermutation,
    DetectionMask,
    PerturbationSpec,
    count_constrained,
    detection_mask_law,
    enumerate_constrained,
    hamming_distance,
    sample_uniform_constrained,
    subfactorial,
)


def brute_constrained(k, alpha):
    out = set()
    ident = tuple(range(k))
    for p in itertools.permutations(range(k)):
        if hamming_distance(ident, p) <= alpha:
            out.add(p)
    return out


class TestHamming:
    def test_worked_example(self):
        # images written 1-based: (1,5,2,4,3) vs (1,3,5,4,2)
        sigma = tuple(i - 1 for i in (1, 5, 2, 4, 3))
        sigma_prime = tuple(i - 1 for i in (1, 3, 5, 4, 2))
        assert hamming_distance(sigma, sigma_prime) == 3

    def test_identity_case(self):
        p = (2, 0, 1, 3)
        assert hamming_distance(p, p) == 0

    def test_transpositions_move_two_points(self):
        ident = tuple(range(5))
        for i, j in itertools.combinations(range(5), 2):
            swapped = list(ident)
            swapped[i], swapped[j] = swapped[j], swapped[i]
            assert hamming_distance(ident, swapped) == 2

    @given(st.permutations(list(range(6))), st.permutations(list(range(6))))
    @settings(max_examples=50, deadline=None)
    def test_symmetric_and_separating(self, a, b):
        d = hamming_distance(a, b)
        assert d == hamming_distance(b, a)
        assert (d == 0) == (tuple(a) == tuple(b))
        assert d != 1  # permutations cannot move exactly one point

    def test_size_mismatch(self):
        with pytest.raises(ConfigError):
            hamming_distance((0, 1), (0, 1, 2))


class TestSubfactorial:
    def test_base_cases(self):
        assert subfactorial(0) == 1
        assert subfactorial(1) == 0

    def test_three_letters(self):
        # enumerated: the two 3-cycles are the only derangements of 3 letters
        derangements = [
            p
            for p in itertools.permutations(range(3))
            if all(i != p[i] for i in range(3))
        ]
        assert subfactorial(3) == len(derangements) == 2

    @pytest.mark.parametrize("n", range(11))
    def test_binomial_identity(self, n):
        assert sum(math.comb(n, i) * subfactorial(n - i) for i in range(n + 1)) == math.factorial(n)


class TestCountConstrained:
    @pytest.mark.parametrize("k", [1, 3, 6, 9])
    def test_degenerate_alphas(self, k):
        assert count_constrained(k, 0) == 1
        assert count_constrained(k, 1) == 1

    @pytest.mark.parametrize("k", range(9))
    def test_full_group(self, k):
        assert count_constrained(k, k) == math.factorial(k)
        assert count_constrained(k, UNBOUNDED) == math.factorial(k)

    def test_small_case(self):
        assert count_constrained(3, 2) == 4

    @pytest.mark.parametrize("k", range(1, 8))
    def test_against_brute_force(self, k):
        for alpha in range(k + 2):
            assert count_constrained(k, alpha) == len(brute_constrained(k, alpha))


class TestEnumerate:
    def test_alpha_one_is_identity_only(self):
        perms = list(enumerate_constrained(3, 1))
        assert [p.mapping for p in perms] == [(0, 1, 2)]

    def test_full_group_of_three(self):
        assert len(list(enumerate_constrained(3, 3))) == 6

    def test_four_letters_alpha_two(self):
        perms = list(enumerate_constrained(4, 2))
        assert len(perms) == 7  # identity plus the six transpositions

    @pytest.mark.parametrize("k", range(8))
    def test_set_equality_with_brute_force(self, k):
        for alpha in list(range(k + 1)) + [UNBOUNDED]:
            got = {p.mapping for p in enumerate_constrained(k, alpha)}
            want = brute_constrained(k, k if alpha == UNBOUNDED else alpha)
            assert got == want
            assert len(got) == count_constrained(k, alpha)

    def test_cap(self):
        with pytest.raises(ResourceLimitError, match="sample_uniform_constrained"):
            list(enumerate_constrained(12, UNBOUNDED, cap=10**6))

    def test_displacement_cached_and_never_one(self):
        for p in enumerate_constrained(5, 3):
            moved = sum(1 for i, j in enumerate(p.mapping) if i != j)
            assert p.displacement == moved
            assert p.displacement != 1

    def test_bijection_validation(self):
        with pytest.raises(ConfigError):
            ConstrainedPermutation((0, 0, 2))


class TestUniformSampler:
    def test_alpha_one_always_identity(self, rng_factory):
        rng = rng_factory(1)
        for _ in range(100):
            assert sample_uniform_constrained(6, 1, rng).displacement == 0

    def test_support_respected(self, rng_factory):
        rng = rng_factory(2)
        for _ in range(500):
            assert sample_uniform_constrained(5, 2, rng).displacement <= 2

    @pytest.mark.parametrize("k,alpha,draws", [(4, 2, 100_000), (5, 3, 100_000), (5, 5, 120_000)])
    def test_uniformity_chi_square(self, k, alpha, draws, rng_factory):
        rng = rng_factory(3, k, alpha)
        support = list(enumerate_constrained(k, alpha))
        index = {p.mapping: i for i, p in enumerate(support)}
        counts = np.zeros(len(support))
        for _ in range(draws):
            counts[index[sample_uniform_constrained(k, alpha, rng).mapping]] += 1
        assert chisquare(counts).pvalue > 0.01

    def test_full_group_frequencies(self, rng_factory):
        rng = rng_factory(4)
        draws = 600_000
        counts = np.zeros(6)
        support = list(enumerate_constrained(3, 3))
        index = {p.mapping: i for i, p in enumerate(support)}
        for _ in range(draws):
            counts[index[sample_uniform_constrained(3, 3, rng).mapping]] += 1
        freqs = counts / draws
        assert np.all(np.abs(freqs - 1 / 6) < 0.003)


class TestDetectionMaskLaw:
    def test_bernoulli_product(self):
        law = detection_mask_law(2, 0.7, UNBOUNDED)
        assert law.pmf((1, 1)) == pytest.approx(0.49)
        assert law.pmf((1, 0)) == pytest.approx(0.21)
        assert law.pmf((0, 1)) == pytest.approx(0.21)
        assert law.pmf((0, 0)) == pytest.approx(0.09)

    def test_beta_zero_point_mass(self, rng_factory):
        law = detection_mask_law(4, 0.6, 0)
        assert law.pmf((1, 1, 1, 1)) == pytest.approx(1.0)
        rng = rng_factory(5)
        for _ in range(50):
            assert law.sample(rng).bits == (1, 1, 1, 1)

    def test_restricted_uniform(self):
        # with p = 1/2 all admissible masks weigh the same
        law = detection_mask_law(3, 0.5, 1)
        admissible = [m for m in law.support()]
        assert len(admissible) == 4
        for m in admissible:
            assert law.pmf(m) == pytest.approx(0.25)
        assert all(m.detected_count >= 2 for m in admissible)

    @pytest.mark.parametrize("beta", [0, 1, 2, 5, UNBOUNDED])
    def test_pmf_sums_to_one(self, beta):
        law = detection_mask_law(5, 0.37, beta)
        total = sum(law.pmf(m) for m in law.support())
        assert abs(total - 1.0) < 1e-12

    @given(st.integers(1, 6), st.floats(0.05, 0.95), st.integers(0, 6))
    @settings(max_examples=40, deadline=None)
    def test_exchangeability(self, k, p, beta):
        law = detection_mask_law(k, p, beta)
        by_count = {}
        for m in law.support():
            by_count.setdefault(m.detected_count, set()).add(law.pmf(m))
        for values in by_count.values():
            assert max(values) - min(values) < 1e-12

    def test_beta_above_k_means_unbounded(self):
        a = detection_mask_law(3, 0.4, 7)
        b = detection_mask_law(3, 0.4, UNBOUNDED)
        assert a.max_misses == b.max_misses == 3

    def test_detection_prob_one(self):
        law = detection_mask_law(3, 1.0, UNBOUNDED)
        assert law.pmf((1, 1, 1)) == pytest.approx(1.0)
        assert law.pmf((1, 0, 1)) == 0.0


class TestPerturbationSpec:
    def test_unperturbed_pair(self):
        assert PerturbationSpec(1, 0).is_unperturbed
        assert not PerturbationSpec(2, 0).is_unperturbed
        assert not PerturbationSpec(1, 1).is_unperturbed

    def test_validation(self):
        with pytest.raises(ConfigError):
            PerturbationSpec(0, 0)
        with pytest.raises(ConfigError):
            PerturbationSpec(1, -1)

    def test_unbounded_sentinel(self):
        spec = PerturbationSpec(UNBOUNDED, UNBOUNDED)
        assert spec.alpha == UNBOUNDED and spec.beta == UNBOUNDED
