import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mtt_fisher.errors import (
    ConfigError,
    DataError,
    ModelViolationError,
    NumericalCollapseError,
    ResourceLimitError,
)
from mtt_fisher.kalman import kalman_loglik_score
from mtt_fisher.likelihood import (
    ObservationFrame,
    batch_log_perturbed_likelihood,
    brute_force_log_likelihood,
    log_joint_known_association,
    log_multi_likelihood,
    log_multi_likelihood_k1,
    log_perturbed_likelihood,
    marginal_log_likelihood_sequence,
)
from mtt_fisher.models import (
    ClutterModel,
    GaussianClutterDensity,
    GroundTruth,
    ModelParams,
    MttModel,
    SingleTargetModel,
    UniformClutterDensity,
)
from mtt_fisher.numerics import log_poisson_pmf
from mtt_fisher.permassoc import UNBOUNDED, PerturbationSpec
from mtt_fisher.simulate import simulate_sequence


def make_model(n_targets=1, detect_prob=1.0, rate=0.0, theta=1.0, clutter="gaussian", a=5.0):
    if rate > 0:
        spatial = GaussianClutterDensity(0.0, 1.5) if clutter == "gaussian" else UniformClutterDensity(a)
        cl = ClutterModel(rate=rate, spatial=spatial)
    else:
        cl = None
    return MttModel(
        target=SingleTargetModel(obs_kind="variance"),
        params=ModelParams(
            theta=theta, n_targets=n_targets, detect_prob=detect_prob, clutter_rate=rate
        ),
        clutter=cl,
    )


class TestOracleEquivalence:
    def test_fifty_random_instances(self, rng_factory):
        rng = rng_factory(50)
        checked = 0
        while checked < 50:
            k = int(rng.integers(1, 4))
            m = int(rng.integers(0, 5))
            p_d = float(rng.uniform(0.2, 1.0))
            rate = float(rng.choice([0.0, 0.7, 1.8]))
            alpha = rng.choice([1, 2, 3, UNBOUNDED])
            beta = rng.choice([0, 1, UNBOUNDED])
            model = make_model(k, p_d, rate)
            spec = PerturbationSpec(alpha, beta)
            states = rng.normal(0.0, 2.0, k)
            points = rng.normal(0.0, 2.0, m)
            fast = log_perturbed_likelihood(points, states, model, spec)
            slow = brute_force_log_likelihood(points, states, model, spec)
            if math.isinf(fast) or math.isinf(slow):
                assert fast == slow
            else:
                assert abs(fast - slow) <= 1e-10 * max(1.0, abs(slow))
            checked += 1

    def test_single_surviving_term_reduction(self):
        # one target, certain detection, no clutter, one point
        model = make_model(1, 1.0, 0.0)
        value = log_multi_likelihood([0.4], [0.1], model)
        direct = float(model.target.log_obs(0.4, 0.1, 1.0))
        assert value == pytest.approx(direct, abs=1e-12)


class TestK1ClosedForm:
    def test_empty_frame(self):
        model = make_model(1, 0.6, 1.3)
        assert log_multi_likelihood_k1([], [0.0], model) == pytest.approx(
            math.log(0.4) - 1.3
        )

    def test_certain_detection_single_point(self):
        model = make_model(1, 1.0, 0.0)
        assert log_multi_likelihood_k1([0.7], [0.2], model) == pytest.approx(
            float(model.target.log_obs(0.7, 0.2, 1.0))
        )

    def test_matches_general_evaluator(self, rng_factory):
        rng = rng_factory(51)
        model = make_model(1, 0.8, 1.1)
        for _ in range(10):
            m = int(rng.integers(0, 4))
            pts = rng.normal(0, 2, m)
            a = log_multi_likelihood_k1(pts, [0.3], model)
            b = log_multi_likelihood(pts, [0.3], model)
            assert a == pytest.approx(b, abs=1e-12)


class TestStructuralProperties:
    def test_zero_rate_cutoff(self, rng_factory):
        rng = rng_factory(52)
        model = make_model(2, 0.9, 0.0)
        states = [0.0, 1.0]
        assert log_multi_likelihood(rng.normal(0, 1, 3), states, model) == -np.inf
        assert np.isfinite(log_multi_likelihood(rng.normal(0, 1, 2), states, model))

    @given(st.integers(0, 4))
    @settings(max_examples=20, deadline=None)
    def test_permutation_invariance(self, shift):
        rng = np.random.default_rng(60 + shift)
        model = make_model(2, 0.8, 0.9)
        states = [-0.5, 0.5]
        pts = rng.normal(0, 2, 4)
        base = log_multi_likelihood(pts, states, model)
        perm = rng.permutation(pts)
        assert log_multi_likelihood(perm, states, model) == pytest.approx(base, abs=1e-12)

    def test_nan_rejected(self):
        model = make_model()
        with pytest.raises(DataError):
            log_multi_likelihood([np.nan], [0.0], model)

    def test_batch_matches_scalar_calls(self, rng_factory):
        rng = rng_factory(53)
        model = make_model(2, 0.7, 1.2)
        states = [-1.0, 1.0]
        batch = rng.normal(0, 2, (6, 3))
        spec = PerturbationSpec(2, 1)
        vec = batch_log_perturbed_likelihood(batch, states, model, spec)
        solo = [log_perturbed_likelihood(row, states, model, spec) for row in batch]
        assert np.allclose(vec, solo, atol=1e-12)

    def test_resource_caps(self, rng_factory):
        rng = rng_factory(54)
        model = make_model(1, 1.0, 1.0)
        with pytest.raises(ResourceLimitError):
            log_multi_likelihood(rng.normal(0, 1, 17), [0.0], model)
        big = make_model(25, 0.5, 0.0)
        with pytest.raises(ResourceLimitError):
            log_perturbed_likelihood(
                rng.normal(0, 1, 6), np.zeros(25), big, PerturbationSpec(2, UNBOUNDED)
            )

    def test_desk_scale_normalization(self):
        # discretized single-target law: sum over frame sizes m <= 3 of the
        # m-dimensional Riemann sums approximates total mass 1
        model = make_model(1, 0.9, 0.1, clutter="uniform", a=4.0)
        grid = np.linspace(-12.0, 12.0, 1601)
        dy = grid[1] - grid[0]
        total = math.exp(log_multi_likelihood_k1([], [0.0], model))
        lg1 = np.array([log_multi_likelihood_k1([y], [0.0], model) for y in grid])
        total += np.exp(lg1).sum() * dy
        # m = 2, 3: the two-term frame density factorizes into products of
        # one-dimensional sums, so the Riemann sum does too
        lp = model.clutter.spatial.log_pdf(grid)
        lgy = model.target.log_obs(grid, 0.0, 1.0)
        s_p = np.exp(lp).sum() * dy
        s_g = np.exp(lgy).sum() * dy
        p, rate = 0.9, 0.1
        for m in (2, 3):
            undet = (1 - p) * math.exp(log_poisson_pmf(m, rate)) * s_p**m
            det = p * math.exp(log_poisson_pmf(m - 1, rate)) * s_g * s_p ** (m - 1)
            total += undet + det
        assert total == pytest.approx(1.0, abs=1e-3)


class TestJointKnownAssociation:
    def test_k1_no_clutter_is_hmm_joint(self, rng_factory):
        rng = rng_factory(55)
        model = make_model(1, 1.0, 0.0)
        xs = 0.1 * np.cumsum(rng.standard_normal(6))
        ys = xs + rng.standard_normal(6)
        frames = [[y] for y in ys]
        value = log_joint_known_association(frames, xs[:, None], model, initial_states=[0.0])
        direct = float(model.target.log_obs(ys, xs, 1.0).sum())
        prev = np.concatenate([[0.0], xs[:-1]])
        direct += float(model.target.log_transition(xs, prev).sum())
        assert value == pytest.approx(direct, abs=1e-10)

    def test_additivity_across_targets(self, rng_factory):
        rng = rng_factory(56)
        model2 = make_model(2, 1.0, 1.4)
        m1 = make_model(1, 1.0, 0.0)
        frames = [rng.normal(0, 2, 4), rng.normal(0, 2, 2)]
        states = np.array([[-1.0, 1.0], [-1.1, 1.2]])
        total = log_joint_known_association(frames, states, model2)
        t1 = log_joint_known_association([f[:1] for f in frames], states[:, :1], m1)
        t2 = log_joint_known_association([f[1:2] for f in frames], states[:, 1:], m1)
        clutter = sum(
            float(log_poisson_pmf(len(f) - 2, 1.4))
            + float(model2.clutter.spatial.log_pdf(np.asarray(f)[2:]).sum())
            for f in frames
        )
        assert total == pytest.approx(t1 + t2 + clutter, abs=1e-10)

    def test_short_frame_rejected(self):
        model = make_model(2, 1.0, 0.0)
        with pytest.raises(ModelViolationError):
            log_joint_known_association([[0.1]], [[0.0, 1.0]], model)

    def test_relation_to_marginal_with_separated_targets(self):
        # far-separated targets: only the correct assignment survives in
        # double precision, so the marginal equals the complete-data value
        # up to the permutation-prior coefficient (M-K)!/M!; they coincide
        # for a single target
        for k, sep in [(1, 0.0), (2, 100.0), (3, 100.0)]:
            model = make_model(k, 1.0, 0.0)
            states = sep * np.arange(k)
            pts = states + 0.1
            marg = log_multi_likelihood(pts, states, model)
            joint = log_joint_known_association([pts], states[None, :], model)
            coef = math.lgamma(1) - math.lgamma(k + 1)
            assert marg == pytest.approx(joint + coef, abs=1e-10)


class TestSequenceMarginal:
    def test_static_sums_frames(self, rng_factory):
        rng = rng_factory(57)
        model = make_model(2, 0.8, 1.0)
        states = [-1.0, 1.0]
        frames = [rng.normal(0, 2, int(rng.integers(0, 5))) for _ in range(7)]
        total = marginal_log_likelihood_sequence(
            frames, model, "exact-static", static_states=states
        )
        assert total == pytest.approx(
            sum(log_multi_likelihood(f, states, model) for f in frames), abs=1e-10
        )

    def test_empty_sequence(self):
        assert marginal_log_likelihood_sequence([], make_model(), "exact-static", static_states=[0.0]) == 0.0

    def test_mc_matches_kalman(self, rng_factory):
        model = make_model(1, 1.0, 0.0)
        truth = GroundTruth(model=model, initial_states=np.zeros(1), static=False)
        sim = simulate_sequence(truth, PerturbationSpec(1, 0), 40, rng_factory(58))
        frames = [f.observed for f in sim]
        y = np.array([f.points[0] for f in frames])[None, :]
        exact, _ = kalman_loglik_score(y, np.ones_like(y, bool), 0.0, 0.01, 1.0)
        estimates = np.array(
            [
                marginal_log_likelihood_sequence(
                    frames, model, "mc", n_particles=800, rng=rng_factory(59, i)
                )
                for i in range(10)
            ]
        )
        se = estimates.std(ddof=1) / math.sqrt(estimates.size)
        assert abs(estimates.mean() - exact[0]) < 3 * se + 0.05

    def test_collapse_diagnostic(self, rng_factory):
        model = make_model(1, 1.0, 0.0)
        with pytest.raises(NumericalCollapseError, match="step"):
            marginal_log_likelihood_sequence(
                [[0.1, 0.2]], model, "mc", n_particles=500, rng=rng_factory(60)
            )

    def test_particle_floor(self, rng_factory):
        with pytest.raises(ConfigError):
            marginal_log_likelihood_sequence(
                [[0.1]], make_model(), "mc", n_particles=10, rng=rng_factory(61)
            )

    def test_frame_type_validation(self):
        with pytest.raises(DataError):
            ObservationFrame(np.array([1.0, np.inf]))
