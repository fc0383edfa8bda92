import itertools

import numpy as np
import pytest

from dbsim.errors import (
    ConfigurationError,
    EmptyBatchError,
    InvalidStepSizeError,
)
from dbsim.sgdlab import (
    ConvexProblem,
    LogisticProblem,
    SgdConfig,
    aggregate_gradients,
    estimate_gradient_noise,
    minibatch_gradient,
    run_parallel_sgd,
    sgd_step,
    theorem1_bound,
    verify_lemma1_variance,
)


@pytest.fixture
def quad():
    return ConvexProblem.quadratic(
        dimension=3, mu=2.0, sample_noise_scale=0.5, sample_count=12, seed=3
    )


@pytest.fixture
def quad_noiseless():
    return ConvexProblem.quadratic(
        dimension=3, mu=2.0, sample_noise_scale=0.0, sample_count=12, seed=3
    )


class TestMinibatchGradient:
    def test_zero_at_optimum_without_noise(self, quad_noiseless):
        g = minibatch_gradient(quad_noiseless, quad_noiseless.optimum, [0, 3, 7])
        assert g == pytest.approx(np.zeros(3))

    def test_full_batch_is_deterministic_full_gradient(self, quad):
        x = np.array([1.0, -2.0, 0.5])
        g = minibatch_gradient(quad, x, np.arange(quad.sample_count))
        assert g == pytest.approx(quad.mu * (x - quad.optimum), abs=1e-12)

    def test_singleton_batches_average_to_full_gradient(self, quad):
        x = np.array([0.3, 0.1, -1.0])
        singles = np.mean(
            [minibatch_gradient(quad, x, [i]) for i in range(quad.sample_count)],
            axis=0,
        )
        assert singles == pytest.approx(quad.full_gradient(x), abs=1e-12)

    @pytest.mark.parametrize("m", [1, 2, 3])
    def test_unbiased_over_exhaustive_batches(self, quad, m):
        x = np.array([0.2, -0.4, 0.9])
        batches = list(itertools.combinations(range(quad.sample_count), m))
        avg = np.mean([minibatch_gradient(quad, x, list(b)) for b in batches], axis=0)
        assert avg == pytest.approx(quad.full_gradient(x), abs=1e-10)

    def test_empty_batch_rejected(self, quad):
        with pytest.raises(EmptyBatchError):
            minibatch_gradient(quad, np.zeros(3), [])


class TestAggregateGradients:
    def test_equal_sizes_modes_agree(self):
        grads = [np.array([1.0, 0.0]), np.array([3.0, 2.0])]
        uniform = aggregate_gradients(grads, [4, 4], "uniform_average")
        weighted = aggregate_gradients(grads, [4, 4], "batch_weighted")
        assert uniform == pytest.approx(weighted)

    def test_identical_gradients_collapse(self):
        g = np.array([0.5, -1.5])
        assert aggregate_gradients([g, g], [2, 9], "batch_weighted") == pytest.approx(g)

    def test_weighted_recombination_equals_union_batch(self, quad):
        x = np.array([0.7, 0.7, -0.2])
        a, b = [0, 5], [1, 2, 3, 8, 9, 11]
        grads = [minibatch_gradient(quad, x, a), minibatch_gradient(quad, x, b)]
        merged = aggregate_gradients(grads, [len(a), len(b)], "batch_weighted")
        union = minibatch_gradient(quad, x, a + b)
        assert merged == pytest.approx(union, rel=1e-12)

    def test_length_mismatch(self):
        with pytest.raises(ConfigurationError):
            aggregate_gradients([np.zeros(2)], [1, 2], "uniform_average")


class TestSgdStep:
    def cfg(self, step, momentum=0.0):
        return SgdConfig(step_size=step, n_iterations=1, momentum=momentum)

    def test_zero_gradient_is_identity(self):
        x, v = sgd_step(np.array([1.0, 1.0]), np.zeros(2), self.cfg(0.3), np.zeros(2))
        assert x == pytest.approx([1.0, 1.0])
        assert v == pytest.approx([0.0, 0.0])

    def test_plain_step(self):
        x, _ = sgd_step(np.array([2.0]), np.array([1.0]), self.cfg(0.5), np.zeros(1))
        assert x == pytest.approx([1.5])

    def test_momentum_recursion(self):
        cfg = self.cfg(0.1, momentum=0.5)
        x, v = sgd_step(np.array([0.0]), np.array([1.0]), cfg, np.zeros(1))
        assert x == pytest.approx([-0.1])
        x, v = sgd_step(x, np.array([1.0]), cfg, v)
        assert v == pytest.approx([1.5])
        assert x == pytest.approx([-0.25])


class TestTheorem1Bound:
    def test_initial_distance_at_zero(self):
        assert theorem1_bound(0, 0.1, 2.0, 7.5, 0.0) == pytest.approx(7.5)

    def test_large_j_limit_is_noise_floor(self):
        assert theorem1_bound(10_000, 0.1, 2.0, 7.5, 4.0) == pytest.approx(0.1 * 4.0 / 2.0)

    def test_hand_arithmetic(self):
        mu = 1.0
        assert theorem1_bound(3, 0.5 / mu, mu, 8.0, mu) == pytest.approx(0.5**3 * 8 + 0.5)

    @pytest.mark.parametrize("gamma", [0.0, -0.1, 0.5, 1.0])
    def test_step_size_outside_range(self, gamma):
        with pytest.raises(InvalidStepSizeError):
            theorem1_bound(1, gamma, 2.0, 1.0, 1.0)


class TestRunParallelSgd:
    def test_noiseless_full_batch_geometric_decay(self, quad_noiseless):
        mu = quad_noiseless.mu
        gamma = 0.1
        cfg = SgdConfig(step_size=gamma, n_iterations=20, seed=0)
        run = run_parallel_sgd(quad_noiseless, cfg, 1, [quad_noiseless.sample_count])
        x0 = np.ones(3)
        d0 = float(np.sum((x0 - quad_noiseless.optimum) ** 2))
        expected = [(1 - gamma * mu) ** (2 * (j + 1)) * d0 for j in range(20)]
        assert run.squared_distances == pytest.approx(expected, rel=1e-10)

    def test_noiseless_descent_is_strictly_monotone(self, quad_noiseless):
        cfg = SgdConfig(step_size=0.2, n_iterations=15, seed=1)
        run = run_parallel_sgd(quad_noiseless, cfg, 2, [4, 4])
        d = run.squared_distances
        assert all(b < a for a, b in zip(d, d[1:]))

    def test_plateau_grows_with_step_size(self):
        problem = ConvexProblem.quadratic(4, 1.0, 1.0, 512, seed=5)
        plateaus = []
        for gamma in (0.1, 0.9):
            cfg = SgdConfig(step_size=gamma, n_iterations=600, seed=2)
            run = run_parallel_sgd(problem, cfg, 1, [1])
            plateaus.append(float(np.mean(run.squared_distances[-200:])))
        assert plateaus[1] > plateaus[0]

    def test_step_size_validated_against_modulus(self, quad):
        cfg = SgdConfig(step_size=1.5 / quad.mu, n_iterations=5)
        with pytest.raises(InvalidStepSizeError):
            run_parallel_sgd(quad, cfg, 1, [4])

    def test_deterministic_given_seed(self, quad):
        cfg = SgdConfig(step_size=0.1, n_iterations=30, seed=42)
        a = run_parallel_sgd(quad, cfg, 2, [3, 3])
        b = run_parallel_sgd(quad, cfg, 2, [3, 3])
        assert a.squared_distances == pytest.approx(list(b.squared_distances), rel=0)

    def test_span_too_small_for_batch(self, quad):
        cfg = SgdConfig(step_size=0.1, n_iterations=5)
        with pytest.raises(ConfigurationError):
            run_parallel_sgd(quad, cfg, 2, [7, 7])  # spans of 6 can't fit 7


class TestGradientNoise:
    def test_zero_at_optimum_without_noise(self, quad_noiseless):
        est = estimate_gradient_noise(
            quad_noiseless, [quad_noiseless.optimum], 4, 200, seed=0
        )
        assert est == 0.0

    def test_larger_batches_never_noisier(self):
        problem = ConvexProblem.quadratic(4, 1.0, 1.0, 256, seed=9)
        x = problem.optimum + 0.1
        small = estimate_gradient_noise(problem, [x], 2, 10_000, seed=1)
        large = estimate_gradient_noise(problem, [x], 16, 10_000, seed=1)
        assert large <= small * 1.05

    def test_grows_quadratically_with_distance(self, quad_noiseless):
        mu = quad_noiseless.mu
        far = quad_noiseless.optimum + np.array([3.0, 0.0, 0.0])
        est = estimate_gradient_noise(quad_noiseless, [far], 1, 500, seed=2)
        assert est == pytest.approx(mu**2 * 9.0, rel=1e-9)

    def test_too_few_draws_rejected(self, quad):
        with pytest.raises(ConfigurationError):
            estimate_gradient_noise(quad, [quad.optimum], 1, 50)


class TestLemma1Variance:
    def test_full_batch_without_replacement_is_deterministic(self, quad):
        x = np.ones(3)
        [est] = verify_lemma1_variance(
            quad, x, [quad.sample_count], 300, seed=0, with_replacement=False
        )
        assert est.variance == pytest.approx(0.0, abs=1e-25)

    def test_iid_variance_scales_inversely_with_m(self):
        problem = ConvexProblem.quadratic(4, 1.0, 1.0, 2048, seed=11)
        x = np.ones(4) * 2.0
        ests = verify_lemma1_variance(problem, x, [8, 16], 100_000, seed=1)
        assert ests[0].variance / ests[1].variance == pytest.approx(2.0, rel=0.1)

    def test_constant_objective_has_zero_variance(self, quad_noiseless):
        x = np.ones(3)
        ests = verify_lemma1_variance(quad_noiseless, x, [1, 4, 16], 1000, seed=0)
        assert all(e.variance == pytest.approx(0.0, abs=1e-25) for e in ests)

    def test_sequence_non_increasing(self):
        problem = ConvexProblem.quadratic(4, 1.0, 1.0, 2048, seed=13)
        ests = verify_lemma1_variance(problem, np.ones(4), [1, 4, 16, 64], 50_000, seed=3)
        for a, b in zip(ests, ests[1:]):
            assert b.variance <= a.variance + 3 * np.hypot(a.std_error, b.std_error)


class TestLogisticProblem:
    @pytest.fixture
    def logit(self):
        return LogisticProblem.synthetic(dimension=4, mu=0.1, sample_count=400, seed=0)

    def test_optimum_is_stationary(self, logit):
        g = minibatch_gradient(logit, logit.optimum, np.arange(logit.sample_count))
        assert np.linalg.norm(g) < 1e-6

    def test_gap_non_negative_off_optimum(self, logit):
        assert logit.objective_gap(logit.optimum + 0.5) > 0.0

    def test_sgd_reduces_gap(self, logit):
        cfg = SgdConfig(step_size=0.5, n_iterations=400, momentum=0.0, seed=4)
        run = run_parallel_sgd(logit, cfg, 2, [16, 16])
        assert run.final_loss < logit.objective_gap(np.ones(4))
        assert run.squared_distances[-1] < run.squared_distances[0]
