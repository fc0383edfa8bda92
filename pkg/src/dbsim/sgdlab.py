"""Mini-batch SGD on synthetic strongly-convex problems.

Provides the numerical side of the project: real SGD runs whose batch sizes
either stay fixed or follow the adaptive per-epoch plans, together with the
geometric-contraction bound and empirical gradient-noise estimators needed
to check the convergence theory against measured trajectories.

The canonical test objective is a centered quadratic family
``f_i(x) = (mu/2) ||x - x_opt - eps_i||^2`` whose minimizer, modulus and
gradients are known in closed form; an l2-regularized logistic regression on
synthetic Gaussian data is available as a second strongly-convex case.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np
from scipy.optimize import minimize

from . import allocation
from .allocation import PartitionPlan
from .errors import (
    ConfigurationError,
    EmptyBatchError,
    InvalidStepSizeError,
)

AGGREGATION_MODES = ("uniform_average", "batch_weighted")


@dataclass
class ConvexProblem:
    """Centered quadratic family with known minimizer and modulus.

    Each sample carries a gaussian offset ``eps_i`` (centered so the mean
    objective is minimized exactly at ``optimum``); per-sample gradients are
    ``mu * (x - optimum - eps_i)``.
    """

    dimension: int
    mu: float
    optimum: np.ndarray
    sample_noise_scale: float
    sample_count: int
    offsets: np.ndarray = field(repr=False)

    @classmethod
    def quadratic(
        cls,
        dimension: int,
        mu: float,
        sample_noise_scale: float,
        sample_count: int,
        seed: int = 0,
        optimum: Optional[np.ndarray] = None,
    ) -> "ConvexProblem":
        if mu <= 0.0:
            raise ConfigurationError("mu must be positive")
        rng = np.random.default_rng(seed)
        opt = (
            np.zeros(dimension)
            if optimum is None
            else np.asarray(optimum, dtype=float)
        )
        if sample_noise_scale > 0.0:
            offsets = rng.normal(0.0, sample_noise_scale, (sample_count, dimension))
            offsets -= offsets.mean(axis=0)  # centering pins the minimizer
        else:
            offsets = np.zeros((sample_count, dimension))
        return cls(
            dimension=dimension,
            mu=mu,
            optimum=opt,
            sample_noise_scale=sample_noise_scale,
            sample_count=sample_count,
            offsets=offsets,
        )

    def per_sample_gradients(self, x: np.ndarray, indices) -> np.ndarray:
        return self.mu * (x - self.optimum - self.offsets[indices])

    def full_gradient(self, x: np.ndarray) -> np.ndarray:
        return self.mu * (x - self.optimum)

    def sample_values(self, x: np.ndarray, indices) -> np.ndarray:
        diffs = x - self.optimum - self.offsets[indices]
        return 0.5 * self.mu * np.sum(diffs * diffs, axis=-1)

    def objective(self, x: np.ndarray) -> float:
        return float(np.mean(self.sample_values(x, np.arange(self.sample_count))))

    def objective_gap(self, x: np.ndarray) -> float:
        return self.objective(x) - self.objective(self.optimum)


@dataclass
class LogisticProblem:
    """l2-regularized logistic regression on synthetic two-class data.

    Strongly convex with modulus equal to the regularization weight; the
    minimizer is found numerically once at construction.
    """

    dimension: int
    mu: float
    optimum: np.ndarray
    sample_count: int
    features: np.ndarray = field(repr=False)
    labels: np.ndarray = field(repr=False)  # +/- 1

    @classmethod
    def synthetic(
        cls, dimension: int, mu: float, sample_count: int, seed: int = 0
    ) -> "LogisticProblem":
        rng = np.random.default_rng(seed)
        labels = np.where(rng.random(sample_count) < 0.5, -1.0, 1.0)
        centers = labels[:, None] * np.full(dimension, 0.5)
        features = centers + rng.normal(0.0, 1.0, (sample_count, dimension))

        def loss(w):
            margins = labels * (features @ w)
            return float(
                np.mean(np.logaddexp(0.0, -margins)) + 0.5 * mu * np.dot(w, w)
            )

        def grad(w):
            margins = labels * (features @ w)
            coeff = -labels / (1.0 + np.exp(margins))
            return features.T @ coeff / sample_count + mu * w

        res = minimize(loss, np.zeros(dimension), jac=grad, method="L-BFGS-B", tol=1e-12)
        return cls(
            dimension=dimension,
            mu=mu,
            optimum=res.x,
            sample_count=sample_count,
            features=features,
            labels=labels,
        )

    def per_sample_gradients(self, x: np.ndarray, indices) -> np.ndarray:
        feats = self.features[indices]
        labs = self.labels[indices]
        margins = labs * (feats @ x)
        coeff = -labs / (1.0 + np.exp(margins))
        return coeff[:, None] * feats + self.mu * x

    def sample_values(self, x: np.ndarray, indices) -> np.ndarray:
        feats = self.features[indices]
        labs = self.labels[indices]
        return np.logaddexp(0.0, -labs * (feats @ x)) + 0.5 * self.mu * np.dot(x, x)

    def objective(self, x: np.ndarray) -> float:
        return float(np.mean(self.sample_values(x, np.arange(self.sample_count))))

    def objective_gap(self, x: np.ndarray) -> float:
        return self.objective(x) - self.objective(self.optimum)


Problem = Union[ConvexProblem, LogisticProblem]


@dataclass
class SgdConfig:
    """Hyper-parameters of one SGD run. Step size must lie in (0, 1/mu)."""

    step_size: float
    n_iterations: int
    momentum: float = 0.0
    aggregation: str = "batch_weighted"
    seed: int = 0
    initial_point: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.aggregation not in AGGREGATION_MODES:
            raise ConfigurationError(f"unknown aggregation {self.aggregation!r}")
        if not (0.0 <= self.momentum < 1.0):
            raise ConfigurationError("momentum must be in [0, 1)")
        if self.n_iterations < 1:
            raise ConfigurationError("n_iterations must be >= 1")

    def validate_step_size(self, mu: float) -> None:
        if not (0.0 < self.step_size * mu < 1.0):
            raise InvalidStepSizeError(
                f"step size {self.step_size} outside (0, {1.0 / mu})"
            )


@dataclass
class SgdTrajectory:
    """Squared distances to the optimum per iteration, plus the final gap."""

    squared_distances: np.ndarray
    final_loss: float
    bound_values: Optional[np.ndarray] = None


def minibatch_gradient(problem: Problem, x: np.ndarray, indices) -> np.ndarray:
    """Mean of per-sample gradients over a batch; unbiased for uniform draws."""
    indices = np.asarray(indices)
    if indices.size == 0:
        raise EmptyBatchError("mini-batch must contain at least one sample")
    return problem.per_sample_gradients(x, indices).mean(axis=0)


def aggregate_gradients(
    grads: Sequence[np.ndarray], batch_sizes: Sequence[int], mode: str
) -> np.ndarray:
    """Combine per-worker gradients either uniformly or by batch weight.

    The batch-weighted form recovers the exact mini-batch gradient over the
    union of disjoint per-worker batches.
    """
    if len(grads) != len(batch_sizes):
        raise ConfigurationError("gradients and batch sizes must align")
    if any(b <= 0 for b in batch_sizes):
        raise ConfigurationError("batch sizes must be positive")
    stacked = np.stack(grads)
    if mode == "uniform_average":
        return stacked.mean(axis=0)
    if mode == "batch_weighted":
        weights = np.asarray(batch_sizes, dtype=float)
        weights /= weights.sum()
        return weights @ stacked
    raise ConfigurationError(f"unknown aggregation {mode!r}")


def sgd_step(
    x: np.ndarray,
    gradient: np.ndarray,
    config: SgdConfig,
    velocity: np.ndarray,
) -> tuple[np.ndarray, np.ndarray]:
    """One (heavy-ball) SGD update; momentum 0 reduces to x - step * g."""
    new_velocity = config.momentum * velocity + gradient
    return x - config.step_size * new_velocity, new_velocity


def theorem1_bound(
    j: int, gamma: float, mu: float, initial_sq_dist: float, sigma_sq: float
) -> float:
    """Geometric contraction bound: (1 - gamma*mu)^j * d0 + gamma*sigma^2/mu."""
    if not (0.0 < gamma * mu < 1.0):
        raise InvalidStepSizeError(f"gamma*mu must be in (0, 1), got {gamma * mu}")
    if sigma_sq < 0.0 or initial_sq_dist < 0.0:
        raise ConfigurationError("distances and noise must be non-negative")
    return (1.0 - gamma * mu) ** j * initial_sq_dist + gamma * sigma_sq / mu


def estimate_gradient_noise(
    problem: Problem,
    x_set: Sequence[np.ndarray],
    batch_size: int,
    n_draws: int,
    seed: int = 0,
) -> float:
    """Empirical stand-in for the gradient-noise bound sigma^2.

    Max over probe points of the mean squared norm of the mini-batch
    gradient, with i.i.d. sample draws.
    """
    if n_draws < 100:
        raise ConfigurationError("need at least 100 draws for a usable estimate")
    rng = np.random.default_rng(seed)
    worst = 0.0
    for x in x_set:
        idx = rng.integers(0, problem.sample_count, size=(n_draws, batch_size))
        grads = problem.per_sample_gradients(np.asarray(x), idx).mean(axis=1)
        worst = max(worst, float(np.mean(np.sum(grads * grads, axis=1))))
    return worst


@dataclass(frozen=True)
class VarianceEstimate:
    batch_size: int
    variance: float
    std_error: float


def verify_lemma1_variance(
    problem: Problem,
    x: np.ndarray,
    m_values: Sequence[int],
    n_draws: int,
    seed: int = 0,
    with_replacement: bool = True,
) -> list[VarianceEstimate]:
    """Empirical variance of the mini-batch mean objective value per size m.

    By default samples are drawn with replacement so draws are i.i.d.; the
    standard error of each variance estimate comes from the fourth central
    moment. Without replacement the full batch becomes deterministic.
    """
    rng = np.random.default_rng(seed)
    values = problem.sample_values(np.asarray(x), np.arange(problem.sample_count))
    out = []
    for m in m_values:
        if with_replacement:
            idx = rng.integers(0, problem.sample_count, size=(n_draws, m))
        else:
            idx = np.argsort(
                rng.random((n_draws, problem.sample_count)), axis=1
            )[:, :m]
        means = values[idx].mean(axis=1)
        var = float(np.var(means, ddof=1))
        centered = means - means.mean()
        m4 = float(np.mean(centered**4))
        se = float(
            np.sqrt(max(m4 - var**2 * (n_draws - 3) / (n_draws - 1), 0.0) / n_draws)
        )
        out.append(VarianceEstimate(batch_size=int(m), variance=var, std_error=se))
    return out


PlanSource = Union[Sequence[int], Sequence[PartitionPlan]]


def _epoch_layout(
    plan_source: PlanSource, epoch: int, n_workers: int, sample_count: int
) -> tuple[list[int], list[tuple[int, int]]]:
    """Batch sizes and sample spans for one epoch of a parallel run."""
    if len(plan_source) == 0:
        raise ConfigurationError("plan source is empty")
    if isinstance(plan_source[0], PartitionPlan):
        plan = plan_source[min(epoch, len(plan_source) - 1)]
        if plan.n_workers != n_workers:
            raise ConfigurationError("plan worker count does not match run")
        batches = list(plan.int_batches)
        spans = allocation.spans_from_ranges(plan.ranges, sample_count)
    else:
        batches = [int(b) for b in plan_source]
        if len(batches) != n_workers:
            raise ConfigurationError("fixed batch list does not match worker count")
        ranges = allocation.partition_ranges([1] * n_workers)
        spans = allocation.spans_from_ranges(ranges, sample_count)
    if any(b < 1 for b in batches):
        raise ConfigurationError("every worker needs a positive batch size")
    return batches, spans


def run_parallel_sgd(
    problem: Problem,
    config: SgdConfig,
    n_workers: int,
    plan_source: PlanSource,
) -> SgdTrajectory:
    """Synchronous data-parallel SGD with per-epoch batch layouts.

    ``plan_source`` is either a fixed per-worker batch list (even dataset
    spans) or a sequence of partition plans applied one per epoch (the last
    plan repeats if the run outlives the sequence). Within an epoch each
    worker shuffles its span once and walks it in consecutive batches; the
    epoch ends when the slowest-provisioned worker runs out of full batches.
    """
    config.validate_step_size(problem.mu)
    rng = np.random.default_rng(config.seed)
    x = (
        np.ones(problem.dimension)
        if config.initial_point is None
        else np.asarray(config.initial_point, dtype=float).copy()
    )
    velocity = np.zeros(problem.dimension)
    sq_dists = np.empty(config.n_iterations)
    done = 0
    epoch = 0
    while done < config.n_iterations:
        batches, spans = _epoch_layout(
            plan_source, epoch, n_workers, problem.sample_count
        )
        perms = [
            start + rng.permutation(end - start) for start, end in spans
        ]
        iters = min(
            (end - start) // b for (start, end), b in zip(spans, batches)
        )
        if iters == 0:
            raise ConfigurationError("worker span too small for its batch size")
        for t in range(iters):
            grads = [
                minibatch_gradient(problem, x, perm[t * b : (t + 1) * b])
                for perm, b in zip(perms, batches)
            ]
            grad = aggregate_gradients(grads, batches, config.aggregation)
            x, velocity = sgd_step(x, grad, config, velocity)
            diff = x - problem.optimum
            sq_dists[done] = float(diff @ diff)
            done += 1
            if done == config.n_iterations:
                break
        epoch += 1
    return SgdTrajectory(
        squared_distances=sq_dists,
        final_loss=problem.objective_gap(x),
    )
