"""Monte-Carlo verification of the convergence theory.

Three checks, each returning a small result record with measured margins:

* the geometric contraction bound on mean squared distance to the optimum,
* monotonicity of the mini-batch mean variance in the batch size,
* equivalence of fixed-even and adaptively-planned batch schedules under
  batch-weighted aggregation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import cluster, sgdlab
from .errors import ConfigurationError, InvalidStepSizeError
from .sgdlab import ConvexProblem, SgdConfig


@dataclass
class BoundCheckResult:
    gamma: float
    passed: bool
    max_excess_se: float  # largest (mean - bound) / se over the trajectory
    means: np.ndarray
    std_errors: np.ndarray
    bounds: np.ndarray
    sigma_sq: float

    def summary(self) -> dict:
        return {
            "check": "contraction_bound",
            "gamma": self.gamma,
            "passed": bool(self.passed),
            "max_excess_se": float(self.max_excess_se),
            "sigma_sq": float(self.sigma_sq),
        }


def check_theorem1_bound(
    problem: ConvexProblem,
    gamma: float,
    x0: np.ndarray,
    n_seeds: int = 1000,
    n_iterations: int = 200,
    noise_draws: int = 2000,
    seed: int = 0,
) -> BoundCheckResult:
    """Mean squared distance over many seeded runs vs the contraction bound.

    Runs plain single-sample SGD (the setting of the bound) vectorized across
    seeds; the noise level sigma^2 is estimated empirically over probe points
    taken from the region the trajectories actually visit.
    """
    if not (0.0 < gamma * problem.mu < 1.0):
        raise InvalidStepSizeError(f"gamma*mu must be in (0, 1), got {gamma * problem.mu}")
    rng = np.random.default_rng(seed)
    x0 = np.asarray(x0, dtype=float)
    X = np.tile(x0, (n_seeds, 1))
    sq = np.empty((n_iterations + 1, 2))  # mean, se per iteration (incl. j=0)
    d0 = float(np.sum((x0 - problem.optimum) ** 2))
    sq[0] = (d0, 0.0)
    probe_points = [x0.copy()]
    for j in range(1, n_iterations + 1):
        idx = rng.integers(0, problem.sample_count, size=n_seeds)
        X = X - gamma * problem.mu * (X - problem.optimum - problem.offsets[idx])
        dists = np.sum((X - problem.optimum) ** 2, axis=1)
        sq[j] = (dists.mean(), dists.std(ddof=1) / np.sqrt(n_seeds))
        if j in (1, 2, 5, 10, 25, 50, 100, n_iterations):
            probe_points.append(X.mean(axis=0))
    sigma_sq = sgdlab.estimate_gradient_noise(
        problem, probe_points, batch_size=1, n_draws=noise_draws, seed=seed + 1
    )
    bounds = np.array(
        [
            sgdlab.theorem1_bound(j, gamma, problem.mu, d0, sigma_sq)
            for j in range(n_iterations + 1)
        ]
    )
    slack = sq[:, 0] - (bounds + 3.0 * sq[:, 1])
    with np.errstate(divide="ignore", invalid="ignore"):
        excess = np.where(sq[:, 1] > 0, (sq[:, 0] - bounds) / sq[:, 1], 0.0)
    return BoundCheckResult(
        gamma=gamma,
        passed=bool(np.all(slack <= 0.0)),
        max_excess_se=float(np.max(excess)),
        means=sq[:, 0],
        std_errors=sq[:, 1],
        bounds=bounds,
        sigma_sq=sigma_sq,
    )


@dataclass
class VarianceCheckResult:
    m_values: list[int]
    variances: list[float]
    std_errors: list[float]
    monotone: bool
    ratios: list[float]  # var(m_i) / var(m_{i+1})

    @property
    def passed(self) -> bool:
        return self.monotone

    def summary(self) -> dict:
        return {
            "check": "batch_variance_monotonicity",
            "m_values": self.m_values,
            "variances": self.variances,
            "ratios": self.ratios,
            "passed": bool(self.passed),
        }


def check_lemma1(
    problem,
    x: np.ndarray,
    m_values=(1, 4, 16, 64),
    n_draws: int = 100_000,
    seed: int = 0,
) -> VarianceCheckResult:
    """Variance of the mini-batch mean objective is non-increasing in m."""
    estimates = sgdlab.verify_lemma1_variance(problem, x, list(m_values), n_draws, seed)
    monotone = all(
        b.variance
        <= a.variance + 3.0 * float(np.hypot(a.std_error, b.std_error))
        for a, b in zip(estimates, estimates[1:])
    )
    ratios = [
        a.variance / b.variance if b.variance > 0 else float("inf")
        for a, b in zip(estimates, estimates[1:])
    ]
    return VarianceCheckResult(
        m_values=[e.batch_size for e in estimates],
        variances=[e.variance for e in estimates],
        std_errors=[e.std_error for e in estimates],
        monotone=monotone,
        ratios=ratios,
    )


@dataclass
class EquivalenceCheckResult:
    final_gap_fixed: float
    final_gap_dynamic: float
    relative_gap_diff: float
    max_trajectory_z: float
    passed: bool

    def summary(self) -> dict:
        return {
            "check": "dynamic_vs_fixed_equivalence",
            "final_gap_fixed": self.final_gap_fixed,
            "final_gap_dynamic": self.final_gap_dynamic,
            "relative_gap_diff": self.relative_gap_diff,
            "max_trajectory_z": self.max_trajectory_z,
            "passed": bool(self.passed),
        }


def adaptive_plan_stream(
    n_workers: int,
    total_budget: int,
    dataset_size: int,
    n_epochs: int,
    cost_spread: float = 2.0,
) -> list:
    """Partition plans produced by the adaptive scheduler on a synthetic
    heterogeneous cluster, for driving unequal-batch SGD runs."""
    profiles = [
        cluster.WorkerProfile(
            worker_id=i,
            base_cost=1e-4 * cost_spread ** (i / max(n_workers - 1, 1)),
        )
        for i in range(n_workers)
    ]
    config = cluster.StrategyConfig(kind="dbs", total_budget=total_budget)
    stats = cluster.run_training(profiles, config, dataset_size, n_epochs)
    return [s.plan for s in stats]


def check_dbs_equivalence(
    problem: ConvexProblem,
    n_workers: int = 4,
    total_budget: int = 64,
    n_seeds: int = 100,
    n_iterations: int = 100,
    step_size: float = 0.02,
    momentum: float = 0.5,
    gap_tolerance: float = 0.02,
    seed: int = 0,
) -> EquivalenceCheckResult:
    """Fixed-even vs adaptively-planned batch schedules, same total budget.

    Batch-weighted aggregation makes the two updates identical in
    expectation; the check compares seed-averaged trajectories and final
    optimality gaps.
    """
    if total_budget % n_workers != 0:
        raise ConfigurationError("budget must divide evenly for the fixed arm")
    fixed = [total_budget // n_workers] * n_workers
    epochs_needed = max(
        2, n_iterations // max(problem.sample_count // total_budget, 1) + 2
    )
    plans = adaptive_plan_stream(
        n_workers, total_budget, problem.sample_count, epochs_needed
    )
    traj_f = np.empty((n_seeds, n_iterations))
    traj_d = np.empty((n_seeds, n_iterations))
    gaps_f = np.empty(n_seeds)
    gaps_d = np.empty(n_seeds)
    for s in range(n_seeds):
        cfg = SgdConfig(
            step_size=step_size,
            n_iterations=n_iterations,
            momentum=momentum,
            aggregation="batch_weighted",
            seed=seed + s,
        )
        run_f = sgdlab.run_parallel_sgd(problem, cfg, n_workers, fixed)
        run_d = sgdlab.run_parallel_sgd(problem, cfg, n_workers, plans)
        traj_f[s] = run_f.squared_distances
        traj_d[s] = run_d.squared_distances
        gaps_f[s] = run_f.final_loss
        gaps_d[s] = run_d.final_loss
    mean_f, mean_d = traj_f.mean(axis=0), traj_d.mean(axis=0)
    se = np.sqrt(
        traj_f.var(axis=0, ddof=1) / n_seeds + traj_d.var(axis=0, ddof=1) / n_seeds
    )
    with np.errstate(divide="ignore", invalid="ignore"):
        z = np.where(se > 0, np.abs(mean_f - mean_d) / se, 0.0)
    gap_f, gap_d = float(gaps_f.mean()), float(gaps_d.mean())
    rel = abs(gap_f - gap_d) / gap_f if gap_f > 0 else 0.0
    passed = rel <= gap_tolerance and bool(np.all(z <= 3.0))
    return EquivalenceCheckResult(
        final_gap_fixed=gap_f,
        final_gap_dynamic=gap_d,
        relative_gap_diff=float(rel),
        max_trajectory_z=float(np.max(z)),
        passed=passed,
    )
