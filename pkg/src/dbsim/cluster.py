"""Deterministic epoch-level simulation of synchronous training on a cluster.

Workers are modeled by a linear timing law (seconds per sample plus a per
iteration overhead) with optional disturbance events that add flat seconds
per epoch or multiply the per-sample cost. Strategies differ only in how
often they synchronize and in whether the dataset partition adapts between
epochs.

Per epoch the simulator reports compute time, waiting time, synchronization
time and the wall time `max(compute) + sync`.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Optional, Sequence

from . import allocation
from .allocation import PartitionPlan
from .errors import ConfigurationError

STRATEGY_KINDS = ("fixed_ssgd", "model_averaging", "one_shot", "dbs")


@dataclass(frozen=True)
class DisturbanceEvent:
    """A background task stealing capacity from one worker.

    Exactly one of ``extra_epoch_seconds`` (flat seconds added to every
    affected epoch) or ``cost_multiplier`` (factor on the per-sample cost)
    must be set. ``end_epoch=None`` means the disturbance never stops.
    """

    start_epoch: int
    end_epoch: Optional[int] = None
    extra_epoch_seconds: Optional[float] = None
    cost_multiplier: Optional[float] = None

    def __post_init__(self):
        if (self.extra_epoch_seconds is None) == (self.cost_multiplier is None):
            raise ConfigurationError(
                "disturbance needs exactly one of extra_epoch_seconds/cost_multiplier"
            )
        if self.start_epoch < 0:
            raise ConfigurationError("disturbance start_epoch must be >= 0")
        if self.end_epoch is not None and self.end_epoch <= self.start_epoch:
            raise ConfigurationError("disturbance end_epoch must exceed start_epoch")
        if self.extra_epoch_seconds is not None and self.extra_epoch_seconds < 0:
            raise ConfigurationError("extra_epoch_seconds must be >= 0")
        if self.cost_multiplier is not None and self.cost_multiplier < 1.0:
            raise ConfigurationError("cost_multiplier must be >= 1")

    def active(self, epoch: int) -> bool:
        return self.start_epoch <= epoch and (
            self.end_epoch is None or epoch < self.end_epoch
        )


@dataclass(frozen=True)
class WorkerProfile:
    """Per-sample compute cost curve and disturbance schedule of one worker."""

    worker_id: int
    base_cost: float  # seconds per sample
    per_iteration_overhead: float = 0.0
    disturbances: tuple[DisturbanceEvent, ...] = ()

    def __post_init__(self):
        if self.base_cost <= 0.0:
            raise ConfigurationError("base_cost must be positive")
        if self.per_iteration_overhead < 0.0:
            raise ConfigurationError("per_iteration_overhead must be >= 0")
        events = sorted(self.disturbances, key=lambda d: d.start_epoch)
        for a, b in zip(events, events[1:]):
            if a.end_epoch is None or a.end_epoch > b.start_epoch:
                raise ConfigurationError(
                    f"worker {self.worker_id} has overlapping disturbances"
                )
        object.__setattr__(self, "disturbances", tuple(events))


@dataclass(frozen=True)
class StrategyConfig:
    """Which synchronization strategy to simulate and its cost model.

    ``sync_interval`` only matters for model averaging; one-shot synchronizes
    once at the very end regardless. ``perf_smoothing`` is an optional
    exponential-moving-average factor on the throughput estimates used by the
    adaptive strategy (0 disables it, matching plain previous-epoch
    estimation).
    """

    kind: str
    total_budget: int
    sync_interval: int = 1
    sync_cost_per_round: float = 0.001
    sync_cost_per_worker: float = 0.00025
    perf_smoothing: float = 0.0

    def __post_init__(self):
        if self.kind not in STRATEGY_KINDS:
            raise ConfigurationError(f"unknown strategy kind {self.kind!r}")
        if self.sync_interval < 1:
            raise ConfigurationError("sync_interval must be >= 1")
        if self.total_budget < 1:
            raise ConfigurationError("total_budget must be >= 1")
        if not (0.0 <= self.perf_smoothing < 1.0):
            raise ConfigurationError("perf_smoothing must be in [0, 1)")


@dataclass(frozen=True)
class EpochStats:
    """Timing breakdown of one simulated epoch."""

    epoch: int
    per_worker_gpu: tuple[float, ...]
    per_worker_wait: tuple[float, ...]
    sync_time: float
    epoch_wall_time: float
    plan: PartitionPlan


def effective_cost(profile: WorkerProfile, epoch: int) -> float:
    """Per-sample cost with any active multiplicative disturbances applied."""
    cost = profile.base_cost
    for d in profile.disturbances:
        if d.cost_multiplier is not None and d.active(epoch):
            cost *= d.cost_multiplier
    return cost


def epoch_gpu_time(
    profile: WorkerProfile, samples_assigned: int, iterations: int, epoch: int
) -> float:
    """Compute seconds one worker spends on its share of an epoch."""
    if samples_assigned < 0 or iterations < 0:
        raise ConfigurationError("samples and iterations must be >= 0")
    t = (
        effective_cost(profile, epoch) * samples_assigned
        + profile.per_iteration_overhead * iterations
    )
    for d in profile.disturbances:
        if d.extra_epoch_seconds is not None and d.active(epoch):
            t += d.extra_epoch_seconds
    return t


def sync_time_for_epoch(
    config: StrategyConfig, n_workers: int, sync_rounds_this_epoch: int
) -> float:
    """Affine synchronization cost: rounds x (fixed + per-worker term)."""
    if sync_rounds_this_epoch < 0:
        raise ConfigurationError("sync rounds must be >= 0")
    return sync_rounds_this_epoch * (
        config.sync_cost_per_round + config.sync_cost_per_worker * n_workers
    )


def iterations_for_plan(plan: PartitionPlan) -> int:
    """Global iteration count: the minimum over workers of span // batch.

    All workers must synchronize the same number of times; leftover samples
    at the tail of a span are dropped for the epoch.
    """
    counts = [
        span // batch
        for batch, span in zip(plan.int_batches, plan.span_sizes())
        if batch > 0
    ]
    return min(counts) if counts else 0


def sync_rounds_for_epoch(
    config: StrategyConfig, iterations: int, is_final_epoch: bool
) -> int:
    """How many synchronization rounds a strategy performs in one epoch.

    The adaptive strategy pays one extra round per epoch for gathering the
    throughput estimates.
    """
    if config.kind == "fixed_ssgd":
        return iterations
    if config.kind == "dbs":
        return iterations + 1
    if config.kind == "model_averaging":
        return iterations // config.sync_interval
    if config.kind == "one_shot":
        return 1 if is_final_epoch else 0
    raise ConfigurationError(f"unknown strategy kind {config.kind!r}")


def run_epoch(
    profiles: Sequence[WorkerProfile],
    plan: PartitionPlan,
    config: StrategyConfig,
    epoch: int,
    is_final_epoch: bool = False,
) -> EpochStats:
    """Simulate one synchronous epoch under a given partition plan."""
    if len(profiles) != plan.n_workers:
        raise ConfigurationError(
            f"plan covers {plan.n_workers} workers but {len(profiles)} profiles given"
        )
    iterations = iterations_for_plan(plan)
    gpu = tuple(
        epoch_gpu_time(p, iterations * b, iterations, epoch)
        for p, b in zip(profiles, plan.int_batches)
    )
    slowest = max(gpu)
    wait = tuple(slowest - g for g in gpu)
    rounds = sync_rounds_for_epoch(config, iterations, is_final_epoch)
    sync = sync_time_for_epoch(config, len(profiles), rounds)
    return EpochStats(
        epoch=epoch,
        per_worker_gpu=gpu,
        per_worker_wait=wait,
        sync_time=sync,
        epoch_wall_time=slowest + sync,
        plan=plan,
    )


def even_plan(n_workers: int, total_budget: int, dataset_size: int, epoch: int) -> PartitionPlan:
    plan = allocation.plan_next_epoch(
        [1.0 / n_workers] * n_workers,
        [1.0] * n_workers,
        total_budget,
        dataset_size,
        epoch=0,
    )
    return replace(plan, epoch=epoch)


def run_training(
    profiles: Sequence[WorkerProfile],
    config: StrategyConfig,
    dataset_size: int,
    n_epochs: int,
    seed: int = 0,
) -> list[EpochStats]:
    """Simulate a whole training run and return per-epoch stats.

    The timing model is fully deterministic; ``seed`` is part of the
    interface for reproducibility bookkeeping but draws no randomness here.
    """
    if n_epochs < 1:
        raise ConfigurationError("n_epochs must be >= 1")
    if dataset_size < len(profiles):
        raise ConfigurationError("dataset smaller than worker count")
    n = len(profiles)
    stats: list[EpochStats] = []
    smoothed: Optional[list[float]] = None
    for epoch in range(n_epochs):
        if config.kind != "dbs" or epoch == 0:
            plan = even_plan(n, config.total_budget, dataset_size, epoch)
        else:
            prev = stats[-1]
            shares = prev.plan.shares()
            perfs = [
                allocation.evaluate_performance(s, t)
                for s, t in zip(shares, prev.per_worker_gpu)
            ]
            if config.perf_smoothing > 0.0 and smoothed is not None:
                a = config.perf_smoothing
                perfs = [a * old + (1.0 - a) * new for old, new in zip(smoothed, perfs)]
            smoothed = perfs
            # Feed times consistent with the (possibly smoothed) estimates.
            times = [s / p for s, p in zip(shares, perfs)]
            plan = allocation.plan_next_epoch(
                shares, times, config.total_budget, dataset_size, epoch
            )
        stats.append(
            run_epoch(profiles, plan, config, epoch, is_final_epoch=epoch == n_epochs - 1)
        )
    return stats


def cumulative_times(
    stats: Sequence[EpochStats],
) -> tuple[float, list[float], float]:
    """Sum wall time, per-worker compute time and total waiting over a run."""
    if not stats:
        raise ConfigurationError("no epoch stats to accumulate")
    total_ta = sum(s.epoch_wall_time for s in stats)
    n = len(stats[0].per_worker_gpu)
    total_gpu = [sum(s.per_worker_gpu[i] for s in stats) for i in range(n)]
    total_wait = sum(sum(s.per_worker_wait) for s in stats)
    return total_ta, total_gpu, total_wait
