"""Adaptive batch-size scheduling and simulation for data-parallel training.

Subpackages by concern:

* ``allocation`` -- throughput estimation, proportional batch apportionment,
  two-pass integer rounding, dataset partitioning;
* ``cluster`` -- deterministic epoch-level timing simulation of
  synchronization strategies on heterogeneous workers;
* ``sgdlab`` -- real mini-batch SGD on strongly-convex problems;
* ``checks`` -- Monte-Carlo verification of the convergence theory;
* ``report`` -- CSV/JSON serialization and strategy comparison;
* ``scenarios`` / ``cli`` -- named experiment configurations and the runner.
"""

from .allocation import (
    BatchAllocation,
    PartitionPlan,
    PerfEstimate,
    compute_batch_fractions,
    evaluate_performance,
    partition_ranges,
    plan_next_epoch,
    round_twice,
    scale_to_real_batches,
    spans_from_ranges,
)
from .cluster import (
    DisturbanceEvent,
    EpochStats,
    StrategyConfig,
    WorkerProfile,
    cumulative_times,
    run_epoch,
    run_training,
)
from .report import RunReport, compare_strategies, savings_percent
from .scenarios import ScenarioConfig, builtin_scenarios, load_config

__all__ = [
    "BatchAllocation",
    "PartitionPlan",
    "PerfEstimate",
    "compute_batch_fractions",
    "evaluate_performance",
    "partition_ranges",
    "plan_next_epoch",
    "round_twice",
    "scale_to_real_batches",
    "spans_from_ranges",
    "DisturbanceEvent",
    "EpochStats",
    "StrategyConfig",
    "WorkerProfile",
    "cumulative_times",
    "run_epoch",
    "run_training",
    "RunReport",
    "compare_strategies",
    "savings_percent",
    "ScenarioConfig",
    "builtin_scenarios",
    "load_config",
]

__version__ = "0.1.0"
