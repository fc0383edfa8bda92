"""Batch apportionment and dataset partitioning for heterogeneous workers.

The per-epoch pipeline: estimate each worker's throughput from the previous
epoch, split the fixed cluster-wide batch budget proportionally, integerize
the real-valued batches with a floor-then-top-up rounding pass, and turn the
integer batches into contiguous fractional dataset ranges and sample spans.

All functions are pure; ranges are kept as exact ``Fraction`` ratios so the
partition invariants (contiguity, full cover) hold bit-exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

from .errors import (
    BudgetTooSmallError,
    DatasetTooSmallError,
    EmptyPartitionError,
    InvalidBatchError,
    InvalidMeasurementError,
    InvalidPerformanceError,
)


@dataclass(frozen=True)
class PerfEstimate:
    """Throughput of one worker: fraction of the dataset processed per second."""

    worker_id: int
    value: float


@dataclass(frozen=True)
class BatchAllocation:
    """Intermediate allocation state: fractions, real batches, integer batches."""

    fractions: tuple[float, ...]
    real_batches: tuple[float, ...]
    int_batches: tuple[int, ...]
    total_budget: int


@dataclass(frozen=True)
class PartitionPlan:
    """Per-worker integer batches plus the dataset ranges for one epoch.

    ``ranges`` are (lower, upper) fractions of the dataset as exact ratios of
    integer batches; ``sample_spans`` are the matching half-open index pairs
    over the concrete dataset.
    """

    int_batches: tuple[int, ...]
    ranges: tuple[tuple[Fraction, Fraction], ...]
    epoch: int
    sample_spans: tuple[tuple[int, int], ...]

    @property
    def n_workers(self) -> int:
        return len(self.int_batches)

    @property
    def dataset_size(self) -> int:
        return self.sample_spans[-1][1]

    def span_sizes(self) -> tuple[int, ...]:
        return tuple(end - start for start, end in self.sample_spans)

    def shares(self) -> tuple[float, ...]:
        """Fraction of the dataset actually held by each worker."""
        n = self.dataset_size
        return tuple((end - start) / n for start, end in self.sample_spans)


def evaluate_performance(share: float, epoch_time: float) -> float:
    """Dataset fraction processed per second during the last epoch.

    Raises InvalidMeasurementError for a non-positive time or share, which
    signals a corrupted epoch record rather than a slow worker.
    """
    if not (0.0 < share <= 1.0) or not math.isfinite(share):
        raise InvalidMeasurementError(f"dataset share must be in (0, 1], got {share}")
    if epoch_time <= 0.0 or not math.isfinite(epoch_time):
        raise InvalidMeasurementError(f"epoch time must be positive, got {epoch_time}")
    return share / epoch_time


def compute_batch_fractions(perfs: Sequence[PerfEstimate]) -> list[float]:
    """Normalize worker throughputs into batch fractions summing to 1."""
    if not perfs:
        raise InvalidPerformanceError("need at least one performance estimate")
    values = [p.value for p in perfs]
    for p in perfs:
        if p.value <= 0.0 or not math.isfinite(p.value):
            raise InvalidPerformanceError(
                f"worker {p.worker_id} has invalid performance {p.value}"
            )
    total = math.fsum(values)
    return [v / total for v in values]


def scale_to_real_batches(fractions: Sequence[float], total_budget: int) -> list[float]:
    """Scale unit fractions up to real-valued batch sizes for a fixed budget."""
    if total_budget < len(fractions):
        raise BudgetTooSmallError(
            f"budget {total_budget} is below worker count {len(fractions)}"
        )
    if abs(math.fsum(fractions) - 1.0) > 1e-6:
        raise InvalidPerformanceError("fractions must sum to 1")
    return [f * total_budget for f in fractions]


def round_twice(real_batches: Sequence[float], total_budget: int) -> list[int]:
    """Integerize real batches: floor everything, then top up large remainders.

    At most ``total_budget - sum(floors)`` entries are rounded up, taken in
    descending order of decimal fraction (ties broken by ascending worker
    index), and only entries with decimal fraction >= 0.5 qualify. The result
    never exceeds the budget; when too few remainders reach 0.5 the sum falls
    short and the caller works with the smaller total.
    """
    for b in real_batches:
        if b < 0.0 or not math.isfinite(b):
            raise InvalidBatchError(f"batch sizes must be non-negative, got {b}")
    floors = [math.floor(b) for b in real_batches]
    k = total_budget - sum(floors)
    decimals = [b - f for b, f in zip(real_batches, floors)]
    candidates = sorted(
        (i for i, d in enumerate(decimals) if d >= 0.5),
        key=lambda i: (-decimals[i], i),
    )
    for i in candidates[: max(k, 0)]:
        floors[i] += 1
    return floors


def partition_ranges(int_batches: Sequence[int]) -> list[tuple[Fraction, Fraction]]:
    """Contiguous fractional dataset ranges proportional to integer batches."""
    if not int_batches:
        raise EmptyPartitionError("no workers to partition over")
    if any(b < 0 for b in int_batches):
        raise InvalidBatchError("integer batches must be non-negative")
    total = sum(int_batches)
    if total == 0:
        raise EmptyPartitionError("all integer batches are zero")
    ranges = []
    cum = 0
    for b in int_batches:
        lower = Fraction(cum, total)
        cum += b
        ranges.append((lower, Fraction(cum, total)))
    return ranges


def spans_from_ranges(
    ranges: Sequence[tuple[Fraction, Fraction]], dataset_size: int
) -> list[tuple[int, int]]:
    """Map fractional ranges onto half-open sample index spans.

    Span starts are floors of the fractional boundaries, then forced
    contiguous; every range of positive width is guaranteed at least one
    sample, which requires ``dataset_size >= len(ranges)``.
    """
    n = len(ranges)
    if dataset_size < n:
        raise DatasetTooSmallError(
            f"dataset of {dataset_size} samples cannot cover {n} workers"
        )
    widths = [hi - lo for lo, hi in ranges]
    starts = [math.floor(lo * dataset_size) for lo, _ in ranges]
    starts[0] = 0
    for i in range(1, n):
        least = starts[i - 1] + (1 if widths[i - 1] > 0 else 0)
        if starts[i] < least:
            starts[i] = least
    # Clamp from the right so trailing non-empty spans keep room.
    cap = dataset_size
    for i in range(n - 1, 0, -1):
        if widths[i] > 0:
            cap -= 1
        if starts[i] > cap:
            starts[i] = cap
    return [
        (starts[i], starts[i + 1] if i + 1 < n else dataset_size) for i in range(n)
    ]


def _raise_zero_batches(int_batches: list[int]) -> list[int]:
    """Lift zero batches to one sample, paid for by the largest batch.

    A zero batch would stall the synchronous loop, so the plan never emits
    one as long as some worker has slack.
    """
    batches = list(int_batches)
    while 0 in batches:
        donor = max(range(len(batches)), key=lambda i: batches[i])
        if batches[donor] <= 1:
            break
        batches[batches.index(0)] += 1
        batches[donor] -= 1
    return batches


def plan_next_epoch(
    prev_shares: Sequence[float],
    prev_times: Sequence[float],
    total_budget: int,
    dataset_size: int,
    epoch: int,
) -> PartitionPlan:
    """Full planning pipeline for one epoch.

    Epoch 0 ignores the previous-epoch inputs and emits the even plan; later
    epochs run performance evaluation, proportional allocation, the two-pass
    rounding, and partitioning end to end.
    """
    n = len(prev_shares)
    if n == 0 or len(prev_times) != n:
        raise InvalidPerformanceError("share and time lists must be same non-empty length")
    if total_budget < n:
        raise BudgetTooSmallError(
            f"budget {total_budget} is below worker count {n}"
        )
    if epoch == 0:
        real = [total_budget / n] * n
    else:
        perfs = [
            PerfEstimate(i, evaluate_performance(s, t))
            for i, (s, t) in enumerate(zip(prev_shares, prev_times))
        ]
        fractions = compute_batch_fractions(perfs)
        real = scale_to_real_batches(fractions, total_budget)
    int_batches = _raise_zero_batches(round_twice(real, total_budget))
    ranges = partition_ranges(int_batches)
    spans = spans_from_ranges(ranges, dataset_size)
    return PartitionPlan(
        int_batches=tuple(int_batches),
        ranges=tuple(ranges),
        epoch=epoch,
        sample_spans=tuple(spans),
    )
