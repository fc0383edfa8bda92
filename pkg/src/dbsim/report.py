"""Aggregation and serialization of simulation and SGD-lab results.

Two stable output formats:

* long-format CSV, one row per worker per epoch:
  ``epoch,worker_id,t_gpu,t_w,t_s,T_a,batch`` (epoch-level columns repeated
  on every worker row), floats printed with 6 decimals;
* a single JSON document ``{"scenarios": [...], "schema_version": 1,
  "sgd_checks": [...]}`` with keys sorted at every level so identical inputs
  serialize byte-identically.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

from .cluster import EpochStats, cumulative_times
from .errors import BaselineNotFoundError, InvalidBaselineError


@dataclass(frozen=True)
class EpochRow:
    epoch: int
    per_worker_gpu: tuple[float, ...]
    per_worker_wait: tuple[float, ...]
    sync_time: float
    wall_time: float
    int_batches: tuple[int, ...]


@dataclass
class RunReport:
    """One strategy's full timeline plus totals for a scenario run."""

    scenario_name: str
    strategy: str
    seed: int
    epoch_rows: list[EpochRow] = field(default_factory=list)
    total_wall_time: float = 0.0
    total_wait_time: float = 0.0
    savings_vs_baseline_percent: Optional[float] = None

    @classmethod
    def from_stats(
        cls, scenario_name: str, strategy: str, seed: int, stats: Sequence[EpochStats]
    ) -> "RunReport":
        rows = [
            EpochRow(
                epoch=s.epoch,
                per_worker_gpu=s.per_worker_gpu,
                per_worker_wait=s.per_worker_wait,
                sync_time=s.sync_time,
                wall_time=s.epoch_wall_time,
                int_batches=s.plan.int_batches,
            )
            for s in sorted(stats, key=lambda s: s.epoch)
        ]
        total_ta, _, total_wait = cumulative_times(stats)
        return cls(
            scenario_name=scenario_name,
            strategy=strategy,
            seed=seed,
            epoch_rows=rows,
            total_wall_time=total_ta,
            total_wait_time=total_wait,
        )

    def to_dict(self) -> dict:
        return {
            "scenario_name": self.scenario_name,
            "strategy": self.strategy,
            "seed": self.seed,
            "epoch_rows": [
                {
                    "epoch": r.epoch,
                    "t_gpu": list(r.per_worker_gpu),
                    "t_w": list(r.per_worker_wait),
                    "t_s": r.sync_time,
                    "T_a": r.wall_time,
                    "int_batches": list(r.int_batches),
                }
                for r in self.epoch_rows
            ],
            "totals": {
                "total_Ta": self.total_wall_time,
                "total_wait": self.total_wait_time,
                "savings_vs_baseline_percent": self.savings_vs_baseline_percent,
            },
        }


def savings_percent(candidate_total_ta: float, baseline_total_ta: float) -> float:
    """Percentage of baseline wall time saved by the candidate."""
    if baseline_total_ta <= 0.0:
        raise InvalidBaselineError(f"baseline total must be positive, got {baseline_total_ta}")
    return 100.0 * (baseline_total_ta - candidate_total_ta) / baseline_total_ta


CSV_HEADER = ("epoch", "worker_id", "t_gpu", "t_w", "t_s", "T_a", "batch")


def write_epoch_csv(report: RunReport, destination) -> None:
    """Long-format per-epoch timeline; one row per worker per epoch."""
    path = Path(destination)
    try:
        with path.open("w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(CSV_HEADER)
            for row in report.epoch_rows:
                for wid, (gpu, wait, batch) in enumerate(
                    zip(row.per_worker_gpu, row.per_worker_wait, row.int_batches)
                ):
                    writer.writerow(
                        [
                            row.epoch,
                            wid,
                            f"{gpu:.6f}",
                            f"{wait:.6f}",
                            f"{row.sync_time:.6f}",
                            f"{row.wall_time:.6f}",
                            batch,
                        ]
                    )
    except OSError as exc:
        raise OSError(f"failed writing epoch CSV to {path}: {exc}") from exc


def read_epoch_csv(source) -> list[dict]:
    """Parse a timeline CSV back into a list of per-worker row dicts."""
    path = Path(source)
    rows = []
    with path.open("r", encoding="utf-8", newline="") as fh:
        for rec in csv.DictReader(fh):
            rows.append(
                {
                    "epoch": int(rec["epoch"]),
                    "worker_id": int(rec["worker_id"]),
                    "t_gpu": float(rec["t_gpu"]),
                    "t_w": float(rec["t_w"]),
                    "t_s": float(rec["t_s"]),
                    "T_a": float(rec["T_a"]),
                    "batch": int(rec["batch"]),
                }
            )
    return rows


def run_document(
    reports: Sequence[RunReport], sgd_checks: Sequence[dict] = ()
) -> dict:
    return {
        "schema_version": 1,
        "scenarios": [r.to_dict() for r in reports],
        "sgd_checks": list(sgd_checks),
    }


def write_run_json(
    reports: Sequence[RunReport], sgd_checks: Sequence[dict], destination
) -> None:
    """Serialize reports and check summaries; byte-deterministic output."""
    path = Path(destination)
    doc = run_document(reports, sgd_checks)
    try:
        path.write_text(
            json.dumps(doc, sort_keys=True, separators=(",", ":")) + "\n",
            encoding="utf-8",
        )
    except OSError as exc:
        raise OSError(f"failed writing run JSON to {path}: {exc}") from exc


def read_run_json(source) -> dict:
    return json.loads(Path(source).read_text(encoding="utf-8"))


def compare_strategies(
    reports: Sequence[RunReport], baseline_strategy: str
) -> list[tuple[str, float, float]]:
    """Rows of (strategy, total wall time, savings vs the named baseline)."""
    baseline = next(
        (r for r in reports if r.strategy == baseline_strategy), None
    )
    if baseline is None:
        raise BaselineNotFoundError(
            f"baseline strategy {baseline_strategy!r} not among reports"
        )
    return [
        (
            r.strategy,
            r.total_wall_time,
            savings_percent(r.total_wall_time, baseline.total_wall_time),
        )
        for r in reports
    ]
