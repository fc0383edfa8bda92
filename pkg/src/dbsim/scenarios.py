"""Scenario configuration: YAML ingestion, validation, builtin catalog.

A scenario bundles a simulated cluster (worker costs, disturbances, dataset
size, batch budget) with one or more synchronization strategies to compare,
plus an optional numerical-check block for the SGD lab. Builtins cover the
standard experiment shapes: scaling comparisons at 4/8/16 workers,
disturbance robustness, the homogeneous fixed point, reduced-frequency
averaging strategies, and the convergence checks.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from pathlib import Path
from typing import Optional

import yaml

from .cluster import DisturbanceEvent, StrategyConfig, WorkerProfile
from .errors import ValidationError


@dataclass(frozen=True)
class SgdCheckConfig:
    """Parameters of the numerical verification block.

    ``gammas`` are absolute step sizes and must each lie in (0, 1/mu).
    """

    mu: float = 1.0
    dimension: int = 8
    sample_count: int = 4096
    noise_scale: float = 0.02
    gammas: tuple[float, ...] = (0.1, 0.5, 0.9)
    bound_seeds: int = 1000
    bound_iterations: int = 200
    m_values: tuple[int, ...] = (1, 4, 16, 64)
    variance_draws: int = 100_000
    equivalence_seeds: int = 100
    equivalence_iterations: int = 100
    equivalence_step_size: float = 0.02
    equivalence_momentum: float = 0.5
    seed: int = 0


@dataclass(frozen=True)
class ScenarioConfig:
    name: str
    n_workers: int
    worker_costs: tuple[float, ...]
    dataset_size: int
    total_budget: int
    n_epochs: int
    strategies: tuple[StrategyConfig, ...]
    seed: int = 0
    per_iteration_overhead: float = 0.0
    disturbances: tuple[tuple[int, DisturbanceEvent], ...] = ()
    sgd_check: Optional[SgdCheckConfig] = None
    description: str = ""

    def validate(self) -> None:
        if self.n_workers < 1:
            raise ValidationError("n_workers: must be >= 1")
        if len(self.worker_costs) != self.n_workers:
            raise ValidationError(
                f"worker_costs: expected {self.n_workers} entries, got {len(self.worker_costs)}"
            )
        if any(c <= 0 for c in self.worker_costs):
            raise ValidationError("worker_costs: every cost must be positive")
        if self.n_epochs < 1:
            raise ValidationError("n_epochs: must be >= 1")
        if self.total_budget < self.n_workers:
            raise ValidationError(
                f"total_budget: {self.total_budget} is below n_workers {self.n_workers}"
            )
        if self.dataset_size < self.n_workers:
            raise ValidationError("dataset_size: must cover every worker")
        if not self.strategies:
            raise ValidationError("strategies: at least one strategy required")
        for idx, (worker_id, _) in enumerate(self.disturbances):
            if not (0 <= worker_id < self.n_workers):
                raise ValidationError(
                    f"disturbances[{idx}].worker: id {worker_id} out of range"
                )
        if self.sgd_check is not None:
            c = self.sgd_check
            for g in c.gammas:
                if not (0.0 < g * c.mu < 1.0):
                    raise ValidationError(
                        f"sgd_check.gammas: {g} outside (0, {1.0 / c.mu})"
                    )
            if not (0.0 < c.equivalence_step_size * c.mu < 1.0):
                raise ValidationError("sgd_check.equivalence_step_size: outside (0, 1/mu)")

    def profiles(self) -> list[WorkerProfile]:
        per_worker = {i: [] for i in range(self.n_workers)}
        for worker_id, event in self.disturbances:
            per_worker[worker_id].append(event)
        return [
            WorkerProfile(
                worker_id=i,
                base_cost=self.worker_costs[i],
                per_iteration_overhead=self.per_iteration_overhead,
                disturbances=tuple(per_worker[i]),
            )
            for i in range(self.n_workers)
        ]

    def to_dict(self) -> dict:
        doc: dict = {
            "name": self.name,
            "n_workers": self.n_workers,
            "worker_costs": list(self.worker_costs),
            "dataset_size": self.dataset_size,
            "total_budget": self.total_budget,
            "n_epochs": self.n_epochs,
            "seed": self.seed,
            "per_iteration_overhead": self.per_iteration_overhead,
            "strategies": [
                {
                    "kind": s.kind,
                    "sync_interval": s.sync_interval,
                    "sync_cost_per_round": s.sync_cost_per_round,
                    "sync_cost_per_worker": s.sync_cost_per_worker,
                    "perf_smoothing": s.perf_smoothing,
                }
                for s in self.strategies
            ],
            "disturbances": [
                {
                    "worker": wid,
                    "start_epoch": d.start_epoch,
                    "end_epoch": d.end_epoch,
                    "extra_epoch_seconds": d.extra_epoch_seconds,
                    "cost_multiplier": d.cost_multiplier,
                }
                for wid, d in self.disturbances
            ],
        }
        if self.sgd_check is not None:
            c = self.sgd_check
            doc["sgd_check"] = {
                "mu": c.mu,
                "dimension": c.dimension,
                "sample_count": c.sample_count,
                "noise_scale": c.noise_scale,
                "gammas": list(c.gammas),
                "bound_seeds": c.bound_seeds,
                "bound_iterations": c.bound_iterations,
                "m_values": list(c.m_values),
                "variance_draws": c.variance_draws,
                "equivalence_seeds": c.equivalence_seeds,
                "equivalence_iterations": c.equivalence_iterations,
                "equivalence_step_size": c.equivalence_step_size,
                "equivalence_momentum": c.equivalence_momentum,
                "seed": c.seed,
            }
        return doc


def _require(mapping: dict, key: str, context: str):
    if key not in mapping:
        raise ValidationError(f"{context}{key}: missing required field")
    return mapping[key]


def _parse_disturbance(entry: dict, path: str) -> tuple[int, DisturbanceEvent]:
    if not isinstance(entry, dict):
        raise ValidationError(f"{path}: expected a mapping")
    worker = _require(entry, "worker", f"{path}.")
    try:
        event = DisturbanceEvent(
            start_epoch=int(_require(entry, "start_epoch", f"{path}.")),
            end_epoch=entry.get("end_epoch"),
            extra_epoch_seconds=entry.get("extra_epoch_seconds"),
            cost_multiplier=entry.get("cost_multiplier"),
        )
    except Exception as exc:
        raise ValidationError(f"{path}: {exc}") from exc
    return int(worker), event


def _parse_strategy(entry: dict, total_budget: int, path: str) -> StrategyConfig:
    if not isinstance(entry, dict):
        raise ValidationError(f"{path}: expected a mapping")
    try:
        return StrategyConfig(
            kind=str(_require(entry, "kind", f"{path}.")),
            total_budget=total_budget,
            sync_interval=int(entry.get("sync_interval", 1)),
            sync_cost_per_round=float(entry.get("sync_cost_per_round", 0.001)),
            sync_cost_per_worker=float(entry.get("sync_cost_per_worker", 0.00025)),
            perf_smoothing=float(entry.get("perf_smoothing", 0.0)),
        )
    except ValidationError:
        raise
    except Exception as exc:
        raise ValidationError(f"{path}: {exc}") from exc


def scenario_from_dict(doc: dict, default_name: str = "scenario") -> ScenarioConfig:
    if not isinstance(doc, dict):
        raise ValidationError("top level: expected a mapping")
    n_workers = int(_require(doc, "n_workers", ""))
    total_budget = int(_require(doc, "total_budget", ""))
    sgd_check = None
    if "sgd_check" in doc and doc["sgd_check"] is not None:
        raw = doc["sgd_check"]
        if not isinstance(raw, dict):
            raise ValidationError("sgd_check: expected a mapping")
        known = {f for f in SgdCheckConfig.__dataclass_fields__}
        unknown = set(raw) - known
        if unknown:
            raise ValidationError(f"sgd_check.{sorted(unknown)[0]}: unknown field")
        kwargs = dict(raw)
        for key in ("gammas", "m_values"):
            if key in kwargs:
                kwargs[key] = tuple(kwargs[key])
        sgd_check = SgdCheckConfig(**kwargs)
    config = ScenarioConfig(
        name=str(doc.get("name", default_name)),
        n_workers=n_workers,
        worker_costs=tuple(float(c) for c in _require(doc, "worker_costs", "")),
        dataset_size=int(_require(doc, "dataset_size", "")),
        total_budget=total_budget,
        n_epochs=int(_require(doc, "n_epochs", "")),
        seed=int(doc.get("seed", 0)),
        per_iteration_overhead=float(doc.get("per_iteration_overhead", 0.0)),
        strategies=tuple(
            _parse_strategy(s, total_budget, f"strategies[{i}]")
            for i, s in enumerate(_require(doc, "strategies", ""))
        ),
        disturbances=tuple(
            _parse_disturbance(d, f"disturbances[{i}]")
            for i, d in enumerate(doc.get("disturbances", []))
        ),
        sgd_check=sgd_check,
        description=str(doc.get("description", "")),
    )
    config.validate()
    return config


def load_config(path) -> ScenarioConfig:
    """Load and validate a YAML scenario file.

    Parse errors carry the YAML line/column; validation errors name the
    offending field path.
    """
    path = Path(path)
    try:
        doc = yaml.safe_load(path.read_text(encoding="utf-8"))
    except yaml.MarkedYAMLError as exc:
        mark = exc.problem_mark
        where = f" at line {mark.line + 1}, column {mark.column + 1}" if mark else ""
        raise ValidationError(f"{path}: parse error{where}: {exc.problem}") from exc
    except yaml.YAMLError as exc:
        raise ValidationError(f"{path}: parse error: {exc}") from exc
    return scenario_from_dict(doc, default_name=path.stem)


def _geometric_costs(n: int, base: float, spread: float = 2.0) -> tuple[float, ...]:
    if n == 1:
        return (base,)
    return tuple(base * spread ** (i / (n - 1)) for i in range(n))


def _scale_scenario(n: int) -> ScenarioConfig:
    return ScenarioConfig(
        name=f"scale{n}",
        n_workers=n,
        worker_costs=_geometric_costs(n, 1e-4),
        dataset_size=50_000,
        total_budget=512,
        n_epochs=50,
        strategies=(
            StrategyConfig(kind="fixed_ssgd", total_budget=512),
            StrategyConfig(kind="dbs", total_budget=512),
        ),
        description=(
            f"Adaptive vs fixed batching on {n} heterogeneous workers (1:2 cost "
            "spread); measures total time saved at this cluster scale."
        ),
    )


def _robustness_scenario() -> ScenarioConfig:
    costs = _geometric_costs(4, 5e-3)
    disturbances = tuple(
        (worker, DisturbanceEvent(start_epoch=start, extra_epoch_seconds=10.0))
        for worker, start in ((0, 10), (1, 21), (2, 31))
    )
    return ScenarioConfig(
        name="robustness",
        n_workers=4,
        worker_costs=costs,
        dataset_size=50_000,
        total_budget=512,
        n_epochs=41,
        strategies=(
            StrategyConfig(kind="fixed_ssgd", total_budget=512),
            StrategyConfig(kind="dbs", total_budget=512),
        ),
        disturbances=disturbances,
        description=(
            "Background tasks add a flat 10 s of compute to workers 0/1/2 at "
            "epochs 10/21/31; tests how fast the adaptive plan re-balances."
        ),
    )


def _homogeneous_scenario() -> ScenarioConfig:
    return ScenarioConfig(
        name="homogeneous",
        n_workers=4,
        worker_costs=(2e-4,) * 4,
        dataset_size=50_000,
        total_budget=512,
        n_epochs=50,
        strategies=(
            StrategyConfig(kind="fixed_ssgd", total_budget=512),
            StrategyConfig(kind="dbs", total_budget=512),
        ),
        description=(
            "Identical workers: the adaptive plan must reproduce the even "
            "split every epoch and match the fixed baseline's total time."
        ),
    )


def _averaging_scenario(kind: str) -> ScenarioConfig:
    base = _robustness_scenario()
    extra = StrategyConfig(
        kind=kind,
        total_budget=512,
        sync_interval=8 if kind == "model_averaging" else 1,
    )
    label = "periodic model averaging" if kind == "model_averaging" else "one-shot averaging"
    return replace(
        base,
        name=kind,
        strategies=base.strategies + (extra,),
        description=(
            f"Disturbance run comparing fixed/adaptive batching against {label}, "
            "which cuts synchronization rounds but cannot re-balance compute."
        ),
    )


def _sgd_convergence_scenario() -> ScenarioConfig:
    return ScenarioConfig(
        name="sgd_convergence",
        n_workers=4,
        worker_costs=_geometric_costs(4, 1e-4),
        dataset_size=4096,
        total_budget=64,
        n_epochs=10,
        strategies=(
            StrategyConfig(kind="fixed_ssgd", total_budget=64),
            StrategyConfig(kind="dbs", total_budget=64),
        ),
        sgd_check=SgdCheckConfig(),
        description=(
            "Strongly-convex SGD lab: contraction-bound check, batch-variance "
            "monotonicity sweep, and fixed-vs-adaptive convergence equivalence."
        ),
    )


def builtin_scenarios() -> dict[str, ScenarioConfig]:
    scenarios = [
        _scale_scenario(4),
        _scale_scenario(8),
        _scale_scenario(16),
        _robustness_scenario(),
        _homogeneous_scenario(),
        _averaging_scenario("model_averaging"),
        _averaging_scenario("one_shot"),
        _sgd_convergence_scenario(),
    ]
    for s in scenarios:
        s.validate()
    return {s.name: s for s in scenarios}
