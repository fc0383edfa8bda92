"""Command-line scenario runner.

Commands:

* ``dbsim run <config.yaml | builtin-name> --out DIR [--seed N]`` simulates
  every strategy in the scenario over identical worker profiles, writes one
  timeline CSV per strategy plus a combined JSON document, and prints a
  strategy comparison table.
* ``dbsim check <config.yaml | builtin-name> --out DIR`` executes the SGD
  lab verification block (contraction bound, batch-variance sweep,
  fixed-vs-adaptive equivalence) and writes a pass/fail summary.
* ``dbsim list`` prints the builtin scenario catalog.

Exit codes: 0 success, 1 validation failure, 2 runtime failure, 3 check
failure. Configuration comes only from flags and the config file; the
environment is never consulted.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import checks, cluster, report
from .errors import DbsError, ValidationError
from .scenarios import ScenarioConfig, builtin_scenarios, load_config
from .sgdlab import ConvexProblem

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_RUNTIME = 2
EXIT_CHECK_FAILED = 3


def resolve_scenario(name_or_path: str) -> ScenarioConfig:
    builtins = builtin_scenarios()
    if name_or_path in builtins:
        return builtins[name_or_path]
    if Path(name_or_path).exists():
        return load_config(name_or_path)
    raise ValidationError(
        f"{name_or_path!r} is neither a builtin scenario nor a config file"
    )


def run_scenario(config: ScenarioConfig, output_dir) -> int:
    """Run every strategy of the scenario and write CSV/JSON outputs."""
    out = Path(output_dir)
    out.mkdir(parents=True, exist_ok=True)
    profiles = config.profiles()
    reports = []
    for strategy in config.strategies:
        stats = cluster.run_training(
            profiles, strategy, config.dataset_size, config.n_epochs, config.seed
        )
        reports.append(
            report.RunReport.from_stats(config.name, strategy.kind, config.seed, stats)
        )
    baseline_kind = (
        "fixed_ssgd"
        if any(r.strategy == "fixed_ssgd" for r in reports)
        else reports[0].strategy
    )
    table = report.compare_strategies(reports, baseline_kind)
    for r, (_, _, saved) in zip(reports, table):
        r.savings_vs_baseline_percent = saved
    for r in reports:
        report.write_epoch_csv(r, out / f"{config.name}_{r.strategy}.csv")
    report.write_run_json(reports, [], out / f"{config.name}.json")

    print(f"scenario {config.name} (seed {config.seed}, baseline {baseline_kind})")
    print(f"{'strategy':<18}{'total_Ta [s]':>14}{'savings [%]':>13}")
    for strategy, total, saved in table:
        print(f"{strategy:<18}{total:>14.3f}{saved:>13.2f}")
    return EXIT_OK


def run_sgd_check(config: ScenarioConfig, output_dir) -> int:
    """Run the numerical verification block and write its summary JSON."""
    if config.sgd_check is None:
        raise ValidationError("sgd_check: scenario has no verification block")
    out = Path(output_dir)
    out.mkdir(parents=True, exist_ok=True)
    c = config.sgd_check
    problem = ConvexProblem.quadratic(
        dimension=c.dimension,
        mu=c.mu,
        sample_noise_scale=c.noise_scale,
        sample_count=c.sample_count,
        seed=c.seed,
    )
    x0 = np.ones(c.dimension)
    summaries = []
    for gamma in c.gammas:
        result = checks.check_theorem1_bound(
            problem,
            gamma,
            x0,
            n_seeds=c.bound_seeds,
            n_iterations=c.bound_iterations,
            seed=c.seed,
        )
        summaries.append(result.summary())
    summaries.append(
        checks.check_lemma1(
            problem, x0, c.m_values, n_draws=c.variance_draws, seed=c.seed
        ).summary()
    )
    summaries.append(
        checks.check_dbs_equivalence(
            problem,
            n_workers=config.n_workers,
            total_budget=config.total_budget,
            n_seeds=c.equivalence_seeds,
            n_iterations=c.equivalence_iterations,
            step_size=c.equivalence_step_size,
            momentum=c.equivalence_momentum,
            seed=c.seed,
        ).summary()
    )
    report.write_run_json([], summaries, out / f"{config.name}_checks.json")

    failed = [s for s in summaries if not s["passed"]]
    for s in summaries:
        status = "pass" if s["passed"] else "FAIL"
        label = s["check"] + (f" (gamma={s['gamma']})" if "gamma" in s else "")
        print(f"[{status}] {label}")
    return EXIT_OK if not failed else EXIT_CHECK_FAILED


def list_scenarios() -> int:
    for name, config in builtin_scenarios().items():
        print(f"{name:<18}{config.description}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dbsim",
        description="Simulate adaptive batch-size scheduling on heterogeneous clusters.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="run a scenario and write CSV/JSON reports")
    run_p.add_argument("scenario", help="builtin scenario name or YAML config path")
    run_p.add_argument("--out", required=True, help="output directory")
    run_p.add_argument("--seed", type=int, default=None, help="override the scenario seed")

    check_p = sub.add_parser("check", help="run the SGD-lab verification block")
    check_p.add_argument("scenario", help="builtin scenario name or YAML config path")
    check_p.add_argument("--out", required=True, help="output directory")

    sub.add_parser("list", help="list builtin scenarios")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "list":
            return list_scenarios()
        config = resolve_scenario(args.scenario)
        if args.command == "run":
            if args.seed is not None:
                config = replace(config, seed=args.seed)
            return run_scenario(config, args.out)
        return run_sgd_check(config, args.out)
    except ValidationError as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (DbsError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
