import json

import pytest
import yaml

from dbsim import checks, cli
from dbsim.cluster import DisturbanceEvent
from dbsim.errors import ValidationError
from dbsim.scenarios import builtin_scenarios, load_config, scenario_from_dict

MINIMAL = {
    "n_workers": 1,
    "worker_costs": [0.001],
    "dataset_size": 100,
    "total_budget": 10,
    "n_epochs": 2,
    "strategies": [{"kind": "fixed_ssgd"}],
}


def write_yaml(tmp_path, doc, name="scenario.yaml"):
    path = tmp_path / name
    path.write_text(yaml.safe_dump(doc))
    return path


class TestLoadConfig:
    def test_minimal_file_with_defaults(self, tmp_path):
        cfg = load_config(write_yaml(tmp_path, MINIMAL))
        assert cfg.name == "scenario"
        assert cfg.seed == 0
        assert cfg.strategies[0].sync_interval == 1
        assert cfg.strategies[0].total_budget == 10

    def test_budget_violation_names_field(self, tmp_path):
        doc = dict(MINIMAL, n_workers=4, worker_costs=[0.001] * 4, total_budget=2)
        with pytest.raises(ValidationError, match="total_budget"):
            load_config(write_yaml(tmp_path, doc))

    def test_missing_field_named(self, tmp_path):
        doc = {k: v for k, v in MINIMAL.items() if k != "dataset_size"}
        with pytest.raises(ValidationError, match="dataset_size"):
            load_config(write_yaml(tmp_path, doc))

    def test_parse_error_reports_position(self, tmp_path):
        path = tmp_path / "broken.yaml"
        path.write_text("n_workers: [unclosed\n")
        with pytest.raises(ValidationError, match="line"):
            load_config(path)

    def test_disturbance_round_trip(self, tmp_path):
        doc = dict(
            MINIMAL,
            disturbances=[{"worker": 0, "start_epoch": 10, "extra_epoch_seconds": 10.0}],
        )
        cfg = load_config(write_yaml(tmp_path, doc))
        assert cfg.disturbances == (
            (0, DisturbanceEvent(start_epoch=10, extra_epoch_seconds=10.0)),
        )
        reparsed = scenario_from_dict(cfg.to_dict())
        assert reparsed.disturbances == cfg.disturbances

    def test_disturbance_worker_out_of_range(self, tmp_path):
        doc = dict(
            MINIMAL,
            disturbances=[{"worker": 5, "start_epoch": 0, "extra_epoch_seconds": 1.0}],
        )
        with pytest.raises(ValidationError, match=r"disturbances\[0\]"):
            load_config(write_yaml(tmp_path, doc))

    def test_step_size_outside_range_rejected(self, tmp_path):
        doc = dict(MINIMAL, sgd_check={"mu": 1.0, "gammas": [1.5]})
        with pytest.raises(ValidationError, match="gammas"):
            load_config(write_yaml(tmp_path, doc))


class TestRunCommand:
    def test_builtin_scenario_outputs(self, tmp_path, capsys):
        rc = cli.main(["run", "homogeneous", "--out", str(tmp_path)])
        assert rc == 0
        csvs = sorted(p.name for p in tmp_path.glob("*.csv"))
        assert csvs == ["homogeneous_dbs.csv", "homogeneous_fixed_ssgd.csv"]
        doc = json.loads((tmp_path / "homogeneous.json").read_text())
        assert doc["schema_version"] == 1
        assert {s["strategy"] for s in doc["scenarios"]} == {"fixed_ssgd", "dbs"}
        out = capsys.readouterr().out
        assert "savings" in out

    def test_seed_override(self, tmp_path):
        rc = cli.main(["run", "homogeneous", "--out", str(tmp_path), "--seed", "9"])
        assert rc == 0
        doc = json.loads((tmp_path / "homogeneous.json").read_text())
        assert all(s["seed"] == 9 for s in doc["scenarios"])

    def test_config_file_scenario(self, tmp_path):
        path = write_yaml(tmp_path, dict(MINIMAL, name="custom"))
        rc = cli.main(["run", str(path), "--out", str(tmp_path / "out")])
        assert rc == 0
        assert (tmp_path / "out" / "custom.json").exists()

    def test_unknown_scenario_is_validation_failure(self, tmp_path, capsys):
        rc = cli.main(["run", "no_such_thing", "--out", str(tmp_path)])
        assert rc == cli.EXIT_VALIDATION
        assert "validation error" in capsys.readouterr().err

    def test_invalid_config_exit_code(self, tmp_path, capsys):
        path = write_yaml(tmp_path, dict(MINIMAL, total_budget=0))
        assert cli.main(["run", str(path), "--out", str(tmp_path)]) == cli.EXIT_VALIDATION


class TestCheckCommand:
    def test_scenario_without_block_rejected(self, tmp_path):
        assert cli.main(["check", "scale4", "--out", str(tmp_path)]) == cli.EXIT_VALIDATION

    def test_fast_check_passes(self, tmp_path, capsys):
        doc = dict(
            MINIMAL,
            name="quickcheck",
            n_workers=4,
            worker_costs=[0.001] * 4,
            total_budget=64,
            dataset_size=4096,
            sgd_check={
                "bound_seeds": 100,
                "bound_iterations": 40,
                "variance_draws": 5000,
                "equivalence_seeds": 20,
                "equivalence_iterations": 40,
            },
        )
        path = write_yaml(tmp_path, doc)
        rc = cli.main(["check", str(path), "--out", str(tmp_path / "out")])
        assert rc == 0
        summary = json.loads((tmp_path / "out" / "quickcheck_checks.json").read_text())
        assert all(c["passed"] for c in summary["sgd_checks"])
        assert "[pass]" in capsys.readouterr().out

    def test_failed_check_exit_code(self, tmp_path, monkeypatch):
        failing = checks.EquivalenceCheckResult(1.0, 2.0, 1.0, 9.0, passed=False)
        monkeypatch.setattr(checks, "check_dbs_equivalence", lambda *a, **k: failing)
        rc = cli.main(["check", "sgd_convergence", "--out", str(tmp_path)])
        assert rc == cli.EXIT_CHECK_FAILED


class TestListCommand:
    def test_catalog_names(self, capsys):
        assert cli.main(["list"]) == 0
        out = capsys.readouterr().out
        for name in (
            "scale4", "scale8", "scale16", "robustness", "homogeneous",
            "model_averaging", "one_shot", "sgd_convergence",
        ):
            assert name in out

    def test_every_builtin_runs(self, tmp_path):
        # smoke over the catalog; the heavy scenarios get their own acceptance runs
        for name, cfg in builtin_scenarios().items():
            rc = cli.main(["run", name, "--out", str(tmp_path / name)])
            assert rc == 0, name
