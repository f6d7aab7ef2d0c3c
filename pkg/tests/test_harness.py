import csv
import json

import numpy as np
import pytest

from misslogit.cli import main
from misslogit.datagen import PatternMixture
from misslogit.errors import ConfigError
from misslogit.harness import ExperimentConfig, oracle_check, run_experiment, summarize, summarize_dir

SMALL = {
    "scenario": {"kind": "MCAR"},
    "methods": ["Mean.IMP", "PbP"],
    "train_sizes": [200, 400],
    "test_size": 300,
    "replicates": 2,
    "base_seed": 11,
    "oracle_mc_k": 500,
}


def _read(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def test_config_validation():
    cfg = ExperimentConfig.from_dict(SMALL)
    assert [m.name for m in cfg.methods] == ["Mean.IMP", "PbP"]
    assert cfg.scenario.beta.shape == (5,)
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict({**SMALL, "bogus": 1})
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict({**SMALL, "methods": ["PbP", "PbP"]})
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict({**SMALL, "train_sizes": []})
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict({**SMALL, "replicates": 0})
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict({**SMALL, "scenario": {"kind": "MCAR", "shape": 3}})
    defaults = ExperimentConfig(methods=("PbP",))
    assert (defaults.train_sizes, defaults.test_size, defaults.replicates) == ((500, 5000, 20000), 10_000, 5)


def test_smallest_grid_has_one_complete_row(tmp_path):
    cfg = ExperimentConfig.from_dict({**SMALL, "methods": ["Mean.IMP"], "train_sizes": [500], "replicates": 1})
    rows = run_experiment(cfg, tmp_path)
    assert len(rows) == 1
    written = _read(tmp_path / "results.csv")
    assert len(written) == 1
    for metric in ("excess_misclassification", "mae_bayes", "mcb_delta", "coef_mse"):
        assert written[0][metric] != ""
    assert written[0]["status"] == "ok"
    assert any(k.startswith("mae_pattern_") and v for k, v in written[0].items())


def test_determinism_and_worker_invariance(tmp_path):
    cfg = ExperimentConfig.from_dict(SMALL)
    run_experiment(cfg, tmp_path / "a")
    run_experiment(cfg, tmp_path / "b")
    run_experiment(cfg, tmp_path / "c", workers=2)
    a = (tmp_path / "a" / "results.csv").read_bytes()
    assert a == (tmp_path / "b" / "results.csv").read_bytes()
    assert a == (tmp_path / "c" / "results.csv").read_bytes()


def test_resume_reuses_finished_cells(tmp_path):
    cfg = ExperimentConfig.from_dict(SMALL)
    run_experiment(cfg, tmp_path / "full")
    journal = (tmp_path / "full" / "cells.jsonl").read_text().splitlines()
    part = tmp_path / "part"
    part.mkdir()
    (part / "cells.jsonl").write_text(journal[0] + "\n")
    run_experiment(cfg, part, resume=True)
    assert (part / "results.csv").read_bytes() == (tmp_path / "full" / "results.csv").read_bytes()
    assert len((part / "cells.jsonl").read_text().splitlines()) == len(journal)


def test_failures_are_recorded_not_raised(tmp_path):
    # complete case cannot predict incomplete test rows: every cell records an error row
    cfg = ExperimentConfig.from_dict({**SMALL, "methods": ["CC", "Mean.IMP"]})
    rows = run_experiment(cfg, tmp_path)
    counts = {}
    for r in rows:
        counts[r["method"]] = counts.get(r["method"], 0) + 1
    assert counts == {"CC": 4, "Mean.IMP": 4}
    assert all(r["status"].startswith("error: UnsupportedPredictionError") for r in rows if r["method"] == "CC")
    overall, _ = summarize(_read(tmp_path / "results.csv"), ("method", "n"))
    assert {r["method"] for r in overall} == {"Mean.IMP"}


def test_params_sidecar_reproduces_population(tmp_path):
    cfg = ExperimentConfig.from_dict({**SMALL, "scenario": {"kind": "MNAR"}, "replicates": 1, "train_sizes": [200]})
    run_experiment(cfg, tmp_path)
    params = json.loads((tmp_path / "params.json").read_text())
    np.testing.assert_array_equal(params["beta_star"], cfg.scenario.beta)
    mix = PatternMixture.from_dict(params["mixture"])
    assert len(mix.by_key) == 31
    assert ExperimentConfig.from_dict(params["config"]) == cfg


def _fake(method, n, rep, value, status="ok"):
    return {"scenario": "MCAR", "method": method, "n": str(n), "replicate": str(rep), "status": status,
            "excess_misclassification": repr(value), "mae_bayes": repr(value), "mcb_delta": "0.0",
            "coef_mse": "", "mae_pattern_00001": repr(value)}


def test_summary_two_point_and_single_replicate():
    rows = [_fake("PbP", 500, 0, 0.1), _fake("PbP", 500, 1, 0.3), _fake("SAEM", 500, 0, 0.2)]
    overall, patterns = summarize(rows, ("method", "n"))
    pbp, saem = overall
    assert pbp["mae_bayes_mean"] == pytest.approx(0.2) and pbp["mae_bayes_se"] == pytest.approx(0.1)
    assert saem["mae_bayes_se"] == 0.0 and saem["replicates"] == 1
    assert pbp["coef_mse_mean"] is None
    assert patterns[0]["pattern"] == "00001" and patterns[0]["mae_bayes_mean"] == pytest.approx(0.2)


def test_summary_table_layout():
    methods, sizes = ["Mean.IMP", "PbP", "SAEM"], [500, 5000, 20000]
    rows = [_fake(m, n, r, 0.01 * (i + 1)) for i, m in enumerate(methods) for n in sizes for r in range(3)]
    overall, _ = summarize(rows[::-1], ("method", "n"))
    assert [(r["method"], int(r["n"])) for r in overall] == [(m, n) for m in methods for n in sizes]
    assert all(r["replicates"] == 3 for r in overall)


def test_oracle_check_report():
    report = oracle_check(ExperimentConfig.from_dict({**SMALL, "oracle_mc_k": 4000}), rows=60)
    assert report["passed"] and report["probit"]["violations"] == 0
    skipped = oracle_check(ExperimentConfig.from_dict({**SMALL, "scenario": {"kind": "NONLINEAR"}}))
    assert "skipped" in skipped


def test_cli_commands(tmp_path, capsys):
    cfg_path = tmp_path / "cfg.json"
    cfg_path.write_text(json.dumps({**SMALL, "replicates": 1, "train_sizes": [300]}))
    out = tmp_path / "out"
    assert main(["run", "--config", str(cfg_path), "--out", str(out)]) == 0
    assert main(["summarize", "--in", str(out), "--group", "method,n"]) == 0
    assert len(_read(out / "summary.csv")) == 2
    assert _read(out / "summary_patterns.csv")
    assert main(["oracle-check", "--config", str(cfg_path), "--rows", "20"]) == 0
    ill = tmp_path / "ill.csv"
    assert main(["illustrate-2d", "--out", str(ill), "--k", "2000"]) == 0
    assert len(_read(ill)) == 161
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({**SMALL, "extra": True}))
    assert main(["run", "--config", str(bad), "--out", str(out)]) == 2
    assert "unknown config keys" in capsys.readouterr().err


def test_summarize_dir_writes_files(tmp_path):
    cfg = ExperimentConfig.from_dict({**SMALL, "replicates": 1, "train_sizes": [300]})
    run_experiment(cfg, tmp_path)
    overall, patterns = summarize_dir(tmp_path, ("method",))
    assert overall.exists() and patterns.exists()
