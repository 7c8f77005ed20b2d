import json

import pytest

from spmbench.cli import EXIT_CONFIG, EXIT_DEGENERATE, EXIT_INFEASIBLE, EXIT_MISSING, EXIT_OK, main
from spmbench.params import NOMINAL_PARAMETERS

SMALL = {"cases": [29, 31], "scenarios": [1, 29, 31],
         "swarm": {"n_particles": 6, "n_iterations": 3},
         # a narrow box keeps the tiny swarm's fits feasible on every scenario
         "search_space": {"scale": [0.95, 1.05]}}


def _config(tmp_path, extra=None, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps({**SMALL, "out": str(tmp_path / "run"), **(extra or {})}))
    return path


@pytest.fixture(scope="module")
def campaign(tmp_path_factory):
    tmp = tmp_path_factory.mktemp("campaign")
    cfg = _config(tmp)
    for cmd in ("synth", "estimate", "validate", "analyze", "report"):
        assert main([cmd, "--config", str(cfg), "-q"]) == EXIT_OK, cmd
    return tmp, cfg


def test_campaign_outputs(campaign):
    tmp, _ = campaign
    out = tmp / "run"
    for name in ("manifest.json", "scenarios.json", "rmse_matrix.csv", "rmse_flags.json", "cases.json",
                 "cost_table.csv", "optima.json", "levels.json", "report.txt"):
        assert (out / name).exists(), name
    for d in ("C_5", "C_2", "1C", "P", "DST"):
        assert (out / "base" / f"{d}.csv").exists()
    assert sorted(p.name for p in (out / "scenarios").glob("*.csv")) == \
        ["scenario_01.csv", "scenario_29.csv", "scenario_31.csv"]
    assert len(json.loads((out / "scenarios.json").read_text())) == 31
    header = (out / "rmse_matrix.csv").read_text().splitlines()[0]
    assert header == "case,1,29,31"
    case = json.loads((out / "cases" / "case_29.json").read_text())
    assert case["members"] == ["1C"]
    assert len(case["result"]["history"]) == 3
    levels = json.loads((out / "levels.json").read_text())
    assert {"L0", "L1", "L2", "L3", "L4", "L5", "L6", "L7", "swap_rule"} <= set(levels)
    assert "Optimal datasets" in (out / "report.txt").read_text()


def test_synth_is_reproducible(campaign, tmp_path):
    tmp, _ = campaign
    first = json.loads((tmp / "run" / "manifest.json").read_text())
    assert main(["synth", "--config", str(_config(tmp_path)), "-q"]) == EXIT_OK
    second = json.loads((tmp_path / "run" / "manifest.json").read_text())
    assert first == second


def test_estimate_is_reproducible(campaign, tmp_path):
    tmp, cfg = campaign
    out = tmp_path / "again"
    assert main(["synth", "--config", str(cfg), "--out", str(out), "--cases", "29", "-q"]) == EXIT_OK
    assert main(["estimate", "--config", str(cfg), "--out", str(out), "--cases", "29", "-q"]) == EXIT_OK
    a = json.loads((tmp / "run" / "cases" / "case_29.json").read_text())
    b = json.loads((out / "cases" / "case_29.json").read_text())
    assert a["result"]["theta_star"] == b["result"]["theta_star"]
    assert a["result"]["history"] == b["result"]["history"]
    assert a["dataset_sha256"] == b["dataset_sha256"]


def test_analyze_published_metrics(campaign, tmp_path, published_metrics_path):
    _, cfg = campaign
    out = tmp_path / "published"
    rc = main(["analyze", "--config", str(cfg), "--out", str(out), "--metrics", str(published_metrics_path), "-q"])
    assert rc == EXIT_OK
    optima = {o["option"]: o["case"] for o in json.loads((out / "optima.json").read_text())}
    assert optima == {"O1": 1, "O2": 4, "O3": 29, "O4": 3, "O5": 21, "O6": 29, "O7": 3}
    assert main(["report", "--config", str(cfg), "--out", str(out), "-q"]) == EXIT_OK
    assert "Balanced" in (out / "report.txt").read_text()


def test_exit_config(tmp_path):
    assert main(["synth", "--config", str(tmp_path / "missing.json"), "-q"]) == EXIT_CONFIG
    assert main(["synth", "--config", str(_config(tmp_path, {"limits": {"v_min": 9}})), "-q"]) == EXIT_CONFIG
    assert main(["synth", "--cases", "40", "--out", str(tmp_path), "-q"]) == EXIT_CONFIG


def test_exit_infeasible(tmp_path):
    truth = NOMINAL_PARAMETERS.replace(soc0_pos=0.99).to_dict()
    assert main(["synth", "--config", str(_config(tmp_path, {"ground_truth": truth})), "-q"]) == EXIT_INFEASIBLE


def test_exit_missing(tmp_path):
    cfg = str(_config(tmp_path))
    for cmd in ("estimate", "validate", "analyze", "report"):
        assert main([cmd, "--config", cfg, "-q"]) == EXIT_MISSING, cmd
    assert main(["analyze", "--config", cfg, "--metrics", str(tmp_path / "none.csv"), "-q"]) == EXIT_MISSING


def test_exit_degenerate(tmp_path):
    cfg = str(_config(tmp_path))
    out = tmp_path / "run"
    out.mkdir()
    (out / "rmse_matrix.csv").write_text("case,1,29\n")
    assert main(["report", "--config", cfg, "-q"]) == EXIT_DEGENERATE
    assert main(["analyze", "--config", cfg, "-q"]) == EXIT_DEGENERATE
    flat = tmp_path / "flat.csv"
    flat.write_text("case,e_y,e_theta,t_total\n1,0.01,5,3\n2,0.01,6,4\n")
    assert main(["analyze", "--config", cfg, "--metrics", str(flat), "-q"]) == EXIT_DEGENERATE
