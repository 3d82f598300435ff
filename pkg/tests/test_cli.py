"""Command-line interface: outputs, determinism, exit codes, config merging."""

import numpy as np
import pandas as pd
import pytest
from click.testing import CliRunner

from biasadjust.cli import EXIT_CONFIG, EXIT_DATA, main
from biasadjust.simgen import generate_ideal, realistic_scenario, to_observed


@pytest.fixture()
def runner():
    return CliRunner()


def run(runner, *args):
    return runner.invoke(main, list(args), catch_exceptions=False)


def test_seed_required(runner, tmp_path):
    res = runner.invoke(main, ["generate", "--out", str(tmp_path), "--n", "100"])
    assert res.exit_code == EXIT_CONFIG
    assert "seed" in res.output


def test_generate_deterministic(runner, tmp_path):
    d1, d2 = tmp_path / "a", tmp_path / "b"
    for out in (d1, d2):
        res = run(runner, "generate", "--seed", "7", "--n", "500",
                  "--out", str(out))
        assert res.exit_code == 0
    f1 = (d1 / "realistic_observed.csv").read_bytes()
    f2 = (d2 / "realistic_observed.csv").read_bytes()
    assert f1 == f2
    assert (d1 / "manifest.txt").exists()


def test_generate_ideal_form(runner, tmp_path):
    res = run(runner, "generate", "--seed", "3", "--n", "300",
              "--ideal", "--out", str(tmp_path))
    assert res.exit_code == 0
    frame = pd.read_csv(tmp_path / "realistic_ideal.csv")
    for col in ("u", "a_true", "y_true", "e"):
        assert col in frame.columns
    assert len(frame) == 300


def test_simulate_smoke_outputs(runner, tmp_path):
    res = run(runner, "simulate", "--seed", "11", "--reps", "3",
              "--n", "2000", "--out", str(tmp_path))
    assert res.exit_code == 0
    perf = pd.read_csv(tmp_path / "performance_realistic_correct.csv")
    assert set(perf["estimand"]) == {"rd", "log_rr"}
    assert "All biases" in set(perf["method"])
    est = pd.read_csv(tmp_path / "estimates.csv")
    assert est["replicate"].nunique() == 3
    manifest = (tmp_path / "manifest.txt").read_text()
    assert "rd_true" in manifest and "seed: 11" in manifest


def test_simulate_unknown_arm(runner, tmp_path):
    res = runner.invoke(main, ["simulate", "--seed", "1", "--reps", "2",
                               "--arms", "bogus", "--out", str(tmp_path)])
    assert res.exit_code == EXIT_CONFIG


def test_oracle_rejects_small_population(runner, tmp_path):
    res = runner.invoke(main, ["oracle", "--seed", "1", "--n", "1000",
                               "--out", str(tmp_path)])
    assert res.exit_code == EXIT_CONFIG


def test_qba_missing_dataset_file(runner, tmp_path):
    res = runner.invoke(main, ["qba", "--seed", "1", "--dataset",
                               str(tmp_path / "nope.csv"), "--out", str(tmp_path)])
    assert res.exit_code == EXIT_DATA


def test_qba_requires_dataset(runner, tmp_path):
    res = runner.invoke(main, ["qba", "--seed", "1", "--out", str(tmp_path)])
    assert res.exit_code == EXIT_CONFIG


def test_qba_smoke(runner, tmp_path):
    observed = to_observed(generate_ideal(realistic_scenario(), seed=404, n=2500))
    data_path = tmp_path / "obs.csv"
    observed.to_csv(data_path)
    res = run(runner, "qba", "--seed", "21", "--dataset", str(data_path),
              "--draws", "8", "--out", str(tmp_path))
    assert res.exit_code == 0
    est = pd.read_csv(tmp_path / "estimates.csv")
    assert list(est["approach"][:2]) == ["Primary analysis",
                                         "Simultaneous bias adjustment"]
    one = est[est["approach"] == "One-at-a-time bias adjustment"]
    assert set(one["biases"]) == {"CB", "MB-A", "MB-Y", "SB-collider",
                                  "SB-generalizability(E)",
                                  "SB-generalizability(S)"}
    assert (est["rd_lo"] <= est["rd"]).all() and (est["rd"] <= est["rd_hi"]).all()
    assert (est["rr_lo"] <= est["rr"]).all() and (est["rr"] <= est["rr_hi"]).all()


def test_config_file_and_flag_override(runner, tmp_path):
    cfg = tmp_path / "run.yaml"
    cfg.write_text("seed: 5\nn: 400\nscenario: realistic\n")
    out1, out2 = tmp_path / "o1", tmp_path / "o2"
    r1 = run(runner, "generate", "--config", str(cfg), "--out", str(out1))
    # flag overrides config n
    r2 = run(runner, "generate", "--config", str(cfg), "--n", "200",
             "--out", str(out2))
    assert r1.exit_code == 0 and r2.exit_code == 0
    ideal_fraction = len(pd.read_csv(out1 / "realistic_observed.csv"))
    assert 300 <= ideal_fraction <= 400
    assert len(pd.read_csv(out2 / "realistic_observed.csv")) <= 200


def test_unknown_config_key(runner, tmp_path):
    cfg = tmp_path / "bad.yaml"
    cfg.write_text("seed: 5\nbogus_key: 1\n")
    res = runner.invoke(main, ["generate", "--config", str(cfg),
                               "--out", str(tmp_path)])
    assert res.exit_code == EXIT_CONFIG


def test_unknown_scenario_name(runner, tmp_path):
    res = runner.invoke(main, ["generate", "--seed", "1", "--scenario",
                               "nonexistent", "--out", str(tmp_path)])
    assert res.exit_code == EXIT_CONFIG


def test_scenario_yaml_file(runner, tmp_path):
    scen = tmp_path / "scen.yaml"
    scen.write_text("kind: enhanced\np_e: 0.70\n")
    res = run(runner, "generate", "--seed", "2", "--n", "200",
              "--scenario", str(scen), "--out", str(tmp_path))
    assert res.exit_code == 0
    assert (tmp_path / "enhanced_observed.csv").exists()
