import json
import subprocess
import sys

import pytest

from heavytail import cli, io

FAST = {
    "fit": "data.synth_count = 2000\n",
    "var-sweep": "dist.family = normal\nmc_count = 20000\nn_sweep = 1..10\nlevels = 0.99\nsweep.expect = decreasing\n",
    "bootstrap": "dist.family = lognormal\ndist.log_mean = 0\ndist.log_stdev = 1\ndata.synth_count = 300\n"
                 "n_sweep = 1, 5\nlevels = 0.99\nbootstrap.inner_reps = 2000\nbootstrap.outer_reps = 10\n"
                 "sweep.expect = decreasing\n",
    "schur-scan": "dist.family = stable\ndist.alpha = 0.7\nmc_count = 200000\nlevels = 0.99\n"
                  "scan.expect = increasing-toward-equal\n",
    "trunc-scan": "dist.family = stable\ndist.alpha = 0.7\nmc_count = 1000000\n",
    "copula-check": "mc_count = 200000\n",
    "eu-sweep": "mc_count = 20000\nn_sweep = 1..40\n",
}


def run(tmp_path, command, body, *extra):
    cfg = tmp_path / f"{command}.cfg"
    cfg.write_text(body, encoding="utf-8")
    out = tmp_path / "out"
    code = cli.main([command, "--config", str(cfg), "--out", str(out), *extra])
    return code, out


@pytest.mark.parametrize("command", list(FAST))
def test_every_subcommand_writes_results_and_manifest(tmp_path, command):
    code, out = run(tmp_path, command, FAST[command], "--seed", "11")
    assert code == 0
    rows = io.read_results(out / f"{command}.csv")
    assert rows and all(r.experiment == command for r in rows)
    manifest = json.loads((out / f"{command}.manifest.json").read_text())
    assert manifest["seed"] == 11 and manifest["exit_code"] == 0
    assert len(manifest["config_hash"]) == 64


def test_schur_scan_verdict_column(tmp_path):
    code, out = run(tmp_path, "schur-scan", FAST["schur-scan"], "--assert")
    assert code == 0
    verdicts = [r.verdict for r in io.read_results(out / "schur-scan.csv") if r.metric == "verdict"]
    assert verdicts == ["increasing-toward-equal"]


def test_var_sweep_normal_fit_is_strictly_decreasing(tmp_path):
    body = "dist.family = normal\ndist.mean = 10\ndist.stdev = 3\nsweep.fit = normal\ndata.synth_count = 2000\n" \
           "mc_count = 100000\nn_sweep = 1..20\nlevels = 0.995\n"
    code, out = run(tmp_path, "var-sweep", body, "--assert")
    assert code == 0
    rows = io.read_results(out / "var-sweep.csv")
    trend = [r for r in rows if r.metric == "trend:VaR@0.995"]
    assert trend[0].verdict == "strictly-decreasing"
    values = [r.estimate for r in rows if r.metric == "VaR@0.995"]
    assert all(a > b for a, b in zip(values, values[1:]))


def test_repeated_runs_are_byte_identical(tmp_path, monkeypatch):
    body = FAST["schur-scan"]
    _, first = run(tmp_path, "schur-scan", body, "--seed", "3")
    a = (first / "schur-scan.csv").read_bytes()
    monkeypatch.setenv("HEAVYTAIL_SEED", "3")
    (first / "schur-scan.csv").unlink()
    code = cli.main(["schur-scan", "--config", str(tmp_path / "schur-scan.cfg"), "--out", str(first)])
    assert code == 0
    assert (first / "schur-scan.csv").read_bytes() == a


def test_failed_assertion_exit_code(tmp_path):
    body = FAST["schur-scan"].replace("increasing-toward-equal", "decreasing-toward-equal")
    code, out = run(tmp_path, "schur-scan", body, "--assert")
    assert code == cli.EXIT_ASSERT
    assert json.loads((out / "schur-scan.manifest.json").read_text())["exit_code"] == 3
    code, _ = run(tmp_path, "schur-scan", body)
    assert code == 0


def test_validation_error_exit_code(tmp_path, capsys):
    code, _ = run(tmp_path, "fit", "dist.family = weibull\n")
    assert code == cli.EXIT_INVALID
    assert "weibull" in capsys.readouterr().err


def test_signed_data_rejected_with_validation_code(tmp_path):
    code, _ = run(tmp_path, "bootstrap", "dist.family = normal\ndata.synth_count = 100\n")
    assert code == cli.EXIT_INVALID


def test_missing_config_file(tmp_path):
    assert cli.main(["fit", "--config", str(tmp_path / "nope.cfg")]) == cli.EXIT_INVALID


def test_unknown_subcommand_is_usage_error():
    with pytest.raises(SystemExit) as info:
        cli.main(["frobnicate"])
    assert info.value.code == cli.EXIT_USAGE


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "heavytail", "--help"], capture_output=True, text=True)
    assert proc.returncode == 0
    assert "eu-sweep" in proc.stdout
