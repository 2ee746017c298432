import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from tlgamp import cli
from tlgamp.config import load_config
from tlgamp.harness import run_trial, trial_seed

SMALL = """
scenario.n_rx = 64
scenario.n_tx = 8
scenario.n_paths = 2
protocol.n_slots = 4
protocol.n_rf = 8
protocol.aod_mode = oracle
harness.n_trials = 3
harness.workers = 1
gamp.max_iter = 8
sweep.snr = [0, 20]
sweep.pilot = [16, 32]
"""


@pytest.fixture
def small_cfg(tmp_path):
    p = tmp_path / "small.cfg"
    p.write_text(SMALL)
    return p


def test_validate_prints_resolved_config(small_cfg, capsys):
    assert cli.main(["validate", str(small_cfg)]) == 0
    out = capsys.readouterr().out
    assert "scenario.n_rx = 64" in out and "gamp.xi = 0.1" in out


@pytest.mark.parametrize("extra", ["protocol.pilot_length = 40", "scenario.phi = 1.5", "bogus.key = 1"])
def test_config_errors_exit_1(tmp_path, extra, capsys):
    p = tmp_path / "bad.cfg"
    p.write_text(SMALL + extra + "\n")
    assert cli.main(["validate", str(p)]) == 1
    assert "error:" in capsys.readouterr().err


def test_missing_file_exit_1(tmp_path, capsys):
    assert cli.main(["sweep", str(tmp_path / "nope.cfg"), "--axis", "snr"]) == 1
    assert "not found" in capsys.readouterr().err


def test_seed_precedence(small_cfg, monkeypatch, capsys):
    monkeypatch.setenv(cli.SEED_ENV, "77")
    cli.main(["validate", str(small_cfg)])
    assert "harness.base_seed = 77" in capsys.readouterr().out
    cli.main(["validate", str(small_cfg), "--seed", "5"])
    assert "harness.base_seed = 5" in capsys.readouterr().out
    monkeypatch.setenv(cli.SEED_ENV, "x")
    assert cli.main(["validate", str(small_cfg)]) == 1


def test_estimate_dump_is_bit_exact(small_cfg, tmp_path):
    out = tmp_path / "dump"
    assert cli.main(["estimate", str(small_cfg), "--out", str(out), "--seed", "3", "--trial", "1"]) == 0
    names = sorted(p.name for p in out.iterdir())
    assert names == sorted(["manifest.json", "summary.csv"] + [f"path{l}{s}.csv" for l in range(2)
                                                                for s in ("", "_angular", "_trace")])
    cfg = load_config(small_cfg)
    cfg.harness.base_seed = 3
    ref = run_trial(cfg, trial_seed(3, 1), keep_details=True)
    for l in range(2):
        with open(out / f"path{l}.csv") as fh:
            rows = list(csv.DictReader(fh))
        assert tuple(rows[0]) == cli.PATH_COLUMNS
        t = np.array([complex(float(r["t_hat_re"]), float(r["t_hat_im"])) for r in rows])
        np.testing.assert_array_equal(t, ref.details["estimates"][l].t_hat)
    with open(out / "summary.csv") as fh:
        assert next(csv.reader(fh)) == list(cli.SUMMARY_COLUMNS)
    with open(out / "path0_angular.csv") as fh:
        assert next(csv.reader(fh)) == list(cli.ANGULAR_COLUMNS)
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["trial_seed"] == trial_seed(3, 1)


def test_estimate_divergence_exit_2(small_cfg, tmp_path, monkeypatch):
    def diverging(cfg, seed, keep_details=False):
        r = run_trial(cfg, seed, keep_details)
        r.diverged["tl_gamp"] = True
        return r

    monkeypatch.setattr(cli, "run_trial", diverging)
    out = tmp_path / "dump"
    assert cli.main(["estimate", str(small_cfg), "--out", str(out)]) == 2
    assert (out / "summary.csv").exists()


def test_unwritable_output_exit_3(small_cfg, tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("")
    assert cli.main(["estimate", str(small_cfg), "--out", str(blocker / "dump")]) == 3
    assert cli.main(["sweep", str(small_cfg), "--axis", "snr", "--out", str(blocker / "s.csv")]) == 3


def test_sweep_csv_rows_and_rerun_bytes(small_cfg, tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert cli.main(["sweep", str(small_cfg), "--axis", "snr", "--out", str(a)]) == 0
    assert cli.main(["sweep", str(small_cfg), "--axis", "snr", "--out", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()
    rows = list(csv.DictReader(open(a)))
    assert len(rows) == 2 * 3 and {r["estimator"] for r in rows} == {"tl_gamp", "ls", "oracle_vr"}
    manifest = json.loads(a.with_suffix(".manifest.json").read_text())
    assert manifest["axis"] == "snr" and len(manifest["trial_seeds"]) == 3


def test_sweep_iterations_and_pilot_axes(small_cfg, tmp_path):
    it = tmp_path / "it.csv"
    assert cli.main(["sweep", str(small_cfg), "--axis", "iterations", "--out", str(it)]) == 0
    assert len(it.read_text().splitlines()) == 1 + 8
    assert cli.main(["sweep", str(small_cfg), "--axis", "pilot", "--out", str(tmp_path / "p.csv")]) == 0
    assert cli.main(["sweep", str(small_cfg), "--axis", "snr", "--workers", "0"]) == 1


def test_module_entry_point(small_cfg):
    r = subprocess.run([sys.executable, "-m", "tlgamp", "validate", str(small_cfg)], capture_output=True, text=True)
    assert r.returncode == 0 and "scenario.n_tx = 8" in r.stdout
    r = subprocess.run([sys.executable, "-m", "tlgamp", "sweep", str(small_cfg), "--axis", "nope"],
                       capture_output=True, text=True)
    assert r.returncode == 1 and "invalid choice" in r.stderr
