"""End-to-end command-line checks (subprocess where exit codes matter)."""

import json
import subprocess
import sys

import numpy as np
import pytest

from shelvesim import build_scheme, cli
from shelvesim.baselines import oracle_filename
from shelvesim.records import CSV_HEADER
from shelvesim.schemes import serialize_scheme


def shelvesim_cli(*argv, cwd=None):
    return subprocess.run([sys.executable, "-m", "shelvesim.cli", *map(str, argv)],
                          capture_output=True, text=True, cwd=cwd)


def test_run_zero_horizon(tmp_path):
    out = tmp_path / "out"
    proc = shelvesim_cli("run", "--t-max", 0, "--out", out)
    assert proc.returncode == 0, proc.stderr
    assert (out / "emissions.csv").read_text() == CSV_HEADER + "\n"
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["t_max"] == 0.0
    assert manifest["n_trajectories"] == 1
    assert manifest["engine"] == "nrules"
    assert manifest["emissions"] == "emissions.csv"


def test_run_outputs_are_reproducible(tmp_path):
    args = ("run", "--trajectories", 2, "--t-max", 4000, "--seed", 5)
    a, b = tmp_path / "a", tmp_path / "b"
    assert shelvesim_cli(*args, "--out", a).returncode == 0
    assert shelvesim_cli(*args, "--out", b).returncode == 0
    assert (a / "emissions.csv").read_bytes() == (b / "emissions.csv").read_bytes()
    assert (a / "manifest.json").read_bytes() == (b / "manifest.json").read_bytes()
    lines = (a / "emissions.csv").read_text().splitlines()
    assert len(lines) > 100  # a real bright signal, not an empty file


def test_run_config_file_and_flag_precedence(tmp_path):
    cfg = tmp_path / "job.cfg"
    cfg.write_text("rabi_onset = immediate\ntrajectories = 3\nt_max = 500\n")
    out = tmp_path / "out"
    proc = shelvesim_cli("run", "--scheme", cfg, "--out", out)
    assert proc.returncode == 0, proc.stderr
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["n_trajectories"] == 3
    assert manifest["t_max"] == 500.0
    assert "rabi_onset = immediate" in manifest["scheme"]

    out2 = tmp_path / "out2"
    proc = shelvesim_cli("run", "--scheme", cfg, "--t-max", 800, "--out", out2)
    assert proc.returncode == 0
    assert json.loads((out2 / "manifest.json").read_text())["t_max"] == 800.0


def test_run_rejects_bad_scheme_file(tmp_path):
    bad = tmp_path / "bad.cfg"
    bad.write_text("gamma_strong -1\n")
    assert shelvesim_cli("run", "--scheme", bad).returncode == 2
    bad.write_text("gamma_strong = -1\n")
    assert shelvesim_cli("run", "--scheme", bad).returncode == 2
    bad.write_text("engine = warp\n")
    assert shelvesim_cli("run", "--scheme", bad).returncode == 2
    assert shelvesim_cli("run", "--scheme", tmp_path / "nope.cfg").returncode == 2


def test_oracle_writes_hash_named_file(tmp_path):
    proc = shelvesim_cli("oracle", "--out", tmp_path)
    assert proc.returncode == 0, proc.stderr
    path = tmp_path / oracle_filename(build_scheme())
    payload = json.loads(path.read_text())
    assert set(payload) == {"beta1", "lambda2", "weight"}
    assert all(np.isfinite(v) for v in payload.values())
    assert "beta1=" in proc.stdout


def test_oracle_fallback_regime(tmp_path):
    cfg = tmp_path / "tiny.cfg"
    cfg.write_text("gamma_weak = 1e-9\nomega_weak = 1e-4\n")
    proc = shelvesim_cli("oracle", "--scheme", cfg, "--out", tmp_path)
    assert proc.returncode == 0, proc.stderr
    [path] = tmp_path.glob("oracle_*.json")
    assert json.loads(path.read_text())["lambda2"] < 1e-6


def test_oracle_rejects_trapped_configuration(tmp_path):
    cfg = tmp_path / "lam.cfg"
    cfg.write_text("configuration = lambda\n")
    proc = shelvesim_cli("oracle", "--scheme", cfg, "--out", tmp_path)
    assert proc.returncode == 3
    assert "trapped" in proc.stderr


def test_analyze_missing_emissions(tmp_path):
    proc = shelvesim_cli("analyze", "--emissions", tmp_path / "none.csv")
    assert proc.returncode == 2


def test_analyze_bad_threshold(tmp_path):
    out = tmp_path / "out"
    assert shelvesim_cli("run", "--t-max", 0, "--out", out).returncode == 0
    proc = shelvesim_cli("analyze", "--emissions", out / "emissions.csv",
                         "--gap-threshold", -5)
    assert proc.returncode == 4


def test_analyze_empty_run(tmp_path):
    out = tmp_path / "out"
    assert shelvesim_cli("run", "--trajectories", 3, "--t-max", 0,
                         "--out", out).returncode == 0
    proc = shelvesim_cli("analyze", "--emissions", out / "emissions.csv")
    assert proc.returncode == 0, proc.stderr
    report = json.loads((out / "report.json").read_text())
    assert report["n_trajectories"] == 3
    assert report["n_events"] == 0
    # nothing ever fired: every trajectory is one all-dark period
    assert report["segmentation"]["n_dark"] == 3
    assert report["segmentation"]["n_bright"] == 0
    assert "skipped" in report["waiting_fits"]["strong"]
    assert report["dark"]["count"] == 0 and report["dark"]["rate"] is None


def test_full_pipeline_passes_oracle_checks(tmp_path):
    """run -> oracle -> analyze on a bright/dark ensemble; every check green."""
    cfg = tmp_path / "scheme.cfg"
    cfg.write_text("rabi_onset = immediate\n")
    out = tmp_path / "out"
    proc = shelvesim_cli("run", "--scheme", cfg, "--trajectories", 10,
                         "--t-max", 1_000_000, "--seed", 0, "--out", out)
    assert proc.returncode == 0, proc.stderr
    assert shelvesim_cli("oracle", "--scheme", cfg, "--out", out).returncode == 0
    [oracle_path] = out.glob("oracle_*.json")
    proc = shelvesim_cli("analyze", "--emissions", out / "emissions.csv",
                         "--oracle", oracle_path, "--gap-threshold", 150)
    assert proc.returncode == 0, proc.stderr

    report = json.loads((out / "report.json").read_text())
    names = {c["name"]: c["pass"] for c in report["checks"]}
    assert set(names) == {"strong_fast_rate_vs_oracle",
                          "strong_slow_rate_vs_oracle",
                          "dark_mean_vs_oracle",
                          "weak_after_dark_ordering"}
    assert report["pass"] is True and all(names.values())
    assert report["ordering"]["fraction_expected"] == 1.0
    assert report["waiting_fits"]["strong"]["n_samples"] > 10_000
    assert (out / "waiting_strong_hist.csv").exists()
    assert (out / "waiting_weak_hist.csv").exists()


def test_ordering_check_for_lambda_configuration(tmp_path):
    cfg = tmp_path / "scheme.cfg"
    cfg.write_text("configuration = lambda\nomega_weak = 0.05\n")
    out = tmp_path / "out"
    proc = shelvesim_cli("run", "--scheme", cfg, "--trajectories", 12,
                         "--t-max", 20_000, "--seed", 42, "--out", out)
    assert proc.returncode == 0, proc.stderr
    proc = shelvesim_cli("analyze", "--emissions", out / "emissions.csv",
                         "--gap-threshold", 150)
    assert proc.returncode == 0, proc.stderr
    report = json.loads((out / "report.json").read_text())
    assert report["ordering"]["expected"] == "before"
    [check] = [c for c in report["checks"] if c["name"] == "weak_before_dark_ordering"]
    assert check["pass"] is True
    assert report["pass"] is True


def test_run_and_analyze_survive_random_schemes(tmp_path):
    """Property check, in-process for speed: the pipeline never crashes on
    valid schemes even when the statistics are too thin for any fit."""
    rng = np.random.default_rng(2026)
    configs = ["v", "lambda", "cascadeup", "cascadedown"]
    for i in range(5):
        gs = float(rng.uniform(0.5, 2.0))
        scheme = build_scheme(
            config=configs[int(rng.integers(4))],
            gamma_strong=gs,
            gamma_weak=gs * float(rng.uniform(0.002, 0.05)),
            omega_strong=float(rng.uniform(0.1, 0.4)),
            omega_weak=float(rng.uniform(0.001, 0.05)),
            rabi_onset=["immediate", "delayed"][int(rng.integers(2))],
        )
        cfg = tmp_path / f"s{i}.cfg"
        cfg.write_text(serialize_scheme(scheme))
        out = tmp_path / f"o{i}"
        assert cli.main(["run", "--scheme", str(cfg), "--trajectories", "2",
                         "--t-max", "400", "--seed", str(i),
                         "--out", str(out)]) == 0
        assert cli.main(["analyze", "--emissions", str(out / "emissions.csv")]) == 0
        assert (out / "report.json").exists()
