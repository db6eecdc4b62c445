import subprocess
import sys

import numpy as np
import pytest

from kinreg import cli, config, harness, io

SMALL = {
    "grid": {"nx": 64, "T": 0.1},
    "output": {"stride": 2},
    "regularity": {"fit_lo": 1, "fit_hi": 4},
    "nondeg": {"sphere_samples": 64, "lambda_grid": 1024, "delta_points": 8},
}

SMALL_INI = """
[grid]
nx = 64
T = 0.1
[output]
stride = 2
[regularity]
fit_lo = 1
fit_hi = 4
[nondeg]
sphere_samples = 64
lambda_grid = 1024
delta_points = 8
"""


@pytest.fixture
def small_ini(tmp_path):
    path = tmp_path / "run.ini"
    path.write_text(SMALL_INI)
    return path


def run(argv, capsys):
    code = cli.main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def test_exponents_command(capsys):
    code, out, _ = run(["exponents", "--alpha", "1/2", "--d", "2", "--deterministic"], capsys)
    assert code == 0
    assert "q_star=25/13" in out and "two_s_star=1/75" in out


def test_validate_rejects_bad_grid(tmp_path, capsys):
    bad = tmp_path / "bad.ini"
    bad.write_text("[grid]\nnx = 0\n")
    code, _, err = run(["validate", "--config", bad], capsys)
    assert code == 1
    assert "code=E_CONFIG" in err and "key=grid.nx" in err


def test_validate_ok(small_ini, capsys):
    code, out, _ = run(["validate", "--config", small_ini], capsys)
    assert code == 0
    assert f"config ok hash={config.parse_text(SMALL_INI).hash}" in out


def test_nondeg_command(tmp_path, capsys):
    out_csv = tmp_path / "nd.csv"
    code, out, _ = run(["nondeg", "--model", "burgers", "--sphere-samples", "64", "--output", out_csv], capsys)
    assert code == 0 and out_csv.exists()
    _, header, rows = io.read_csv(out_csv)
    assert header == ["delta", "sup_measure"] and len(rows) == 12


def test_solve_kinetic_regularity_pipeline(small_ini, tmp_path, capsys):
    out = tmp_path / "out"
    code, printed, _ = run(["solve", "--config", small_ini, "--set", "grid.T=0.02", "--output-dir", out], capsys)
    assert code == 0
    snap = out / "solution.krg"
    assert snap.exists() and (out / "solution_summary.csv").exists()
    info, header, rows = io.read_csv(out / "solution_summary.csv")
    assert header == harness.SUMMARY_HEADER
    masses = [float(r[1]) for r in rows]
    assert max(masses) - min(masses) < 1e-12
    expected = config.parse_text(SMALL_INI).with_overrides({"grid": {"T": 0.02}}).hash
    assert info["config_hash"] == expected

    code, _, _ = run(["kinetic", "--input", snap, "--rho", "one", "--n-lambda", "64"], capsys)
    assert code == 0
    _, header, rows = io.read_csv(out / "averaged.csv")
    assert header == ["t", "x", "y", "average"]
    sol = io.read_snapshots(snap)
    avg = np.array([float(r[3]) for r in rows]).reshape(sol.snapshots.shape)
    lo, hi = sol.meta["interval"]
    assert np.max(np.abs(avg - sol.snapshots)) <= (hi - lo) / 64 + 1e-12
    _, header, rows = io.read_csv(out / "dissipation.csv")
    assert header == ["t", "dissipation"] and all(float(r[1]) >= 0 for r in rows)

    code, printed, _ = run(["regularity", "--input", snap, "--mode", "space", "--alpha", "1/2",
                            "--fit-window", "1", "4", "--output", out / "blocks.csv"], capsys)
    assert code == 0
    assert printed.strip().startswith("s_est=") and "s_star=0.013333" in printed


def test_regularity_command_reports_resolution_failure(small_ini, tmp_path, capsys):
    out = tmp_path / "o"
    run(["solve", "--config", small_ini, "--set", "grid.nx=16", "--set", "grid.T=0.01", "--output-dir", out], capsys)
    code, _, err = run(["regularity", "--input", out / "solution.krg", "--alpha", "1/2"], capsys)
    assert code == 2 and "code=E_RESOLUTION" in err


def test_power_law_rows():
    cfg = config.from_dict(SMALL)
    r11 = harness.reproduce_corollary(1, 1, cfg)
    assert (r11["alpha_theory"], r11["q_star"], r11["two_s_star"]) == ("1/2", "25/13", "1/75")
    r12 = harness.reproduce_corollary(1, 2, cfg)
    assert r12["alpha_theory"] == "1/2"
    r21 = harness.reproduce_corollary(2, 1, cfg)
    assert (r21["alpha_theory"], r21["q_star"], r21["two_s_star"]) == ("1/4", "49/25", "1/147")
    for r in (r11, r12, r21):
        assert r["error"] is None
        assert r["verdict"] is True and r["margin"] == pytest.approx(r["s_est"] - eval(r["two_s_star"]))


def test_row_records_failing_stage():
    cfg = config.from_dict({**SMALL, "grid": {"nx": 16, "T": 0.01}, "regularity": {}})
    row = harness.reproduce_corollary(1, 1, cfg)
    assert row["error"].startswith("regularity: InsufficientResolution")
    assert row["q_star"] == "25/13" and row["verdict"] is None


def test_sweep_command(small_ini, tmp_path, capsys, monkeypatch):
    monkeypatch.setenv("KINREG_THREADS", "2")
    out = tmp_path / "sw"
    code, printed, _ = run(["sweep", "--config", small_ini, "--l", "1,2", "--n", "1,2", "--output-dir", out], capsys)
    assert code == 0
    info, header, rows = io.read_csv(out / "sweep.csv")
    assert header == harness.SWEEP_HEADER
    assert [(r[0], r[1]) for r in rows] == [("1", "1"), ("1", "2"), ("2", "1"), ("2", "2")]
    assert all(r[7] == "true" for r in rows)
    journal = (out / "journal.log").read_text().splitlines()
    assert sorted(journal) == [f"l={l} n={n} status=ok" for l in (1, 2) for n in (1, 2)]


def test_worker_cap(monkeypatch):
    monkeypatch.setenv("KINREG_THREADS", "3")
    assert harness.worker_cap(8) == 3 and harness.worker_cap(2) == 2
    monkeypatch.setenv("KINREG_THREADS", "junk")
    assert harness.worker_cap(1) == 1


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "kinreg.cli", "exponents", "--alpha", "1", "--d", "2"],
                         capture_output=True, text=True, check=False)
    assert res.returncode == 0 and "q_star=13/7" in res.stdout
