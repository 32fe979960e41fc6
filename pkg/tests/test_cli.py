import subprocess
import sys

import pytest

from porous_euler import cli, verify

GAP = """experiment = gap_area_sweep
shape = disk
eps = 0.2, 0.1, 0.05
alpha = 2
"""


def _run(*args):
    return subprocess.run([sys.executable, "-m", "porous_euler.cli", *args], capture_output=True, text=True)


def test_sweep_success(tmp_path):
    cfg = tmp_path / "gap.cfg"
    cfg.write_text(GAP)
    out = tmp_path / "out"
    r = _run("sweep", str(cfg), "--out", str(out), "--seed", "18446744073709551615", "--threads", "1")
    assert r.returncode == 0, r.stderr
    csv = (out / "gap_area_sweep.csv").read_text().splitlines()
    assert csv[0].startswith("eps,dist,n_incl") and len(csv) == 5
    summary = (out / "summary.txt").read_text()
    assert "seed = 18446744073709551615" in summary and "check control row is zero: PASS" in summary


def test_config_errors_exit_1(tmp_path):
    bad = tmp_path / "bad.cfg"
    bad.write_text("experiment = gap_area_sweep\nwidth_of_gap = 3\n")
    r = _run("sweep", str(bad), "--out", str(tmp_path))
    assert r.returncode == 1 and "line 2" in r.stderr
    assert _run("sweep", str(tmp_path / "missing.cfg")).returncode == 1
    flow = tmp_path / "gap.cfg"
    flow.write_text(GAP)
    assert _run("flow", str(flow), "--out", str(tmp_path)).returncode == 1


def test_bad_flags_are_rejected(tmp_path):
    with pytest.raises(SystemExit) as info:
        cli.main(["verify", "--seed", str(2 ** 64)])
    assert info.value.code == 1
    with pytest.raises(SystemExit) as info:
        cli.main(["sweep", "x.cfg", "--threads", "0"])
    assert info.value.code == 1
    assert _run("nonsense").returncode == 1


def test_numerical_failure_exit_2(tmp_path):
    # a stadium cannot be fitted to 1e-6 with 64 modes
    cfg = tmp_path / "stadium.cfg"
    cfg.write_text("experiment = discrepancy_sweep\nshape = stadium\nlayout = segment\n"
                   "eps = 0.08, 0.04, 0.02\nalpha = 2.5\nn_modes = 64\n")
    r = _run("sweep", str(cfg), "--out", str(tmp_path))
    assert r.returncode == 2 and "numerical failure" in r.stderr


def test_acceptance_violation_exit_3(tmp_path, monkeypatch):
    def fake(out, seed=0, log=None, determinism=True):
        return [verify.Criterion(1, "ok", 0.0, 1.0, True), verify.Criterion(2, "broken", 2.0, 1.0, False)]

    monkeypatch.setattr(verify, "run_verify", fake)
    assert cli.main(["verify", "--out", str(tmp_path)]) == 3
    text = (tmp_path / "summary.txt").read_text()
    assert "[FAIL]  2 broken" in text and "1/2 criteria passed" in text
