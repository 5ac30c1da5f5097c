import subprocess
import sys

import pytest

from purisim import cli
from purisim import open_dynamics as od


@pytest.fixture(autouse=True)
def _in_tmp(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)


def test_simulate_closed_writes_csv_and_script(tmp_path, capsys):
    assert cli.main(["simulate-closed", "--g", "0.5", "--t", "0:10:0.5", "--out", "c.csv"]) == 0
    assert (tmp_path / "c.csv").read_text().startswith("t,pi,s_x,s_y,s_z\n")
    assert (tmp_path / "c.gp").exists()
    assert "pi_max" in capsys.readouterr().out


def test_no_plot_skips_script(tmp_path):
    assert cli.main(["kak-scan", "--g", "0.3", "--t", "0:1:0.5", "--no-plot"]) == 0
    assert (tmp_path / "kak-scan.csv").exists()
    assert not (tmp_path / "kak-scan.gp").exists()


def test_simulate_open_sampling(tmp_path):
    assert cli.main(["simulate-open", "--g", "1.2", "--t", "0:2:0.25", "--out", "o.csv"]) == 0
    lines = (tmp_path / "o.csv").read_text().splitlines()
    assert len(lines) == 1 + 9
    assert lines[-1].startswith("2,")


def test_probe_opt(tmp_path, capsys):
    assert cli.main(["probe-opt", "--g", "0.5", "--m-axis", "1,0,0", "--sphere", "9,8"]) == 0
    assert "best probe = (1.000000, 0.000000, 0.000000)" in capsys.readouterr().out


@pytest.mark.parametrize(
    "argv",
    [["sweep"], ["nonsense"], [], ["simulate-closed", "--g", "x"], ["simulate-open", "--t", "1:2:0.1"]],
)
def test_usage_errors_exit_1(argv, capsys):
    assert cli.main(argv) == 1
    assert "error" in capsys.readouterr().err


def test_unwritable_output_exits_1():
    assert cli.main(["simulate-closed", "--g", "0.5", "--out", "/nonexistent/dir/x.csv"]) == 1


def test_numerical_failure_exits_2(monkeypatch, capsys):
    def fail(*args, **kwargs):
        raise od.IntegrationError("negative eigenvalue -1e-3", 0.5)

    monkeypatch.setattr(od, "integrate_lindblad", fail)
    assert cli.main(["simulate-open", "--g", "1.0", "--t", "0:1:0.1"]) == 2
    assert "numerical failure" in capsys.readouterr().err


def test_module_entry_point(tmp_path):
    proc = subprocess.run(
        [sys.executable, "-m", "purisim", "kak-scan", "--g", "0.2", "--t", "0:1:0.5"],
        cwd=tmp_path, capture_output=True, text=True,
    )
    assert proc.returncode == 0, proc.stderr
    assert (tmp_path / "kak-scan.csv").exists()
