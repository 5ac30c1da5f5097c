import csv
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from purisim import cartan
from purisim import closed_dynamics as cd
from purisim import purity_search as ps
from purisim.cli_io import (
    AxisSpec, ConfigError, emit_csv, emit_plot_script, fmt, parse_axis, parse_config, render_config,
)


def test_axis_spec_inclusive_with_half_step_tolerance():
    assert np.allclose(AxisSpec(0.05, 3.0, 0.05).values()[[0, -1]], [0.05, 3.0])
    assert len(AxisSpec(0.05, 3.0, 0.05).values()) == 60
    assert len(AxisSpec(0.0, 1.04, 0.1).values()) == 11
    assert list(AxisSpec(1.0, 1.0, 0.1).values()) == [1.0]


@pytest.mark.parametrize("text", ["3:1:0.1", "0:1:0", "0:1:-0.1", "0:1", "a:b:c", "nan:1:0.1"])
def test_bad_axis_specs(text):
    with pytest.raises(ValueError):
        parse_axis(text)


def test_parse_axis_forms():
    assert parse_axis("0.1, 1, 10") == (0.1, 1.0, 10.0)
    assert parse_axis("2.5") == 2.5
    assert parse_axis("0:1:0.5") == AxisSpec(0.0, 1.0, 0.5)


@settings(max_examples=100)
@given(st.floats(allow_nan=True, allow_infinity=False, width=64))
def test_fmt_roundtrips_floats(x):
    text = fmt(x)
    if math.isnan(x):
        assert text == "nan"
    else:
        assert float(text) == x


def test_fmt_special_cases():
    assert fmt(-0.0) == "0"
    assert fmt(True) == "true"
    assert fmt(np.bool_(False)) == "false"


def test_parse_config_defaults():
    cfg = parse_config(["simulate-open", "--g", "1.2"])
    assert cfg.params.g == 1.2
    assert cfg.params.gamma_s == cfg.params.gamma_p == 0.01
    assert cfg.output_path == "simulate-open.csv"
    assert parse_config(["simulate-closed"]).params.gamma_s == 0.0


def test_cli_overrides_file(tmp_path):
    conf = tmp_path / "run.conf"
    conf.write_text("# comment\ng = 0.5\nomega-p = 0.1:3:0.1  # inline\nout = a.csv\n")
    cfg = parse_config(["grid", "--config", str(conf), "--g", "0.1:1:0.1", "--no-plot"])
    assert np.allclose(cfg.axis_values("g"), np.arange(1, 11) / 10)
    assert len(cfg.axis_values("omega_p")) == 30
    assert cfg.output_path == "a.csv"
    assert cfg.plot is False


@pytest.mark.parametrize(
    "text, fragment",
    [("bogus = 1\n", ":2: bogus: unknown key"),
     ("g = 1\nnot a pair\n", ":3: expected"),
     ("g = 1\ngamma_s = fast\n", ":3: gamma_s")],
)
def test_config_file_errors_carry_line_numbers(tmp_path, text, fragment):
    conf = tmp_path / "bad.conf"
    conf.write_text("# header\n" + text)
    with pytest.raises(ConfigError) as info:
        parse_config(["simulate-closed", "--config", str(conf)])
    assert fragment in str(info.value)


def test_missing_config_file():
    with pytest.raises(ConfigError):
        parse_config(["sweep", "--config", "/nonexistent/run.conf"])


@pytest.mark.parametrize(
    "argv",
    [["sweep"], ["grid", "--g", "0.1:1:0.1"], ["simulate-closed", "--omega-p", "0.1:1:0.1"],
     ["simulate-closed", "--gamma-s", "-1"], ["simulate-closed", "--probe", "1,1,1"],
     ["frobnicate"], ["simulate-closed", "--dt-max", "0"], ["kak-scan", "--t", "3"]],
)
def test_invalid_configurations(argv):
    with pytest.raises(ConfigError):
        parse_config(argv)


@pytest.mark.parametrize(
    "argv",
    [["sweep", "--omega-p", "0.05:3:0.05", "--g", "0.1,1,10", "--omega-s", "1.5"],
     ["grid", "--g", "0.1:3:0.05", "--omega-p", "0.1:3:0.05", "--gamma-s", "0.01", "--gamma-p", "0.01"],
     ["sweep", "--omega-p", "0.5,1.0", "--g", "0.3,"],
     ["probe-opt", "--m-axis", "0.5773502691896258,0.5773502691896258,0.5773502691896258", "--sphere", "10,12"],
     ["kak-scan", "--t", "0:5:0.5", "--tol", "1e-6", "--horizon", "40", "--no-plot"]],
)
def test_render_config_roundtrip(tmp_path, argv):
    cfg = parse_config(argv)
    conf = tmp_path / "round.conf"
    conf.write_text(render_config(cfg))
    again = parse_config([cfg.command], config_file=str(conf))
    assert again == cfg


def _read(path):
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.reader(fh))


def test_emit_sweep_csv_and_plot(tmp_path):
    res = ps.sweep_omega_p(cd.ModelParams(), [0.8, 1.0], g_values=[0.1, 1.0])
    out = tmp_path / "s.csv"
    emit_csv(res, out)
    rows = _read(out)
    assert rows[0] == ["omega_p", "g", "pi_max", "t_at_max", "horizon", "effective"]
    assert len(rows) == 5 and rows[1][5] == "true"
    assert float(rows[2][2]) == res.points[1].pi_max
    assert out.read_bytes().count(b"\r") == 0
    emit_plot_script(res, tmp_path / "s.gp", out)
    script = (tmp_path / "s.gp").read_text()
    assert "'s.csv'" in script and "every ::2::3" in script


def test_emit_grid_csv(tmp_path):
    res = ps.grid_g_omega_p(cd.ModelParams(), [0.5, 1.0], [1.0])
    emit_csv(res, tmp_path / "g.csv")
    assert _read(tmp_path / "g.csv")[0] == ["g", "omega_p", "pi_max", "t_at_max"]
    emit_plot_script(res, tmp_path / "g.gp", tmp_path / "g.csv")
    assert "pm3d" in (tmp_path / "g.gp").read_text()


def test_emit_trace_kak_probe(tmp_path):
    p = cd.ModelParams(g=0.5)
    trace = cd.purity_trace_closed(p, [0.0, 1.0])
    emit_csv(trace, tmp_path / "t.csv")
    assert _read(tmp_path / "t.csv")[1] == ["0", "0", "0", "0", "0"]
    emit_csv(cartan.capability_scan(p, [0.0, 1.0]), tmp_path / "k.csv")
    assert [r[-1] for r in _read(tmp_path / "k.csv")[1:]] == ["false", "true"]
    emit_csv(ps.probe_scan(p, sphere_grid=(8, 8)), tmp_path / "p.csv")
    assert len(_read(tmp_path / "p.csv")) == 65


def test_emit_rejects_empty(tmp_path):
    with pytest.raises(ValueError):
        emit_csv([], tmp_path / "e.csv")
    with pytest.raises(ValueError):
        emit_csv(ps.SweepResult("sweep", (), (), []), tmp_path / "e.csv")


def test_reference_sweep_config():
    cfg = parse_config(["sweep", "--omega-s", "1", "--g", "0.01", "--omega-p", "0.5:1.5:0.01"])
    assert len(cfg.axis_values("omega_p")) == 101
    assert cfg.params.g == 0.01


def test_reference_precedence(tmp_path):
    conf = tmp_path / "c.conf"
    conf.write_text("gamma_s = 0.01\n")
    assert parse_config(["simulate-open", "--config", str(conf), "--gamma-s", "0.02"]).params.gamma_s == 0.02


def test_reference_start_exceeds_stop():
    with pytest.raises(ConfigError, match="start exceeds stop"):
        parse_config(["sweep", "--omega-p", "1.5:0.5:0.01"])


def test_reference_csv_shapes(tmp_path):
    res = ps.sweep_omega_p(cd.ModelParams(g=0.2), [0.5, 1.0, 1.5])
    emit_csv(res, tmp_path / "a.csv")
    emit_csv(res, tmp_path / "b.csv")
    assert len((tmp_path / "a.csv").read_text().splitlines()) == 4
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()
    emit_csv(cd.purity_trace_closed(cd.ModelParams(g=0.0), np.linspace(0, 5, 6)), tmp_path / "t.csv")
    assert [r[1] for r in _read(tmp_path / "t.csv")[1:]] == ["0"] * 6


def test_reference_plot_scripts(tmp_path):
    res = ps.sweep_omega_p(cd.ModelParams(), [0.5, 1.0], g_values=[0.1, 1.0, 10.0])
    emit_plot_script(res, tmp_path / "s.gp", tmp_path / "s.csv")
    script = (tmp_path / "s.gp").read_text()
    assert script.count("with linespoints") == 3
    assert "set xlabel 'omega_p'" in script and "set ylabel 'pi_M'" in script
    with pytest.raises(ValueError):
        emit_plot_script(ps.SweepResult("sweep", (), (), []), tmp_path / "e.gp", tmp_path / "e.csv")
