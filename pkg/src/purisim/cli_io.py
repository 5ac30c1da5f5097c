"""Run configuration and result files for the ``purisim`` command line.

Configuration comes from an optional ``key = value`` file (``#`` starts a
comment) overlaid by command-line flags. Results are written as CSV with
17 significant digits and a gnuplot script that plots them.
"""
from __future__ import annotations

import argparse
import csv
import math
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .cartan import DEFAULT_TOL, CapabilityPoint
from .closed_dynamics import ModelParams, PurityTrace
from .purity_search import ProbeScan, SearchSpec, SweepResult

COMMANDS = ("simulate-closed", "simulate-open", "sweep", "grid", "kak-scan", "probe-opt")
OPEN_DEFAULT_GAMMA = 0.01
GRID_KEYS = ("omega_p", "g", "t")

SWEEP_HEADER = ("omega_p", "g", "pi_max", "t_at_max", "horizon", "effective")
GRID_HEADER = ("g", "omega_p", "pi_max", "t_at_max")
TRACE_HEADER = ("t", "pi", "s_x", "s_y", "s_z")
KAK_HEADER = ("t", "c_x", "c_y", "c_z", "can_purify")
PROBE_HEADER = ("theta", "phi", "p_x", "p_y", "p_z", "pi_max")


class ConfigError(ValueError):
    def __init__(self, message: str, key: str | None = None, line: int | None = None, source: str | None = None):
        where = ""
        if source is not None and line is not None:
            where = f"{source}:{line}: "
        elif line is not None:
            where = f"line {line}: "
        label = f"{key}: " if key else ""
        super().__init__(f"{where}{label}{message}")
        self.key = key
        self.line = line


@dataclass(frozen=True)
class AxisSpec:
    """Inclusive ``start:stop:step`` range."""

    start: float
    stop: float
    step: float

    def __post_init__(self):
        if not all(math.isfinite(v) for v in (self.start, self.stop, self.step)):
            raise ValueError("axis bounds must be finite")
        if self.step <= 0:
            raise ValueError("step must be positive")
        if self.start > self.stop:
            raise ValueError("start exceeds stop")

    def values(self) -> np.ndarray:
        n = int(math.floor((self.stop - self.start) / self.step + 0.5))
        return np.round(self.start + self.step * np.arange(n + 1), 12)

    def render(self) -> str:
        return f"{self.start!r}:{self.stop!r}:{self.step!r}"


@dataclass(frozen=True)
class RunConfig:
    command: str
    params: ModelParams = ModelParams()
    spec: SearchSpec = SearchSpec()
    grids: dict = field(default_factory=dict)
    output_path: str = "out.csv"
    seed: int = 0
    dt_max: float = 1e-3
    sphere: tuple[int, int] = (19, 36)
    tol: float = DEFAULT_TOL
    plot: bool = True

    def axis_values(self, key: str) -> np.ndarray | None:
        grid = self.grids.get(key)
        if grid is None:
            return None
        if isinstance(grid, AxisSpec):
            return grid.values()
        return np.asarray(grid, dtype=float)


# --- value parsing -------------------------------------------------------

def _float(text: str) -> float:
    value = float(text)
    if not math.isfinite(value):
        raise ValueError(f"not a finite number: {text!r}")
    return value


def _vector(text: str) -> tuple[float, float, float]:
    parts = [p for p in text.replace(" ", "").split(",") if p]
    if len(parts) != 3:
        raise ValueError(f"expected three comma-separated numbers, got {text!r}")
    return tuple(_float(p) for p in parts)


def _bool(text: str) -> bool:
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"expected a boolean, got {text!r}")


def _horizon(text: str) -> float | None:
    return None if text.strip().lower() == "auto" else _float(text)


def _positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise ValueError("must be >= 1")
    return value


def _sphere(text: str) -> tuple[int, int]:
    parts = text.replace(" ", "").split(",")
    if len(parts) != 2:
        raise ValueError(f"expected n_theta,n_phi, got {text!r}")
    return (_positive_int(parts[0]), _positive_int(parts[1]))


def parse_axis(text: str):
    """``start:stop:step`` -> AxisSpec, ``a,b,...`` -> tuple, ``a`` -> float."""
    text = text.strip()
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise ValueError(f"axis spec must be start:stop:step, got {text!r}")
        return AxisSpec(*(_float(p) for p in parts))
    if "," in text:
        values = tuple(_float(p) for p in text.split(",") if p.strip())
        if any(b < a for a, b in zip(values, values[1:])):
            raise ValueError("list values must be ascending")
        return values
    return _float(text)


_CONVERTERS = {
    "omega_s": _float,
    "omega_p": parse_axis,
    "g": parse_axis,
    "gamma_s": _float,
    "gamma_p": _float,
    "probe": _vector,
    "n_axis": _vector,
    "m_axis": _vector,
    "horizon": _horizon,
    "slow_periods": _positive_int,
    "samples_per_fast_period": _positive_int,
    "refine": _bool,
    "t": parse_axis,
    "dt_max": _float,
    "sphere": _sphere,
    "tol": _float,
    "out": str,
    "seed": int,
    "plot": _bool,
}
KEYS = tuple(_CONVERTERS)


def read_config_file(path: str) -> dict[str, tuple[str, int]]:
    """Raw ``key -> (value, line number)`` entries of a config file."""
    entries: dict[str, tuple[str, int]] = {}
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config file: {exc.strerror}", key="config") from None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError("expected 'key = value'", line=lineno, source=path)
        key, value = (s.strip() for s in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in _CONVERTERS:
            raise ConfigError("unknown key", key=key, line=lineno, source=path)
        entries[key] = (value, lineno)
    return entries


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="purisim", description="Probe-mediated qubit purification simulator.")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")
    sub.required = True
    for name in COMMANDS:
        cmd = sub.add_parser(name)
        cmd.add_argument("--config", metavar="FILE", help="key = value configuration file")
        for key in KEYS:
            if key == "plot":
                continue
            cmd.add_argument("--" + key.replace("_", "-"), dest=key, metavar="VALUE")
        cmd.add_argument("--no-plot", dest="plot", action="store_const", const="false",
                         help="do not write the gnuplot script")
    return parser


def parse_config(argv: list[str], config_file: str | None = None) -> RunConfig:
    """Build a RunConfig from command-line arguments and an optional config file.

    Command-line values override file values.
    """
    args = build_parser().parse_args(argv)
    source = config_file or args.config
    raw: dict[str, tuple[str, int | None]] = {}
    if source:
        raw.update(read_config_file(source))
    for key in KEYS:
        value = getattr(args, key, None)
        if value is not None:
            raw[key] = (value, None)
    values = {}
    for key, (text, line) in raw.items():
        try:
            values[key] = _CONVERTERS[key](text)
        except ValueError as exc:
            raise ConfigError(str(exc), key=key, line=line, source=source if line else None) from None
    return _assemble(args.command, values, {k: v[1] for k, v in raw.items()}, source)


def _assemble(command: str, values: dict, lines: dict, source) -> RunConfig:
    def fail(msg, key):
        raise ConfigError(msg, key=key, line=lines.get(key), source=source if lines.get(key) else None)

    grids = {}
    scalars = {}
    for key in ("omega_p", "g"):
        if key in values:
            if isinstance(values[key], float):
                scalars[key] = values[key]
            else:
                grids[key] = values[key]
    if "t" in values:
        if isinstance(values["t"], float):
            fail("expected an axis spec start:stop:step", "t")
        grids["t"] = values["t"]

    if command == "sweep" and "omega_p" not in grids:
        fail("sweep needs an omega_p grid (start:stop:step or a list)", "omega_p")
    if command == "grid":
        for key in ("g", "omega_p"):
            if key not in grids:
                fail("grid needs both g and omega_p grids", key)
    if command not in ("sweep", "grid"):
        for key in ("omega_p", "g"):
            if key in grids:
                fail(f"{command} takes a single value", key)
    if command == "sweep" and "g" in grids and isinstance(grids["g"], AxisSpec):
        grids["g"] = tuple(float(v) for v in grids["g"].values())

    default_gamma = OPEN_DEFAULT_GAMMA if command == "simulate-open" else 0.0
    try:
        params = ModelParams(
            omega_s=values.get("omega_s", 1.0),
            omega_p=scalars.get("omega_p", 1.0),
            g=scalars.get("g", 0.0),
            gamma_s=values.get("gamma_s", default_gamma),
            gamma_p=values.get("gamma_p", default_gamma),
            probe=values.get("probe", (0.0, 0.0, 1.0)),
            n_axis=values.get("n_axis", (0.0, 0.0, 1.0)),
            m_axis=values.get("m_axis", (0.0, 0.0, 1.0)),
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    try:
        spec = SearchSpec(
            horizon=values.get("horizon"),
            slow_periods=values.get("slow_periods", 5),
            samples_per_fast_period=values.get("samples_per_fast_period", 20),
            refine=values.get("refine", True),
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    out = values.get("out", f"{command}.csv")
    if not out:
        fail("output path must be nonempty", "out")
    if values.get("dt_max", 1.0) <= 0:
        fail("must be positive", "dt_max")
    if values.get("tol", 1.0) <= 0:
        fail("must be positive", "tol")
    return RunConfig(
        command=command,
        params=params,
        spec=spec,
        grids=grids,
        output_path=out,
        seed=values.get("seed", 0),
        dt_max=values.get("dt_max", 1e-3),
        sphere=values.get("sphere", (19, 36)),
        tol=values.get("tol", DEFAULT_TOL),
        plot=values.get("plot", True),
    )


def _render_value(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, AxisSpec):
        return value.render()
    if isinstance(value, tuple):
        text = ",".join(repr(float(v)) if isinstance(v, float) else str(v) for v in value)
        return text + "," if len(value) == 1 else text
    if isinstance(value, float):
        return repr(value)
    return str(value)


def render_config(cfg: RunConfig) -> str:
    """Config-file text that ``parse_config`` maps back to ``cfg``."""
    p, spec = cfg.params, cfg.spec
    entries = {
        "omega_s": p.omega_s,
        "omega_p": cfg.grids.get("omega_p", p.omega_p),
        "g": cfg.grids.get("g", p.g),
        "gamma_s": p.gamma_s,
        "gamma_p": p.gamma_p,
        "probe": p.probe,
        "n_axis": p.n_axis,
        "m_axis": p.m_axis,
        "horizon": "auto" if spec.horizon is None else float(spec.horizon),
        "slow_periods": spec.slow_periods,
        "samples_per_fast_period": spec.samples_per_fast_period,
        "refine": spec.refine,
        "dt_max": cfg.dt_max,
        "sphere": cfg.sphere,
        "tol": cfg.tol,
        "out": cfg.output_path,
        "seed": cfg.seed,
        "plot": cfg.plot,
    }
    if "t" in cfg.grids:
        entries["t"] = cfg.grids["t"]
    lines = [f"# purisim {cfg.command}"]
    lines += [f"{key} = {_render_value(value)}" for key, value in entries.items()]
    return "\n".join(lines) + "\n"


# --- result files --------------------------------------------------------

def fmt(value) -> str:
    """17 significant digits; exact zeros print as ``0``."""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    value = float(value)
    if value == 0:
        return "0"
    if math.isnan(value):
        return "nan"
    return format(value, ".17g")


def _rows(result):
    if isinstance(result, SweepResult):
        if not result.points:
            raise ValueError("result has no points")
        if result.kind == "grid":
            return GRID_HEADER, [(pt.g, pt.omega_p, pt.pi_max, pt.t_at_max) for pt in result.points]
        return SWEEP_HEADER, [
            (pt.omega_p, pt.g, pt.pi_max, pt.t_at_max, pt.horizon, pt.effective) for pt in result.points
        ]
    if isinstance(result, PurityTrace):
        bloch = result.bloch if result.bloch is not None else np.full((result.times.size, 3), np.nan)
        return TRACE_HEADER, [(t, pi, *s) for t, pi, s in zip(result.times, result.purities, bloch)]
    if isinstance(result, ProbeScan):
        return PROBE_HEADER, [
            (th, ph, *pv, v) for th, ph, pv, v in zip(result.thetas, result.phis, result.probes, result.values)
        ]
    if isinstance(result, list) and result and all(isinstance(r, CapabilityPoint) for r in result):
        return KAK_HEADER, [(r.t, *r.c, r.can_purify) for r in result]
    raise ValueError(f"cannot serialize {type(result).__name__} (empty or unsupported)")


def emit_csv(result, path) -> None:
    header, rows = _rows(result)
    if not rows:
        raise ValueError("result is empty")
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([fmt(v) for v in row])


def _gp_str(text: str) -> str:
    return "'" + text.replace("'", "''") + "'"


def emit_plot_script(result, path, csv_path) -> None:
    """Write a gnuplot script rendering ``csv_path`` to a PNG next to ``path``."""
    path = Path(path)
    rel_csv = os.path.relpath(csv_path, start=path.parent)
    png = path.with_suffix(".png").name
    head = [
        "# gnuplot script; run from this directory: gnuplot " + path.name,
        "set datafile separator ','",
        "set terminal pngcairo size 900,650",
        f"set output {_gp_str(png)}",
    ]
    data = _gp_str(rel_csv)
    if isinstance(result, SweepResult) and result.kind == "sweep":
        if not result.g_values or not result.omega_p_values:
            raise ValueError("no series to plot")
        n = len(result.omega_p_values)
        entries = [
            f"{data} skip 1 every ::{k * n}::{(k + 1) * n - 1} using 1:3 with linespoints title 'g = {fmt(g)}'"
            for k, g in enumerate(result.g_values)
        ]
        body = ["set xlabel 'omega_p'", "set ylabel 'pi_M'", "set key top right",
                "plot " + ", \\\n     ".join(entries)]
    elif isinstance(result, SweepResult) and result.kind == "grid":
        if not result.points:
            raise ValueError("no grid points to plot")
        body = [
            f"set dgrid3d {len(result.g_values)},{len(result.omega_p_values)}",
            "set view map",
            "set contour base",
            "set cntrparam levels 12",
            "unset surface",
            "set pm3d map",
            "set xlabel 'omega_p'",
            "set ylabel 'g'",
            "set cblabel 'pi_M'",
            f"splot {data} skip 1 using 2:1:3 with pm3d notitle, "
            f"{data} skip 1 using 2:1:3 with lines lc 'black' notitle",
        ]
    elif isinstance(result, PurityTrace):
        body = ["set xlabel 't'", "set ylabel 'pi'",
                f"plot {data} skip 1 using 1:2 with lines title 'pi(t)'"]
    elif isinstance(result, list) and result:
        body = ["set xlabel 't'", "set ylabel 'c'",
                f"plot {data} skip 1 using 1:2 with lines title 'c_x', "
                f"{data} skip 1 using 1:3 with lines title 'c_y', "
                f"{data} skip 1 using 1:4 with lines title 'c_z'"]
    elif isinstance(result, ProbeScan):
        body = ["set view map", "set xlabel 'phi'", "set ylabel 'theta'", "set cblabel 'pi_M'",
                f"splot {data} skip 1 using 2:1:6 with points pt 5 palette notitle"]
    else:
        raise ValueError("no series to plot")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(head + body) + "\n")
