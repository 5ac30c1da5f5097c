"""``purisim`` command-line entry point.

Exit codes: 0 success, 1 usage or configuration error, 2 numerical failure.
"""
from __future__ import annotations

import math
import sys
from pathlib import Path

import numpy as np

from . import cartan
from . import closed_dynamics as cd
from . import open_dynamics as od
from . import purity_search as ps
from .cli_io import ConfigError, RunConfig, emit_csv, emit_plot_script, parse_config

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_NUMERICAL = 2


def _trace_times(cfg: RunConfig) -> np.ndarray:
    times = cfg.axis_values("t")
    if times is not None:
        return times
    return ps.closed_time_grid(cfg.params, cfg.spec)


def run_simulate_closed(cfg: RunConfig):
    trace = cd.purity_trace_closed(cfg.params, _trace_times(cfg))
    print(f"pi_max = {trace.pi_max:.10g} at t = {trace.t_max:.10g}")
    return trace


def run_simulate_open(cfg: RunConfig):
    p = cfg.params
    gen = od.LindbladGenerator.from_params(p)
    grid = cfg.grids.get("t")
    if grid is not None:
        if not hasattr(grid, "step") or grid.start != 0:
            raise ConfigError("simulate-open needs t = 0:t_end:sample_step", key="t")
        t_end, spacing = grid.stop, grid.step
    else:
        t_end = ps.search_horizon(p, cfg.spec)
        spacing = t_end / 2000
    n_out = max(1, round(t_end / spacing))
    every = max(1, math.ceil((t_end / n_out) / gen.step_size(cfg.dt_max) - 1e-9))
    traj = od.integrate_lindblad(
        gen, cd.initial_state(p), t_end, t_end / (n_out * every), sample_every=every
    )
    bloch = traj.system_bloch()
    trace = cd.PurityTrace(traj.times, np.linalg.norm(bloch, axis=1), bloch)
    print(f"step = {traj.step:.6g}; pi_max = {trace.pi_max:.10g} at t = {trace.t_max:.10g}")
    return trace


def run_sweep(cfg: RunConfig):
    g_values = cfg.axis_values("g")
    result = ps.sweep_omega_p(cfg.params, cfg.axis_values("omega_p"), cfg.spec, g_values=g_values)
    for k, g in enumerate(result.g_values):
        series = result.series(k)
        best = max(series, key=lambda pt: -math.inf if math.isnan(pt.pi_max) else pt.pi_max)
        print(f"g = {g:.6g}: peak pi_M = {best.pi_max:.6g} at omega_p = {best.omega_p:.6g}")
    _report_errors(result)
    return result


def run_grid(cfg: RunConfig):
    result = ps.grid_g_omega_p(cfg.params, cfg.axis_values("g"), cfg.axis_values("omega_p"), cfg.spec)
    best = result.argmax()
    print(f"global max pi_M = {best.pi_max:.6g} at g = {best.g:.6g}, omega_p = {best.omega_p:.6g}")
    print(f"strict local maxima on the grid: {len(result.local_maxima())}")
    _report_errors(result)
    return result


def _report_errors(result):
    failed = [pt for pt in result.points if pt.error]
    for pt in failed:
        print(f"warning: g = {pt.g:.6g}, omega_p = {pt.omega_p:.6g}: {pt.error}", file=sys.stderr)


def run_kak_scan(cfg: RunConfig):
    times = cfg.axis_values("t")
    if times is None:
        times = np.round(np.arange(101) * 0.1, 12)
    points = cartan.capability_scan(cfg.params, times, cfg.tol)
    flagged = sum(pt.can_purify for pt in points)
    print(f"{flagged} of {len(points)} sampled times pass the two-coefficient criterion")
    return points


def run_probe_opt(cfg: RunConfig):
    scan = ps.probe_scan(cfg.params, cfg.spec, cfg.sphere)
    best, value = ps.optimal_probe_search(cfg.params, cfg.spec, cfg.sphere)
    print("best probe = ({:.6f}, {:.6f}, {:.6f}); pi_max = {:.10g}".format(*best, value))
    return scan


RUNNERS = {
    "simulate-closed": run_simulate_closed,
    "simulate-open": run_simulate_open,
    "sweep": run_sweep,
    "grid": run_grid,
    "kak-scan": run_kak_scan,
    "probe-opt": run_probe_opt,
}


def main(argv: list[str] | None = None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        cfg = parse_config(argv)
        result = RUNNERS[cfg.command](cfg)
        out = Path(cfg.output_path)
        emit_csv(result, out)
        print(f"wrote {out}")
        if cfg.plot:
            script = out.with_suffix(".gp")
            emit_plot_script(result, script, out)
            print(f"wrote {script}")
    except ConfigError as exc:
        print(f"purisim: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"purisim: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (od.IntegrationError, ArithmeticError, np.linalg.LinAlgError) as exc:
        print(f"purisim: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except ValueError as exc:
        print(f"purisim: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
