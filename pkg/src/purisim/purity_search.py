"""Maximal attainable purity of S and its dependence on the model parameters.

``pi_max_closed`` and ``pi_max_open`` find the largest purity reached from
the maximally mixed system state within a finite horizon. The sweeps and
the 2D grid evaluate those searches pointwise, optionally in parallel; the
output never depends on the worker count.
"""
from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from . import closed_dynamics as cd
from . import open_dynamics as od

THREADS_ENV = "PURISIM_THREADS"
GOLDEN_ITERATIONS = 60
DAMPING_HORIZON = 5.0
_INV_PHI = (math.sqrt(5) - 1) / 2
_BASIS = ((1.0, 0.0, 0.0), (0.0, 1.0, 0.0), (0.0, 0.0, 1.0))


@dataclass(frozen=True)
class SearchSpec:
    """How far and how densely to search in time.

    ``horizon=None`` selects the horizon automatically: ``slow_periods``
    periods of the slowest Bohr frequency of ``H_T``, capped at
    ``5 / (gamma_s + gamma_p)`` for open systems.
    """

    horizon: float | None = None
    slow_periods: int = 5
    samples_per_fast_period: int = 20
    refine: bool = True

    def __post_init__(self):
        if self.horizon is not None and not (math.isfinite(self.horizon) and self.horizon > 0):
            raise ValueError("fixed horizon must be positive and finite")
        if int(self.slow_periods) < 1:
            raise ValueError("slow_periods must be >= 1")
        if int(self.samples_per_fast_period) < 2:
            raise ValueError("samples_per_fast_period must be >= 2")


class PurityMax(NamedTuple):
    pi_max: float
    t_at_max: float
    horizon: float


def _frequencies(p: cd.ModelParams) -> np.ndarray:
    return cd.SpectralPropagator(cd.hamiltonian(p)).bohr_frequencies()


def search_horizon(p: cd.ModelParams, spec: SearchSpec = SearchSpec()) -> float:
    if spec.horizon is not None:
        return float(spec.horizon)
    freqs = _frequencies(p)
    horizon = spec.slow_periods * 2 * math.pi / freqs[0] if freqs.size else 2 * math.pi
    if p.is_open:
        horizon = min(horizon, DAMPING_HORIZON / (p.gamma_s + p.gamma_p))
    return float(horizon)


def _fast_period(p: cd.ModelParams) -> float:
    freqs = _frequencies(p)
    return 2 * math.pi / freqs[-1] if freqs.size else 2 * math.pi


def closed_time_grid(p: cd.ModelParams, spec: SearchSpec = SearchSpec()) -> np.ndarray:
    """Uniform samples over the horizon; doubling the density nests the grid."""
    horizon = search_horizon(p, spec)
    periods = max(1, math.ceil(horizon / _fast_period(p)))
    return np.linspace(0.0, horizon, periods * spec.samples_per_fast_period + 1)


def golden_section_max(f, lo, hi, iterations: int = GOLDEN_ITERATIONS):
    """Vectorized golden-section maximization of ``f`` on each ``[lo, hi]``.

    ``f`` maps an array of points to an array of values. Returns the best
    interior point found in each bracket and its value.
    """
    lo = np.array(lo, dtype=float)
    hi = np.array(hi, dtype=float)
    c = hi - _INV_PHI * (hi - lo)
    d = lo + _INV_PHI * (hi - lo)
    fc, fd = f(c), f(d)
    for _ in range(iterations):
        left = fc > fd  # maximum lies in [lo, d]
        hi = np.where(left, d, hi)
        lo = np.where(left, lo, c)
        new = np.where(left, hi - _INV_PHI * (hi - lo), lo + _INV_PHI * (hi - lo))
        fnew = f(new)
        c, d, fc, fd = (
            np.where(left, new, d),
            np.where(left, c, new),
            np.where(left, fnew, fd),
            np.where(left, fc, fnew),
        )
    best_is_c = fc >= fd
    return np.where(best_is_c, c, d), np.where(best_is_c, fc, fd)


def _pick(times, values) -> tuple[float, float]:
    """Largest value; ties go to the earliest time."""
    order = np.lexsort((times, -values))
    k = order[0]
    return float(values[k]), float(times[k])


def maximize_sampled(f, times, refine: bool = True) -> tuple[float, float]:
    """Max of ``f`` over sorted ``times``, polished by golden section around
    every interior discrete local maximum."""
    values = f(times)
    if not refine or times.size < 3:
        return _pick(times, values)
    mid = values[1:-1]
    peaks = np.nonzero((mid >= values[:-2]) & (mid >= values[2:]))[0] + 1
    if peaks.size == 0:
        return _pick(times, values)
    t_ref, v_ref = golden_section_max(f, times[peaks - 1], times[peaks + 1])
    return _pick(np.concatenate([times, t_ref]), np.concatenate([values, v_ref]))


def _closed_purity_function(p: cd.ModelParams):
    if p.standard_axes:
        f = cd.derived_frequencies(p)
        scale = abs(p.probe[2]) * p.g**2

        def purity(t):
            return scale * np.abs(cd.sin_over(f.beta, t) ** 2 - cd.sin_over(f.alpha, t) ** 2)

        return purity
    prop = cd.SpectralPropagator(cd.hamiltonian(p))
    rho0 = cd.initial_state(p)

    def purity(t):
        t = np.asarray(t, dtype=float)
        return np.linalg.norm(cd.system_bloch_closed(prop, rho0, t.reshape(-1)), axis=1).reshape(t.shape)

    return purity


def pi_max_closed(p: cd.ModelParams, spec: SearchSpec = SearchSpec()) -> PurityMax:
    """Largest purity of S over the horizon, unitary dynamics, S initially maximally mixed."""
    horizon = search_horizon(p, spec)
    if p.g == 0:
        return PurityMax(0.0, 0.0, horizon)
    times = closed_time_grid(p, spec)
    value, t = maximize_sampled(_closed_purity_function(p), times, spec.refine)
    return PurityMax(value, t, horizon)


def _open_steps(p: cd.ModelParams, gen: od.LindbladGenerator, spec: SearchSpec):
    horizon = search_horizon(p, spec)
    dt = gen.step_size(_fast_period(p) / spec.samples_per_fast_period)
    n = max(1, math.ceil(horizon / dt - 1e-9))
    return horizon, horizon / n, n


def pi_max_open(p: cd.ModelParams, spec: SearchSpec = SearchSpec()) -> PurityMax:
    """Largest purity of S along the RK4 trajectory of the master equation.

    Without dissipation this is ``pi_max_closed``.
    """
    if not p.is_open:
        return pi_max_closed(p, spec)
    gen = od.LindbladGenerator.from_params(p)
    horizon, h, n = _open_steps(p, gen, spec)
    if p.g == 0:
        return PurityMax(0.0, 0.0, horizon)
    bloch = od.system_bloch_samples(gen, cd.initial_state(p), h, n)
    purities = np.linalg.norm(bloch, axis=1)
    k = int(np.argmax(purities))
    return PurityMax(float(purities[k]), float(k * h), horizon)


def pi_max(p: cd.ModelParams, spec: SearchSpec = SearchSpec()) -> PurityMax:
    return pi_max_open(p, spec) if p.is_open else pi_max_closed(p, spec)


@dataclass(frozen=True)
class SweepPoint:
    omega_p: float
    g: float
    pi_max: float
    t_at_max: float
    horizon: float
    effective: bool
    error: str | None = None


@dataclass
class SweepResult:
    """Per-point maximal purities over a ``g`` x ``omega_p`` grid.

    ``points`` are stored g-major: all ``omega_p`` values for the first
    ``g``, then the next.
    """

    kind: str
    g_values: tuple[float, ...]
    omega_p_values: tuple[float, ...]
    points: list[SweepPoint] = field(repr=False)

    def table(self) -> np.ndarray:
        return np.array([pt.pi_max for pt in self.points]).reshape(
            len(self.g_values), len(self.omega_p_values)
        )

    def series(self, g_index: int) -> list[SweepPoint]:
        n = len(self.omega_p_values)
        return self.points[g_index * n:(g_index + 1) * n]

    def argmax(self) -> SweepPoint:
        """Global maximum; ties resolved by grid index."""
        values = np.nan_to_num(self.table().reshape(-1), nan=-np.inf)
        return self.points[int(np.argmax(values))]

    def local_maxima(self) -> list[SweepPoint]:
        """Grid points strictly larger than all (up to 8) neighbours."""
        table = np.nan_to_num(self.table(), nan=-np.inf)
        rows, cols = table.shape
        padded = np.full((rows + 2, cols + 2), -np.inf)
        padded[1:-1, 1:-1] = table
        is_max = np.ones_like(table, dtype=bool)
        for di in (-1, 0, 1):
            for dj in (-1, 0, 1):
                if di or dj:
                    is_max &= table > padded[1 + di:1 + di + rows, 1 + dj:1 + dj + cols]
        return [self.points[i * cols + j] for i, j in zip(*np.nonzero(is_max))]


def resolve_workers(workers: int | None = None) -> int:
    if workers is None:
        raw = os.environ.get(THREADS_ENV)
        if raw is None:
            return 1
        try:
            workers = int(raw)
        except ValueError:
            raise ValueError(f"{THREADS_ENV} must be an integer >= 1, got {raw!r}") from None
    if workers < 1:
        raise ValueError(f"worker count must be >= 1, got {workers}")
    return workers


def _evaluate(args) -> SweepPoint:
    p, spec = args
    try:
        effective = od.time_scales(p).effective
        res = pi_max(p, spec)
    except (ArithmeticError, ValueError, RuntimeError, np.linalg.LinAlgError) as exc:
        return SweepPoint(p.omega_p, p.g, math.nan, math.nan, math.nan, False,
                          f"{type(exc).__name__}: {exc}")
    return SweepPoint(p.omega_p, p.g, res.pi_max, res.t_at_max, res.horizon, effective)


def evaluate_points(params: list[cd.ModelParams], spec: SearchSpec, workers: int | None = None) -> list[SweepPoint]:
    """Evaluate ``pi_max`` at each parameter set, returned in input order."""
    tasks = [(p, spec) for p in params]
    workers = resolve_workers(workers)
    if workers == 1 or len(tasks) < 2:
        return [_evaluate(t) for t in tasks]
    chunk = max(1, len(tasks) // (4 * workers))
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_evaluate, tasks, chunksize=chunk))


def _axis(values, name: str) -> tuple[float, ...]:
    values = tuple(float(v) for v in values)
    if not values:
        raise ValueError(f"{name} grid must be nonempty")
    if any(b < a for a, b in zip(values, values[1:])):
        raise ValueError(f"{name} grid must be sorted ascending")
    return values


def sweep_omega_p(
    p_base: cd.ModelParams,
    omega_p_grid,
    spec: SearchSpec = SearchSpec(),
    *,
    g_values=None,
    workers: int | None = None,
) -> SweepResult:
    """Resonance curve(s): ``pi_max`` against ``omega_p``, one series per coupling.

    ``g_values`` defaults to ``(p_base.g,)``.
    """
    wps = _axis(omega_p_grid, "omega_p")
    gs = (p_base.g,) if g_values is None else tuple(float(g) for g in g_values)
    if not gs:
        raise ValueError("g_values must be nonempty")
    params = [p_base.replace(g=g, omega_p=w) for g in gs for w in wps]
    return SweepResult("sweep", gs, wps, evaluate_points(params, spec, workers))


def grid_g_omega_p(
    p_base: cd.ModelParams,
    g_grid,
    omega_p_grid,
    spec: SearchSpec = SearchSpec(),
    *,
    workers: int | None = None,
) -> SweepResult:
    gs = _axis(g_grid, "g")
    wps = _axis(omega_p_grid, "omega_p")
    params = [p_base.replace(g=g, omega_p=w) for g in gs for w in wps]
    return SweepResult("grid", gs, wps, evaluate_points(params, spec, workers))


@dataclass
class ProbeScan:
    thetas: np.ndarray
    phis: np.ndarray
    probes: np.ndarray
    values: np.ndarray

    @property
    def best_index(self) -> int:
        return int(np.argmax(self.values))


def sphere_grid_points(n_theta: int, n_phi: int):
    """Unit vectors on a latitude/longitude grid, theta-major, poles included."""
    thetas = np.linspace(0.0, math.pi, n_theta)
    phis = 2 * math.pi * np.arange(n_phi) / n_phi
    th, ph = np.meshgrid(thetas, phis, indexing="ij")
    th, ph = th.reshape(-1), ph.reshape(-1)
    probes = np.column_stack([np.sin(th) * np.cos(ph), np.sin(th) * np.sin(ph), np.cos(th)])
    return th, ph, probes


def _basis_trajectories(p: cd.ModelParams, spec: SearchSpec) -> np.ndarray:
    """System Bloch samples for each probe basis vector, shape (n_t, 3, 3).

    The Bloch vector of S is linear in the probe vector when S starts
    maximally mixed, so these three runs determine every probe.
    """
    if p.is_open:
        gen = od.LindbladGenerator.from_params(p)
        _, h, n = _open_steps(p, gen, spec)
        runs = [od.system_bloch_samples(gen, cd.initial_state(p.replace(probe=e)), h, n) for e in _BASIS]
    else:
        times = closed_time_grid(p, spec)
        runs = [cd.model_bloch_closed(p.replace(probe=e), times) for e in _BASIS]
    return np.stack(runs, axis=2)


def probe_scan(p: cd.ModelParams, spec: SearchSpec = SearchSpec(), sphere_grid=(19, 36)) -> ProbeScan:
    """Sampled ``pi_max`` for every unit probe vector on the sphere grid."""
    n_theta, n_phi = (int(n) for n in sphere_grid)
    if n_theta < 8 or n_phi < 8:
        raise ValueError("sphere grid resolutions must be >= 8")
    th, ph, probes = sphere_grid_points(n_theta, n_phi)
    values = np.zeros(len(probes))
    if p.g != 0:
        basis = _basis_trajectories(p, spec)
        chunk = max(1, 4_000_000 // (3 * basis.shape[0]))
        for start in range(0, len(probes), chunk):
            block = probes[start:start + chunk]
            bloch = np.einsum("tij,pj->tpi", basis, block)
            values[start:start + chunk] = np.linalg.norm(bloch, axis=2).max(axis=0)
    return ProbeScan(th, ph, probes, values)


def optimal_probe_search(
    p: cd.ModelParams, spec: SearchSpec = SearchSpec(), sphere_grid=(19, 36)
) -> tuple[np.ndarray, float]:
    """Probe direction on the sphere grid maximizing ``pi_max``.

    Ties go to the first grid point. The returned value is the full
    (refined) ``pi_max`` for the winning direction.
    """
    scan = probe_scan(p, spec, sphere_grid)
    best = scan.probes[scan.best_index]
    return best, pi_max(p.replace(probe=tuple(best)), spec).pi_max
