"""Open-system evolution under isotropic decoherence of S and P.

The master equation is

    drho/dt = -i [H, rho] + gamma_s D_S[rho] + gamma_p D_P[rho],
    D_S[rho] = sum_i (s_i x I) rho (s_i x I) - 3 rho,

and likewise for the probe. Each channel contracts the local Bloch vector
as ``exp(-4 gamma t)``.

States are integrated with classical fixed-step RK4. Because the generator
is linear and time independent, one RK4 step is exactly multiplication by
the polynomial ``1 + hL + (hL)^2/2 + (hL)^3/6 + (hL)^4/24``; the fast path
used by the purity search precomputes that matrix in the real Pauli basis.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import qubit_algebra as qa
from .closed_dynamics import ModelParams, check_hamiltonian, derived_frequencies, hamiltonian

TRACE_DRIFT_TOL = 1e-9
HERMITIAN_DRIFT_TOL = 1e-9
POSITIVITY_TOL = 1e-8
# steps per inverse spectral radius of the generator
STEPS_PER_RATE = 20
MAX_STEPS = 50_000_000
EFFECTIVE_FACTOR = 10.0

_SYS_OPS = [qa.on_system(s) for s in qa.PAULIS]
_PRB_OPS = [qa.on_probe(s) for s in qa.PAULIS]


class IntegrationError(RuntimeError):
    """The integrator could not produce a trustworthy trajectory.

    ``last_good_time`` is the last sample time whose state passed all checks.
    """

    def __init__(self, message: str, last_good_time: float):
        super().__init__(f"{message} (last good time t = {last_good_time:.17g})")
        self.last_good_time = last_good_time


class ConvergenceError(IntegrationError):
    """Halving the step changed the trajectory by more than the tolerance."""


def _check_rates(gamma_s: float, gamma_p: float):
    if not (math.isfinite(gamma_s) and math.isfinite(gamma_p)):
        raise ValueError("decay rates must be finite")
    if gamma_s < 0 or gamma_p < 0:
        raise ValueError(f"decay rates must be >= 0, got gamma_s={gamma_s}, gamma_p={gamma_p}")


def dissipator(rho_t: np.ndarray, gamma_s: float, gamma_p: float) -> np.ndarray:
    """Isotropic depolarizing term acting independently on S and P."""
    _check_rates(gamma_s, gamma_p)
    rho = qa.check_density_matrix(rho_t, 4)
    return _dissipate(rho, gamma_s, gamma_p)


def _dissipate(rho, gamma_s, gamma_p):
    out = np.zeros_like(rho)
    if gamma_s:
        out += gamma_s * (sum(a @ rho @ a for a in _SYS_OPS) - 3 * rho)
    if gamma_p:
        out += gamma_p * (sum(a @ rho @ a for a in _PRB_OPS) - 3 * rho)
    return out


def _vec(m):
    return m.reshape(-1, order="F")


def _unvec(v):
    return v.reshape(4, 4, order="F")


# Columns: vec(sigma_a (x) sigma_b), a, b in (I, x, y, z).
_PAULI_BASIS = np.stack(
    [_vec(np.kron(a, b)) for a in (qa.IDENTITY2, *qa.PAULIS) for b in (qa.IDENTITY2, *qa.PAULIS)],
    axis=1,
)
# Rows of the real Pauli-basis vector holding <s_i (x) I>.
_SYSTEM_ROWS = [4, 8, 12]


@dataclass(frozen=True)
class LindbladGenerator:
    hamiltonian: np.ndarray
    gamma_s: float = 0.0
    gamma_p: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "hamiltonian", check_hamiltonian(self.hamiltonian))
        _check_rates(self.gamma_s, self.gamma_p)

    @classmethod
    def from_params(cls, p: ModelParams) -> "LindbladGenerator":
        return cls(hamiltonian(p), p.gamma_s, p.gamma_p)

    def __call__(self, rho: np.ndarray) -> np.ndarray:
        h = self.hamiltonian
        return -1j * (h @ rho - rho @ h) + _dissipate(rho, self.gamma_s, self.gamma_p)

    def superoperator(self) -> np.ndarray:
        """16x16 matrix acting on column-stacked density matrices."""
        eye = np.eye(4)
        h = self.hamiltonian
        sup = -1j * (np.kron(eye, h) - np.kron(h.T, eye))
        for gamma, ops in ((self.gamma_s, _SYS_OPS), (self.gamma_p, _PRB_OPS)):
            if gamma:
                sup = sup + gamma * (sum(np.kron(a.T, a) for a in ops) - 3 * np.eye(16))
        return sup

    def pauli_superoperator(self) -> np.ndarray:
        """Real 16x16 generator acting on ``r_ab = Tr(rho s_a (x) s_b)``."""
        g = _PAULI_BASIS.conj().T @ self.superoperator() @ _PAULI_BASIS / 4
        return g.real

    def spectral_radius(self) -> float:
        return float(np.max(np.abs(np.linalg.eigvals(self.superoperator()))))

    def step_size(self, dt_max: float) -> float:
        """Largest RK4 step allowed: ``dt_max``, capped by the generator's fastest rate."""
        radius = self.spectral_radius()
        if radius == 0:
            return float(dt_max)
        return min(float(dt_max), 1.0 / (STEPS_PER_RATE * radius))


@dataclass
class Trajectory:
    times: np.ndarray
    states: np.ndarray
    step: float

    def system_bloch(self) -> np.ndarray:
        return qa.system_bloch(self.states)

    def system_purity(self) -> np.ndarray:
        return np.linalg.norm(self.system_bloch(), axis=1)


def _rk4_step(sup, v, h):
    k1 = sup @ v
    k2 = sup @ (v + 0.5 * h * k1)
    k3 = sup @ (v + 0.5 * h * k2)
    k4 = sup @ (v + h * k3)
    return v + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)


def _step_grid(t_end: float, dt: float) -> tuple[int, float]:
    n = int(math.ceil(t_end / dt - 1e-9))
    if n > MAX_STEPS:
        raise IntegrationError(f"step-size underflow: {n} steps of {dt:.3g} requested", 0.0)
    n = max(n, 1)
    return n, t_end / n


def _run(gen, rho0, t_end, dt, sample_every):
    sup = gen.superoperator()
    n, h = _step_grid(t_end, dt)
    if h <= 0 or t_end / h > MAX_STEPS:
        raise IntegrationError("step-size underflow", 0.0)
    v = _vec(rho0.astype(complex))
    idx = list(range(0, n + 1, sample_every))
    if idx[-1] != n:
        idx.append(n)
    times = np.array(idx, dtype=float) * h
    states = np.empty((len(idx), 4, 4), dtype=complex)
    states[0] = rho0
    last_good = 0.0
    j = 1
    for step in range(1, n + 1):
        v = _rk4_step(sup, v, h)
        rho = _unvec(v)
        rho = 0.5 * (rho + rho.conj().T)
        v = _vec(rho)
        if j < len(idx) and step == idx[j]:
            _check_state(rho, last_good)
            states[j] = rho
            last_good = times[j]
            j += 1
    return times, states, h


def _check_state(rho, last_good):
    if not np.all(np.isfinite(rho)):
        raise IntegrationError("non-finite state", last_good)
    drift = abs(np.trace(rho) - 1.0)
    if drift > TRACE_DRIFT_TOL:
        raise IntegrationError(f"trace drift {drift:.3g} exceeds tolerance", last_good)
    lowest = np.linalg.eigvalsh(rho)[0]
    if lowest < -POSITIVITY_TOL:
        raise IntegrationError(f"negative eigenvalue {lowest:.3g}", last_good)


def integrate_lindblad(
    gen: LindbladGenerator,
    rho_t0: np.ndarray,
    t_end: float,
    dt_max: float,
    *,
    sample_every: int = 1,
    convergence_tol: float | None = 1e-6,
) -> Trajectory:
    """Integrate the master equation from ``rho_t0`` up to ``t_end``.

    The fixed step is ``gen.step_size(dt_max)`` shrunk so that it divides
    ``t_end``. After every step the state is re-Hermitized; the trace is
    left alone so drift stays visible. Every ``sample_every``-th state (and
    the final one) is returned and checked for trace drift and positivity.

    With ``convergence_tol`` set, the run is repeated at half the step and
    a ``ConvergenceError`` is raised if any sampled entry moves by more
    than the tolerance.
    """
    t_end = float(t_end)
    if not t_end > 0:
        raise ValueError("t_end must be positive")
    if not dt_max > 0:
        raise ValueError("dt_max must be positive")
    if sample_every < 1:
        raise ValueError("sample_every must be >= 1")
    rho0 = qa.check_density_matrix(rho_t0, 4)
    dt = gen.step_size(dt_max)
    times, states, h = _run(gen, rho0, t_end, dt, sample_every)
    if convergence_tol is not None:
        _, fine, _ = _run(gen, rho0, t_end, h / 2, 2 * sample_every)
        if fine.shape == states.shape:
            worst = np.max(np.abs(fine - states), axis=(1, 2))
            bad = np.nonzero(worst > convergence_tol)[0]
            if bad.size:
                last_good = float(times[bad[0] - 1]) if bad[0] > 0 else 0.0
                raise ConvergenceError(
                    f"step halving changed the state by {worst[bad[0]]:.3g}", last_good
                )
    return Trajectory(times=times, states=states, step=h)


def rk4_pauli_propagator(gen: LindbladGenerator, h: float) -> np.ndarray:
    """Real 16x16 matrix of one RK4 step of size ``h`` in the Pauli basis."""
    z = h * gen.pauli_superoperator()
    z2 = z @ z
    return np.eye(16) + z + z2 / 2 + z2 @ z / 6 + z2 @ z2 / 24


def pauli_coordinates(rho: np.ndarray) -> np.ndarray:
    """``r_ab = Tr(rho s_a (x) s_b)`` as a real 16-vector."""
    return (_PAULI_BASIS.conj().T @ _vec(np.asarray(rho, dtype=complex))).real


def system_bloch_samples(
    gen: LindbladGenerator, rho_t0: np.ndarray, h: float, n_steps: int, block: int = 256
) -> np.ndarray:
    """System Bloch vector after each of ``n_steps`` RK4 steps of size ``h``.

    Returns shape ``(n_steps + 1, 3)``; row ``k`` is the state at ``k h``.
    """
    if n_steps > MAX_STEPS:
        raise IntegrationError(f"step-size underflow: {n_steps} steps requested", 0.0)
    m = rk4_pauli_propagator(gen, h)
    powers = np.empty((block, 16, 16))
    powers[0] = np.eye(16)
    for j in range(1, block):
        powers[j] = m @ powers[j - 1]
    jump = m @ powers[-1]
    readout = powers[:, _SYSTEM_ROWS, :]
    r = pauli_coordinates(rho_t0)
    out = np.empty((n_steps + 1, 3))
    for start in range(0, n_steps + 1, block):
        stop = min(start + block, n_steps + 1)
        out[start:stop] = (readout[: stop - start] @ r)
        r = jump @ r
    if not np.all(np.isfinite(out)):
        bad = int(np.argmin(np.all(np.isfinite(out), axis=1)))
        raise IntegrationError("non-finite state", max(bad - 1, 0) * h)
    return out


@dataclass(frozen=True)
class TimeScales:
    t_fast: float
    t_slow: float
    t_damp: float

    @property
    def effective(self) -> bool:
        """Damping is slow compared with the slow purification oscillation."""
        if math.isinf(self.t_damp):
            return True
        return self.t_damp > EFFECTIVE_FACTOR * self.t_slow


def time_scales(p: ModelParams) -> TimeScales:
    f = derived_frequencies(p)
    total = f.alpha + f.beta
    gap = abs(f.alpha - f.beta)
    return TimeScales(
        t_fast=1.0 / total if total > 0 else math.inf,
        t_slow=1.0 / gap if gap > 0 else math.inf,
        t_damp=1.0 / p.gamma_s if p.gamma_s > 0 else math.inf,
    )
