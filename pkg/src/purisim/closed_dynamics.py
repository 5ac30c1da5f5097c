"""Unitary evolution of the system + probe pair.

The main model is

    H_T = omega_s sz (x) I + omega_p I (x) sz + g sx (x) sx,

for which the propagator and the system Bloch vector have closed forms.
General free Hamiltonians ``omega_s n.sigma`` and ``omega_p m.sigma`` are
handled through an eigendecomposition of ``H_T``; their coupling is the
same ``sx (x) sx`` term written in frames rotated to ``n`` and ``m``, so
``n = m = z`` reproduces the main model exactly.
"""
from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field

import numpy as np

from . import qubit_algebra as qa

AXIS_TOL = 1e-12
HERMITIAN_H_TOL = 1e-10
# Bohr frequencies below this fraction of the largest one count as zero.
DEGENERATE_FREQ_REL = 1e-6

_Z_AXIS = (0.0, 0.0, 1.0)


def _vec3(v, name: str) -> tuple[float, float, float]:
    arr = np.asarray(v, dtype=float).reshape(-1)
    if arr.shape != (3,) or not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} must be a finite 3-vector, got {v!r}")
    return (float(arr[0]), float(arr[1]), float(arr[2]))


@dataclass(frozen=True)
class ModelParams:
    """Physical parameters of the system/probe model.

    ``probe`` is the Bloch vector of the probe's initial state. ``n_axis``
    and ``m_axis`` are the unit directions of the system and probe free
    Hamiltonians; both default to z.
    """

    omega_s: float = 1.0
    omega_p: float = 1.0
    g: float = 0.0
    gamma_s: float = 0.0
    gamma_p: float = 0.0
    probe: tuple[float, float, float] = (0.0, 0.0, 1.0)
    n_axis: tuple[float, float, float] = _Z_AXIS
    m_axis: tuple[float, float, float] = _Z_AXIS

    def __post_init__(self):
        for name in ("omega_s", "omega_p", "g", "gamma_s", "gamma_p"):
            value = float(getattr(self, name))
            if not math.isfinite(value):
                raise ValueError(f"{name} must be finite, got {value!r}")
            object.__setattr__(self, name, value)
        if self.gamma_s < 0 or self.gamma_p < 0:
            raise ValueError("decay rates gamma_s, gamma_p must be >= 0")
        probe = _vec3(self.probe, "probe")
        qa.check_bloch(probe)
        object.__setattr__(self, "probe", probe)
        for name in ("n_axis", "m_axis"):
            axis = _vec3(getattr(self, name), name)
            if abs(math.sqrt(sum(c * c for c in axis)) - 1.0) > AXIS_TOL:
                raise ValueError(f"{name} must be a unit vector, got {axis!r}")
            object.__setattr__(self, name, axis)

    @property
    def standard_axes(self) -> bool:
        """True for the main model (both free Hamiltonians along z)."""
        return self.n_axis == _Z_AXIS and self.m_axis == _Z_AXIS

    @property
    def is_open(self) -> bool:
        return self.gamma_s + self.gamma_p > 0

    def replace(self, **changes) -> "ModelParams":
        return dataclasses.replace(self, **changes)


@dataclass(frozen=True)
class DerivedFrequencies:
    omega_bar: float
    delta_omega: float
    alpha: float
    beta: float


@dataclass
class PurityTrace:
    """Sampled purity of S along a trajectory."""

    times: np.ndarray
    purities: np.ndarray
    bloch: np.ndarray | None = None
    t_max: float = field(init=False)
    pi_max: float = field(init=False)

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.purities = np.asarray(self.purities, dtype=float)
        if self.times.ndim != 1 or self.times.size == 0:
            raise ValueError("a purity trace needs at least one sample")
        if self.purities.shape != self.times.shape:
            raise ValueError("times and purities must have the same length")
        if np.any(np.diff(self.times) <= 0):
            raise ValueError("trace times must be strictly increasing")
        if self.bloch is not None:
            self.bloch = np.asarray(self.bloch, dtype=float)
            if self.bloch.shape != (self.times.size, 3):
                raise ValueError("bloch samples must have shape (len(times), 3)")
        k = int(np.argmax(self.purities))
        self.t_max = float(self.times[k])
        self.pi_max = float(self.purities[k])


def derived_frequencies(p: ModelParams) -> DerivedFrequencies:
    omega_bar = p.omega_s + p.omega_p
    delta_omega = p.omega_s - p.omega_p
    return DerivedFrequencies(
        omega_bar=omega_bar,
        delta_omega=delta_omega,
        alpha=math.hypot(omega_bar, p.g),
        beta=math.hypot(delta_omega, p.g),
    )


def rotation_from_z(axis) -> np.ndarray:
    """Rotation matrix taking the z unit vector onto ``axis``.

    Uses the minimal rotation about ``z x axis``; for ``axis = -z`` the
    rotation is by pi about x, so x is always mapped to a vector
    perpendicular to ``axis`` and ``axis = z`` gives the identity.
    """
    v = np.asarray(axis, dtype=float)
    v = v / np.linalg.norm(v)
    k = np.cross([0.0, 0.0, 1.0], v)
    s = np.linalg.norm(k)
    c = v[2]
    if s < 1e-15:
        return np.eye(3) if c > 0 else np.diag([1.0, -1.0, -1.0])
    k = k / s
    kx = np.array([[0, -k[2], k[1]], [k[2], 0, -k[0]], [-k[1], k[0], 0]])
    return np.eye(3) + s * kx + (1 - c) * (kx @ kx)


def _dot_sigma(v) -> np.ndarray:
    return v[0] * qa.SIGMA_X + v[1] * qa.SIGMA_Y + v[2] * qa.SIGMA_Z


def hamiltonian(p: ModelParams) -> np.ndarray:
    """Total Hamiltonian ``H_S + H_P + H_I`` as a 4x4 matrix."""
    rot_s = rotation_from_z(p.n_axis)
    rot_p = rotation_from_z(p.m_axis)
    h_s = p.omega_s * _dot_sigma(p.n_axis)
    h_p = p.omega_p * _dot_sigma(p.m_axis)
    coupling = qa.tensor(_dot_sigma(rot_s[:, 0]), _dot_sigma(rot_p[:, 0]))
    return qa.on_system(h_s) + qa.on_probe(h_p) + p.g * coupling


def sin_over(x: float, t):
    """sin(x t) / x, continued to t at x = 0."""
    return t * np.sinc(x * t / np.pi)


_II = np.eye(4, dtype=complex)
_ZZ = qa.tensor(qa.SIGMA_Z, qa.SIGMA_Z)
_ZI = qa.on_system(qa.SIGMA_Z)
_IZ = qa.on_probe(qa.SIGMA_Z)
_XX = qa.tensor(qa.SIGMA_X, qa.SIGMA_X)
_YY = qa.tensor(qa.SIGMA_Y, qa.SIGMA_Y)


def propagator(p: ModelParams, t: float) -> np.ndarray:
    """Closed-form ``exp(-i H_T t)`` for the main model.

    The state space splits into the {|00>, |11>} block, rotating at
    ``alpha``, and the {|01>, |10>} block, rotating at ``beta``.
    """
    if not p.standard_axes:
        raise ValueError("the closed-form propagator needs n_axis = m_axis = z; "
                         "use SpectralPropagator for general axes")
    t = float(t)
    f = derived_frequencies(p)
    sa = sin_over(f.alpha, t)
    sb = sin_over(f.beta, t)
    return (
        0.5 * math.cos(f.alpha * t) * (_II + _ZZ)
        + 0.5 * math.cos(f.beta * t) * (_II - _ZZ)
        - 0.5j * f.omega_bar * sa * (_ZI + _IZ)
        - 0.5j * f.delta_omega * sb * (_ZI - _IZ)
        - 0.5j * p.g * sa * (_XX - _YY)
        - 0.5j * p.g * sb * (_XX + _YY)
    )


def check_hamiltonian(h: np.ndarray) -> np.ndarray:
    h = np.asarray(h, dtype=complex)
    if h.shape != (4, 4):
        raise ValueError(f"Hamiltonian must be 4x4, got {h.shape}")
    if not np.all(np.isfinite(h)):
        raise ValueError("Hamiltonian has non-finite entries")
    drift = np.max(np.abs(h - h.conj().T))
    if drift > HERMITIAN_H_TOL:
        raise ValueError(f"Hamiltonian is not Hermitian (drift {drift:.3g})")
    return qa.hermitian_part(h)


class SpectralPropagator:
    """``exp(-i H t)`` for a fixed Hermitian ``H`` via its eigendecomposition.

    The decomposition is computed once, so evaluating many times is cheap.
    """

    def __init__(self, h: np.ndarray):
        self.hamiltonian = check_hamiltonian(h)
        self.energies, self.vectors = np.linalg.eigh(self.hamiltonian)
        self._gaps = self.energies[:, None] - self.energies[None, :]

    def unitary(self, t: float) -> np.ndarray:
        phases = np.exp(-1j * self.energies * float(t))
        return (self.vectors * phases) @ self.vectors.conj().T

    def evolve(self, rho: np.ndarray, t: float) -> np.ndarray:
        u = self.unitary(t)
        return u @ rho @ u.conj().T

    def bohr_frequencies(self) -> np.ndarray:
        """Distinct positive energy gaps, ascending."""
        gaps = np.abs(self._gaps[np.triu_indices(4, 1)])
        top = gaps.max(initial=0.0)
        gaps = np.sort(gaps[gaps > DEGENERATE_FREQ_REL * top]) if top > 0 else gaps[:0]
        return gaps

    def expectation(self, rho0: np.ndarray, observables: np.ndarray, times) -> np.ndarray:
        """``Tr(rho(t) O_i)`` for each observable, shape ``(len(times), n_obs)``."""
        v = self.vectors
        rho_e = v.conj().T @ rho0 @ v
        obs_e = np.einsum("aj,iab,bk->ijk", v.conj(), observables, v)
        # rho(t)_jk = rho_e_jk exp(-i (E_j - E_k) t); Tr(rho O) = sum rho_jk O_kj
        weights = np.einsum("jk,ikj->ijk", rho_e, obs_e).reshape(len(observables), 16)
        times = np.asarray(times, dtype=float).reshape(-1)
        out = np.empty((times.size, len(observables)))
        gaps = self._gaps.reshape(16)
        chunk = 65536
        for start in range(0, times.size, chunk):
            ph = np.exp(-1j * np.outer(times[start:start + chunk], gaps))
            out[start:start + chunk] = (ph @ weights.T).real
        return out


_SYSTEM_PAULIS = np.stack([qa.on_system(s) for s in qa.PAULIS])


def system_bloch_closed(h: np.ndarray | SpectralPropagator, rho_t0: np.ndarray, times) -> np.ndarray:
    """Bloch vector of S at each time, shape ``(len(times), 3)``."""
    prop = h if isinstance(h, SpectralPropagator) else SpectralPropagator(h)
    return prop.expectation(rho_t0, _SYSTEM_PAULIS, times)


def expm_hermitian(h: np.ndarray, t: float) -> np.ndarray:
    """``exp(-i H t)`` for Hermitian ``H``."""
    return SpectralPropagator(h).unitary(t)


def initial_state(p: ModelParams, system=(0.0, 0.0, 0.0)) -> np.ndarray:
    """Uncorrelated initial state ``rho_S (x) rho_P(probe)``."""
    return qa.tensor(qa.bloch_to_rho(system), qa.bloch_to_rho(p.probe))


def evolve_closed(p: ModelParams, rho_t0: np.ndarray, t: float) -> np.ndarray:
    """Composite state at time ``t`` under the model Hamiltonian."""
    rho = qa.check_density_matrix(rho_t0, 4)
    if p.standard_axes:
        u = propagator(p, t)
    else:
        u = expm_hermitian(hamiltonian(p), t)
    return u @ rho @ u.conj().T


def evolve_general_closed(h_t: np.ndarray, rho_t0: np.ndarray, t: float) -> np.ndarray:
    """Composite state at time ``t`` under an arbitrary Hermitian 4x4 Hamiltonian."""
    prop = SpectralPropagator(h_t)
    rho = qa.check_density_matrix(rho_t0, 4)
    return prop.evolve(rho, t)


def s_z_closed(p: ModelParams, t):
    """z component of the system Bloch vector, starting from the maximally
    mixed system state (main model; vectorized over ``t``).

    s_z(t) = p_z g^2 (sin^2(beta t) / beta^2 - sin^2(alpha t) / alpha^2)
    """
    f = derived_frequencies(p)
    t = np.asarray(t, dtype=float)
    out = p.probe[2] * p.g**2 * (sin_over(f.beta, t) ** 2 - sin_over(f.alpha, t) ** 2)
    return float(out) if out.ndim == 0 else out


def pi_sup_closed(p: ModelParams) -> float:
    """Supremum over t of ``|s_z_closed|``.

    For ``omega_s omega_p >= 0`` this is ``|p_z| g^2 / beta^2``; with
    opposite-sign frequencies ``alpha < beta`` and the negative lobe,
    ``|p_z| g^2 / alpha^2``, is the larger one. The bound is approached but
    not necessarily attained when ``alpha / beta`` is irrational.
    """
    if p.g == 0:
        return 0.0
    f = derived_frequencies(p)
    return abs(p.probe[2]) * p.g**2 / min(f.alpha, f.beta) ** 2


def pi_weak_coupling(p: ModelParams) -> float:
    """Lorentzian weak-coupling estimate ``|p_z| g^2 / ((omega_s - omega_p)^2 + g^2)``."""
    if p.g == 0:
        return 0.0
    return abs(p.probe[2]) * p.g**2 / ((p.omega_s - p.omega_p) ** 2 + p.g**2)


def model_bloch_closed(p: ModelParams, times, system=(0.0, 0.0, 0.0)) -> np.ndarray:
    """System Bloch vector samples, shape ``(len(times), 3)``.

    Uses the analytic s_z for the main model from the maximally mixed state
    and the spectral path otherwise.
    """
    times = np.asarray(times, dtype=float).reshape(-1)
    if p.standard_axes and not np.any(system):
        out = np.zeros((times.size, 3))
        out[:, 2] = s_z_closed(p, times)
        return out
    return system_bloch_closed(hamiltonian(p), initial_state(p, system), times)


def purity_trace_closed(p: ModelParams, times, system=(0.0, 0.0, 0.0)) -> PurityTrace:
    bloch = model_bloch_closed(p, times, system)
    return PurityTrace(times=times, purities=np.linalg.norm(bloch, axis=1), bloch=bloch)
