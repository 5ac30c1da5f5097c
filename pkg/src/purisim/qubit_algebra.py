"""Operators and states for a qubit S coupled to a qubit probe P.

Composite operators are ordered S (x) P everywhere in this package: the
system index is the slow Kronecker index, the probe index the fast one.
Matrices are plain ``numpy`` arrays; the ``check_*`` helpers validate them
at API boundaries.
"""
from __future__ import annotations

import numpy as np

HERMITIAN_TOL = 1e-12
TRACE_TOL = 1e-12
PSD_TOL = 1e-10
BLOCH_TOL = 1e-10

IDENTITY2 = np.eye(2, dtype=complex)
SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)
PAULIS = (SIGMA_X, SIGMA_Y, SIGMA_Z)

_AXES = {"x": 0, "y": 1, "z": 2}


class InvalidStateError(ValueError):
    """Raised when a matrix or vector is not a valid quantum state."""


def pauli(axis: str | int) -> np.ndarray:
    """Return the Pauli matrix for ``axis`` ('x', 'y', 'z' or 0, 1, 2)."""
    if isinstance(axis, str):
        try:
            axis = _AXES[axis.lower()]
        except KeyError:
            raise ValueError(f"unknown Pauli axis {axis!r}") from None
    if axis not in (0, 1, 2):
        raise ValueError(f"unknown Pauli axis {axis!r}")
    return PAULIS[axis].copy()


def tensor(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Kronecker product ``a (x) b`` of two single-qubit operators."""
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != (2, 2) or b.shape != (2, 2):
        raise ValueError(f"tensor expects two 2x2 operators, got {a.shape} and {b.shape}")
    return np.kron(a, b)


def on_system(op: np.ndarray) -> np.ndarray:
    """Embed a single-qubit operator as ``op (x) I``."""
    return tensor(op, IDENTITY2)


def on_probe(op: np.ndarray) -> np.ndarray:
    """Embed a single-qubit operator as ``I (x) op``."""
    return tensor(IDENTITY2, op)


def hermitian_part(m: np.ndarray) -> np.ndarray:
    return 0.5 * (m + m.conj().T)


def check_density_matrix(
    rho: np.ndarray,
    dim: int | None = None,
    *,
    hermitian_tol: float = HERMITIAN_TOL,
    trace_tol: float = TRACE_TOL,
    psd_tol: float = PSD_TOL,
) -> np.ndarray:
    """Validate ``rho`` as a density matrix and return it as a complex array.

    Raises
    ------
    InvalidStateError
        If ``rho`` is not square of dimension 2 or 4 (or ``dim``), contains
        non-finite entries, is not Hermitian, has trace different from one,
        or has an eigenvalue below ``-psd_tol``.
    """
    rho = np.asarray(rho, dtype=complex)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1] or rho.shape[0] not in (2, 4):
        raise InvalidStateError(f"density matrix must be 2x2 or 4x4, got shape {rho.shape}")
    if dim is not None and rho.shape[0] != dim:
        raise InvalidStateError(f"expected a {dim}x{dim} density matrix, got {rho.shape}")
    if not np.all(np.isfinite(rho)):
        raise InvalidStateError("density matrix has non-finite entries")
    drift = np.max(np.abs(rho - rho.conj().T))
    if drift > hermitian_tol:
        raise InvalidStateError(f"density matrix is not Hermitian (drift {drift:.3g})")
    tr = np.trace(rho)
    if abs(tr - 1.0) > trace_tol:
        raise InvalidStateError(f"density matrix trace is {tr.real:.15g}, expected 1")
    lowest = np.linalg.eigvalsh(hermitian_part(rho))[0]
    if lowest < -psd_tol:
        raise InvalidStateError(f"density matrix has negative eigenvalue {lowest:.3g}")
    return rho


def check_bloch(s, tol: float = BLOCH_TOL) -> np.ndarray:
    s = np.asarray(s, dtype=float)
    if s.shape != (3,):
        raise InvalidStateError(f"Bloch vector must have 3 components, got shape {s.shape}")
    if not np.all(np.isfinite(s)):
        raise InvalidStateError("Bloch vector has non-finite components")
    norm = float(np.linalg.norm(s))
    if norm > 1.0 + tol:
        raise InvalidStateError(f"Bloch vector norm {norm:.15g} exceeds 1")
    return s


def partial_trace_p(rho_t: np.ndarray, **check_kw) -> np.ndarray:
    """Trace out the probe from a 4x4 composite state, returning the 2x2 state of S."""
    rho_t = check_density_matrix(rho_t, 4, **check_kw)
    return np.trace(rho_t.reshape(2, 2, 2, 2), axis1=1, axis2=3)


def partial_trace_s(rho_t: np.ndarray, **check_kw) -> np.ndarray:
    """Trace out the system from a 4x4 composite state, returning the probe state."""
    rho_t = check_density_matrix(rho_t, 4, **check_kw)
    return np.trace(rho_t.reshape(2, 2, 2, 2), axis1=0, axis2=2)


def bloch_to_rho(s) -> np.ndarray:
    """Density matrix ``(I + s . sigma) / 2`` of the Bloch vector ``s``."""
    s = check_bloch(s)
    return 0.5 * (IDENTITY2 + s[0] * SIGMA_X + s[1] * SIGMA_Y + s[2] * SIGMA_Z)


def rho_to_bloch(rho: np.ndarray, **check_kw) -> np.ndarray:
    """Bloch vector with components ``Tr(rho sigma_i)``."""
    rho = check_density_matrix(rho, 2, **check_kw)
    return np.array([np.trace(rho @ sig).real for sig in PAULIS])


def system_bloch(rho_t: np.ndarray) -> np.ndarray:
    """Bloch vector of S read directly off a composite state (or a stack of them).

    No validation is done, so this also works on trajectories with small
    integration drift.
    """
    rho_t = np.asarray(rho_t)
    ops = np.stack([on_system(sig) for sig in PAULIS])
    # Tr(rho O) = sum_jk rho_jk O_kj
    return np.einsum("...jk,ikj->...i", rho_t, ops).real


def purity(s) -> float:
    """Purity of a qubit state given by its Bloch vector: the vector norm."""
    return float(np.linalg.norm(check_bloch(s)))


def purity_of_rho(rho: np.ndarray) -> float:
    """Purity ``sqrt(2 Tr rho^2 - 1)`` computed from the density matrix."""
    rho = check_density_matrix(rho, 2)
    value = 2.0 * np.trace(rho @ rho).real - 1.0
    return float(np.sqrt(max(value, 0.0)))


def maximally_mixed(dim: int = 2) -> np.ndarray:
    if dim not in (2, 4):
        raise ValueError("dim must be 2 or 4")
    return np.eye(dim, dtype=complex) / dim
