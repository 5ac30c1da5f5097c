"""Cartan (KAK) decomposition of two-qubit unitaries.

Every ``U`` in U(4) factors as

    U = exp(i phase) (l1_s x l1_p) exp(i (c_x XX + c_y YY + c_z ZZ)) (l2_s x l2_p)

with single-qubit unitaries on either side. Only ``c`` carries the
entangling power; it is folded into the Weyl chamber
``pi/4 >= c_x >= c_y >= |c_z|`` so it is a local invariant.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import qubit_algebra as qa
from .closed_dynamics import ModelParams, SpectralPropagator, hamiltonian, propagator

UNITARY_TOL = 1e-10
DEFAULT_TOL = 1e-8
_EDGE_TOL = 1e-10
_QUARTER = math.pi / 4

MAGIC = np.array(
    [[1, 0, 0, 1j],
     [0, 1j, 1, 0],
     [0, 1j, -1, 0],
     [1, 0, 0, -1j]],
    dtype=complex,
) / math.sqrt(2)

_TWO_BODY = [qa.tensor(s, s) for s in qa.PAULIS]
# eigenvalue of XX, YY, ZZ on each magic basis vector: _LAMBDA[j, k]
_LAMBDA = np.array([np.diag(MAGIC.conj().T @ op @ MAGIC).real for op in _TWO_BODY])
_PHASE_SYSTEM = np.column_stack([np.ones(4), _LAMBDA.T])
# fixed mixing weights for simultaneous diagonalization of Re M and Im M
_MIX = (0.6180339887498949, 1.4142135623730951, 0.3183098861837907, 2.718281828459045, -0.7071067811865476)


class NotUnitaryError(ValueError):
    pass


@dataclass
class KakDecomposition:
    l1_s: np.ndarray
    l1_p: np.ndarray
    l2_s: np.ndarray
    l2_p: np.ndarray
    c: np.ndarray
    phase: float

    def reconstruct(self) -> np.ndarray:
        return (
            np.exp(1j * self.phase)
            * np.kron(self.l1_s, self.l1_p)
            @ canonical_gate(self.c)
            @ np.kron(self.l2_s, self.l2_p)
        )


def canonical_gate(c) -> np.ndarray:
    """``exp(i (c_x XX + c_y YY + c_z ZZ))``."""
    c = np.asarray(c, dtype=float)
    diag = np.exp(1j * (c @ _LAMBDA))
    return (MAGIC * diag) @ MAGIC.conj().T


def _rotor(axis: int) -> np.ndarray:
    """exp(-i pi/4 sigma_axis): cyclically exchanges the other two Paulis."""
    return (qa.IDENTITY2 - 1j * qa.PAULIS[axis]) / math.sqrt(2)


class _Factors:
    """Book-keeping for folding moves that keep the product fixed."""

    def __init__(self, c, phase=0.0, l1=(qa.IDENTITY2, qa.IDENTITY2), l2=(qa.IDENTITY2, qa.IDENTITY2)):
        self.c = np.array(c, dtype=float)
        self.phase = float(phase)
        self.l1_s, self.l1_p = (np.array(m, dtype=complex) for m in l1)
        self.l2_s, self.l2_p = (np.array(m, dtype=complex) for m in l2)

    def shift(self, j: int, k: int):
        # N(c) = N(c - k pi/2 e_j) (i s_j s_j)^k
        if k == 0:
            return
        self.c[j] -= k * math.pi / 2
        self.phase += k * math.pi / 2
        sig = np.linalg.matrix_power(qa.PAULIS[j], k % 2)
        self.l2_s = sig @ self.l2_s
        self.l2_p = sig @ self.l2_p

    def flip(self, j: int, k: int):
        # conjugation by s_l (x) I negates c_j and c_k
        (l,) = {0, 1, 2} - {j, k}
        self.c[j] = -self.c[j]
        self.c[k] = -self.c[k]
        sig = qa.PAULIS[l]
        self.l1_s = self.l1_s @ sig
        self.l2_s = sig @ self.l2_s

    def swap(self, j: int, k: int):
        # N(c) = V^dag N(c with j, k exchanged) V, V = v (x) v
        (l,) = {0, 1, 2} - {j, k}
        v = _rotor(l)
        self.c[[j, k]] = self.c[[k, j]]
        self.l1_s = self.l1_s @ v.conj().T
        self.l1_p = self.l1_p @ v.conj().T
        self.l2_s = v @ self.l2_s
        self.l2_p = v @ self.l2_p

    def fold(self):
        for j in range(3):
            k = round(self.c[j] / (math.pi / 2))
            if self.c[j] - k * math.pi / 2 <= -_QUARTER + _EDGE_TOL:
                k -= 1
            self.shift(j, k)
        # sort by magnitude, descending
        for _ in range(2):
            for j in range(2):
                if abs(self.c[j]) < abs(self.c[j + 1]):
                    self.swap(j, j + 1)
        if self.c[0] < 0:
            self.flip(0, 2)
        if self.c[1] < 0:
            self.flip(1, 2)
        if self.c[0] >= _QUARTER - _EDGE_TOL and self.c[2] < 0:
            self.flip(0, 2)
            self.shift(0, -1)
        return self


def weyl_fold(c) -> np.ndarray:
    """Canonical representative of ``c`` in the Weyl chamber."""
    return _Factors(c).fold().c + 0.0


def _check_unitary(u) -> np.ndarray:
    u = np.asarray(u, dtype=complex)
    if u.shape != (4, 4):
        raise NotUnitaryError(f"expected a 4x4 unitary, got shape {u.shape}")
    err = np.max(np.abs(u.conj().T @ u - np.eye(4)))
    if not err <= UNITARY_TOL:
        raise NotUnitaryError(f"matrix is not unitary (error {err:.3g})")
    return u


def _real_orthogonal_eigenbasis(m: np.ndarray) -> np.ndarray:
    """Real orthogonal O with O^T m O diagonal, for symmetric unitary m."""
    re, im = m.real, m.imag
    for w in _MIX:
        _, o = np.linalg.eigh(re + w * im)
        d = o.T @ m @ o
        if np.max(np.abs(d - np.diag(np.diag(d)))) < 1e-10:
            break
    else:
        raise np.linalg.LinAlgError("could not diagonalize U^T U in the magic basis")
    if np.linalg.det(o) < 0:
        o[:, 0] = -o[:, 0]
    return o


def factor_local(k: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Split a 4x4 product operator ``a (x) b`` into unitary ``a`` and ``b``."""
    r = k.reshape(2, 2, 2, 2).transpose(0, 2, 1, 3).reshape(4, 4)
    u, s, vh = np.linalg.svd(r)
    a = math.sqrt(s[0]) * u[:, 0].reshape(2, 2)
    b = math.sqrt(s[0]) * vh[0].reshape(2, 2)
    return a, b


def kak_decompose(u: np.ndarray) -> KakDecomposition:
    """Magic-basis KAK decomposition of a two-qubit unitary."""
    u = _check_unitary(u)
    psi = np.angle(np.linalg.det(u)) / 4
    up = MAGIC.conj().T @ (u * np.exp(-1j * psi)) @ MAGIC
    o = _real_orthogonal_eigenbasis(up.T @ up)
    half = np.angle(np.diag(o.T @ up.T @ up @ o)) / 2
    # the branch of each square root is free up to pairs; fix det(K1) = +1
    if round(half.sum() / math.pi) % 2:
        half[0] += math.pi
    k1 = up @ o @ np.diag(np.exp(-1j * half))
    l1 = MAGIC @ k1.real @ MAGIC.conj().T
    l2 = MAGIC @ o.T @ MAGIC.conj().T
    phi0, *c = np.linalg.solve(_PHASE_SYSTEM, half)
    f = _Factors(c, psi + phi0, factor_local(l1), factor_local(l2)).fold()
    return KakDecomposition(
        l1_s=f.l1_s, l1_p=f.l1_p, l2_s=f.l2_s, l2_p=f.l2_p,
        c=f.c + 0.0, phase=float(np.angle(np.exp(1j * f.phase))),
    )


def can_purify(c, tol: float = DEFAULT_TOL) -> bool:
    """Necessary condition for purification: at least two of |c_i| exceed ``tol``."""
    if not tol > 0:
        raise ValueError("tol must be positive")
    folded = weyl_fold(c)
    return int(np.sum(np.abs(folded) > tol)) >= 2


@dataclass(frozen=True)
class CapabilityPoint:
    t: float
    c: tuple[float, float, float]
    can_purify: bool


def capability_scan(
    p: ModelParams,
    times,
    tol: float = DEFAULT_TOL,
    hamiltonian_override: np.ndarray | None = None,
) -> list[CapabilityPoint]:
    """Cartan coefficients of ``exp(-i H_T t)`` and the capability flag at each time.

    ``hamiltonian_override`` replaces the model Hamiltonian, for variants the
    parameters cannot express.
    """
    times = [float(t) for t in times]
    if not times:
        raise ValueError("times must be nonempty")
    if hamiltonian_override is not None:
        prop = SpectralPropagator(hamiltonian_override)
        unitary = prop.unitary
    elif p.standard_axes:
        def unitary(t):
            return propagator(p, t)
    else:
        unitary = SpectralPropagator(hamiltonian(p)).unitary
    out = []
    for t in times:
        c = kak_decompose(unitary(t)).c
        out.append(CapabilityPoint(t, tuple(float(x) for x in c), can_purify(c, tol)))
    return out
