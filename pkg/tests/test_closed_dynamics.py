import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from purisim import closed_dynamics as cd
from purisim import qubit_algebra as qa

freq = st.floats(-5.0, 5.0, allow_nan=False)
coupling = st.floats(0.0, 5.0, allow_nan=False)
times = st.floats(0.0, 50.0, allow_nan=False)


def unit(v):
    v = np.asarray(v, dtype=float)
    return v / np.linalg.norm(v)


def test_model_params_defaults_and_validation():
    p = cd.ModelParams()
    assert p.standard_axes and not p.is_open
    assert p.replace(gamma_s=0.1).is_open
    with pytest.raises(ValueError):
        cd.ModelParams(gamma_s=-1.0)
    with pytest.raises(ValueError):
        cd.ModelParams(probe=(0.0, 0.0, 1.5))
    with pytest.raises(ValueError):
        cd.ModelParams(g=math.nan)


def test_derived_frequencies():
    f = cd.derived_frequencies(cd.ModelParams(omega_s=1.0, omega_p=0.5, g=0.3))
    assert f.alpha == pytest.approx(math.hypot(1.5, 0.3))
    assert f.beta == pytest.approx(math.hypot(0.5, 0.3))


def test_hamiltonian_matches_definition():
    p = cd.ModelParams(omega_s=0.7, omega_p=1.3, g=0.4)
    h = (0.7 * qa.on_system(qa.SIGMA_Z) + 1.3 * qa.on_probe(qa.SIGMA_Z)
         + 0.4 * qa.tensor(qa.SIGMA_X, qa.SIGMA_X))
    assert np.allclose(cd.hamiltonian(p), h)


@settings(max_examples=100, deadline=None)
@given(freq, freq, coupling, times)
def test_closed_form_propagator_matches_spectral(ws, wp, g, t):
    p = cd.ModelParams(omega_s=ws, omega_p=wp, g=g)
    u = cd.propagator(p, t)
    assert np.allclose(u, cd.expm_hermitian(cd.hamiltonian(p), t), atol=1e-10, rtol=0)
    assert np.allclose(u.conj().T @ u, np.eye(4), atol=1e-12)


def test_propagator_at_degenerate_beta():
    # omega_s = omega_p with g = 0 makes beta vanish
    p = cd.ModelParams(omega_s=1.0, omega_p=1.0, g=0.0)
    assert np.allclose(cd.propagator(p, 2.0), cd.expm_hermitian(cd.hamiltonian(p), 2.0), atol=1e-12)


def test_propagator_rejects_rotated_axes():
    with pytest.raises(ValueError):
        cd.propagator(cd.ModelParams(n_axis=(1.0, 0.0, 0.0)), 1.0)


@settings(max_examples=50, deadline=None)
@given(freq, freq, coupling, st.floats(-1, 1))
def test_analytic_s_z_matches_evolution(ws, wp, g, pz):
    p = cd.ModelParams(omega_s=ws, omega_p=wp, g=g, probe=(0.0, 0.0, pz))
    ts = np.linspace(0.0, 10.0, 23)
    numeric = cd.system_bloch_closed(cd.hamiltonian(p), cd.initial_state(p), ts)
    assert np.allclose(numeric[:, 2], cd.s_z_closed(p, ts), atol=1e-10)
    assert np.allclose(numeric[:, :2], 0.0, atol=1e-12)


@pytest.mark.parametrize("probe", [(1.0, 0.0, 0.0), (0.0, 1.0, 0.0), (0.6, 0.0, 0.8)])
def test_transverse_probe_components_do_not_reach_system(probe):
    p = cd.ModelParams(omega_s=1.0, omega_p=0.7, g=0.5, probe=probe)
    ts = np.linspace(0.0, 20.0, 101)
    exact = cd.system_bloch_closed(cd.hamiltonian(p), cd.initial_state(p), ts)
    assert np.allclose(cd.model_bloch_closed(p, ts), exact, atol=1e-12)


@settings(max_examples=100, deadline=None)
@given(freq, freq, st.floats(0.01, 5.0), times)
def test_s_z_never_exceeds_supremum(ws, wp, g, t):
    p = cd.ModelParams(omega_s=ws, omega_p=wp, g=g)
    assert abs(cd.s_z_closed(p, t)) <= cd.pi_sup_closed(p) + 1e-12


def test_supremum_uses_smaller_frequency_for_opposite_signs():
    p = cd.ModelParams(omega_s=1.0, omega_p=-1.0, g=0.2)
    f = cd.derived_frequencies(p)
    assert f.alpha < f.beta
    assert cd.pi_sup_closed(p) == pytest.approx(0.04 / f.alpha**2)


def test_weak_coupling_lorentzian():
    p = cd.ModelParams(omega_s=1.0, omega_p=1.01, g=0.01)
    assert cd.pi_weak_coupling(p) == pytest.approx(0.5)
    assert cd.pi_weak_coupling(p.replace(g=0.0)) == 0.0


def test_sin_over_limit():
    t = np.array([0.0, 1.0, 3.0])
    assert np.allclose(cd.sin_over(0.0, t), t)
    assert np.allclose(cd.sin_over(2.0, t), np.sin(2 * t) / 2)


def test_rotation_from_z():
    for axis in [(0, 0, 1), (1, 0, 0), (0, 0, -1), unit((1, 1, 1)), unit((-1, 2, 0.3))]:
        r = cd.rotation_from_z(axis)
        assert np.allclose(r @ r.T, np.eye(3))
        assert np.linalg.det(r) == pytest.approx(1.0)
        assert np.allclose(r @ [0, 0, 1], axis)


def test_spectral_bohr_frequencies():
    p = cd.ModelParams(omega_s=1.0, omega_p=0.6, g=0.3)
    f = cd.derived_frequencies(p)
    freqs = cd.SpectralPropagator(cd.hamiltonian(p)).bohr_frequencies()
    for expected in (2 * f.beta, 2 * f.alpha, f.alpha - f.beta, f.alpha + f.beta):
        assert np.min(np.abs(freqs - expected)) < 1e-9


def test_check_hamiltonian_rejects_non_hermitian():
    with pytest.raises(ValueError):
        cd.check_hamiltonian(np.triu(np.ones((4, 4))))


def test_purity_trace():
    p = cd.ModelParams(omega_s=1.0, omega_p=1.0, g=0.1)
    trace = cd.purity_trace_closed(p, np.linspace(0, 40, 4001))
    assert trace.pi_max == pytest.approx(1.0, abs=1e-3)
    assert trace.t_max == pytest.approx(math.pi / 0.2, abs=0.05)
    with pytest.raises(ValueError):
        cd.PurityTrace(times=[0.0, 0.0], purities=[0.0, 0.0])


def test_initial_state_is_product():
    p = cd.ModelParams(probe=(0.0, 0.6, 0.8))
    rho = cd.initial_state(p, system=(0.1, 0.0, 0.0))
    assert np.allclose(qa.rho_to_bloch(qa.partial_trace_s(rho)), p.probe)
    assert np.allclose(qa.rho_to_bloch(qa.partial_trace_p(rho)), (0.1, 0, 0))


def test_reference_frequencies():
    f = cd.derived_frequencies(cd.ModelParams(omega_s=1.0, omega_p=1.0, g=0.1))
    assert (f.omega_bar, f.delta_omega) == (2.0, 0.0)
    assert f.alpha == pytest.approx(math.sqrt(4.01)) and f.beta == pytest.approx(0.1)
    f = cd.derived_frequencies(cd.ModelParams(omega_s=1.0, omega_p=0.0, g=0.0))
    assert (f.alpha, f.beta) == (1.0, 1.0)
    assert cd.derived_frequencies(cd.ModelParams(omega_p=0.9, g=0.1)).beta == pytest.approx(math.sqrt(0.02))


def test_reference_propagator():
    p = cd.ModelParams(omega_s=1.0, omega_p=0.5, g=0.3)
    assert np.allclose(cd.propagator(p, 0.0), np.eye(4))
    # independent oracle: scaling-and-squaring
    from scipy.linalg import expm
    assert np.allclose(cd.propagator(p, 2.7), expm(-2.7j * cd.hamiltonian(p)), atol=1e-10, rtol=0)


def test_unitary_evolution_properties():
    rng = np.random.default_rng(12)
    p = cd.ModelParams(omega_s=0.8, omega_p=1.1, g=0.7)
    assert np.allclose(cd.evolve_closed(p, np.eye(4) / 4, 3.3), np.eye(4) / 4)
    a = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
    rho = a @ a.conj().T
    rho /= np.trace(rho).real
    out = cd.evolve_closed(p, rho, 4.2)
    assert np.trace(out @ out).real == pytest.approx(np.trace(rho @ rho).real, abs=1e-12)
    back = cd.evolve_closed(p, qa.hermitian_part(out), -4.2)
    assert np.allclose(back, rho, atol=1e-10)


def test_s_z_reference_cases():
    ts = np.linspace(0, 30, 61)
    assert np.all(cd.s_z_closed(cd.ModelParams(g=0.0), ts) == 0)
    assert np.all(cd.s_z_closed(cd.ModelParams(g=0.5, probe=(1.0, 0.0, 0.0)), ts) == 0)
    p = cd.ModelParams(omega_s=1.0, omega_p=1.0, g=0.1)
    t = math.pi / (2 * cd.derived_frequencies(p).beta)
    rho_t = cd.evolve_closed(p, cd.initial_state(p), t)
    assert cd.s_z_closed(p, t) == pytest.approx(qa.rho_to_bloch(qa.partial_trace_p(rho_t))[2], abs=1e-10)


def test_supremum_and_lorentzian_reference_values():
    assert cd.pi_sup_closed(cd.ModelParams(omega_p=1.0, g=0.3)) == pytest.approx(1.0)
    assert cd.pi_sup_closed(cd.ModelParams(omega_p=1.2, g=0.2)) == pytest.approx(0.5)
    assert cd.pi_sup_closed(cd.ModelParams(omega_p=0.9, g=0.1)) == pytest.approx(0.5)
    assert cd.pi_weak_coupling(cd.ModelParams(omega_p=1.0, g=0.01)) == 1.0
    assert cd.pi_weak_coupling(cd.ModelParams(omega_p=0.5, g=0.01)) == pytest.approx(1e-4 / 0.2501)


def test_general_evolution_cross_checks():
    rng = np.random.default_rng(13)
    p = cd.ModelParams(omega_s=1.0, omega_p=0.6, g=0.4)
    rho = cd.initial_state(p, system=(0.2, -0.1, 0.3))
    assert np.allclose(cd.evolve_general_closed(cd.hamiltonian(p), rho, 5.0), cd.evolve_closed(p, rho, 5.0), atol=1e-10)
    assert np.allclose(cd.evolve_general_closed(np.zeros((4, 4)), rho, 5.0), rho)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_local_hamiltonian_preserves_system_purity(seed):
    rng = np.random.default_rng(seed)

    def herm():
        a = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
        return a + a.conj().T

    h = qa.on_system(herm()) + qa.on_probe(herm())
    s, p = (rng.uniform(-0.57, 0.57, size=3) for _ in range(2))
    rho = qa.tensor(qa.bloch_to_rho(s), qa.bloch_to_rho(p))
    purities = np.linalg.norm(cd.system_bloch_closed(h, rho, np.linspace(0, 10, 41)), axis=1)
    assert np.max(np.abs(purities - np.linalg.norm(s))) < 1e-10


def test_resonance_purifies_arbitrary_initial_states():
    rng = np.random.default_rng(14)
    p = cd.ModelParams(omega_s=1.0, omega_p=1.0, g=0.1)
    from purisim.purity_search import closed_time_grid
    ts = closed_time_grid(p)
    for _ in range(20):
        v = rng.normal(size=3)
        v *= rng.uniform(0, 1) / np.linalg.norm(v)
        best = np.linalg.norm(cd.model_bloch_closed(p, ts, system=tuple(v)), axis=1).max()
        assert best >= np.linalg.norm(v) - 1e-9
        assert best >= 0.99
