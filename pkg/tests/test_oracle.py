"""Dense reference propagation and exact Schmidt analysis."""

import numpy as np
import pytest

from tiltedbh import fock, mps, oracle


def random_dense(basis, seed):
    rng = np.random.default_rng(seed)
    amp = rng.normal(size=basis.dim) + 1j * rng.normal(size=basis.dim)
    return oracle.DenseState(basis, amp / np.linalg.norm(amp))


def test_basis_state_amplitudes():
    basis = fock.enumerate_basis(2, 2, 2)
    state = oracle.basis_state(basis, (1, 1))
    assert abs(state.amplitudes[basis.lookup((1, 1))] - 1.0) < 1e-15
    assert abs(np.linalg.norm(state.amplitudes) - 1.0) < 1e-15


def test_dense_state_norm_guard():
    basis = fock.enumerate_basis(1, 2, 1)
    with pytest.raises(ValueError):
        oracle.DenseState(basis, np.array([1.0, 1.0]))


def test_exact_evolve_diagonal_phases():
    # J=0: basis states only acquire phases exp(-i E t)
    basis = fock.enumerate_basis(2, 2, 2)
    params = fock.ModelParams(J=1e-30, U=3.0, F=0.5)
    h = fock.build_hamiltonian(basis, params, boundary="open")
    energies = (fock.interaction_diagonal(basis, params.U)
                + fock.tilt_diagonal(basis, params.F))
    state = random_dense(basis, 0)
    t = 1.7
    out = oracle.exact_evolve(state, h, t)
    want = np.exp(-1j * energies * t) * state.amplitudes
    np.testing.assert_allclose(out.amplitudes, want, atol=1e-12)


def test_exact_evolve_unitarity_and_composition():
    basis = fock.enumerate_basis(3, 3, 3)
    params = fock.ModelParams(J=1.0, U=2.0, F=1.0)
    h = fock.build_hamiltonian(basis, params, boundary="open")
    state = random_dense(basis, 1)
    a = oracle.exact_evolve(oracle.exact_evolve(state, h, 0.4), h, 0.6)
    b = oracle.exact_evolve(state, h, 1.0)
    assert oracle.fidelity(a, b) > 1.0 - 1e-12


def test_exact_evolve_energy_conserved():
    basis = fock.enumerate_basis(3, 3, 3)
    params = fock.ModelParams(J=1.0, U=4.0, F=0.7)
    h = fock.build_hamiltonian(basis, params, boundary="open").to_dense()
    state = random_dense(basis, 2)
    out = oracle.exact_evolve(state, fock.build_hamiltonian(
        basis, params, boundary="open"), 2.3)
    e0 = np.vdot(state.amplitudes, h @ state.amplitudes).real
    e1 = np.vdot(out.amplitudes, h @ out.amplitudes).real
    assert abs(e0 - e1) < 1e-10


def test_embed_full_index_convention():
    basis = fock.enumerate_basis(3, 2, 3)
    state = oracle.basis_state(basis, (1, 2))
    full = oracle.embed_full(state, n_max=3)
    # site 0 slowest with d=4: |1,2> -> index 1*4 + 2 = 6
    assert abs(full[6] - 1.0) < 1e-15
    assert abs(np.linalg.norm(full) - 1.0) < 1e-15


def test_embed_full_cutoff_guard():
    basis = fock.enumerate_basis(3, 2, 3)
    state = oracle.basis_state(basis, (3, 0))
    with pytest.raises(ValueError):
        oracle.embed_full(state, n_max=2)


@pytest.mark.parametrize("seed", range(5))
def test_exact_schmidt_matches_mps(seed):
    basis = fock.enumerate_basis(3, 4, 3)
    state = random_dense(basis, 300 + seed)
    full = oracle.embed_full(state, n_max=3)
    mstate = mps.from_state_vector(full, 4, 4)
    for cut in (1, 2, 3):
        want = oracle.exact_schmidt(state, cut, n_max=3)
        got = mps.schmidt_spectrum(mstate, cut - 1)
        assert want.bond == cut - 1
        np.testing.assert_allclose(got.values, want.values, atol=1e-12)


def test_exact_schmidt_product_state():
    basis = fock.enumerate_basis(3, 3, 3)
    state = oracle.basis_state(basis, (1, 1, 1))
    spec = oracle.exact_schmidt(state, 1, n_max=3)
    np.testing.assert_allclose(spec.values, [1.0], atol=1e-15)


def test_exact_schmidt_cut_bounds():
    basis = fock.enumerate_basis(2, 3, 2)
    state = oracle.basis_state(basis, (1, 1, 0))
    with pytest.raises(ValueError):
        oracle.exact_schmidt(state, 0, n_max=2)
    with pytest.raises(ValueError):
        oracle.exact_schmidt(state, 3, n_max=2)


def test_fidelity_properties():
    basis = fock.enumerate_basis(2, 3, 2)
    a = random_dense(basis, 10)
    b = random_dense(basis, 11)
    assert abs(oracle.fidelity(a, a) - 1.0) < 1e-12
    f = oracle.fidelity(a, b)
    assert 0.0 <= f <= 1.0
    assert abs(f - oracle.fidelity(b, a)) < 1e-12
    # global phase invariance
    c = oracle.DenseState(basis, a.amplitudes * np.exp(1j * 0.9))
    assert abs(oracle.fidelity(a, c) - 1.0) < 1e-12


def test_fidelity_basis_mismatch():
    a = random_dense(fock.enumerate_basis(2, 3, 2), 12)
    b = random_dense(fock.enumerate_basis(2, 2, 2), 13)
    with pytest.raises(oracle.BasisMismatchError):
        oracle.fidelity(a, b)


def test_dense_cap_guard(monkeypatch):
    monkeypatch.setattr(oracle, "DENSE_EVOLVE_CAP", 5)
    basis = fock.enumerate_basis(2, 3, 2)  # dim 6 > lowered cap
    state = oracle.basis_state(basis, (1, 1, 0))
    params = fock.ModelParams(J=1.0, U=1.0, F=1.0)
    h = fock.build_hamiltonian(basis, params, boundary="open")
    with pytest.raises(ValueError):
        oracle.exact_evolve(state, h, 0.1)
