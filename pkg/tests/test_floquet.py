import numpy as np
import pytest

from tiltedbh.fock import ModelParams, enumerate_basis, sector_basis
from tiltedbh.floquet import (
    EigensolverError,
    UnitarityError,
    UnitaryMatrix,
    converged_propagator,
    eigenphases,
    phase_shift,
    propagate_period,
    sector_blocks,
    unitarity_defect,
)


@pytest.fixture(scope="module")
def small_sector():
    basis = enumerate_basis(3, 4, 3)
    return sector_basis(basis, 0)


class TestUnitarityDefect:
    def test_identity(self):
        assert unitarity_defect(np.eye(4, dtype=complex)) == 0.0

    def test_non_unitary_diagonal(self):
        assert np.isclose(unitarity_defect(np.diag([1.0, 0.5])), 0.75)

    def test_converged_propagator_defect(self, small_sector):
        u = propagate_period(small_sector, ModelParams(J=1, U=1, F=1), 64)
        assert unitarity_defect(u.matrix) < 1e-9


class TestPropagatePeriod:
    def test_no_hopping_gives_interaction_phases(self, small_sector):
        params = ModelParams(J=1e-12, U=2.0, F=1.5)
        u = propagate_period(small_sector, params, 16)
        _, diag = sector_blocks(small_sector, params)
        expected = np.exp(-1j * diag * params.bloch_period)
        assert np.abs(np.diag(u.matrix) - expected).max() < 1e-9

    def test_single_particle_full_period_is_identity(self):
        # U is irrelevant for one particle; the hopping integral over one
        # Bloch period vanishes, so U(T_B) is the identity in every sector.
        basis = enumerate_basis(1, 3, 1)
        params = ModelParams(J=1.0, U=0.0, F=1.0)
        for kappa in range(3):
            sector = sector_basis(basis, kappa)
            u = propagate_period(sector, params, 512, scheme="midpoint")
            assert np.abs(u.matrix - np.eye(sector.dim)).max() < 1e-5

    def test_halving_step_changes_phases_little(self, small_sector):
        params = ModelParams(J=1, U=1, F=1)
        a = eigenphases(propagate_period(small_sector, params, 64)).phases
        b = eigenphases(propagate_period(small_sector, params, 128)).phases
        assert phase_shift(a, b) < 1e-6

    def test_schemes_agree(self, small_sector):
        params = ModelParams(J=1, U=2, F=1.3)
        ref = eigenphases(
            propagate_period(small_sector, params, 1024, scheme="cf4")
        ).phases
        for scheme, n in (("cf4", 128), ("ipcf4", 256), ("midpoint", 4096)):
            got = eigenphases(
                propagate_period(small_sector, params, n, scheme=scheme)
            ).phases
            assert phase_shift(ref, got) < 1e-6

    def test_midpoint_second_order(self, small_sector):
        params = ModelParams(J=1, U=2, F=1.3)
        ref = eigenphases(
            propagate_period(small_sector, params, 1024, scheme="cf4")
        ).phases
        errs = [
            phase_shift(ref, eigenphases(
                propagate_period(small_sector, params, n, "midpoint")).phases)
            for n in (64, 128, 256)
        ]
        ratios = [errs[i] / errs[i + 1] for i in range(2)]
        assert all(2.5 < r < 6.0 for r in ratios)

    def test_composition_of_half_periods(self, small_sector):
        # time-independent case: J ~ 0 makes H(t) constant and diagonal
        params = ModelParams(J=1e-12, U=3.0, F=1.0)
        c, d = sector_blocks(small_sector, params)
        full = propagate_period(small_sector, params, 8).matrix
        half = np.diag(np.exp(-1j * d * params.bloch_period / 2))
        assert np.abs(half @ half - full).max() < 1e-10

    def test_invalid_steps(self, small_sector):
        with pytest.raises(ValueError):
            propagate_period(small_sector, ModelParams(J=1, F=1), 0)

    def test_spectrum_invariant_under_sector_rotation(self, small_sector):
        params = ModelParams(J=1, U=1, F=1)
        u = propagate_period(small_sector, params, 64)
        rng = np.random.default_rng(3)
        a = rng.normal(size=(u.dim, u.dim)) + 1j * rng.normal(size=(u.dim, u.dim))
        q, _ = np.linalg.qr(a)
        rotated = q @ u.matrix @ q.conj().T
        assert phase_shift(eigenphases(u).phases,
                           eigenphases(rotated).phases) < 1e-8


class TestEigenphases:
    def test_identity(self):
        ep = eigenphases(np.eye(3, dtype=complex))
        assert np.allclose(ep.phases, 0.0)

    def test_simple_diagonal(self):
        ep = eigenphases(np.diag([1.0, 1j, -1.0]))
        assert np.allclose(np.sort(ep.phases), [0.0, np.pi / 2, np.pi])

    def test_matches_hermitian_generator(self):
        rng = np.random.default_rng(11)
        a = rng.normal(size=(6, 6)) + 1j * rng.normal(size=(6, 6))
        h = (a + a.conj().T) / 2
        h *= 0.2  # keep eigenvalues inside one branch
        w, v = np.linalg.eigh(h)
        u = (v * np.exp(-1j * w)) @ v.conj().T
        ep = eigenphases(u)
        expected = np.sort(np.mod(-w, 2 * np.pi))
        assert np.allclose(ep.phases, expected, atol=1e-10)

    def test_sorted_in_range(self):
        rng = np.random.default_rng(5)
        a = rng.normal(size=(8, 8)) + 1j * rng.normal(size=(8, 8))
        q, _ = np.linalg.qr(a)
        ep = eigenphases(q)
        assert (np.diff(ep.phases) >= 0).all()
        assert ep.phases.min() >= 0 and ep.phases.max() < 2 * np.pi

    def test_residual_guard(self):
        # eig is backward stable, so residuals scale with the matrix norm;
        # a huge-norm input must trip the absolute residual bound
        rng = np.random.default_rng(2)
        m = 1e12 * (rng.normal(size=(8, 8)) + 1j * rng.normal(size=(8, 8)))
        with pytest.raises(EigensolverError):
            eigenphases(m, residual_tol=1e-8)


class TestConvergence:
    def test_converged_propagator(self, small_sector):
        params = ModelParams(J=1, U=1, F=1)
        u = converged_propagator(small_sector, params, scheme="cf4",
                                 start_steps=8)
        assert u.n_steps >= 16
        ref = eigenphases(
            propagate_period(small_sector, params, 4 * u.n_steps, "cf4")
        ).phases
        assert phase_shift(eigenphases(u).phases, ref) < 1e-6

    def test_unitary_matrix_guard(self):
        with pytest.raises(UnitarityError):
            UnitaryMatrix(np.diag([1.0, 0.5]).astype(complex),
                          ModelParams(J=1, F=1), 0, 1, "midpoint")

    def test_trace_bound(self, small_sector):
        u = propagate_period(small_sector, ModelParams(J=1, U=1, F=1), 32)
        assert abs(np.trace(u.matrix)) <= u.dim + 1e-9
