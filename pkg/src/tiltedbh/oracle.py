"""Brute-force state-vector propagation and exact Schmidt analysis.

Ground truth for the MPS/TEBD and Floquet machinery on small systems.  The
dense tensor-product ordering puts site 0 on the slowest index, matching
`mps.to_state_vector`.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .fock import FockBasis, SparseHermitian
from .mps import SchmidtSpectrum, ZERO_SVAL_TOL

DENSE_EVOLVE_CAP = 20_000


class BasisMismatchError(ValueError):
    """Operands live on different Fock bases."""


@dataclass
class DenseState:
    """Unit-norm amplitude vector over a Fock basis."""

    basis: FockBasis
    amplitudes: np.ndarray

    def __post_init__(self):
        self.amplitudes = np.asarray(self.amplitudes, dtype=np.complex128)
        nrm = np.linalg.norm(self.amplitudes)
        if abs(nrm - 1.0) > 1e-12:
            raise ValueError(f"state norm {nrm} deviates from 1")


def basis_state(basis: FockBasis, occupations) -> DenseState:
    amp = np.zeros(basis.dim, dtype=np.complex128)
    amp[basis.lookup(occupations)] = 1.0
    return DenseState(basis, amp)


def exact_evolve(state: DenseState, hamiltonian: SparseHermitian,
                 t: float) -> DenseState:
    """exp(-i H t)|psi> via full Hermitian eigendecomposition."""
    dim = state.basis.dim
    if dim > DENSE_EVOLVE_CAP:
        raise ValueError(f"dimension {dim} exceeds dense cap {DENSE_EVOLVE_CAP}")
    if hamiltonian.dim != dim:
        raise BasisMismatchError("Hamiltonian dimension does not match state")
    w, v = np.linalg.eigh(hamiltonian.to_dense())
    amp = v @ (np.exp(-1j * w * t) * (v.conj().T @ state.amplitudes))
    amp /= np.linalg.norm(amp)
    return DenseState(state.basis, amp)


def embed_full(state: DenseState, n_max: int) -> np.ndarray:
    """Amplitudes on the full (n_max+1)^m tensor-product space."""
    d = n_max + 1
    m = state.basis.n_sites
    if max(max(s) for s in state.basis.states) > n_max:
        raise ValueError("basis occupations exceed requested n_max")
    full = np.zeros(d**m, dtype=np.complex128)
    weights = d ** np.arange(m - 1, -1, -1)
    for occ, amp in zip(state.basis.states, state.amplitudes):
        full[int(np.dot(occ, weights))] = amp
    return full


def exact_schmidt(state: DenseState, cut_site: int, n_max: int) -> SchmidtSpectrum:
    """Singular values of the bipartite matricization after cut_site sites."""
    m = state.basis.n_sites
    if not 1 <= cut_site < m:
        raise ValueError("cut must leave at least one site on each side")
    d = n_max + 1
    full = embed_full(state, n_max)
    mat = full.reshape(d**cut_site, d ** (m - cut_site))
    s = np.linalg.svd(mat, compute_uv=False)
    s = s[s > ZERO_SVAL_TOL]
    return SchmidtSpectrum(cut_site - 1, np.sort(s)[::-1])


def fidelity(a: DenseState, b: DenseState) -> float:
    """|<a|b>|^2, in [0, 1]."""
    if a.basis is not b.basis and a.basis.states != b.basis.states:
        raise BasisMismatchError("states live on different bases")
    return float(np.abs(np.vdot(a.amplitudes, b.amplitudes)) ** 2)
