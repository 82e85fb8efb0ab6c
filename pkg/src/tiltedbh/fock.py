"""Bosonic Fock basis and operators for the tilted Bose-Hubbard chain.

Builds the occupation-number basis for N bosons on m sites (with a per-site
cutoff), the static tilted Hamiltonian, the gauge-transformed time-dependent
Hamiltonian used for Floquet analysis, and the quasimomentum sector
decomposition that block-diagonalizes translation-invariant operators.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from math import comb

import numpy as np
import scipy.sparse as sp

HERMITICITY_TOL = 1e-12


class EmptyBasisError(ValueError):
    """The cutoff admits no state with the requested particle number."""


class NotTranslationInvariantError(ValueError):
    """Operator does not commute with the cyclic site shift."""


@dataclass(frozen=True)
class ModelParams:
    """Energies of the tilted Bose-Hubbard chain (tunneling J, on-site U, tilt F).

    The harness works with the ratios U/J and F/J at J = 1.
    """

    J: float = 1.0
    U: float = 0.0
    F: float = 0.0

    def __post_init__(self):
        if self.J <= 0:
            raise ValueError("tunneling J must be positive")
        if self.U < 0:
            raise ValueError("interaction U must be nonnegative")
        if self.F < 0:
            raise ValueError("tilt F must be nonnegative")

    @property
    def bloch_period(self) -> float:
        """T_B = 2 pi / F; requires a finite tilt."""
        if self.F <= 0:
            raise ValueError("Bloch period requires F > 0")
        return 2.0 * np.pi / self.F


class FockBasis:
    """Ordered occupation-number basis for `n_particles` bosons on `n_sites` sites.

    States are ordered lexicographically descending in (n_1, ..., n_m), so the
    ordering is deterministic and reproducible across runs.
    """

    def __init__(self, n_particles: int, n_sites: int, n_max: int):
        if n_particles < 1 or n_sites < 1 or n_max < 1:
            raise ValueError("n_particles, n_sites, n_max must all be >= 1")
        if n_max * n_sites < n_particles:
            raise EmptyBasisError(
                f"cutoff n_max={n_max} on {n_sites} sites cannot hold "
                f"{n_particles} particles"
            )
        self.n_particles = n_particles
        self.n_sites = n_sites
        self.n_max = n_max
        self.states = _enumerate(n_particles, n_sites, n_max)
        self.index = {s: i for i, s in enumerate(self.states)}

    @property
    def dim(self) -> int:
        return len(self.states)

    def lookup(self, occupations) -> int:
        return self.index[tuple(occupations)]

    def occupations_array(self) -> np.ndarray:
        """(dim, n_sites) integer array of all occupation vectors."""
        return np.array(self.states, dtype=np.int64)

    def __repr__(self):
        return (f"FockBasis(N={self.n_particles}, m={self.n_sites}, "
                f"n_max={self.n_max}, dim={self.dim})")


def _enumerate(n, m, n_max):
    """All capped compositions of n into m parts, lexicographically descending."""
    if m == 1:
        return [(n,)] if n <= n_max else []
    out = []
    lo = max(0, n - n_max * (m - 1))
    for head in range(min(n, n_max), lo - 1, -1):
        for tail in _enumerate(n - head, m - 1, n_max):
            out.append((head,) + tail)
    return out


def enumerate_basis(n_particles: int, n_sites: int, n_max: int) -> FockBasis:
    basis = FockBasis(n_particles, n_sites, n_max)
    if n_max >= n_particles:
        expected = comb(n_particles + n_sites - 1, n_sites - 1)
        assert basis.dim == expected
    return basis


@dataclass
class SparseHermitian:
    """Sparse Hermitian operator in coordinate format, sorted by (row, col)."""

    dim: int
    rows: np.ndarray
    cols: np.ndarray
    vals: np.ndarray

    @classmethod
    def from_entries(cls, dim: int, entries: dict) -> "SparseHermitian":
        keys = sorted(entries)
        rows = np.array([k[0] for k in keys], dtype=np.int64)
        cols = np.array([k[1] for k in keys], dtype=np.int64)
        vals = np.array([entries[k] for k in keys], dtype=np.complex128)
        op = cls(dim, rows, cols, vals)
        defect = op.hermiticity_defect()
        if defect > HERMITICITY_TOL:
            raise ValueError(f"operator not Hermitian: defect {defect:.3e}")
        return op

    def to_csr(self) -> sp.csr_matrix:
        return sp.csr_matrix(
            (self.vals, (self.rows, self.cols)), shape=(self.dim, self.dim)
        )

    def to_dense(self) -> np.ndarray:
        return self.to_csr().toarray()

    def hermiticity_defect(self) -> float:
        m = self.to_csr()
        d = m - m.getH()
        return 0.0 if d.nnz == 0 else float(np.abs(d.data).max())

    def dump(self, path) -> None:
        """Plain-text debug dump: one `row col re im` line, row-major sorted."""
        with open(path, "w", encoding="utf-8") as fh:
            for r, c, v in zip(self.rows, self.cols, self.vals):
                fh.write(f"{r} {c} {v.real:.17g} {v.imag:.17g}\n")


def _hop_entries(basis: FockBasis, entries: dict, src_site: int, dst_site: int,
                 amplitude: complex) -> None:
    """Accumulate `amplitude * a^dag_dst a_src` matrix elements."""
    n_max = basis.n_max
    for i, state in enumerate(basis.states):
        n_src = state[src_site]
        n_dst = state[dst_site]
        if n_src == 0 or n_dst >= n_max:
            continue
        target = list(state)
        target[src_site] -= 1
        target[dst_site] += 1
        j = basis.index[tuple(target)]
        val = amplitude * np.sqrt(n_src * (n_dst + 1))
        entries[(j, i)] = entries.get((j, i), 0.0) + val


def _bonds(n_sites: int, boundary: str):
    if boundary == "open":
        return [(l, l + 1) for l in range(n_sites - 1)]
    if boundary == "periodic":
        if n_sites == 1:
            return []
        bonds = [(l, (l + 1) % n_sites) for l in range(n_sites)]
        return bonds
    raise ValueError(f"unknown boundary {boundary!r}")


def interaction_diagonal(basis: FockBasis, U: float) -> np.ndarray:
    """(U/2) sum_l n_l (n_l - 1) for every basis state."""
    occ = basis.occupations_array()
    return 0.5 * U * np.sum(occ * (occ - 1), axis=1).astype(np.float64)


def tilt_diagonal(basis: FockBasis, F: float) -> np.ndarray:
    """F sum_l l n_l with 1-based site index l."""
    occ = basis.occupations_array()
    sites = np.arange(1, basis.n_sites + 1)
    return F * (occ @ sites).astype(np.float64)


def hopping_operator(basis: FockBasis, boundary: str = "periodic") -> sp.csr_matrix:
    """B = sum_l a^dag_{l+1} a_l (moves one particle to the right)."""
    entries: dict = {}
    for l, l_next in _bonds(basis.n_sites, boundary):
        _hop_entries(basis, entries, l, l_next, 1.0)
    keys = sorted(entries)
    rows = [k[0] for k in keys]
    cols = [k[1] for k in keys]
    vals = [entries[k] for k in keys]
    return sp.csr_matrix((vals, (rows, cols)), shape=(basis.dim, basis.dim))


def build_hamiltonian(basis: FockBasis, params: ModelParams,
                      boundary: str = "open") -> SparseHermitian:
    """Static tilted Bose-Hubbard Hamiltonian.

    Hopping amplitude on a bond is -(J/2) sqrt((n_l + 1) n_{l+1}) for both
    directions; the diagonal carries the on-site interaction and the tilt
    F * l * n_l with l starting at 1.
    """
    entries: dict = {}
    amp = -0.5 * params.J
    for l, l_next in _bonds(basis.n_sites, boundary):
        _hop_entries(basis, entries, l_next, l, amp)
        _hop_entries(basis, entries, l, l_next, amp)
    diag = interaction_diagonal(basis, params.U) + tilt_diagonal(basis, params.F)
    for i, d in enumerate(diag):
        if d != 0.0:
            entries[(i, i)] = entries.get((i, i), 0.0) + d
    return SparseHermitian.from_entries(basis.dim, entries)


def build_gauge_hamiltonian(basis: FockBasis, params: ModelParams,
                            t: float) -> SparseHermitian:
    """Gauge-transformed Hamiltonian: tilt absorbed into a hopping phase.

    Periodic geometry; the rightward hop a^dag_{l+1} a_l carries exp(i F t),
    the reverse hop its conjugate, and the diagonal keeps only the
    interaction term.
    """
    entries: dict = {}
    phase = np.exp(1j * params.F * t)
    amp = -0.5 * params.J
    for l, l_next in _bonds(basis.n_sites, "periodic"):
        _hop_entries(basis, entries, l, l_next, amp * phase)
        _hop_entries(basis, entries, l_next, l, amp * np.conj(phase))
    diag = interaction_diagonal(basis, params.U)
    for i, d in enumerate(diag):
        if d != 0.0:
            entries[(i, i)] = entries.get((i, i), 0.0) + d
    return SparseHermitian.from_entries(basis.dim, entries)


def translation(basis: FockBasis) -> np.ndarray:
    """Index permutation of the cyclic shift (n_1..n_m) -> (n_m, n_1..n_{m-1}).

    perm[i] is the index of the shifted image of state i.
    """
    perm = np.empty(basis.dim, dtype=np.int64)
    for i, state in enumerate(basis.states):
        shifted = (state[-1],) + state[:-1]
        perm[i] = basis.index[shifted]
    return perm


@dataclass
class SectorBasis:
    """Orthonormal quasimomentum-kappa subspace of a periodic Fock basis."""

    parent: FockBasis
    kappa: int
    orbit_reps: list
    weights: np.ndarray  # orbit sizes, one per representative
    projector: sp.csr_matrix = field(repr=False)  # (parent dim, sector dim)

    @property
    def dim(self) -> int:
        return len(self.orbit_reps)


def _orbits(basis: FockBasis):
    """Translation orbits as (representative index, orbit index list)."""
    perm = translation(basis)
    seen = np.zeros(basis.dim, dtype=bool)
    orbits = []
    for i in range(basis.dim):
        if seen[i]:
            continue
        orbit = [i]
        seen[i] = True
        j = perm[i]
        while j != i:
            seen[j] = True
            orbit.append(j)
            j = perm[j]
        orbits.append(orbit)
    return orbits


def sector_basis(basis: FockBasis, kappa: int) -> SectorBasis:
    """Symmetry-adapted basis of quasimomentum kappa (0 <= kappa < m).

    An orbit of size p admits kappa iff kappa * p = 0 mod m.  Each admitted
    orbit contributes one column sum_j exp(-2 pi i kappa j / m) T^j |rep> / sqrt(p).
    """
    m = basis.n_sites
    if not 0 <= kappa < m:
        raise ValueError(f"kappa must lie in 0..{m - 1}")
    reps, weights, rows, cols, vals = [], [], [], [], []
    for orbit in _orbits(basis):
        p = len(orbit)
        if (kappa * p) % m != 0:
            continue
        col = len(reps)
        reps.append(basis.states[orbit[0]])
        weights.append(p)
        norm = 1.0 / np.sqrt(p)
        for j, idx in enumerate(orbit):
            rows.append(idx)
            cols.append(col)
            vals.append(norm * np.exp(-2j * np.pi * kappa * j / m))
    projector = sp.csr_matrix(
        (np.array(vals, dtype=np.complex128), (rows, cols)),
        shape=(basis.dim, len(reps)),
    )
    return SectorBasis(basis, kappa, reps, np.array(weights), projector)


def _translation_defect(op: sp.spmatrix, perm: np.ndarray) -> float:
    """max |T op T^dag - op|."""
    shifted = op.tocsr()[perm][:, perm]
    diff = shifted - op
    return 0.0 if diff.nnz == 0 else float(np.abs(diff.data).max())


def project(op: SparseHermitian, sector: SectorBasis) -> np.ndarray:
    """Dense block of a translation-invariant operator in the sector basis."""
    csr = op.to_csr()
    perm = translation(sector.parent)
    defect = _translation_defect(csr, perm)
    if defect > HERMITICITY_TOL:
        raise NotTranslationInvariantError(
            f"operator breaks translation symmetry (defect {defect:.3e})"
        )
    return project_unchecked(csr, sector)


def project_unchecked(op: sp.spmatrix, sector: SectorBasis) -> np.ndarray:
    p = sector.projector
    return np.asarray((p.getH() @ (op @ p)).todense())
