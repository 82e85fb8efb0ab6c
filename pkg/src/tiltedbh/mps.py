"""Open-boundary matrix product states with exposed Schmidt spectra.

States are stored in right-canonical B-form together with the Schmidt vector
of every internal bond.  Site 0 is the slowest index of the dense
tensor-product ordering (shared convention with the exact oracle).  For
number-conserving evolution the bonds optionally carry the particle count to
the left of the bond, which lets the TEBD engine do blockwise SVDs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

ZERO_SVAL_TOL = 1e-14
DENSE_AMPLITUDE_CAP = 2_000_000


class SizeCapError(ValueError):
    """Dense amplitude vector would exceed the configured cap."""


@dataclass
class SchmidtSpectrum:
    """Descending Schmidt coefficients of one bipartition."""

    bond: int
    values: np.ndarray
    discarded_weight: float = 0.0


class MPSState:
    """MPS in right-canonical form with per-bond Schmidt vectors.

    `tensors[i]` has shape (left bond, physical, right bond); `svals[b]` holds
    the Schmidt coefficients of bond b (between sites b and b+1).  The
    `canonical` flag records whether tensors and svals are exact for the
    represented state; operations that invalidate it trigger a
    re-canonicalization sweep on the next exact query.
    """

    def __init__(self, tensors, svals, chi_max=None, bond_qnums=None,
                 total_charge=None, canonical=True):
        self.tensors = tensors
        self.svals = svals
        self.chi_max = chi_max
        self.bond_qnums = bond_qnums
        self.total_charge = total_charge
        self.canonical = canonical
        self.last_discarded = np.zeros(len(tensors) - 1)

    @property
    def n_sites(self) -> int:
        return len(self.tensors)

    @property
    def local_dim(self) -> int:
        return self.tensors[0].shape[1]

    @property
    def n_bonds(self) -> int:
        return len(self.tensors) - 1

    def bond_dims(self):
        return [t.shape[2] for t in self.tensors[:-1]]

    def left_svals(self, site: int) -> np.ndarray:
        return self.svals[site - 1] if site > 0 else np.ones(1)

    def copy(self) -> "MPSState":
        out = MPSState(
            [t.copy() for t in self.tensors],
            [s.copy() for s in self.svals],
            self.chi_max,
            None if self.bond_qnums is None else [q.copy() for q in self.bond_qnums],
            self.total_charge,
            self.canonical,
        )
        out.last_discarded = self.last_discarded.copy()
        return out

    def norm(self) -> float:
        """<psi|psi> by transfer-matrix contraction."""
        env = np.ones((1, 1), dtype=np.complex128)
        for t in self.tensors:
            env = np.einsum("ab,adr,bds->rs", env, t.conj(), t, optimize=True)
        return float(env[0, 0].real)

    def canonicalize(self) -> None:
        """Restore exact right-canonical form and recompute all Schmidt vectors.

        Renormalizes the state to unit norm; the global phase is preserved.
        """
        m = self.n_sites
        work = []
        carry = np.ones((1, 1), dtype=np.complex128)
        for i in range(m):
            mat = np.tensordot(carry, self.tensors[i], axes=(1, 0))
            l, d, r = mat.shape
            q, rmat = np.linalg.qr(mat.reshape(l * d, r))
            work.append(q.reshape(l, d, -1))
            carry = rmat
        scale = carry[0, 0]
        if abs(scale) == 0.0:
            raise ValueError("cannot canonicalize a zero state")
        work[-1] = work[-1] * (scale / abs(scale))

        carry = np.ones((1, 1), dtype=np.complex128)
        for i in reversed(range(m)):
            mat = np.tensordot(work[i], carry, axes=(2, 0))
            l, d, r = mat.shape
            u, s, vh = np.linalg.svd(mat.reshape(l, d * r), full_matrices=False)
            keep = s > ZERO_SVAL_TOL
            u, s, vh = u[:, keep], s[keep], vh[keep]
            self.tensors[i] = vh.reshape(-1, d, r)
            carry = u * s
            if i > 0:
                self.svals[i - 1] = s / np.linalg.norm(s)
        self.tensors[0] = self.tensors[0] * (carry[0, 0] / abs(carry[0, 0]))
        self.bond_qnums = None  # bond index order no longer charge-sorted
        self.canonical = True


def from_product_state(occupations, n_max: int, chi_max=None) -> MPSState:
    """Separable state |n_1> x ... x |n_m>: bond dimension 1, zero entropy."""
    occupations = [int(n) for n in occupations]
    d = n_max + 1
    tensors = []
    for n in occupations:
        if not 0 <= n <= n_max:
            raise ValueError(f"occupation {n} above cutoff n_max={n_max}")
        t = np.zeros((1, d, 1), dtype=np.complex128)
        t[0, n, 0] = 1.0
        tensors.append(t)
    svals = [np.ones(1) for _ in range(len(occupations) - 1)]
    qnums = [np.array([sum(occupations[: b + 1])])
             for b in range(len(occupations) - 1)]
    return MPSState(tensors, svals, chi_max, qnums, sum(occupations))


def from_state_vector(vec, n_sites: int, local_dim: int,
                      chi_max=None) -> MPSState:
    """Exact (or chi-capped) MPS of a dense state vector via sequential SVD."""
    vec = np.asarray(vec, dtype=np.complex128)
    if vec.size != local_dim**n_sites:
        raise ValueError("vector length does not match d^m")
    nrm = np.linalg.norm(vec)
    if nrm == 0:
        raise ValueError("zero state vector")
    mat = (vec / nrm).reshape(local_dim ** (n_sites - 1), local_dim)
    tensors = [None] * n_sites
    svals = [None] * (n_sites - 1)
    right_dim = 1
    for i in reversed(range(1, n_sites)):
        u, s, vh = np.linalg.svd(
            mat.reshape(-1, local_dim * right_dim), full_matrices=False
        )
        keep = s > ZERO_SVAL_TOL
        if chi_max is not None:
            keep &= np.arange(len(s)) < chi_max
        u, s, vh = u[:, keep], s[keep], vh[keep]
        s_norm = np.linalg.norm(s)
        tensors[i] = vh.reshape(-1, local_dim, right_dim)
        svals[i - 1] = s / s_norm
        right_dim = len(s)
        mat = (u * s) / s_norm
    tensors[0] = mat.reshape(1, local_dim, right_dim)
    return MPSState(tensors, svals, chi_max)


def to_state_vector(state: MPSState, cap: int = DENSE_AMPLITUDE_CAP) -> np.ndarray:
    """Dense amplitude vector, site 0 slowest.  Guarded by a size cap."""
    size = state.local_dim**state.n_sites
    if size > cap:
        raise SizeCapError(f"d^m = {size} exceeds cap {cap}")
    acc = np.ones((1, 1), dtype=np.complex128)
    for t in state.tensors:
        acc = np.tensordot(acc, t, axes=(1, 0))
        acc = acc.reshape(-1, t.shape[2])
    return acc[:, 0]


def schmidt_spectrum(state: MPSState, bond: int) -> SchmidtSpectrum:
    """Exact Schmidt coefficients at a bond (re-canonicalizes if needed)."""
    if not 0 <= bond < state.n_bonds:
        raise ValueError(f"bond {bond} out of range")
    if not state.canonical:
        state.canonicalize()
    return SchmidtSpectrum(bond, state.svals[bond].copy(),
                           float(state.last_discarded[bond]))


def von_neumann_entropy(spectrum) -> float:
    """Entanglement entropy in bits; zero coefficients contribute nothing."""
    values = spectrum.values if isinstance(spectrum, SchmidtSpectrum) else spectrum
    p = np.asarray(values, dtype=np.float64) ** 2
    p = p[p > 0.0]
    return float(-np.sum(p * np.log2(p)))


def count_above_threshold(spectrum, epsilon: float) -> int:
    """Number of Schmidt coefficients strictly above epsilon."""
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    values = spectrum.values if isinstance(spectrum, SchmidtSpectrum) else spectrum
    return int(np.sum(np.asarray(values) > epsilon))


def max_entropy_bond(state: MPSState):
    """(bond, entropy) of the bipartition with the largest entropy.

    Ties break toward the smallest bond index.
    """
    if not state.canonical:
        state.canonicalize()
    entropies = [von_neumann_entropy(s) for s in state.svals]
    bond = int(np.argmax(entropies))
    return bond, entropies[bond]


def truncate_bond(state: MPSState, bond: int, chi_max: int):
    """Keep the chi_max largest Schmidt terms at one bond and renormalize.

    Returns (state, discarded_weight); the state is modified in place.
    """
    if not state.canonical:
        state.canonicalize()
    s = state.svals[bond]
    if chi_max >= len(s):
        return state, 0.0
    kept = s[:chi_max]
    discarded = float(np.sum(s[chi_max:] ** 2))
    kept_norm = np.linalg.norm(kept)
    state.svals[bond] = kept / kept_norm
    state.tensors[bond] = state.tensors[bond][:, :, :chi_max] / kept_norm
    state.tensors[bond + 1] = state.tensors[bond + 1][:chi_max]
    state.last_discarded[bond] = discarded
    # other bonds' Schmidt vectors changed with the state; refresh them all
    state.canonicalize()
    return state, discarded


def site_densities(state: MPSState) -> np.ndarray:
    """Exact <n_l> per site (re-canonicalizes if needed)."""
    if not state.canonical:
        state.canonicalize()
    n_vals = np.arange(state.local_dim, dtype=np.float64)
    dens = np.empty(state.n_sites)
    for l, t in enumerate(state.tensors):
        theta = state.left_svals(l)[:, None, None] * t
        dens[l] = float(np.einsum("adr,adr,d->", theta.conj(), theta,
                                  n_vals, optimize=True).real)
    return dens


def save_state(state: MPSState, path) -> None:
    """Versioned binary checkpoint (bit-exact round trip)."""
    payload = {
        "version": np.array(1),
        "n_sites": np.array(state.n_sites),
        "chi_max": np.array(-1 if state.chi_max is None else state.chi_max),
        "total_charge": np.array(
            -1 if state.total_charge is None else state.total_charge
        ),
        "canonical": np.array(int(state.canonical)),
        "last_discarded": state.last_discarded,
        "has_qnums": np.array(int(state.bond_qnums is not None)),
    }
    for i, t in enumerate(state.tensors):
        payload[f"tensor_{i}"] = t
    for b, s in enumerate(state.svals):
        payload[f"svals_{b}"] = s
    if state.bond_qnums is not None:
        for b, q in enumerate(state.bond_qnums):
            payload[f"qnums_{b}"] = q
    np.savez(path, **payload)


def load_state(path) -> MPSState:
    with np.load(path) as data:
        version = int(data["version"])
        if version != 1:
            raise ValueError(f"unsupported checkpoint version {version}")
        m = int(data["n_sites"])
        tensors = [data[f"tensor_{i}"] for i in range(m)]
        svals = [data[f"svals_{b}"] for b in range(m - 1)]
        chi_max = int(data["chi_max"])
        total_charge = int(data["total_charge"])
        qnums = None
        if int(data["has_qnums"]):
            qnums = [data[f"qnums_{b}"] for b in range(m - 1)]
        state = MPSState(
            tensors, svals,
            None if chi_max < 0 else chi_max,
            qnums,
            None if total_charge < 0 else total_charge,
            bool(int(data["canonical"])),
        )
        state.last_discarded = data["last_discarded"]
    return state
