"""One-period Floquet propagator of the gauge-transformed chain.

The Hamiltonian in a quasimomentum sector has the form

    H(t) = D + e^{iFt} C + e^{-iFt} C^dag

with D the diagonal interaction block and C the projected hopping operator.
The period propagator is accumulated as a product of exactly unitary step
factors.  Three step schemes are provided:

* ``midpoint``: exp(-i dt H(t_mid)) per step, 2nd order.
* ``cf4``: commutator-free 4th-order scheme built from the exact first two
  time moments of H over the step (two exponentials per step).
* ``ipcf4``: the same scheme in the interaction picture of D, with the
  oscillatory integrals done elementwise in closed form; converges fastest
  when the interaction dominates.

All schemes share the self-convergence gate: the step count is doubled until
the maximum eigenphase shift between successive refinements drops below a
tolerance.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .fock import (
    ModelParams,
    SectorBasis,
    hopping_operator,
    interaction_diagonal,
    project_unchecked,
)

UNITARITY_TOL = 1e-9
EIG_RESIDUAL_TOL = 1e-8
PHASE_TOL = 1e-6


class UnitarityError(RuntimeError):
    """Propagator failed the unitarity defect bound."""


class EigensolverError(RuntimeError):
    """Eigenpair residuals above tolerance."""


class PropagatorConvergenceError(RuntimeError):
    """Eigenphase shift between successive refinements did not converge."""

    def __init__(self, n_steps, shift_prev, shift_last):
        self.n_steps = n_steps
        self.shift_prev = shift_prev
        self.shift_last = shift_last
        super().__init__(
            f"no eigenphase convergence at n_steps={n_steps}: "
            f"shifts {shift_prev:.3e} -> {shift_last:.3e}"
        )


@dataclass
class UnitaryMatrix:
    """Dense one-period propagator with provenance metadata."""

    matrix: np.ndarray
    params: ModelParams
    kappa: int
    n_steps: int
    scheme: str

    def __post_init__(self):
        defect = unitarity_defect(self.matrix)
        if defect > UNITARITY_TOL:
            raise UnitarityError(f"unitarity defect {defect:.3e} > {UNITARITY_TOL}")

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]


@dataclass
class EigenphaseSet:
    """Sorted eigenphases of a unitary, mapped to [0, 2 pi)."""

    phases: np.ndarray
    dim: int


def unitarity_defect(matrix: np.ndarray) -> float:
    """max |U^dag U - 1|."""
    dim = matrix.shape[0]
    return float(np.abs(matrix.conj().T @ matrix - np.eye(dim)).max())


def sector_blocks(sector: SectorBasis, params: ModelParams):
    """(C, d): projected hopping block scaled by -J/2 and the diagonal vector."""
    hop = hopping_operator(sector.parent, boundary="periodic")
    c_block = -0.5 * params.J * project_unchecked(hop, sector)
    diag_full = interaction_diagonal(sector.parent, params.U)
    d = np.array([diag_full[sector.parent.index[rep]] for rep in sector.orbit_reps])
    return c_block, d


def _apply_exp(h_eff: np.ndarray, u: np.ndarray) -> np.ndarray:
    """exp(-i h_eff) @ u via Hermitian eigendecomposition (exactly unitary factor)."""
    w, v = scipy.linalg.eigh(h_eff, driver="evr")
    return v @ (np.exp(-1j * w)[:, None] * (v.conj().T @ u))


def _e0(omega: np.ndarray, t_mid: float, dt: float) -> np.ndarray:
    """Integral of e^{i omega t} over a step centered at t_mid."""
    x = 0.5 * omega * dt
    return dt * np.exp(1j * omega * t_mid) * np.sinc(x / np.pi)


def _moment_u(x):
    """(sin x - x cos x) / x^2, stable near 0."""
    x = np.asarray(x, dtype=np.float64)
    small = np.abs(x) < 1e-2
    xs = np.where(small, 1.0, x)
    series = x / 3.0 - x**3 / 30.0 + x**5 / 840.0
    exact = (np.sin(xs) - xs * np.cos(xs)) / xs**2
    return np.where(small, series, exact)


def _e1(omega: np.ndarray, t_mid: float, dt: float) -> np.ndarray:
    """Integral of (t - t_mid) e^{i omega t} over a step centered at t_mid."""
    h = 0.5 * dt
    return np.exp(1j * omega * t_mid) * 2j * h**2 * _moment_u(omega * h)


def _cf4_exponents(a0, a1, dt):
    x1 = 0.5 * a0 - (2.0 / dt) * a1
    x2 = 0.5 * a0 + (2.0 / dt) * a1
    return x1, x2


def _propagate(c_block, d, params: ModelParams, n_steps: int, scheme: str):
    t_period = params.bloch_period
    dt = t_period / n_steps
    dim = c_block.shape[0]
    u = np.eye(dim, dtype=np.complex128)
    f = params.F
    c_dag = c_block.conj().T
    if scheme == "midpoint":
        d_mat = np.diag(d)
        for k in range(n_steps):
            t_mid = (k + 0.5) * dt
            phase = np.exp(1j * f * t_mid)
            h = d_mat + phase * c_block + np.conj(phase) * c_dag
            u = _apply_exp(dt * h, u)
        return u
    if scheme == "cf4":
        d_mat = np.diag(d)
        for k in range(n_steps):
            t_mid = (k + 0.5) * dt
            e0 = _e0(np.array(f), t_mid, dt)
            e1 = _e1(np.array(f), t_mid, dt)
            a0 = dt * d_mat + e0 * c_block + np.conj(e0) * c_dag
            a1 = e1 * c_block + np.conj(e1) * c_dag
            x1, x2 = _cf4_exponents(a0, a1, dt)
            u = _apply_exp(x2, _apply_exp(x1, u))
        return u
    if scheme == "ipcf4":
        w_plus = d[:, None] - d[None, :] + f
        w_minus = d[:, None] - d[None, :] - f
        for k in range(n_steps):
            t_mid = (k + 0.5) * dt
            a0 = _e0(w_plus, t_mid, dt) * c_block + _e0(w_minus, t_mid, dt) * c_dag
            a1 = _e1(w_plus, t_mid, dt) * c_block + _e1(w_minus, t_mid, dt) * c_dag
            x1, x2 = _cf4_exponents(a0, a1, dt)
            u = _apply_exp(x2, _apply_exp(x1, u))
        return np.exp(-1j * d * t_period)[:, None] * u
    raise ValueError(f"unknown scheme {scheme!r}")


def propagate_period(sector: SectorBasis, params: ModelParams, n_steps: int,
                     scheme: str = "cf4") -> UnitaryMatrix:
    """Single product of `n_steps` exactly unitary step factors over one T_B."""
    if n_steps < 1:
        raise ValueError("n_steps must be >= 1")
    c_block, d = sector_blocks(sector, params)
    u = _propagate(c_block, d, params, n_steps, scheme)
    return UnitaryMatrix(u, params, sector.kappa, n_steps, scheme)


def converged_propagator(sector: SectorBasis, params: ModelParams,
                         scheme: str = "cf4", start_steps: int = 32,
                         phase_tol: float = PHASE_TOL,
                         max_steps: int = 1 << 16) -> UnitaryMatrix:
    """Double the step count until eigenphases shift by less than `phase_tol`.

    Returns the finest propagator.  Raises PropagatorConvergenceError with the
    last two shifts if `max_steps` is exceeded.
    """
    c_block, d = sector_blocks(sector, params)
    n = start_steps
    u_prev = _propagate(c_block, d, params, n, scheme)
    phases_prev = _raw_phases(u_prev)
    shift_prev = np.inf
    while 2 * n <= max_steps:
        n *= 2
        u = _propagate(c_block, d, params, n, scheme)
        phases = _raw_phases(u)
        shift = phase_shift(phases_prev, phases)
        if shift < phase_tol:
            return UnitaryMatrix(u, params, sector.kappa, n, scheme)
        u_prev, phases_prev, shift_prev = u, phases, shift
    raise PropagatorConvergenceError(n, shift_prev, shift)


def _raw_phases(matrix: np.ndarray) -> np.ndarray:
    phases = np.angle(np.linalg.eigvals(matrix))
    phases = np.mod(phases, 2.0 * np.pi)
    phases[phases >= 2.0 * np.pi] = 0.0
    return np.sort(phases)


def phase_shift(a: np.ndarray, b: np.ndarray) -> float:
    """Max angular displacement between two sorted phase sets (wrap-aware)."""
    best = np.inf
    for k in (-2, -1, 0, 1, 2):
        diff = a - np.roll(b, k)
        diff = np.mod(diff + np.pi, 2.0 * np.pi) - np.pi
        best = min(best, float(np.abs(diff).max()))
    return best


def eigenphases(u: UnitaryMatrix | np.ndarray,
                residual_tol: float = EIG_RESIDUAL_TOL) -> EigenphaseSet:
    """Sorted eigenphases in [0, 2 pi), with an explicit residual check."""
    matrix = u.matrix if isinstance(u, UnitaryMatrix) else np.asarray(u)
    vals, vecs = np.linalg.eig(matrix)
    residuals = np.linalg.norm(matrix @ vecs - vecs * vals, axis=0)
    worst = float(residuals.max())
    if worst > residual_tol:
        raise EigensolverError(f"eigenpair residual {worst:.3e} > {residual_tol}")
    phases = np.mod(np.angle(vals), 2.0 * np.pi)
    phases[phases >= 2.0 * np.pi] = 0.0
    return EigenphaseSet(np.sort(phases), matrix.shape[0])
