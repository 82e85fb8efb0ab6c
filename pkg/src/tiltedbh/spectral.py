"""Nearest-neighbor spacing statistics of Floquet eigenphases.

Floquet spectra have uniform mean density on the circle, so unfolding reduces
to a linear rescaling of the gaps to unit mean.  Samples are scored against
the integrated Poisson and Wigner-Dyson distributions through a normalized
mean square deviation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

S_MAX = 5.0
GRID_POINTS = 1000


@dataclass
class SpacingSample:
    """Unit-mean nearest-neighbor spacings, including the wraparound gap."""

    spacings: np.ndarray

    @property
    def count(self) -> int:
        return len(self.spacings)


def spacings_from_phases(phases: np.ndarray) -> SpacingSample:
    """Consecutive gaps plus the wraparound gap, rescaled to mean exactly 1.

    Degenerate phases yield zero spacings and are retained.
    """
    phases = np.sort(np.asarray(phases, dtype=np.float64))
    if len(phases) < 2:
        raise ValueError("need at least 2 phases for spacings")
    gaps = np.empty(len(phases))
    gaps[:-1] = np.diff(phases)
    gaps[-1] = 2.0 * np.pi - phases[-1] + phases[0]
    gaps /= gaps.mean()
    return SpacingSample(gaps)


def integrated_poisson(s) -> np.ndarray:
    """I_P(s) = 1 - exp(-s)."""
    return 1.0 - np.exp(-np.asarray(s, dtype=np.float64))


def integrated_wigner(s) -> np.ndarray:
    """I_W(s) = 1 - exp(-pi s^2 / 4)."""
    s = np.asarray(s, dtype=np.float64)
    return 1.0 - np.exp(-0.25 * np.pi * s**2)


REFERENCE_CDFS = {
    "poisson": integrated_poisson,
    "wigner": integrated_wigner,
}


def empirical_cdf(sample: SpacingSample):
    """Right-continuous step function f(s) = #(spacings <= s) / count."""
    sorted_s = np.sort(sample.spacings)
    n = len(sorted_s)

    def f(s):
        return np.searchsorted(sorted_s, np.asarray(s, dtype=np.float64),
                               side="right") / n

    return f


def mean_square_deviation(sample: SpacingSample, reference: str,
                          s_max: float = S_MAX,
                          grid_points: int = GRID_POINTS) -> float:
    """Trapezoid integral of (f(s) - I(s))^2 over [0, s_max], divided by s_max."""
    if sample.count == 0:
        raise ValueError("empty spacing sample")
    try:
        cdf = REFERENCE_CDFS[reference]
    except KeyError:
        raise ValueError(f"unknown reference {reference!r}") from None
    grid = np.linspace(0.0, s_max, grid_points)
    f = empirical_cdf(sample)
    integrand = (f(grid) - cdf(grid)) ** 2
    return float(np.trapezoid(integrand, grid) / s_max)
