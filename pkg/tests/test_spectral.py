import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tiltedbh.spectral import (
    SpacingSample,
    empirical_cdf,
    integrated_poisson,
    integrated_wigner,
    mean_square_deviation,
    spacings_from_phases,
)


class TestSpacings:
    def test_two_opposite_phases(self):
        s = spacings_from_phases(np.array([0.0, np.pi]))
        assert np.allclose(s.spacings, [1.0, 1.0])

    def test_picket_fence(self):
        phases = np.linspace(0, 2 * np.pi, 4, endpoint=False)
        s = spacings_from_phases(phases)
        assert np.allclose(s.spacings, 1.0)

    def test_rotation_invariance(self):
        phases = np.array([0.0, np.pi / 2, np.pi, 3 * np.pi / 2])
        a = spacings_from_phases(phases)
        b = spacings_from_phases(np.mod(phases + 0.3, 2 * np.pi))
        assert np.allclose(np.sort(a.spacings), np.sort(b.spacings))

    def test_unit_mean_exact(self):
        rng = np.random.default_rng(0)
        phases = np.sort(rng.uniform(0, 2 * np.pi, size=257))
        s = spacings_from_phases(phases)
        assert abs(s.spacings.mean() - 1.0) < 1e-12
        assert (s.spacings >= 0).all()
        assert s.count == 257

    def test_too_few_phases(self):
        with pytest.raises(ValueError):
            spacings_from_phases(np.array([1.0]))

    def test_degenerate_phases_kept(self):
        s = spacings_from_phases(np.array([1.0, 1.0, 2.0]))
        assert s.count == 3
        assert np.min(s.spacings) == 0.0


class TestReferenceCDFs:
    def test_poisson_values(self):
        assert integrated_poisson(0.0) == 0.0
        assert np.isclose(integrated_poisson(1.0), 1 - np.exp(-1))
        assert np.isclose(integrated_poisson(50.0), 1.0)

    def test_wigner_values(self):
        assert integrated_wigner(0.0) == 0.0
        assert np.isclose(integrated_wigner(2.0), 1 - np.exp(-np.pi))
        s_star = 2 * np.sqrt(np.log(2) / np.pi)
        assert np.isclose(integrated_wigner(s_star), 0.5)

    @given(st.floats(min_value=0, max_value=50),
           st.floats(min_value=0, max_value=50))
    def test_monotone(self, a, b):
        lo, hi = sorted((a, b))
        assert integrated_poisson(hi) >= integrated_poisson(lo)
        assert integrated_wigner(hi) >= integrated_wigner(lo)


class TestEmpiricalCDF:
    def test_two_unit_spacings(self):
        f = empirical_cdf(SpacingSample(np.array([1.0, 1.0])))
        assert f(0.5) == 0.0
        assert f(1.0) == 1.0

    def test_half_step(self):
        f = empirical_cdf(SpacingSample(np.array([0.5, 1.5])))
        assert f(1.0) == 0.5

    def test_saturates_at_one(self):
        sample = SpacingSample(np.array([0.3, 0.9, 1.8]))
        f = empirical_cdf(sample)
        assert abs(f(1.8) - 1.0) < 1e-12
        assert abs(f(10.0) - 1.0) < 1e-12


def picket_fence_delta2_poisson(s_max=5.0):
    """Closed-form Delta^2 for the all-ones sample against Poisson.

    f(s) = theta(s - 1), so the integrand is I_P^2 below 1 and (1 - I_P)^2
    = e^{-2s} above; both pieces integrate in closed form.
    """
    below = 1.0 + 2.0 * (np.exp(-1) - 1.0) + 0.5 * (1.0 - np.exp(-2))
    above = 0.5 * (np.exp(-2.0) - np.exp(-2.0 * s_max))
    return (below + above) / s_max


class TestMeanSquareDeviation:
    def test_picket_fence_closed_form(self):
        sample = SpacingSample(np.ones(1000))
        d2 = mean_square_deviation(sample, "poisson")
        assert abs(d2 - picket_fence_delta2_poisson()) < 1e-3

    def test_poisson_quantile_sample_converges(self):
        # sample placed exactly at Poisson quantiles: Delta^2 -> 0
        for n, bound in ((100, 1e-3), (10000, 1e-5)):
            q = -np.log(1 - (np.arange(n) + 0.5) / n)
            d2 = mean_square_deviation(SpacingSample(q), "poisson")
            assert d2 < bound

    def test_exponential_sample_prefers_poisson(self):
        wins = 0
        for seed in range(100):
            rng = np.random.default_rng(seed)
            sample = SpacingSample(rng.exponential(size=2000))
            d2p = mean_square_deviation(sample, "poisson")
            d2w = mean_square_deviation(sample, "wigner")
            wins += d2p < d2w
        assert wins >= 99

    def test_bounded_and_permutation_invariant(self):
        rng = np.random.default_rng(42)
        spacings = rng.exponential(size=300)
        sample = SpacingSample(spacings)
        shuffled = SpacingSample(rng.permutation(spacings))
        for ref in ("poisson", "wigner"):
            d2 = mean_square_deviation(sample, ref)
            assert 0.0 <= d2 <= 1.0
            assert d2 == mean_square_deviation(shuffled, ref)

    def test_references_never_coincide(self):
        rng = np.random.default_rng(9)
        sample = SpacingSample(rng.exponential(size=50))
        total = mean_square_deviation(sample, "poisson") + mean_square_deviation(
            sample, "wigner"
        )
        assert total > 0

    def test_grid_refinement_stable(self):
        rng = np.random.default_rng(1)
        sample = SpacingSample(rng.exponential(size=500))
        for ref in ("poisson", "wigner"):
            coarse = mean_square_deviation(sample, ref, grid_points=1000)
            fine = mean_square_deviation(sample, ref, grid_points=2000)
            assert abs(coarse - fine) < 1e-4

    def test_unknown_reference(self):
        with pytest.raises(ValueError):
            mean_square_deviation(SpacingSample(np.ones(3)), "gue")
