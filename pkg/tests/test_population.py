import numpy as np
import pytest

from covlab.population import (
    AutocovarianceSpec,
    PopulationModel,
    SlowlyVarying,
    autocovariance,
    build_population,
    decompose,
    phase_conjugate,
    spectral_gap_ratio,
)
from conftest import random_psd


class TestAutocovariance:
    def test_lag_zero(self, memory_spec):
        assert autocovariance(memory_spec, 0) == 1.0

    def test_lag_one(self, memory_spec):
        np.testing.assert_allclose(autocovariance(memory_spec, 1), 2.0**-0.75)

    def test_even_in_lag(self, memory_spec):
        np.testing.assert_allclose(autocovariance(memory_spec, -2), 3.0**-0.75)
        for h in range(1, 30):
            assert autocovariance(memory_spec, h) == autocovariance(memory_spec, -h)

    def test_log_power_family(self):
        spec = AutocovarianceSpec(d=0.25, slowly_varying=SlowlyVarying("log_power", 2.0))
        expected = np.log(2.0 + 3.0) ** 2 / (1.0 + 3.0) ** 0.5
        np.testing.assert_allclose(autocovariance(spec, 3), expected)
        assert autocovariance(spec, 0) > 0

    def test_phase_modulation(self):
        spec = AutocovarianceSpec(d=0.125, theta=0.7)
        base = AutocovarianceSpec(d=0.125)
        got = autocovariance(spec, 5)
        np.testing.assert_allclose(got, autocovariance(base, 5) * np.exp(1j * 0.7 * 5))
        # Hermitian symmetry of the modulated sequence
        np.testing.assert_allclose(autocovariance(spec, -5), np.conj(got))

    def test_memory_exponent_range(self):
        with pytest.raises(ValueError):
            AutocovarianceSpec(d=0.5)
        with pytest.raises(ValueError):
            AutocovarianceSpec(d=0.0)

    def test_regular_variation_index(self, memory_spec):
        assert memory_spec.rho == pytest.approx(-0.75)


class TestBuildPopulation:
    def test_toeplitz_two_by_two(self, memory_spec):
        got = build_population(PopulationModel.toeplitz(memory_spec, 2))
        c = 2.0**-0.75
        np.testing.assert_allclose(got, [[1.0, c], [c, 1.0]])

    def test_toeplitz_layout(self, memory_spec):
        n = 7
        got = build_population(PopulationModel.toeplitz(memory_spec, n))
        for i in range(n):
            for j in range(n):
                assert got[i, j] == autocovariance(memory_spec, i - j)

    def test_toeplitz_complex_hermitian(self):
        spec = AutocovarianceSpec(d=0.125, theta=1.1)
        got = build_population(PopulationModel.toeplitz(spec, 6))
        np.testing.assert_allclose(got, got.conj().T)
        assert got[2, 0] == autocovariance(spec, 2)

    def test_spiked(self):
        got = build_population(PopulationModel.spiked([5.0], bulk=1.0, N=3))
        np.testing.assert_allclose(got, np.diag([5.0, 1.0, 1.0]))

    def test_explicit_rejects_non_hermitian(self):
        with pytest.raises(ValueError, match="Hermitian"):
            PopulationModel.explicit([[1.0, 2.0], [0.0, 1.0]])

    def test_negative_diagonal_rejected(self):
        with pytest.raises(ValueError, match="negative"):
            PopulationModel.diagonal([1.0, -0.5])
        with pytest.raises(ValueError, match="negative"):
            PopulationModel.spiked([2.0], bulk=-1.0, N=4)

    def test_config_round_trip(self, memory_spec):
        for model in (
            PopulationModel.toeplitz(memory_spec, 12),
            PopulationModel.spiked([4.0, 2.0], bulk=1.0, N=6),
            PopulationModel.diagonal([3.0, 2.0, 1.0]),
        ):
            back = PopulationModel.from_config(model.to_config())
            np.testing.assert_allclose(
                build_population(back), build_population(model)
            )


class TestDecompose:
    def test_diagonal(self):
        dec = decompose(np.diag([5.0, 1.0, 1.0]))
        np.testing.assert_allclose(dec.eigenvalues, [5.0, 1.0, 1.0])

    def test_analytic_two_by_two(self):
        dec = decompose(np.array([[2.0, 1.0], [1.0, 2.0]]))
        np.testing.assert_allclose(dec.eigenvalues, [3.0, 1.0], atol=1e-12)

    def test_unitarity_and_reconstruction(self, rng):
        for n in (3, 20, 120):
            g = random_psd(rng, n)
            dec = decompose(g)
            u = dec.eigenvectors
            assert np.max(np.abs(u @ u.conj().T - np.eye(n))) < 1e-10
            assert np.max(np.abs(dec.reconstruct() - g)) < 1e-10 * max(1, g.max())

    def test_complex_hermitian(self, rng):
        g = random_psd(rng, 15, complex_entries=True)
        dec = decompose(g)
        rel = np.linalg.norm(dec.reconstruct() - g) / np.linalg.norm(g)
        assert rel < 1e-10

    def test_psd_clamp(self):
        # tiny negative eigenvalue within tolerance gets clamped to zero
        q = np.linalg.qr(np.random.default_rng(3).standard_normal((4, 4)))[0]
        g = (q * np.array([1.0, 0.5, 0.1, -1e-12])) @ q.T
        dec = decompose((g + g.T) / 2)
        assert dec.eigenvalues[-1] == 0.0

    def test_indefinite_rejected(self):
        with pytest.raises(ValueError, match="not positive semidefinite"):
            decompose(np.diag([1.0, -1.0]))

    def test_psd_sqrt_squares_back(self, rng):
        g = random_psd(rng, 25)
        dec = decompose(g)
        np.testing.assert_allclose(dec.psd_sqrt @ dec.psd_sqrt, g, atol=1e-10)


class TestSpectralGapRatio:
    def test_spiked(self):
        assert spectral_gap_ratio(decompose(np.diag([5.0, 1.0, 1.0]))) == pytest.approx(0.2)

    def test_degenerate(self):
        assert spectral_gap_ratio(decompose(np.diag([3.0, 3.0]))) == pytest.approx(1.0)

    def test_too_small(self):
        with pytest.raises(ValueError):
            spectral_gap_ratio(decompose(np.array([[2.0]])))

    def test_zero_top(self):
        with pytest.raises(ValueError):
            spectral_gap_ratio(decompose(np.zeros((3, 3))))


class TestPhaseConjugate:
    def test_identity_at_zero(self, rng):
        g = random_psd(rng, 8)
        np.testing.assert_array_equal(phase_conjugate(g, 0.0), g)

    def test_pi_gives_sign_pattern(self, memory_spec):
        t = build_population(PopulationModel.toeplitz(memory_spec, 6))
        got = phase_conjugate(t, np.pi)
        assert not np.iscomplexobj(got)
        for i in range(6):
            for j in range(6):
                assert got[i, j] == pytest.approx((-1.0) ** (i - j) * t[i, j])

    def test_spectrum_preserved(self, rng):
        g = random_psd(rng, 30)
        for theta in (0.3, -1.2, np.pi, 2.9):
            before = np.linalg.eigvalsh(g)
            after = np.linalg.eigvalsh(phase_conjugate(g, theta))
            np.testing.assert_allclose(after, before, atol=1e-10)

    def test_matches_toeplitz_modulation(self):
        # conjugating the real Toeplitz matrix = building from the modulated sequence
        theta = 0.9
        plain = build_population(PopulationModel.toeplitz(AutocovarianceSpec(d=0.2), 8))
        modulated = build_population(
            PopulationModel.toeplitz(AutocovarianceSpec(d=0.2, theta=theta), 8)
        )
        np.testing.assert_allclose(phase_conjugate(plain, theta), modulated, atol=1e-14)


class TestRoundTripInvariant:
    def test_all_kinds(self, memory_spec, rng):
        models = [
            PopulationModel.toeplitz(memory_spec, 200),
            PopulationModel.toeplitz(AutocovarianceSpec(d=0.375, theta=0.5), 150),
            PopulationModel.spiked([10.0, 4.0], bulk=0.5, N=100),
            PopulationModel.diagonal(rng.random(80) * 5),
            PopulationModel.explicit(random_psd(rng, 60)),
        ]
        for model in models:
            g = build_population(model)
            dec = decompose(g)
            rel = np.linalg.norm(dec.reconstruct() - g) / max(np.linalg.norm(g), 1e-300)
            assert rel < 1e-10, model.kind


class TestToeplitzGrowth:
    def test_normalized_top_eigenvalue_increases(self, memory_spec):
        """lambda_1 / (N gamma(N)) climbs toward the operator limit."""
        values = []
        for n in (250, 500, 1000):
            dec = decompose(build_population(PopulationModel.toeplitz(memory_spec, n)))
            values.append(dec.lambda_max / (n * autocovariance(memory_spec, n)))
        assert values[0] < values[1] < values[2]

    def test_gap_ratio_below_one(self):
        for d in (0.125, 0.25, 0.375):
            dec = decompose(
                build_population(PopulationModel.toeplitz(AutocovarianceSpec(d=d), 500))
            )
            assert spectral_gap_ratio(dec) < 0.8
