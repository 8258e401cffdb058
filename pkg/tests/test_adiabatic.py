"""
Tests for the adiabatic-approximation spectrum
"""

import math

import mpmath
import numpy as np
import pytest
from scipy.linalg import expm
from scipy.special import eval_genlaguerre

from rabitherm.exceptions import ConfigError
from rabitherm.models import LevelKind
from rabitherm.services import adiabatic
from rabitherm.services import model as model_service


class TestLaguerre:

    @pytest.mark.parametrize('n', [0, 1, 2, 5, 12])
    @pytest.mark.parametrize('alpha', [0.0, 1.5])
    def test_matches_scipy(self, n, alpha):
        """Recurrence agrees with scipy's generalized Laguerre polynomials"""
        for x in (0.3, 1.5, 4.0):
            expected = eval_genlaguerre(n, alpha, x)
            assert abs(adiabatic.laguerre(n, alpha, x) - expected) <= 1e-12 * max(1.0, abs(expected))

    def test_low_orders(self):
        assert adiabatic.laguerre(2, 0, 1.5) == pytest.approx(-0.875, abs=1e-15)
        assert adiabatic.laguerre(1, 2.0, 0.5) == pytest.approx(2.5, abs=1e-15)

    def test_negative_degree(self):
        with pytest.raises(ConfigError):
            adiabatic.laguerre_sequence(-1, 0, 1.0)

    def test_deep_overlap_uses_extended_precision(self):
        """e^{-2 lambda^2} survives at lambda = 5 where the argument is far above the threshold"""
        value = adiabatic.displaced_overlap(0, 5.0, 1.0)
        assert value == pytest.approx(math.exp(-50.0), rel=1e-12)

    @pytest.mark.parametrize('n', [0, 2, 5])
    def test_overlap_matches_displacement_matrix(self, n):
        """<n|D(2 lambda)|n> from a Fock-truncated displacement operator"""
        size = 201
        lowering = np.diag(np.sqrt(np.arange(1, size, dtype=float)), 1)
        displacement = expm(2.0 * (lowering.T - lowering))
        assert adiabatic.displaced_overlap(n, 1.0, 1.0) == pytest.approx(displacement[n, n], abs=1e-12)

    def test_overlap_is_bounded(self):
        for lam in (0.5, 2.0, 6.0):
            values = np.asarray(adiabatic.overlap_sequence(50, lam, 1.0))
            assert np.all(np.abs(values) <= 1.0 + 1e-12)

    def test_extended_matches_double_at_moderate_argument(self):
        double = adiabatic.overlap_sequence(10, 1.0, 1.0)
        extended = adiabatic.overlap_sequence(10, 1.0, 1.0, extended_arg=0.0)
        np.testing.assert_allclose(extended, double, rtol=0, atol=1e-13)


class TestBrightEnergies:
    """Single-level reduction to the two-level Rabi model"""

    def setup_method(self):
        self.omega_a = 0.05

    @staticmethod
    def _reference(n, g, omega_a):
        with mpmath.workdps(50):
            x = 4 * mpmath.mpf(g) ** 2
            splitting = mpmath.mpf(omega_a) / 2 * mpmath.exp(-x / 2) * mpmath.laguerre(n, 0, x)
            centre = n - mpmath.mpf(g) ** 2 + mpmath.mpf(omega_a) / 2
            return float(centre + splitting), float(centre - splitting)

    @pytest.mark.parametrize('g', [0.1, 1.0, 5.0])
    def test_qrm_reduction(self, qrm_model, g):
        model = qrm_model(g, self.omega_a)
        decomp = model_service.svd_decompose(model)
        for n in range(31):
            plus, minus = adiabatic.bright_energies(decomp, model, n, 1)
            ref_plus, ref_minus = self._reference(n, g, self.omega_a)
            assert abs(plus - ref_plus) <= 1e-12 * max(1.0, abs(ref_plus))
            assert abs(minus - ref_minus) <= 1e-12 * max(1.0, abs(ref_minus))

    def test_strong_coupling_ladder(self, qrm_model):
        """Doublets collapse and the ladder spacing tends to omega_f"""
        model = qrm_model(5.0, 0.2)
        decomp = model_service.svd_decompose(model)
        energies = [adiabatic.bright_energies(decomp, model, n, 1) for n in range(11)]
        for (plus, minus), (next_plus, _) in zip(energies, energies[1:]):
            assert abs(plus - minus) < 1e-6
            assert abs(next_plus - plus - 1.0) < 1e-6

    def test_invalid_index(self, two_band_model):
        decomp = model_service.svd_decompose(two_band_model)
        with pytest.raises(ConfigError):
            adiabatic.bright_energies(decomp, two_band_model, 0, 3)
        with pytest.raises(ConfigError):
            adiabatic.bright_energies(decomp, two_band_model, -1, 1)

    def test_dark_energy_requires_dark_states(self, qrm_model):
        model = qrm_model(0.5)
        decomp = model_service.svd_decompose(model)
        with pytest.raises(ConfigError, match="no dark states"):
            adiabatic.dark_energy(decomp, model, 0)


class TestAaSpectrum:

    def test_decoupled_spectrum(self, qrm_model):
        """Zero coupling leaves the free ladders n and n + omega_a"""
        model = qrm_model(0.0, 0.05)
        decomp = model_service.svd_decompose(model)
        spectrum = adiabatic.aa_spectrum(decomp, model, theta=3)
        energies = adiabatic.expanded_energies(spectrum)
        expected = np.sort([n + shift for n in range(4) for shift in (0.0, 0.05)])
        np.testing.assert_allclose(energies, expected, atol=1e-15)
        assert all(level.kind is LevelKind.DARK for level in spectrum.levels)

    def test_levels_are_energy_ordered(self, two_band_model):
        decomp = model_service.svd_decompose(two_band_model)
        spectrum = adiabatic.aa_spectrum(decomp, two_band_model, theta=5)
        energies = [level.energy for level in spectrum.levels]
        assert all(a <= b for a, b in zip(energies, energies[1:]))

    def test_dark_multiplicity(self, two_band_model):
        """Two dark excited states share one ladder with multiplicity 2"""
        decomp = model_service.svd_decompose(two_band_model)
        spectrum = adiabatic.aa_spectrum(decomp, two_band_model, theta=4)
        dark = [level for level in spectrum.levels if level.kind is LevelKind.DARK]
        assert len(dark) == 5
        assert {level.multiplicity for level in dark} == {2}
        assert sorted(level.energy for level in dark) == pytest.approx([n + 0.2 for n in range(5)])

    def test_truncation_range(self, qrm_model):
        """zeta = g^2 + omega_a / 2 + theta = 6.025 keeps n = 0..6"""
        model = qrm_model(1.0, 0.05)
        decomp = model_service.svd_decompose(model)
        assert adiabatic.zeta(decomp, model, 5, 1) == pytest.approx(6.025)
        assert adiabatic.retained_oscillator_range(decomp, model, 5, 1) == 6
        spectrum = adiabatic.aa_spectrum(decomp, model, theta=5)
        assert len(spectrum.levels) == 14
        assert spectrum.total_multiplicity == 14

    def test_total_multiplicity(self, two_band_model):
        """Bright doublets up to floor(zeta) plus N - M dark states per rung"""
        decomp = model_service.svd_decompose(two_band_model)
        spectrum = adiabatic.aa_spectrum(decomp, two_band_model, theta=5)
        assert spectrum.total_multiplicity == 2 * (7 + 6) + 2 * 6
        assert adiabatic.expanded_energies(spectrum).size == spectrum.total_multiplicity

    def test_gauge_phase_leaves_spectrum(self, two_band_model):
        decomp = model_service.svd_decompose(two_band_model)
        rotated = model_service.gauge_transform(decomp, 1, -0.8)
        np.testing.assert_array_equal(
            adiabatic.expanded_energies(adiabatic.aa_spectrum(rotated, two_band_model, 5)),
            adiabatic.expanded_energies(adiabatic.aa_spectrum(decomp, two_band_model, 5)),
        )

    def test_negative_theta(self, two_band_model):
        decomp = model_service.svd_decompose(two_band_model)
        with pytest.raises(ConfigError):
            adiabatic.aa_spectrum(decomp, two_band_model, theta=-1)

    def test_spectrum_frame(self, two_band_model):
        decomp = model_service.svd_decompose(two_band_model)
        spectrum = adiabatic.aa_spectrum(decomp, two_band_model, theta=2)
        frame = adiabatic.spectrum_frame(spectrum)
        assert list(frame.columns) == ['kind', 'k', 'n', 'energy', 'multiplicity']
        assert len(frame) == len(spectrum.levels)
        assert frame['multiplicity'].sum() == spectrum.total_multiplicity
