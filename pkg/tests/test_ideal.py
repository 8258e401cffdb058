"""
Tests for the ideal D-fold degenerate thermometer
"""

import math

import numpy as np
import pytest

from rabitherm.exceptions import ConfigError
from rabitherm.services import ideal, thermo


class TestStationarity:

    def test_single_excited_state(self):
        """D = 1 recovers the two-level optimum x* = 2 y*"""
        assert ideal.solve_stationarity(1) == pytest.approx(4.13068, abs=1e-4)

    @pytest.mark.parametrize('D', [1, 10, 1000, 10 ** 6])
    def test_residual_vanishes(self, D):
        x_star = ideal.solve_stationarity(D)
        assert x_star > 4.0
        assert abs(ideal.stationarity_residual(x_star, D)) <= 1e-10

    def test_thousand_states(self):
        assert ideal.solve_stationarity(1000) == pytest.approx(8.01, abs=2e-2)

    def test_monotone_in_degeneracy(self):
        values = [ideal.solve_stationarity(D) for D in (1, 10, 100, 1000, 10 ** 4, 10 ** 6)]
        assert all(a < b for a, b in zip(values, values[1:]))

    def test_logarithmic_growth(self):
        ratio = ideal.solve_stationarity(10 ** 6) / math.log(10 ** 6)
        assert 1.0 <= ratio <= 1.4

    def test_invalid_degeneracy(self):
        with pytest.raises(ConfigError):
            ideal.solve_stationarity(0)
        with pytest.raises(ConfigError):
            ideal.make_thermometer(1.0, 2.5)
        with pytest.raises(ConfigError):
            ideal.make_thermometer(0.0, 3)


class TestIdealQfi:

    def setup_method(self):
        self.temperatures = np.logspace(-2, 1, 50)

    def test_single_state_is_two_level(self):
        thermometer = ideal.make_thermometer(0.7, 1)
        np.testing.assert_allclose(
            ideal.ideal_qfi(thermometer, self.temperatures), thermo.tls_qfi(0.7, self.temperatures),
            rtol=1e-12,
        )

    @pytest.mark.parametrize('D', [1, 10, 1000])
    def test_matches_gibbs_variance(self, D):
        thermometer = ideal.make_thermometer(1.3, D)
        expected = thermo.gibbs_variance_qfi([0.0, 1.3], [1, D], self.temperatures)
        np.testing.assert_allclose(ideal.ideal_qfi(thermometer, self.temperatures), expected, rtol=1e-12)

    def test_two_level_peak_constant(self):
        _, c = thermo.tls_peak_constants()
        t_star, f_star = ideal.peak_value(ideal.make_thermometer(1.0, 1))
        assert f_star * t_star ** 2 == pytest.approx(0.265622, abs=1e-5)
        assert f_star * t_star ** 2 == pytest.approx(c, rel=1e-6)

    def test_peak_is_the_maximum(self):
        thermometer = ideal.make_thermometer(2.0, 1000)
        t_star, f_star = ideal.peak_value(thermometer)
        grid = np.linspace(0.9 * t_star, 1.1 * t_star, 2001)
        values = ideal.ideal_qfi(thermometer, grid)
        assert grid[np.argmax(values)] == pytest.approx(t_star, rel=1e-3)
        assert values.max() <= f_star * (1 + 1e-9)

    def test_large_degeneracy_scaling(self):
        exact, approximate = ideal.peak_scaling_check(10 ** 4)
        assert 0.7 <= exact / approximate <= 1.3

    def test_peak_grows_with_degeneracy(self):
        values = [ideal.peak_value(ideal.make_thermometer(1.0, D))[1] for D in (1, 10, 100, 1000)]
        assert all(a < b for a, b in zip(values, values[1:]))

    def test_peak_narrows_with_degeneracy(self):
        assert ideal.peak_width(ideal.make_thermometer(1.0, 1000)) < ideal.peak_width(ideal.make_thermometer(1.0, 1))

    def test_nonpositive_temperature(self):
        with pytest.raises(ConfigError):
            ideal.ideal_qfi(ideal.make_thermometer(1.0, 2), [0.1, 0.0])


class TestEffectiveGap:

    def test_linear_in_peak_temperature(self):
        assert ideal.effective_gap(0.02, 1000) == pytest.approx(2 * ideal.effective_gap(0.01, 1000))

    def test_round_trip(self):
        """The thermometer built from the effective gap peaks where it was asked to"""
        gap = ideal.effective_gap(0.05, 300)
        t_star, _ = ideal.peak_value(ideal.make_thermometer(gap, 300))
        assert t_star == pytest.approx(0.05, rel=1e-12)

    def test_table(self):
        table = ideal.ideal_table([1, 1000], E=2.0)
        assert list(table.columns) == ['D', 'x_star', 'T_star', 'F_star', 'E_eff',
                                       'width_log10', 'F_approx']
        assert list(table['D']) == [1, 1000]
        np.testing.assert_allclose(table['T_star'] * table['x_star'], [2.0, 2.0], rtol=1e-12)

    def test_empty_table(self):
        with pytest.raises(ConfigError):
            ideal.ideal_table([])
