"""
Ideal thermometer: one ground state and a D-fold degenerate excited level at gap E.
"""

import logging
import math
from functools import lru_cache
from typing import Iterable, Tuple

import numpy as np
import pandas as pd
from scipy.optimize import bisect, brentq

from rabitherm.exceptions import ConfigError
from rabitherm.models import IdealThermometer

logger = logging.getLogger(__name__)

STATIONARITY_XTOL = 1e-13


def make_thermometer(E: float, D: int) -> IdealThermometer:
    if not E > 0:
        raise ConfigError(f"Ideal thermometer gap must be positive, got {E}")
    if int(D) != D or D < 1:
        raise ConfigError(f"Ideal thermometer degeneracy must be a positive integer, got {D}")
    return IdealThermometer(E=float(E), D=int(D))


def _scaled_qfi(x, D):
    """F E^2 as a function of x = E / T"""
    x = np.asarray(x, dtype=float)
    u = D * np.exp(-x)
    return x ** 4 * u / (1.0 + u) ** 2


def ideal_qfi(thermometer: IdealThermometer, temperatures):
    """x^4 e^x D / (E^2 (D + e^x)^2) with x = E / T"""
    temperatures = np.asarray(temperatures, dtype=float)
    if np.any(temperatures <= 0):
        raise ConfigError("Temperatures must be positive")
    return _scaled_qfi(thermometer.E / temperatures, thermometer.D) / thermometer.E ** 2


def stationarity_residual(x: float, D: int) -> float:
    return x - math.log(D * (x + 4.0) / (x - 4.0))


@lru_cache(maxsize=256)
def solve_stationarity(D: int) -> float:
    """Root x* > 4 of x = ln(D (x + 4) / (x - 4))"""
    if D < 1:
        raise ConfigError(f"Degeneracy must be at least 1, got {D}")
    lower = 4.0 + 1e-9
    upper = math.log(D) + 30.0
    return float(bisect(stationarity_residual, lower, upper, args=(D,),
                        xtol=STATIONARITY_XTOL, maxiter=500))


def peak_value(thermometer: IdealThermometer) -> Tuple[float, float]:
    """(T*, F*)"""
    t_star = thermometer.E / solve_stationarity(thermometer.D)
    return t_star, float(ideal_qfi(thermometer, t_star))


def approximate_peak(D: int, E: float = 1.0) -> float:
    return math.log(D) ** 4 / (4.0 * E ** 2)


def peak_scaling_check(D: int, E: float = 1.0) -> Tuple[float, float]:
    """(exact F*, (ln D)^4 / (4 E^2))"""
    _, f_star = peak_value(make_thermometer(E, D))
    return f_star, approximate_peak(D, E)


def effective_gap(t_star: float, D: int) -> float:
    """Gap that puts the ideal thermometer's QFI maximum at ``t_star``"""
    if not t_star > 0:
        raise ConfigError(f"Peak temperature must be positive, got {t_star}")
    return solve_stationarity(D) * t_star


def peak_width(thermometer: IdealThermometer) -> float:
    """Full width at half maximum in log10 T"""
    x_star = solve_stationarity(thermometer.D)
    half = 0.5 * float(_scaled_qfi(x_star, thermometer.D))

    def excess(x):
        return float(_scaled_qfi(x, thermometer.D)) - half

    x_low = brentq(excess, 1e-6, x_star, xtol=1e-14)
    x_high = brentq(excess, x_star, 2.0 * x_star + 60.0, xtol=1e-14)
    return math.log10(x_high / x_low)


def ideal_table(D_values: Iterable[int], E: float = 1.0) -> pd.DataFrame:
    rows = []
    for D in D_values:
        thermometer = make_thermometer(E, D)
        t_star, f_star = peak_value(thermometer)
        rows.append({
            'D': thermometer.D,
            'x_star': solve_stationarity(thermometer.D),
            'T_star': t_star,
            'F_star': f_star,
            'E_eff': thermometer.E,
            'width_log10': peak_width(thermometer),
            'F_approx': approximate_peak(thermometer.D, thermometer.E),
        })
    if not rows:
        raise ConfigError("No degeneracies given")
    logger.debug(f"Ideal table for {len(rows)} degeneracies at E={E}")
    return pd.DataFrame(rows, columns=['D', 'x_star', 'T_star', 'F_star', 'E_eff',
                                       'width_log10', 'F_approx'])
