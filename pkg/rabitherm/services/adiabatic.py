"""
Multilevel adiabatic-approximation spectrum.

Bright doublets follow displaced-oscillator ladders whose branch splitting is
suppressed by e^{-2 lambda^2/omega_f^2} L_n(4 lambda^2/omega_f^2); dark states keep
the free cavity ladder.
"""

import logging
import math
from typing import List, Tuple

import mpmath
import numpy as np
import pandas as pd

from rabitherm.exceptions import ConfigError
from rabitherm.models import (
    AaLevel, AdiabaticSpectrum, LevelKind, ModelSpec, SuperradiantDecomposition
)

logger = logging.getLogger(__name__)

DEFAULT_EXTENDED_ARG = 60.0
DEFAULT_DPS = 50


def laguerre_sequence(n_max: int, alpha, x) -> list:
    """[L_0^alpha(x), ..., L_{n_max}^alpha(x)] by upward three-term recurrence.

    Works for floats, numpy arrays and mpmath numbers alike.
    """
    if n_max < 0:
        raise ConfigError(f"Laguerre degree must be nonnegative, got {n_max}")
    one = x * 0 + 1
    values = [one]
    if n_max >= 1:
        values.append(one + alpha - x)
    for k in range(1, n_max):
        values.append(((2 * k + 1 + alpha - x) * values[k] - (k + alpha) * values[k - 1]) / (k + 1))
    return values


def laguerre(n: int, alpha, x):
    return laguerre_sequence(n, alpha, x)[n]


def overlap_argument(lambda_k, omega_f):
    return 4.0 * lambda_k ** 2 / omega_f ** 2


def extended_context(dps: int = DEFAULT_DPS):
    """Private mpmath context; the global mp.dps is never touched, so concurrent
    callers cannot change each other's working precision."""
    ctx = mpmath.MPContext()
    ctx.dps = dps
    return ctx


def overlap_sequence(n_max: int, lambda_k: float, omega_f: float,
                     extended_arg: float = DEFAULT_EXTENDED_ARG, dps: int = DEFAULT_DPS,
                     ctx=None) -> list:
    """Displaced-oscillator overlaps <n^-|n^+> for n = 0..n_max.

    Above ``extended_arg`` the exponential and the polynomial are multiplied at
    ``dps`` digits and rounded afterwards, since e^{-x/2} L_n(x) cancels
    catastrophically in double precision. Passing ``ctx`` returns the values as
    numbers of that mpmath context instead of floats.
    """
    x = overlap_argument(lambda_k, omega_f)
    if ctx is not None or x > extended_arg:
        work = ctx if ctx is not None else extended_context(dps)
        x_mp = 4 * (work.mpf(lambda_k) / work.mpf(omega_f)) ** 2
        damping = work.exp(-x_mp / 2)
        values = [damping * value for value in laguerre_sequence(n_max, 0, x_mp)]
        if ctx is not None:
            return values
        return [float(value) for value in values]
    damping = math.exp(-x / 2.0)
    return [damping * value for value in laguerre_sequence(n_max, 0.0, x)]


def displaced_overlap(n: int, lambda_k: float, omega_f: float,
                      extended_arg: float = DEFAULT_EXTENDED_ARG, dps: int = DEFAULT_DPS) -> float:
    if omega_f <= 0:
        raise ConfigError(f"omega_f must be positive, got {omega_f}")
    return overlap_sequence(n, lambda_k, omega_f, extended_arg, dps)[n]


def _check_bright_index(decomp: SuperradiantDecomposition, k: int):
    if not 1 <= k <= decomp.m:
        raise ConfigError(f"Bright doublet index {k} outside 1..{decomp.m}")


def bright_energies(decomp: SuperradiantDecomposition, model: ModelSpec, n: int, k: int,
                    extended_arg: float = DEFAULT_EXTENDED_ARG, dps: int = DEFAULT_DPS
                    ) -> Tuple[float, float]:
    """(Lambda_{k+}^n, Lambda_{k-}^n), global omega_a/2 offset included"""
    _check_bright_index(decomp, k)
    if n < 0:
        raise ConfigError(f"Oscillator index must be nonnegative, got {n}")
    centre, splitting = _bright_centre_and_splitting(decomp, model, k, n, extended_arg, dps)
    return centre + splitting, centre - splitting


def _bright_centre_and_splitting(decomp, model, k, n, extended_arg, dps):
    lam = float(decomp.lam[k - 1])
    omega_f = model.omega_f
    overlap = overlap_sequence(n, lam, omega_f, extended_arg, dps)[n]
    centre = omega_f * (n - lam ** 2 / omega_f ** 2) + 0.5 * (model.omega_a + decomp.delta_plus[k - 1])
    splitting = 0.5 * (model.omega_a + decomp.delta_minus[k - 1]) * overlap
    return float(centre), float(splitting)


def dark_energy(decomp: SuperradiantDecomposition, model: ModelSpec, n: int,
                band: int = None) -> float:
    """Dark ladder energy n omega_f + (omega_a / 2)(1 + band); band defaults to p"""
    if decomp.dark_count + decomp.paired_dark_count == 0:
        raise ConfigError("Model has no dark states")
    band = decomp.p if band is None else band
    return n * model.omega_f + 0.5 * model.omega_a * (1 + band)


def dark_bands(decomp: SuperradiantDecomposition) -> List[Tuple[int, int]]:
    """(band sign, multiplicity) of each populated dark ladder"""
    bands = []
    if decomp.dark_count > 0:
        bands.append((decomp.p, decomp.dark_count))
    if decomp.paired_dark_count > 0:
        bands.append((-decomp.p, decomp.paired_dark_count))
    return bands


def zeta(decomp: SuperradiantDecomposition, model: ModelSpec, theta: int, k: int) -> float:
    _check_bright_index(decomp, k)
    lam = float(decomp.lam[k - 1])
    return lam ** 2 / model.omega_f ** 2 + model.omega_a * decomp.p / (2.0 * model.omega_f) + theta


def retained_oscillator_range(decomp, model, theta, k) -> int:
    """Largest n with n <= zeta(theta, k); n = 0 is always kept"""
    return max(0, int(math.floor(zeta(decomp, model, theta, k))))


def aa_spectrum(decomp: SuperradiantDecomposition, model: ModelSpec, theta: int,
                extended_arg: float = DEFAULT_EXTENDED_ARG, dps: int = DEFAULT_DPS
                ) -> AdiabaticSpectrum:
    """Energy-ordered truncated AA level set"""
    if theta < 0:
        raise ConfigError(f"Truncation parameter must be nonnegative, got {theta}")

    levels = []
    omega_f = model.omega_f
    for k in range(1, decomp.m + 1):
        lam = float(decomp.lam[k - 1])
        n_top = retained_oscillator_range(decomp, model, theta, k)
        overlaps = overlap_sequence(n_top, lam, omega_f, extended_arg, dps)
        half_gap = 0.5 * (model.omega_a + decomp.delta_minus[k - 1])
        offset = 0.5 * (model.omega_a + decomp.delta_plus[k - 1]) - lam ** 2 / omega_f
        for n, overlap in enumerate(overlaps):
            centre = omega_f * n + offset
            splitting = half_gap * overlap
            levels.append(AaLevel(LevelKind.BRIGHT_PLUS, k, n, float(centre + splitting), 1))
            levels.append(AaLevel(LevelKind.BRIGHT_MINUS, k, n, float(centre - splitting), 1))

    for band, multiplicity in dark_bands(decomp):
        for n in range(theta + 1):
            energy = n * omega_f + 0.5 * model.omega_a * (1 + band)
            levels.append(AaLevel(LevelKind.DARK, band, n, float(energy), multiplicity))

    levels.sort(key=lambda level: (level.energy, level.kind.value, level.k, level.n))
    logger.debug(f"AA spectrum: {len(levels)} levels retained at theta={theta}")
    return AdiabaticSpectrum(levels=tuple(levels), theta=theta, model=model)


def expanded_energies(spectrum: AdiabaticSpectrum) -> np.ndarray:
    energies = np.array([level.energy for level in spectrum.levels])
    multiplicities = np.array([level.multiplicity for level in spectrum.levels])
    return np.sort(np.repeat(energies, multiplicities))


def spectrum_frame(spectrum: AdiabaticSpectrum) -> pd.DataFrame:
    """Rows kind,k,n,energy,multiplicity with energies in units of omega_f"""
    omega_f = spectrum.model.omega_f
    return pd.DataFrame(
        {
            'kind': [level.kind.value for level in spectrum.levels],
            'k': [level.k for level in spectrum.levels],
            'n': [level.n for level in spectrum.levels],
            'energy': [level.energy / omega_f for level in spectrum.levels],
            'multiplicity': [level.multiplicity for level in spectrum.levels],
        },
        columns=['kind', 'k', 'n', 'energy', 'multiplicity'],
    )
