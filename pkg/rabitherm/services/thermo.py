"""
Thermal quantum Fisher information of the multilevel Rabi model.

The partition function is a sum over blocks: every retained bright doublet
(k, n) contributes 2 e^{beta gamma_B} cosh(beta Gamma_B) and every dark ladder
rung contributes its multiplicity times e^{beta gamma_D}. With x_i the log-weight of
block i, d^2 ln Z / d beta^2 = E_w[x_i''] + Var_w[x_i'], which is evaluated with
max-shifted weights and centred moments throughout.
"""

import logging
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import List, Optional, Tuple

import numpy as np
from scipy.optimize import minimize_scalar

from rabitherm.exceptions import ConfigError, NumericalError
from rabitherm.models import (
    ModelSpec, Peak, PrecisionMode, QfiCurve, SuperradiantDecomposition, _frozen_array
)
from rabitherm.services import adiabatic

logger = logging.getLogger(__name__)


def temperature_grid(t_min_log10: float = -3.0, t_max_log10: float = 0.5,
                     points: int = 400, omega_f: float = 1.0) -> np.ndarray:
    if points < 1 or not t_max_log10 >= t_min_log10:
        raise ConfigError(f"Invalid temperature grid ({t_min_log10}, {t_max_log10}, {points})")
    return omega_f * np.logspace(t_min_log10, t_max_log10, points)


def _check_temperatures(temperatures) -> np.ndarray:
    temperatures = np.atleast_1d(np.asarray(temperatures, dtype=float))
    if temperatures.size == 0:
        raise ConfigError("Temperature grid is empty")
    if not np.all(np.isfinite(temperatures)) or np.any(temperatures <= 0):
        raise ConfigError("Temperatures must be positive and finite")
    return temperatures


# ---------------------------------------------------------------------------
# Two-level reference and Gibbs variance oracle
# ---------------------------------------------------------------------------

def tls_qfi(delta, temperatures):
    """delta^2 / (4 T^4) sech^2(delta / 2T)"""
    delta = np.asarray(delta, dtype=float)
    temperatures = np.asarray(temperatures, dtype=float)
    y = np.abs(delta) / (2.0 * temperatures)
    decay = np.exp(-2.0 * y)
    sech2 = 4.0 * decay / (1.0 + decay) ** 2
    return delta ** 2 / (4.0 * temperatures ** 4) * sech2


@lru_cache(maxsize=1)
def tls_peak_constants() -> Tuple[float, float]:
    """(delta / 2T*, C) for the two-level thermometer, C = F* T*^2"""
    def negative_peak(y):
        # F delta^2 / 4 as a function of y = delta / 2T
        return -(y ** 4) / np.cosh(y) ** 2

    result = minimize_scalar(negative_peak, bounds=(0.5, 5.0), method='bounded',
                             options={'xatol': 1e-12})
    y_star = float(result.x)
    return y_star, y_star ** 2 / math.cosh(y_star) ** 2


def schottky_trace(temperatures):
    """C / T^2: peak QFI of two-level thermometers optimally gapped for each T"""
    _, c = tls_peak_constants()
    return c / np.asarray(temperatures, dtype=float) ** 2


tls_peak_trace = schottky_trace


def gibbs_variance_qfi(energies, multiplicities, temperatures) -> np.ndarray:
    """beta^4 Var[H] of a Gibbs state over an explicit spectrum"""
    temperatures = _check_temperatures(temperatures)
    energies = np.asarray(energies, dtype=float)
    if multiplicities is None:
        multiplicities = np.ones_like(energies)
    log_mult = np.log(np.asarray(multiplicities, dtype=float))

    beta = 1.0 / temperatures[:, None]
    shifted = energies - energies.min()
    log_w = -beta * shifted + log_mult
    log_w -= log_w.max(axis=1, keepdims=True)
    w = np.exp(log_w)
    w /= w.sum(axis=1, keepdims=True)
    mean = (w * shifted).sum(axis=1, keepdims=True)
    variance = (w * (shifted - mean) ** 2).sum(axis=1)
    return variance / temperatures ** 4


# ---------------------------------------------------------------------------
# Block terms
# ---------------------------------------------------------------------------

def gamma_terms(decomp: SuperradiantDecomposition, model: ModelSpec, n: int, k: int,
                extended_arg: float = adiabatic.DEFAULT_EXTENDED_ARG,
                dps: int = adiabatic.DEFAULT_DPS) -> Tuple[float, float]:
    """(gamma_B, Gamma_B) of bright doublet k at oscillator index n"""
    if not 1 <= k <= decomp.m:
        raise ConfigError(f"Bright doublet index {k} outside 1..{decomp.m}")
    lam = float(decomp.lam[k - 1])
    gamma = lam ** 2 / model.omega_f - decomp.delta_plus[k - 1] / 2.0 - model.omega_f * n
    overlap = adiabatic.overlap_sequence(n, lam, model.omega_f, extended_arg, dps)[n]
    big_gamma = 0.5 * (model.omega_a + decomp.delta_minus[k - 1]) * overlap
    return float(gamma), float(big_gamma)


def gamma_dark(decomp: SuperradiantDecomposition, model: ModelSpec, n: int,
               band: Optional[int] = None) -> float:
    band = decomp.p if band is None else band
    return -(n * model.omega_f + model.omega_a * band / 2.0)


def lowest_doublet_gap(decomp: SuperradiantDecomposition, model: ModelSpec,
                       extended_arg: float = adiabatic.DEFAULT_EXTENDED_ARG) -> float:
    """Lambda_{1+}^0 - Lambda_{1-}^0"""
    if decomp.m == 0:
        raise ConfigError("Model has no bright doublet")
    _, big_gamma = gamma_terms(decomp, model, 0, 1, extended_arg)
    return 2.0 * abs(big_gamma)


@dataclass
class _Blocks:
    gamma_b: np.ndarray
    Gamma_b: np.ndarray
    k_b: np.ndarray
    n_b: np.ndarray
    gamma_d: np.ndarray
    mult_d: np.ndarray
    band_d: np.ndarray


@dataclass(frozen=True)
class ConsistencyReport:
    max_relative_deviation: float
    points: int

    def passed(self, tolerance: float = 1e-10) -> bool:
        return self.max_relative_deviation <= tolerance


class QfiCalculator:
    """Adiabatic-approximation QFI curves on a temperature grid"""

    def __init__(self, theta: int = 5, precision: PrecisionMode = PrecisionMode.STANDARD,
                 extended_dps: int = 50, extended_t_threshold: float = 3e-3,
                 extended_arg: float = adiabatic.DEFAULT_EXTENDED_ARG, cosh_guard: float = 700.0):
        if theta < 0:
            raise ConfigError(f"Truncation parameter must be nonnegative, got {theta}")
        self.theta = int(theta)
        self.precision = PrecisionMode(precision)
        self.extended_dps = int(extended_dps)
        self.extended_t_threshold = float(extended_t_threshold)
        self.extended_arg = float(extended_arg)
        self.cosh_guard = float(cosh_guard)

    @classmethod
    def from_settings(cls, settings: dict, **overrides):
        options = {
            'theta': settings.get('THETA', 5),
            'precision': PrecisionMode(settings.get('PRECISION', 'standard')),
            'extended_dps': settings.get('EXTENDED_DPS', 50),
            'extended_t_threshold': settings.get('EXTENDED_T_THRESHOLD', 3e-3),
            'extended_arg': settings.get('LAGUERRE_EXTENDED_ARG', adiabatic.DEFAULT_EXTENDED_ARG),
            'cosh_guard': settings.get('COSH_GUARD', 700.0),
        }
        options.update({key: value for key, value in overrides.items() if value is not None})
        return cls(**options)

    # -- block assembly -----------------------------------------------------

    def _blocks(self, decomp, model) -> _Blocks:
        gamma_b, Gamma_b, k_b, n_b = [], [], [], []
        for k in range(1, decomp.m + 1):
            lam = float(decomp.lam[k - 1])
            n_top = adiabatic.retained_oscillator_range(decomp, model, self.theta, k)
            overlaps = adiabatic.overlap_sequence(n_top, lam, model.omega_f,
                                                  self.extended_arg, self.extended_dps)
            half_gap = 0.5 * (model.omega_a + decomp.delta_minus[k - 1])
            base = lam ** 2 / model.omega_f - decomp.delta_plus[k - 1] / 2.0
            for n, overlap in enumerate(overlaps):
                gamma_b.append(base - model.omega_f * n)
                Gamma_b.append(half_gap * overlap)
                k_b.append(k)
                n_b.append(n)

        gamma_d, mult_d, band_d = [], [], []
        for band, multiplicity in adiabatic.dark_bands(decomp):
            for n in range(self.theta + 1):
                gamma_d.append(gamma_dark(decomp, model, n, band))
                mult_d.append(multiplicity)
                band_d.append(band)

        return _Blocks(
            gamma_b=np.array(gamma_b, dtype=float),
            Gamma_b=np.array(Gamma_b, dtype=float),
            k_b=np.array(k_b, dtype=int),
            n_b=np.array(n_b, dtype=int),
            gamma_d=np.array(gamma_d, dtype=float),
            mult_d=np.array(mult_d, dtype=float),
            band_d=np.array(band_d, dtype=int),
        )

    @staticmethod
    def _referenced(blocks: _Blocks, offset: float) -> _Blocks:
        """Shift all energies by ``offset``, then measure exponents from the largest one.

        With the ground block at gamma ~ 0 its centred first moment stays at the size
        of the doublet splitting, so rounding does not swamp tiny variances.
        """
        tops = [blocks.gamma_b + np.abs(blocks.Gamma_b), blocks.gamma_d]
        reference = max(float(np.max(top)) for top in tops if top.size) - offset
        return _Blocks(
            gamma_b=blocks.gamma_b - offset - reference,
            Gamma_b=blocks.Gamma_b,
            k_b=blocks.k_b,
            n_b=blocks.n_b,
            gamma_d=blocks.gamma_d - offset - reference,
            mult_d=blocks.mult_d,
            band_d=blocks.band_d,
        )

    # -- standard precision -------------------------------------------------

    def _log_two_cosh(self, y):
        ay = np.abs(y)
        with np.errstate(over='ignore'):
            direct = np.log(2.0 * np.cosh(y))
        guarded = ay + np.log1p(np.exp(-2.0 * ay))
        return np.where(ay > self.cosh_guard, guarded, direct)

    def _standard_weights(self, temperatures, blocks: _Blocks):
        """Normalised block weights with first and second log-weight derivatives"""
        beta = 1.0 / temperatures[:, None]
        gamma_b = blocks.gamma_b[None, :]
        Gamma_b = blocks.Gamma_b[None, :]
        gamma_d = blocks.gamma_d[None, :]

        y = beta * Gamma_b
        decay = np.exp(-2.0 * np.abs(y))
        log_b = beta * gamma_b + self._log_two_cosh(y)
        xp_b = gamma_b + Gamma_b * np.tanh(y)
        xpp_b = Gamma_b ** 2 * 4.0 * decay / (1.0 + decay) ** 2

        log_d = beta * gamma_d + np.log(blocks.mult_d)[None, :]
        xp_d = np.broadcast_to(gamma_d, log_d.shape)

        shift = np.max(np.concatenate([log_b, log_d], axis=1), axis=1, keepdims=True)
        w_b = np.exp(log_b - shift)
        w_d = np.exp(log_d - shift)
        norm = w_b.sum(axis=1, keepdims=True) + w_d.sum(axis=1, keepdims=True)
        w_b /= norm
        w_d /= norm
        return w_b, w_d, xp_b, xp_d, xpp_b

    def _band_standard(self, temperatures, blocks: _Blocks, selected) -> np.ndarray:
        """beta^4 sum_{j in selected} w_j sum_B w_B (x'_B - x'_j)^2"""
        w_b, w_d, xp_b, xp_d, _ = self._standard_weights(temperatures, blocks)
        w_sel = w_d[:, selected]
        diff = xp_b[:, :, None] - xp_d[:, None, selected]
        spread = np.einsum('tb,tbj->tj', w_b, diff ** 2)
        return (w_sel * spread).sum(axis=1) / temperatures ** 4

    def _evaluate_standard(self, temperatures, blocks: _Blocks) -> np.ndarray:
        w_b, w_d, xp_b, xp_d, xpp_b = self._standard_weights(temperatures, blocks)

        mean = (w_b * xp_b).sum(axis=1, keepdims=True) + (w_d * xp_d).sum(axis=1, keepdims=True)
        c_b = xp_b - mean
        c_d = xp_d - mean

        weight_b = w_b.sum(axis=1)
        weight_d = w_d.sum(axis=1)
        m1_b = (w_b * c_b).sum(axis=1)
        m1_d = (w_d * c_d).sum(axis=1)
        m2_b = (w_b * c_b ** 2).sum(axis=1)
        m2_d = (w_d * c_d ** 2).sum(axis=1)

        # Within-sector spreads about the sector means avoid cancellation in bb / dd
        with np.errstate(invalid='ignore', divide='ignore'):
            mean_b = np.where(weight_b > 0, m1_b / weight_b, 0.0)
            mean_d = np.where(weight_d > 0, m1_d / weight_d, 0.0)
        spread_b = (w_b * (c_b - mean_b[:, None]) ** 2).sum(axis=1)
        spread_d = (w_d * (c_d - mean_d[:, None]) ** 2).sum(axis=1)

        s1 = (w_b * xpp_b).sum(axis=1)
        variance = m2_b + m2_d
        beta4 = (1.0 / temperatures) ** 4

        out = np.empty((temperatures.size, 5))
        out[:, 0] = beta4 * (s1 + variance)
        out[:, 1] = beta4 * s1
        out[:, 2] = beta4 * weight_b * spread_b
        out[:, 3] = beta4 * (m2_b * weight_d + m2_d * weight_b - 2.0 * m1_b * m1_d)
        out[:, 4] = beta4 * weight_d * spread_d
        return out

    # -- extended precision -------------------------------------------------

    def _extended_splittings(self, decomp, model, blocks: _Blocks, ctx) -> list:
        values = []
        for k in range(1, decomp.m + 1):
            lam = float(decomp.lam[k - 1])
            n_top = int(blocks.n_b[blocks.k_b == k].max())
            overlaps = adiabatic.overlap_sequence(n_top, lam, model.omega_f, ctx=ctx)
            half_gap = (ctx.mpf(model.omega_a) + ctx.mpf(float(decomp.delta_minus[k - 1]))) / 2
            values.extend(half_gap * overlap for overlap in overlaps)
        return values

    def _extended_weights(self, temperature, blocks: _Blocks, splittings, ctx):
        beta = 1 / ctx.mpf(temperature)
        logs, xps, xpps = [], [], []
        for gamma, big_gamma in zip(blocks.gamma_b, splittings):
            gamma = ctx.mpf(float(gamma))
            y = beta * big_gamma
            ay = abs(y)
            decay = ctx.exp(-2 * ay)
            logs.append(beta * gamma + ay + ctx.log1p(decay))
            xps.append(gamma + big_gamma * ctx.tanh(y))
            xpps.append(big_gamma ** 2 * 4 * decay / (1 + decay) ** 2)
        n_bright = len(logs)
        for gamma, multiplicity in zip(blocks.gamma_d, blocks.mult_d):
            gamma = ctx.mpf(float(gamma))
            logs.append(beta * gamma + ctx.log(ctx.mpf(float(multiplicity))))
            xps.append(gamma)
            xpps.append(ctx.zero)

        shift = max(logs)
        weights = [ctx.exp(value - shift) for value in logs]
        norm = ctx.fsum(weights)
        weights = [value / norm for value in weights]
        return beta, weights, xps, xpps, n_bright

    def _band_extended_point(self, temperature, blocks: _Blocks, splittings, ctx, selected) -> float:
        beta, weights, xps, _, n_bright = self._extended_weights(temperature, blocks, splittings, ctx)
        w_b, xp_b = weights[:n_bright], xps[:n_bright]
        total = ctx.zero
        for j in np.flatnonzero(selected):
            xp_j = xps[n_bright + int(j)]
            spread = ctx.fsum(w * (xp - xp_j) ** 2 for w, xp in zip(w_b, xp_b))
            total += weights[n_bright + int(j)] * spread
        return float(beta ** 4 * total)

    def _evaluate_extended_point(self, temperature, blocks: _Blocks, splittings, ctx):
        beta, weights, xps, xpps, n_bright = self._extended_weights(temperature, blocks, splittings, ctx)
        mean = ctx.fsum(w * xp for w, xp in zip(weights, xps))
        centred = [xp - mean for xp in xps]

        w_b, w_d = weights[:n_bright], weights[n_bright:]
        c_b, c_d = centred[:n_bright], centred[n_bright:]
        weight_b, weight_d = ctx.fsum(w_b), ctx.fsum(w_d)
        m1_b = ctx.fsum(w * c for w, c in zip(w_b, c_b))
        m1_d = ctx.fsum(w * c for w, c in zip(w_d, c_d))
        m2_b = ctx.fsum(w * c ** 2 for w, c in zip(w_b, c_b))
        m2_d = ctx.fsum(w * c ** 2 for w, c in zip(w_d, c_d))
        mean_b = m1_b / weight_b if weight_b else ctx.zero
        mean_d = m1_d / weight_d if weight_d else ctx.zero
        spread_b = ctx.fsum(w * (c - mean_b) ** 2 for w, c in zip(w_b, c_b))
        spread_d = ctx.fsum(w * (c - mean_d) ** 2 for w, c in zip(w_d, c_d))
        s1 = ctx.fsum(w * xpp for w, xpp in zip(w_b, xpps[:n_bright]))

        beta4 = beta ** 4
        return (
            float(beta4 * (s1 + m2_b + m2_d)),
            float(beta4 * s1),
            float(beta4 * weight_b * spread_b),
            float(beta4 * (m2_b * weight_d + m2_d * weight_b - 2 * m1_b * m1_d)),
            float(beta4 * weight_d * spread_d),
        )

    # -- public API ---------------------------------------------------------

    def qfi_curve(self, decomp: SuperradiantDecomposition, model: ModelSpec, temperatures,
                  precision: Optional[PrecisionMode] = None, offset: float = 0.0) -> QfiCurve:
        """AA QFI and its s1 / bright-bright / bright-dark / dark-dark parts.

        ``offset`` adds a constant to every retained energy.
        """
        temperatures = _check_temperatures(temperatures)
        precision = self.precision if precision is None else PrecisionMode(precision)
        blocks = self._blocks(decomp, model)
        if blocks.gamma_b.size + blocks.gamma_d.size == 0:
            raise ConfigError("No levels retained")
        blocks = self._referenced(blocks, offset)

        if precision is PrecisionMode.EXTENDED:
            extended = np.ones(temperatures.size, dtype=bool)
        else:
            extended = temperatures < self.extended_t_threshold * model.omega_f

        out = np.full((temperatures.size, 5), np.nan)
        standard = ~extended
        if np.any(standard):
            out[standard] = self._evaluate_standard(temperatures[standard], blocks)
            overflowed = standard & ~np.all(np.isfinite(out), axis=1)
            if np.any(overflowed):
                logger.info(f"{int(overflowed.sum())} point(s) overflowed; retrying in extended precision")
                extended |= overflowed

        if np.any(extended):
            ctx = adiabatic.extended_context(self.extended_dps)
            splittings = self._extended_splittings(decomp, model, blocks, ctx)
            for index in np.flatnonzero(extended):
                out[index] = self._evaluate_extended_point(
                    temperatures[index], blocks, splittings, ctx
                )

        if not np.all(np.isfinite(out)):
            raise NumericalError("QFI evaluation produced non-finite values")

        return QfiCurve(
            temperatures=_frozen_array(temperatures),
            total=_frozen_array(out[:, 0]),
            comp_s1=_frozen_array(out[:, 1]),
            comp_bb=_frozen_array(out[:, 2]),
            comp_bd=_frozen_array(out[:, 3]),
            comp_dd=_frozen_array(out[:, 4]),
            theta=self.theta,
            precision_mode=PrecisionMode.EXTENDED if np.all(extended) else precision,
            extended_mask=_frozen_array(extended, dtype=bool),
        )

    def bright_dark_band(self, decomp: SuperradiantDecomposition, model: ModelSpec, temperatures,
                         band: Optional[int] = None,
                         precision: Optional[PrecisionMode] = None) -> np.ndarray:
        """Share of comp_bd carried by one dark ladder.

        ``band`` defaults to the unpaired ladder (sign p, dark_count states). Summing over
        all ladders of ``adiabatic.dark_bands`` gives comp_bd back.
        """
        temperatures = _check_temperatures(temperatures)
        precision = self.precision if precision is None else PrecisionMode(precision)
        band = decomp.p if band is None else int(band)
        blocks = self._blocks(decomp, model)
        selected = blocks.band_d == band
        if not np.any(selected) or blocks.gamma_b.size == 0:
            return np.zeros(temperatures.size)
        blocks = self._referenced(blocks, 0.0)

        if precision is PrecisionMode.EXTENDED:
            extended = np.ones(temperatures.size, dtype=bool)
        else:
            extended = temperatures < self.extended_t_threshold * model.omega_f

        out = np.full(temperatures.size, np.nan)
        standard = ~extended
        if np.any(standard):
            with np.errstate(over='ignore', invalid='ignore'):
                out[standard] = self._band_standard(temperatures[standard], blocks, selected)
            extended |= standard & ~np.isfinite(out)

        if np.any(extended):
            ctx = adiabatic.extended_context(self.extended_dps)
            splittings = self._extended_splittings(decomp, model, blocks, ctx)
            for index in np.flatnonzero(extended):
                out[index] = self._band_extended_point(
                    temperatures[index], blocks, splittings, ctx, selected
                )

        if not np.all(np.isfinite(out)):
            raise NumericalError("Bright-dark band evaluation produced non-finite values")
        return out


def qfi_curve(decomp, model, theta, temperatures, precision_mode=PrecisionMode.STANDARD,
              **options) -> QfiCurve:
    return QfiCalculator(theta=theta, precision=precision_mode, **options).qfi_curve(
        decomp, model, temperatures
    )


def qfi_components_consistency(curve: QfiCurve) -> ConsistencyReport:
    """Max relative deviation between total and s1 + bb + bd + dd"""
    parts = curve.comp_s1 + curve.comp_bb + curve.comp_bd + curve.comp_dd
    scale = np.maximum(np.abs(curve.total), np.finfo(float).tiny)
    deviation = np.abs(curve.total - parts) / scale
    deviation = np.where(curve.total == 0, np.abs(parts), deviation)
    return ConsistencyReport(float(deviation.max()), int(curve.total.size))


# ---------------------------------------------------------------------------
# Peaks
# ---------------------------------------------------------------------------

def locate_peaks(temperatures, values, window: int = 1) -> List[Peak]:
    """Interior maxima refined by a parabola in (log T, log F)"""
    temperatures = np.asarray(temperatures, dtype=float)
    values = np.asarray(values, dtype=float)
    window = max(1, int(window))
    peaks = []
    for i in range(window, values.size - window):
        centre = values[i]
        if not centre > 0:
            continue
        left = values[i - window:i]
        right = values[i + 1:i + 1 + window]
        if not (np.all(centre > left) and np.all(centre >= right)):
            continue
        neighbours = values[i - 1:i + 2]
        if np.any(neighbours <= 0):
            peaks.append(Peak(float(temperatures[i]), float(centre), i))
            continue
        x = np.log(temperatures[i - 1:i + 2])
        y = np.log(neighbours)
        a, b, c = np.polyfit(x - x[1], y, 2)
        if a < 0:
            shift = float(np.clip(-b / (2.0 * a), x[0] - x[1], x[2] - x[1]))
            t_star = float(np.exp(x[1] + shift))
            f_star = float(np.exp(a * shift ** 2 + b * shift + c))
        else:
            t_star, f_star = float(temperatures[i]), float(centre)
        peaks.append(Peak(t_star, f_star, i))
    return sorted(peaks, key=lambda peak: peak.t_star)


def find_peaks(curve: QfiCurve, window: int = 1, component: str = 'total') -> List[Peak]:
    return locate_peaks(curve.temperatures, curve.component(component), window)


def dominant_peak(curve: QfiCurve, component: str = 'total', window: int = 1) -> Optional[Peak]:
    peaks = find_peaks(curve, window, component)
    if not peaks:
        return None
    return max(peaks, key=lambda peak: peak.f_star)
