"""
Random coupling matrices and Monte Carlo ensemble studies.

Every random draw is keyed by a 64-bit seed derived statelessly from
(master_seed, trial), so results do not depend on worker count or scheduling.
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
import scipy.linalg

from rabitherm.exceptions import ConfigError, NumericalError
from rabitherm.models import (
    BrightProfile, CouplingProfile, EnsembleResult, EnsembleSpec, Normalization,
    QfiCurve, TrialPeak, WishartModes, _frozen_array
)
from rabitherm.services import ideal, model as model_service, thermo

logger = logging.getLogger(__name__)

MASK64 = (1 << 64) - 1
CALIBRATION_BATCH = 100
COUPLING_STREAM = 0
DETUNING_STREAM = 1
MODE_ZERO_TOL = 1e-12
# Marginal histogram peaks against joint-density modes, in bins
MODE_OFFSET_BINS = 2


def trial_seed(master_seed: int, trial: int) -> int:
    """64-bit seed hashed from (master_seed, trial) by numpy's SeedSequence"""
    state = np.random.SeedSequence([int(master_seed), int(trial)]).generate_state(1, np.uint64)
    return int(state[0])


def _rng(seed) -> np.random.Generator:
    return np.random.default_rng(seed)


def _complex_normal(rng: np.random.Generator, shape) -> np.ndarray:
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / math.sqrt(2.0)


# ---------------------------------------------------------------------------
# Sampling
# ---------------------------------------------------------------------------

def edge_estimate(m: int, n_dim: int) -> float:
    """(sqrt(m) + sqrt(n))^2, the asymptotic top eigenvalue of Z Z^dagger"""
    return (math.sqrt(m) + math.sqrt(n_dim)) ** 2


@lru_cache(maxsize=64)
def calibration_constant(d_g: int, d_e: int, draws: int = 2000) -> float:
    """Mean largest singular value of a raw d_g x d_e complex Ginibre matrix"""
    if draws < 1:
        raise ConfigError(f"Calibration needs at least one draw, got {draws}")
    rng = _rng([0xCA11B, d_g, d_e, draws])
    total = 0.0
    remaining = draws
    while remaining > 0:
        batch = min(CALIBRATION_BATCH, remaining)
        samples = _complex_normal(rng, (batch, d_g, d_e))
        total += float(np.linalg.svd(samples, compute_uv=False)[:, 0].sum())
        remaining -= batch
    constant = total / draws
    logger.debug(f"Calibration constant for {d_g}x{d_e}: {constant:.6f} "
                 f"(edge sqrt {math.sqrt(edge_estimate(min(d_g, d_e), max(d_g, d_e))):.6f})")
    return constant


def sample_ginibre(d_g: int, d_e: int, g: float,
                   normalization: Normalization = Normalization.PER_SAMPLE,
                   seed=0, calibration_draws: int = 2000) -> np.ndarray:
    """Complex normal coupling matrix with largest singular value g (exactly or on average)"""
    if d_g < 1 or d_e < 1:
        raise ConfigError(f"Coupling dimensions must be positive, got ({d_g}, {d_e})")
    raw = _complex_normal(_rng(seed), (d_g, d_e))
    if Normalization(normalization) is Normalization.PER_SAMPLE:
        scale = np.linalg.norm(raw, ord=2)
    else:
        scale = calibration_constant(d_g, d_e, calibration_draws)
    return g * raw / scale


def sample_detunings(d_g: int, d_e: int, seed=0) -> Tuple[np.ndarray, np.ndarray]:
    rng = _rng(seed)
    return rng.uniform(-1.0, 1.0, d_g), rng.uniform(-1.0, 1.0, d_e)


# ---------------------------------------------------------------------------
# Laguerre-Wishart modal spectra
# ---------------------------------------------------------------------------

def laguerre_wishart_modes(m: int, n_dim: int, beta_sym: float = 2.0) -> WishartModes:
    """Zeros of L_m^{n - m - 2/beta} via the Jacobi matrix of the Laguerre recurrence"""
    if not 1 <= m <= n_dim:
        raise ConfigError(f"Need 1 <= m <= n_dim, got m={m}, n_dim={n_dim}")
    if not beta_sym > 0:
        raise ConfigError(f"Symmetry parameter must be positive, got {beta_sym}")
    alpha = n_dim - m - 2.0 / beta_sym
    if alpha < -1.0:
        raise ConfigError(f"Laguerre parameter {alpha} < -1: zeros leave the nonnegative axis")

    index = np.arange(m, dtype=float)
    diagonal = 2.0 * index + alpha + 1.0
    if m == 1:
        modes = diagonal.copy()
    else:
        upper = index[1:]
        off_diagonal = np.sqrt(np.clip(upper * (upper + alpha), 0.0, None))
        try:
            modes = scipy.linalg.eigh_tridiagonal(diagonal, off_diagonal, eigvals_only=True)
        except (np.linalg.LinAlgError, ValueError) as e:
            raise NumericalError(f"Tridiagonal eigensolver failed for m={m}: {e}") from e

    modes = np.sort(np.clip(modes, 0.0, None))[::-1]
    # alpha = -1 has an exact zero at the origin; drop eigensolver round-off there
    modes[modes <= MODE_ZERO_TOL * modes[0]] = 0.0
    return WishartModes(m=m, n_dim=n_dim, beta_sym=float(beta_sym), alpha=float(alpha),
                        modes=_frozen_array(modes))


def stieltjes_residual(modes: WishartModes) -> float:
    """max_k |sum_{j != k} 1/(X_k - X_j) - (X_k - alpha - 1)/(2 X_k)| over nonzero modes"""
    values = np.asarray(modes.modes, dtype=float)
    if values.size == 0 or values[0] <= 0:
        return 0.0
    threshold = 1e-12 * values[0]
    residual = 0.0
    for k, x in enumerate(values):
        if x <= threshold:
            continue
        others = np.delete(values, k)
        interaction = float(np.sum(1.0 / (x - others)))
        residual = max(residual, abs(interaction - (x - modes.alpha - 1.0) / (2.0 * x)))
    return residual


def dark_saturated_couplings(d_g: int, D: int, g: float) -> CouplingProfile:
    """Bright profile from the square d_g x d_g modal spectrum plus D zero-coupled columns"""
    if d_g < 1 or D < 0:
        raise ConfigError(f"Need d_g >= 1 and D >= 0, got ({d_g}, {D})")
    profile = laguerre_wishart_modes(d_g, d_g, 2.0).singular_profile(g)
    return CouplingProfile(singular_values=profile, d_g=d_g, d_e=d_g + D)


def true_average_profile(d_g: int, d_e: int, g: float) -> CouplingProfile:
    """Modal profile of the full rectangular shape"""
    low, high = min(d_g, d_e), max(d_g, d_e)
    profile = laguerre_wishart_modes(low, high, 2.0).singular_profile(g)
    return CouplingProfile(singular_values=profile, d_g=d_g, d_e=d_e)


def profile_model(profile: CouplingProfile, omega_a: float, epsilon: float = 0.0,
                  omega_f: float = 1.0):
    """Zero-detuning model with coupling diag(profile), and its decomposition"""
    model = model_service.build_model(
        omega_f, omega_a, epsilon, np.zeros(profile.d_g), np.zeros(profile.d_e),
        model_service.padded_coupling(profile),
    )
    return model, model_service.profile_decomposition(model, profile)


@dataclass(frozen=True)
class WishartReport:
    edges: np.ndarray
    histograms: np.ndarray       # (m, bins) counts of X_k / X_1
    predicted: np.ndarray        # modal X_k / X_1
    offsets: np.ndarray          # |empirical peak bin - predicted bin|, in bins

    def passed(self, tolerance: int = MODE_OFFSET_BINS) -> bool:
        return bool(np.all(self.offsets <= tolerance))

    def frame(self) -> pd.DataFrame:
        centres = 0.5 * (self.edges[:-1] + self.edges[1:])
        rows = []
        for k, counts in enumerate(self.histograms, start=1):
            for centre, count in zip(centres, counts):
                rows.append({'k': k, 'ratio': centre, 'count': int(count),
                             'modal': float(self.predicted[k - 1])})
        return pd.DataFrame(rows, columns=['k', 'ratio', 'count', 'modal'])


def wishart_monte_carlo(m: int, n_dim: int, trials: int, seed: int = 0,
                        bin_width: float = 0.02) -> WishartReport:
    """Histograms of ordered X_k / X_1 for complex Wishart draws, against the modal ratios"""
    if trials < 1:
        raise ConfigError(f"Need at least one draw, got {trials}")
    modes = laguerre_wishart_modes(m, n_dim, 2.0)
    predicted = modes.modes / modes.modes[0]

    bins = int(round(1.0 / bin_width))
    edges = np.linspace(0.0, 1.0, bins + 1)
    histograms = np.zeros((m, bins), dtype=np.int64)
    rng = _rng([seed, m, n_dim])
    remaining = trials
    while remaining > 0:
        batch = min(1000, remaining)
        z = _complex_normal(rng, (batch, m, n_dim))
        eigenvalues = np.linalg.eigvalsh(z @ np.conj(np.swapaxes(z, 1, 2)))[:, ::-1]
        ratios = eigenvalues / eigenvalues[:, :1]
        for k in range(m):
            histograms[k] += np.histogram(np.clip(ratios[:, k], 0.0, 1.0), bins=edges)[0]
        remaining -= batch

    predicted_bins = np.minimum((predicted / bin_width).astype(int), bins - 1)
    offsets = np.abs(np.argmax(histograms, axis=1) - predicted_bins)
    offsets[0] = 0
    return WishartReport(edges=edges, histograms=histograms, predicted=predicted, offsets=offsets)


# ---------------------------------------------------------------------------
# Heatmap
# ---------------------------------------------------------------------------

def rasterize(log_t: np.ndarray, log_f: np.ndarray, t_edges: np.ndarray,
              f_edges: np.ndarray) -> np.ndarray:
    """Boolean (t_bins, f_bins) mask of the bins a polyline passes through, once per column"""
    t_bins, f_bins = t_edges.size - 1, f_edges.size - 1
    floor = f_edges[0] - 1.0
    log_f = np.where(np.isfinite(log_f), log_f, floor)

    edge_values = np.interp(t_edges, log_t, log_f)
    low = np.minimum(edge_values[:-1], edge_values[1:])
    high = np.maximum(edge_values[:-1], edge_values[1:])
    columns = np.clip(np.searchsorted(t_edges, log_t, side='right') - 1, 0, t_bins - 1)
    np.minimum.at(low, columns, log_f)
    np.maximum.at(high, columns, log_f)

    mask = np.zeros((t_bins, f_bins), dtype=bool)
    visible = (high >= f_edges[0]) & (low <= f_edges[-1])
    first = np.clip(np.searchsorted(f_edges, low, side='right') - 1, 0, f_bins - 1)
    last = np.clip(np.searchsorted(f_edges, high, side='right') - 1, 0, f_bins - 1)
    for column in np.flatnonzero(visible):
        mask[column, first[column]:last[column] + 1] = True
    return mask


def heatmap_frame(heatmap: np.ndarray) -> pd.DataFrame:
    t_bin, f_bin = np.nonzero(heatmap)
    return pd.DataFrame({'t_bin': t_bin, 'f_bin': f_bin, 'count': heatmap[t_bin, f_bin]})


def peaks_frame(peaks: Sequence[TrialPeak]) -> pd.DataFrame:
    return pd.DataFrame(
        [(p.trial, p.peak_index, p.t_star, p.f_star) for p in peaks],
        columns=['trial', 'peak_index', 'T_star', 'F_star'],
    )


@dataclass
class _TrialOutcome:
    trial: int
    curve: Optional[QfiCurve] = None
    error: Optional[str] = None


class EnsembleRunner:
    """Monte Carlo ensembles of random-coupling models"""

    def __init__(self, calculator: Optional[thermo.QfiCalculator] = None, threads: int = 1,
                 rank_tol: float = model_service.DEFAULT_RANK_TOL, calibration_draws: int = 2000,
                 t_bins: int = 300, f_bins: int = 200, f_log10_range=(-2.0, 8.0),
                 keep_curves: bool = True):
        self.calculator = calculator or thermo.QfiCalculator()
        self.threads = max(1, int(threads))
        self.rank_tol = rank_tol
        self.calibration_draws = int(calibration_draws)
        self.t_bins = int(t_bins)
        self.f_bins = int(f_bins)
        self.f_log10_range = tuple(float(x) for x in f_log10_range)
        self.keep_curves = keep_curves

    @classmethod
    def from_settings(cls, settings: dict, calculator=None, threads=None):
        return cls(
            calculator=calculator or thermo.QfiCalculator.from_settings(settings),
            threads=threads if threads is not None else settings.get('THREADS', 1),
            rank_tol=settings.get('RANK_TOL', model_service.DEFAULT_RANK_TOL),
            calibration_draws=settings.get('CALIBRATION_DRAWS', 2000),
            t_bins=settings.get('HEATMAP_T_BINS', 300),
            f_bins=settings.get('HEATMAP_F_BINS', 200),
            f_log10_range=settings.get('HEATMAP_F_LOG10_RANGE', (-2.0, 8.0)),
        )

    @staticmethod
    def validate(spec: EnsembleSpec):
        if spec.trials < 1:
            raise ConfigError(f"Ensemble needs at least one trial, got {spec.trials}")
        if not spec.g > 0:
            raise ConfigError(f"Coupling scale must be positive, got {spec.g}")
        if spec.d_g < 1 or spec.d_e < 1:
            raise ConfigError(f"Band sizes must be positive, got ({spec.d_g}, {spec.d_e})")
        if not 0 <= spec.master_seed <= MASK64:
            raise ConfigError(f"Master seed must be an unsigned 64-bit integer, got {spec.master_seed}")

    def trial_model(self, spec: EnsembleSpec, trial: int):
        seed = trial_seed(spec.master_seed, trial)
        coupling = sample_ginibre(spec.d_g, spec.d_e, spec.g, spec.normalization,
                                  [seed, COUPLING_STREAM], self.calibration_draws)
        delta_g, delta_e = sample_detunings(spec.d_g, spec.d_e, [seed, DETUNING_STREAM])
        return model_service.build_model(spec.omega_f, spec.omega_a, spec.epsilon,
                                         delta_g, delta_e, coupling)

    def run_trial(self, spec: EnsembleSpec, temperatures: np.ndarray, trial: int) -> _TrialOutcome:
        try:
            model = self.trial_model(spec, trial)
            decomp = model_service.svd_decompose(model, self.rank_tol, full_matrices=False)
            curve = self.calculator.qfi_curve(decomp, model, temperatures)
        except NumericalError as e:
            return _TrialOutcome(trial=trial, error=str(e))
        return _TrialOutcome(trial=trial, curve=curve)

    def typical_curve(self, spec: EnsembleSpec, temperatures: np.ndarray) -> QfiCurve:
        profile = true_average_profile(spec.d_g, spec.d_e, spec.g)
        model, decomp = profile_model(profile, spec.omega_a, spec.epsilon, spec.omega_f)
        return self.calculator.qfi_curve(decomp, model, temperatures)

    def run_ensemble(self, spec: EnsembleSpec) -> EnsembleResult:
        self.validate(spec)
        temperatures = thermo.temperature_grid(spec.t_min_log10, spec.t_max_log10,
                                               spec.t_points, spec.omega_f)
        t_edges = np.linspace(spec.t_min_log10, spec.t_max_log10, self.t_bins + 1)
        f_edges = np.linspace(self.f_log10_range[0], self.f_log10_range[1], self.f_bins + 1)
        log_t = np.log10(temperatures / spec.omega_f)

        calibration = None
        if spec.normalization is Normalization.ENSEMBLE_AVERAGE:
            # Filled once here so workers only read the cache
            calibration = calibration_constant(spec.d_g, spec.d_e, self.calibration_draws)

        logger.info(f"Ensemble start: {spec.trials} trials, ({spec.d_g}, {spec.d_e}), "
                    f"g={spec.g}, seed={spec.master_seed}, threads={self.threads}")

        if self.threads == 1:
            outcomes = [self.run_trial(spec, temperatures, t) for t in range(spec.trials)]
        else:
            with ThreadPoolExecutor(max_workers=self.threads) as pool:
                outcomes = list(pool.map(lambda t: self.run_trial(spec, temperatures, t),
                                         range(spec.trials)))

        heatmap = np.zeros((self.t_bins, self.f_bins), dtype=np.int64)
        curves = np.full((spec.trials, temperatures.size), np.nan)
        peaks: List[TrialPeak] = []
        marked_bins: List[int] = []
        exclusions: List[Tuple[int, str]] = []

        for outcome in outcomes:
            if outcome.curve is None:
                exclusions.append((outcome.trial, outcome.error))
                logger.info(f"Trial {outcome.trial} excluded: {outcome.error}")
                continue
            with np.errstate(divide='ignore'):
                log_f = np.log10(outcome.curve.total * spec.omega_f ** 2)
            mask = rasterize(log_t, log_f, t_edges, f_edges)
            heatmap += mask
            marked_bins.append(int(mask.sum()))
            curves[outcome.trial] = outcome.curve.total
            for index, peak in enumerate(thermo.find_peaks(outcome.curve)):
                peaks.append(TrialPeak(outcome.trial, index, peak.t_star, peak.f_star))

        logger.info(f"Ensemble finished: {len(marked_bins)} trials kept, {len(exclusions)} excluded")
        return EnsembleResult(
            heatmap=heatmap,
            t_edges=t_edges,
            f_edges=f_edges,
            typical_curve=self.typical_curve(spec, temperatures),
            peaks=peaks,
            marked_bins=marked_bins,
            exclusions=exclusions,
            calibration_constant=calibration,
            edge_estimate=edge_estimate(min(spec.d_g, spec.d_e), max(spec.d_g, spec.d_e)),
            curves=curves if self.keep_curves else None,
        )


def run_ensemble(spec: EnsembleSpec, **options) -> EnsembleResult:
    return EnsembleRunner(**options).run_ensemble(spec)


# ---------------------------------------------------------------------------
# Peak ratios and dispersion
# ---------------------------------------------------------------------------

def bright_dark_peak_ratio(d_g: int, D: int, g: float, omega_a: float,
                           calculator: thermo.QfiCalculator, temperatures,
                           bright_profile: BrightProfile = BrightProfile.FIXED) -> dict:
    if bright_profile is BrightProfile.FIXED:
        profile = dark_saturated_couplings(d_g, D, g)
    else:
        profile = true_average_profile(d_g, d_g + D, g)
    model, decomp = profile_model(profile, omega_a)
    # Only the unpaired D-fold ladder; a zero-mode partner adds a D-independent low-T bump
    band_curve = calculator.bright_dark_band(decomp, model, temperatures)
    peaks = thermo.locate_peaks(temperatures, band_curve)
    peak = max(peaks, key=lambda item: item.f_star) if peaks else None
    row = {'d_g': d_g, 'D': D, 'g': g, 'dark_count': decomp.dark_count,
           'T_star': np.nan, 'F_bd': np.nan, 'x_star': np.nan, 'E_eff': np.nan,
           'F_ideal': np.nan, 'ratio': np.nan, 'flagged': True}
    if peak is None or D < 1 or decomp.dark_count < 1:
        logger.warning(f"No bright-dark peak for d_g={d_g}, D={D}, g={g}; row flagged")
        return row
    x_star = ideal.solve_stationarity(decomp.dark_count)
    e_eff = x_star * peak.t_star
    _, f_ideal = ideal.peak_value(ideal.make_thermometer(e_eff, decomp.dark_count))
    row.update(T_star=peak.t_star, F_bd=peak.f_star, x_star=x_star, E_eff=e_eff,
               F_ideal=f_ideal, ratio=peak.f_star / f_ideal, flagged=False)
    return row


def peak_ratio_scan(d_g: int, D_values: Iterable[int], g: float, omega_a: float,
                    calculator: Optional[thermo.QfiCalculator] = None, temperatures=None,
                    bright_profile: BrightProfile = BrightProfile.FIXED) -> pd.DataFrame:
    """F*_BD / F*_ideal per dark count, ideal thermometer matched at (D, x* T*_BD)"""
    D_values = list(D_values)
    if not D_values:
        raise ConfigError("Dark count list is empty")
    if any(b < a for a, b in zip(D_values, D_values[1:])):
        raise ConfigError("Dark counts must be ascending")
    calculator = calculator or thermo.QfiCalculator()
    temperatures = thermo.temperature_grid() if temperatures is None else temperatures
    rows = [bright_dark_peak_ratio(d_g, D, g, omega_a, calculator, temperatures, bright_profile)
            for D in D_values]
    return pd.DataFrame(rows)


def peak_ratio_grid(d_g_values: Iterable[int], g_values: Iterable[float], D: int,
                    omega_a: float, calculator: Optional[thermo.QfiCalculator] = None,
                    temperatures=None) -> pd.DataFrame:
    calculator = calculator or thermo.QfiCalculator()
    temperatures = thermo.temperature_grid() if temperatures is None else temperatures
    rows = [bright_dark_peak_ratio(d_g, D, g, omega_a, calculator, temperatures)
            for d_g in d_g_values for g in g_values]
    if not rows:
        raise ConfigError("Empty peak-ratio grid")
    return pd.DataFrame(rows)


def dispersion(curves: np.ndarray, temperatures, window=(-1.5, -0.5), omega_f: float = 1.0) -> float:
    """Median over the log10 T window of the inter-quartile range of log10 F across trials"""
    curves = np.asarray(curves, dtype=float)
    log_t = np.log10(np.asarray(temperatures, dtype=float) / omega_f)
    selected = (log_t >= window[0]) & (log_t <= window[1])
    if not np.any(selected):
        raise ConfigError(f"No temperatures inside window {window}")
    with np.errstate(divide='ignore', invalid='ignore'):
        log_f = np.log10(curves[:, selected])
    log_f = np.where(np.isfinite(log_f), log_f, np.nan)
    q75, q25 = np.nanpercentile(log_f, [75, 25], axis=0)
    return float(np.nanmedian(q75 - q25))
