"""
Domain value types for rabitherm.

All energies and temperatures are in the same units as omega_f (k_B = 1);
quantum Fisher information values are in 1/energy^2.
"""

from dataclasses import dataclass, field
from enum import Enum
from typing import List, Optional, Tuple

import numpy as np


def _frozen_array(values, dtype=float):
    array = np.array(values, dtype=dtype, copy=True)
    array.setflags(write=False)
    return array


class PrecisionMode(Enum):
    STANDARD = "standard"
    EXTENDED = "extended"


class LevelKind(Enum):
    BRIGHT_PLUS = "bright-plus"
    BRIGHT_MINUS = "bright-minus"
    DARK = "dark"


class Normalization(Enum):
    PER_SAMPLE = "per-sample"
    ENSEMBLE_AVERAGE = "ensemble-average"


class BrightProfile(Enum):
    # Bright couplings of the dark-saturated construction
    FIXED = "fixed"
    TRUE_AVERAGE = "true-average"


@dataclass(frozen=True)
class ModelSpec:
    omega_f: float
    omega_a: float
    epsilon: float
    delta_g: np.ndarray
    delta_e: np.ndarray
    coupling: np.ndarray

    @property
    def d_g(self) -> int:
        return int(self.delta_g.shape[0])

    @property
    def d_e(self) -> int:
        return int(self.delta_e.shape[0])

    def to_document(self) -> dict:
        return {
            'omega_f': self.omega_f,
            'omega_a': self.omega_a,
            'epsilon': self.epsilon,
            'delta_g': [float(x) for x in self.delta_g],
            'delta_e': [float(x) for x in self.delta_e],
            'coupling': [[[float(z.real), float(z.imag)] for z in row] for row in self.coupling],
        }


@dataclass(frozen=True)
class SuperradiantDecomposition:
    """Coupling matrix in the superradiant basis.

    ``u`` and ``v`` hold the left/right singular vectors column-wise. When the
    decomposition was computed in economy form only the first min(D_g, D_e)
    columns of ``v`` (or ``u``) are kept.
    """
    u: np.ndarray
    v: np.ndarray
    singular_values: np.ndarray   # all min(D_g, D_e) values, nonincreasing
    lam: np.ndarray               # bright part, length M
    m: int
    n: int
    d_g: int
    d_e: int
    p: int
    delta_e_avg: np.ndarray
    delta_g_avg: np.ndarray
    delta_plus: np.ndarray
    delta_minus: np.ndarray

    @property
    def dark_count(self) -> int:
        return self.n - self.m

    @property
    def paired_dark_count(self) -> int:
        # Rank-deficient channels: the partner state in the other band is dark too
        return min(self.d_g, self.d_e) - self.m


@dataclass(frozen=True)
class AaLevel:
    kind: LevelKind
    k: int
    n: int
    energy: float
    multiplicity: int


@dataclass(frozen=True)
class AdiabaticSpectrum:
    levels: Tuple[AaLevel, ...]
    theta: int
    model: ModelSpec

    @property
    def total_multiplicity(self) -> int:
        return sum(level.multiplicity for level in self.levels)


@dataclass(frozen=True)
class TruncatedHamiltonian:
    matrix: np.ndarray
    n_max: int
    atomic_levels: int

    @property
    def dimension(self) -> int:
        return self.atomic_levels * (self.n_max + 1)

    def hermiticity_error(self) -> float:
        norm = np.linalg.norm(self.matrix)
        if norm == 0:
            return 0.0
        return float(np.linalg.norm(self.matrix - self.matrix.conj().T) / norm)


@dataclass(frozen=True)
class QfiCurve:
    temperatures: np.ndarray
    total: np.ndarray
    comp_s1: Optional[np.ndarray]
    comp_bb: Optional[np.ndarray]
    comp_bd: Optional[np.ndarray]
    comp_dd: Optional[np.ndarray]
    theta: Optional[int]
    precision_mode: PrecisionMode
    extended_mask: Optional[np.ndarray] = None

    def component(self, name: str) -> np.ndarray:
        values = getattr(self, name if name == 'total' else f'comp_{name}')
        if values is None:
            raise KeyError(f"Curve has no '{name}' component")
        return values


@dataclass(frozen=True)
class Peak:
    t_star: float
    f_star: float
    index: int


@dataclass(frozen=True)
class IdealThermometer:
    E: float
    D: int


@dataclass(frozen=True)
class WishartModes:
    m: int
    n_dim: int
    beta_sym: float
    alpha: float
    modes: np.ndarray   # decreasing

    def singular_profile(self, g: float) -> np.ndarray:
        """lambda_k = g * sqrt(X_k / X_1); a lone zero mode maps to [g]."""
        if self.modes[0] <= 0.0:
            return _frozen_array([g] + [0.0] * (self.m - 1))
        return _frozen_array(g * np.sqrt(np.clip(self.modes, 0.0, None) / self.modes[0]))


@dataclass(frozen=True)
class CouplingProfile:
    singular_values: np.ndarray
    d_g: int
    d_e: int


@dataclass
class EnsembleSpec:
    d_g: int
    d_e: int
    g: float
    omega_a: float
    epsilon: float
    normalization: Normalization = Normalization.ENSEMBLE_AVERAGE
    trials: int = 200
    master_seed: int = 0
    t_min_log10: float = -3.0
    t_max_log10: float = 0.5
    t_points: int = 400
    theta: int = 5
    omega_f: float = 1.0

    @property
    def dark_count(self) -> int:
        return abs(self.d_e - self.d_g)

    def to_document(self) -> dict:
        return {
            'd_g': self.d_g,
            'd_e': self.d_e,
            'g': self.g,
            'omega_a': self.omega_a,
            'epsilon': self.epsilon,
            'normalization': self.normalization.value,
            'trials': self.trials,
            'master_seed': self.master_seed,
            't_min_log10': self.t_min_log10,
            't_max_log10': self.t_max_log10,
            't_points': self.t_points,
            'theta': self.theta,
            'omega_f': self.omega_f,
        }


@dataclass(frozen=True)
class TrialPeak:
    trial: int
    peak_index: int
    t_star: float
    f_star: float


@dataclass
class EnsembleResult:
    heatmap: np.ndarray
    t_edges: np.ndarray
    f_edges: np.ndarray
    typical_curve: QfiCurve
    peaks: List[TrialPeak] = field(default_factory=list)
    marked_bins: List[int] = field(default_factory=list)
    exclusions: List[Tuple[int, str]] = field(default_factory=list)
    calibration_constant: Optional[float] = None
    edge_estimate: Optional[float] = None
    curves: Optional[np.ndarray] = None

    @property
    def completed_trials(self) -> int:
        return len(self.marked_bins)
