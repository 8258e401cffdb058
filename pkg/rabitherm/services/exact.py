"""
Brute-force oracle: the full model Hamiltonian in a Fock-truncated product basis.

Basis index = atomic * (n_max + 1) + n with atomic order g_1..g_Dg, e_1..e_De.
"""

import logging
import math
from typing import Optional, Sequence

import numpy as np
import pandas as pd
import scipy.linalg
from numpy.linalg import LinAlgError

from rabitherm.exceptions import ConfigError, ConvergenceError, NumericalError
from rabitherm.models import ModelSpec, PrecisionMode, QfiCurve, TruncatedHamiltonian, _frozen_array
from rabitherm.services import adiabatic, model as model_service, thermo

logger = logging.getLogger(__name__)

CUTOFF_CHECK_QUANTA = 10


def atomic_energies(model: ModelSpec) -> np.ndarray:
    ground = model.epsilon * model.delta_g
    excited = model.omega_a + model.epsilon * model.delta_e
    return np.concatenate([ground, excited])


def build_hamiltonian(model: ModelSpec, n_max: int) -> TruncatedHamiltonian:
    if n_max < 1:
        raise ConfigError(f"Fock cutoff must be at least 1, got {n_max}")

    d_g, d_e = model.d_g, model.d_e
    atomic = d_g + d_e
    fock = np.arange(n_max + 1, dtype=float)
    quadrature = np.diag(np.sqrt(fock[1:]), 1)
    quadrature = quadrature + quadrature.T

    transition = np.zeros((atomic, atomic), dtype=complex)
    transition[:d_g, d_g:] = model.coupling
    transition[d_g:, :d_g] = model.coupling.conj().T

    matrix = (
        np.kron(np.eye(atomic), model.omega_f * np.diag(fock))
        + np.kron(np.diag(atomic_energies(model)), np.eye(n_max + 1))
        + np.kron(transition, quadrature)
    ).astype(complex)
    return TruncatedHamiltonian(matrix=matrix, n_max=n_max, atomic_levels=atomic)


class ExactOracle:
    """Dense diagonalization with automatic Fock cutoff selection"""

    def __init__(self, n_max_floor: int = 25, n_max_step: int = 5,
                 n_max_ceiling: int = 400, n_max_tol: float = 1e-8):
        if n_max_step < 1 or n_max_floor < 1:
            raise ConfigError("Fock cutoff floor and step must be positive")
        self.n_max_floor = int(n_max_floor)
        self.n_max_step = int(n_max_step)
        self.n_max_ceiling = int(n_max_ceiling)
        self.n_max_tol = float(n_max_tol)

    @classmethod
    def from_settings(cls, settings: dict):
        return cls(
            n_max_floor=settings.get('NMAX_FLOOR', 25),
            n_max_step=settings.get('NMAX_STEP', 5),
            n_max_ceiling=settings.get('NMAX_CEILING', 400),
            n_max_tol=settings.get('NMAX_TOL', 1e-8),
        )

    def _eigenvalues(self, hamiltonian: TruncatedHamiltonian, lowest: Optional[int] = None):
        subset = None if lowest is None else [0, min(lowest, hamiltonian.dimension) - 1]
        try:
            return scipy.linalg.eigvalsh(hamiltonian.matrix, subset_by_index=subset)
        except (LinAlgError, ValueError) as e:
            raise NumericalError(f"Eigensolver failed at dimension {hamiltonian.dimension}: {e}") from e

    def ground_energy(self, model: ModelSpec, n_max: int) -> float:
        return float(self._eigenvalues(build_hamiltonian(model, n_max), lowest=1)[0])

    def initial_n_max(self, model: ModelSpec) -> int:
        sigma_max = np.linalg.norm(model.coupling, ord=2) / model.omega_f
        return max(self.n_max_floor, int(math.ceil(4.0 * sigma_max ** 2 + 10.0)))

    def auto_n_max(self, model: ModelSpec) -> int:
        """Smallest cutoff on the growth ladder whose ground energy is stable to n_max_tol"""
        n_max = self.initial_n_max(model)
        current = self.ground_energy(model, n_max)
        while True:
            if n_max + self.n_max_step > self.n_max_ceiling:
                raise ConvergenceError(
                    f"Ground energy not converged below Fock cutoff {self.n_max_ceiling}"
                )
            following = self.ground_energy(model, n_max + self.n_max_step)
            change = abs(following - current)
            if change <= self.n_max_tol * model.omega_f:
                logger.debug(f"Fock cutoff {n_max} accepted (|dE0| = {change:.3e})")
                return n_max
            logger.info(f"Growing Fock cutoff {n_max} -> {n_max + self.n_max_step} (|dE0| = {change:.3e})")
            n_max += self.n_max_step
            current = following

    def cutoff_change(self, model: ModelSpec, n_max: int) -> float:
        """|E0(n_max + CUTOFF_CHECK_QUANTA) - E0(n_max)| in units of omega_f"""
        following = self.ground_energy(model, n_max + CUTOFF_CHECK_QUANTA)
        return abs(following - self.ground_energy(model, n_max)) / model.omega_f

    def check_n_max(self, model: ModelSpec, n_max: int) -> bool:
        change = self.cutoff_change(model, n_max)
        if change > self.n_max_tol:
            logger.warning(f"Fock cutoff {n_max} not converged: |dE0| = {change:.3e} "
                           f"with {CUTOFF_CHECK_QUANTA} more quanta")
            return False
        return True

    def exact_spectrum(self, model: ModelSpec, n_max: Optional[int] = None,
                       verify_cutoff: bool = True) -> np.ndarray:
        """Full truncated spectrum; a caller-chosen cutoff is checked unless verify_cutoff is off"""
        if n_max is None:
            n_max = self.auto_n_max(model)
        elif verify_cutoff:
            self.check_n_max(model, n_max)
        hamiltonian = build_hamiltonian(model, n_max)
        return np.sort(self._eigenvalues(hamiltonian))

    def exact_qfi(self, model: ModelSpec, temperatures, n_max: Optional[int] = None,
                  verify_cutoff: bool = True) -> QfiCurve:
        """Gibbs-variance QFI of the truncated spectrum; no components"""
        energies = self.exact_spectrum(model, n_max, verify_cutoff)
        temperatures = np.atleast_1d(np.asarray(temperatures, dtype=float))
        total = thermo.gibbs_variance_qfi(energies, None, temperatures)
        return QfiCurve(
            temperatures=_frozen_array(temperatures),
            total=_frozen_array(total),
            comp_s1=None,
            comp_bb=None,
            comp_bd=None,
            comp_dd=None,
            theta=None,
            precision_mode=PrecisionMode.STANDARD,
        )

    def aa_deviation(self, model: ModelSpec, g_values: Sequence[float], theta: int = 5,
                     levels: int = 12, n_max: Optional[int] = None,
                     rank_tol: float = model_service.DEFAULT_RANK_TOL) -> np.ndarray:
        """max |E_AA - E_exact| over the lowest ``levels`` levels, per coupling scale"""
        deviations = []
        for g in g_values:
            scaled = model_service.rescale_coupling(model, g)
            decomp = model_service.svd_decompose(scaled, rank_tol)
            approximate = adiabatic.expanded_energies(adiabatic.aa_spectrum(decomp, scaled, theta))
            if approximate.size < levels:
                raise ConfigError(f"Only {approximate.size} AA levels retained, {levels} requested")
            exact = self.exact_spectrum(scaled, n_max)[:levels]
            deviations.append(float(np.max(np.abs(approximate[:levels] - exact))))
            logger.debug(f"g={g}: max AA deviation {deviations[-1]:.3e}")
        return np.array(deviations)


def exact_spectrum(model: ModelSpec, n_max: int) -> np.ndarray:
    return ExactOracle().exact_spectrum(model, n_max)


def exact_qfi(model: ModelSpec, n_max: int, temperatures) -> QfiCurve:
    return ExactOracle().exact_qfi(model, temperatures, n_max)


def spectrum_frame(energies, omega_f: float = 1.0) -> pd.DataFrame:
    energies = np.asarray(energies, dtype=float)
    return pd.DataFrame({'index': np.arange(energies.size), 'energy': energies / omega_f})
