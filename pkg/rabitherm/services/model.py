"""
Model parameters and the superradiant (SVD) basis of the coupling matrix
"""

import logging
from typing import Optional, Sequence, Tuple

import numpy as np

from rabitherm.exceptions import ConfigError, NumericalError
from rabitherm.forms import ModelForm, load_document
from rabitherm.models import (
    CouplingProfile, ModelSpec, SuperradiantDecomposition, _frozen_array
)

logger = logging.getLogger(__name__)

DEFAULT_RANK_TOL = 1e-12


def build_model(omega_f, omega_a, epsilon, delta_g, delta_e, coupling) -> ModelSpec:
    """Validate raw parameters and return an immutable ModelSpec"""
    try:
        omega_f = float(omega_f)
        omega_a = float(omega_a)
        epsilon = float(epsilon)
        delta_g = np.asarray(delta_g, dtype=float).reshape(-1)
        delta_e = np.asarray(delta_e, dtype=float).reshape(-1)
        coupling = np.atleast_2d(np.asarray(coupling, dtype=complex))
    except (TypeError, ValueError) as e:
        raise ConfigError(f"Non-numeric model parameter: {e}") from e

    if not omega_f > 0:
        raise ConfigError(f"omega_f must be positive, got {omega_f}")
    if omega_a < 0:
        raise ConfigError(f"omega_a must be nonnegative, got {omega_a}")
    if epsilon < 0:
        raise ConfigError(f"epsilon must be nonnegative, got {epsilon}")
    if delta_g.size < 1 or delta_e.size < 1:
        raise ConfigError("Both bands need at least one level")

    for name, values in (('delta_g', delta_g), ('delta_e', delta_e)):
        if not np.all(np.isfinite(values)) or np.any(np.abs(values) > 1.0):
            raise ConfigError(f"detuning out of range in {name}: values must lie in [-1, 1]")

    if coupling.ndim != 2 or coupling.shape != (delta_g.size, delta_e.size):
        raise ConfigError(
            f"shape mismatch: coupling is {coupling.shape}, "
            f"detunings imply ({delta_g.size}, {delta_e.size})"
        )
    if not np.all(np.isfinite(coupling)):
        raise ConfigError("Coupling matrix contains non-finite entries")

    return ModelSpec(
        omega_f=omega_f,
        omega_a=omega_a,
        epsilon=epsilon,
        delta_g=_frozen_array(delta_g),
        delta_e=_frozen_array(delta_e),
        coupling=_frozen_array(coupling, dtype=complex),
    )


def load_model(path) -> ModelSpec:
    """Read a JSON model document; complex couplings are [re, im] pairs"""
    data = ModelForm(load_document(path)).cleaned_data
    return build_model(**data)


def with_coupling(model: ModelSpec, coupling) -> ModelSpec:
    return build_model(model.omega_f, model.omega_a, model.epsilon,
                       model.delta_g, model.delta_e, coupling)


def rescale_coupling(model: ModelSpec, g: float) -> ModelSpec:
    """Rescale the coupling so that its largest singular value equals g"""
    if g < 0:
        raise ConfigError(f"Coupling scale must be nonnegative, got {g}")
    sigma_max = np.linalg.norm(model.coupling, ord=2)
    if g == 0 or sigma_max == 0:
        return with_coupling(model, np.zeros_like(model.coupling))
    return with_coupling(model, model.coupling * (g / sigma_max))


def _band_sign(d_g: int, d_e: int) -> int:
    # Square bands: dark sums only run over rank-deficient channels, p = +1 by convention
    return -1 if d_g > d_e else 1


def svd_decompose(model: ModelSpec, rank_tol: float = DEFAULT_RANK_TOL,
                  full_matrices: bool = True) -> SuperradiantDecomposition:
    """Singular value decomposition into bright doublets and dark states"""
    if not 0 < rank_tol < 1:
        raise ConfigError(f"rank_tol must lie in (0, 1), got {rank_tol}")

    try:
        u, sigma, vh = np.linalg.svd(model.coupling, full_matrices=full_matrices)
    except np.linalg.LinAlgError as e:
        raise NumericalError(f"SVD failed: {e}") from e

    v = vh.conj().T
    if sigma.size == 0 or sigma[0] == 0:
        m = 0
    else:
        m = int(np.count_nonzero(sigma > rank_tol * sigma[0]))

    reclassified = int(np.count_nonzero(sigma[m:] > 0))
    if reclassified:
        logger.warning(f"{reclassified} nonzero coupling channel(s) below rank threshold treated as dark")

    return _assemble(model, u, v, sigma, m)


def profile_decomposition(model: ModelSpec, profile: CouplingProfile,
                          rank_tol: float = DEFAULT_RANK_TOL) -> SuperradiantDecomposition:
    """Decomposition for a model whose coupling is diag(profile) padded with zeros.

    The superradiant basis is the bare atomic basis, so no factorization is needed;
    this keeps very large dark bands cheap.
    """
    sigma = np.sort(np.asarray(profile.singular_values, dtype=float))[::-1]
    k = min(model.d_g, model.d_e)
    if sigma.size != k:
        raise ConfigError(f"Profile has {sigma.size} values, expected {k}")
    if sigma[0] == 0:
        m = 0
    else:
        m = int(np.count_nonzero(sigma > rank_tol * sigma[0]))
    u = np.eye(model.d_g, k, dtype=complex)
    v = np.eye(model.d_e, k, dtype=complex)
    return _assemble(model, u, v, sigma, m)


def padded_coupling(profile: CouplingProfile) -> np.ndarray:
    coupling = np.zeros((profile.d_g, profile.d_e), dtype=complex)
    k = min(profile.d_g, profile.d_e)
    coupling[np.arange(k), np.arange(k)] = np.asarray(profile.singular_values)[:k]
    return coupling


def _assemble(model, u, v, sigma, m) -> SuperradiantDecomposition:
    d_g, d_e = model.d_g, model.d_e
    lam = sigma[:m]
    delta_e_avg, delta_g_avg, delta_plus, delta_minus = _weighted_detunings(model, u, v, m)
    return SuperradiantDecomposition(
        u=_frozen_array(u, dtype=complex),
        v=_frozen_array(v, dtype=complex),
        singular_values=_frozen_array(sigma),
        lam=_frozen_array(lam),
        m=m,
        n=max(d_g, d_e),
        d_g=d_g,
        d_e=d_e,
        p=_band_sign(d_g, d_e),
        delta_e_avg=_frozen_array(delta_e_avg),
        delta_g_avg=_frozen_array(delta_g_avg),
        delta_plus=_frozen_array(delta_plus),
        delta_minus=_frozen_array(delta_minus),
    )


def _weighted_detunings(model, u, v, m):
    weights_e = np.abs(v[:, :m]) ** 2
    weights_g = np.abs(u[:, :m]) ** 2
    delta_e_avg = model.epsilon * (model.delta_e @ weights_e)
    delta_g_avg = model.epsilon * (model.delta_g @ weights_g)
    return delta_e_avg, delta_g_avg, delta_e_avg + delta_g_avg, delta_e_avg - delta_g_avg


def averaged_detunings(decomp: SuperradiantDecomposition, model: ModelSpec
                       ) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """SVD-averaged detunings (Delta^e, Delta^g, Delta^+, Delta^-) of the bright doublets"""
    return _weighted_detunings(model, decomp.u, decomp.v, decomp.m)


def gauge_transform(decomp: SuperradiantDecomposition, k: int, phase: float
                    ) -> SuperradiantDecomposition:
    """Multiply column k (0-based) of U and V by the same phase factor"""
    factor = np.exp(1j * phase)
    u = np.array(decomp.u)
    v = np.array(decomp.v)
    u[:, k] *= factor
    v[:, k] *= factor
    return SuperradiantDecomposition(
        u=_frozen_array(u, dtype=complex),
        v=_frozen_array(v, dtype=complex),
        singular_values=decomp.singular_values,
        lam=decomp.lam,
        m=decomp.m,
        n=decomp.n,
        d_g=decomp.d_g,
        d_e=decomp.d_e,
        p=decomp.p,
        delta_e_avg=decomp.delta_e_avg,
        delta_g_avg=decomp.delta_g_avg,
        delta_plus=decomp.delta_plus,
        delta_minus=decomp.delta_minus,
    )


def reconstruct(decomp: SuperradiantDecomposition) -> np.ndarray:
    k = decomp.singular_values.size
    return (decomp.u[:, :k] * decomp.singular_values) @ decomp.v[:, :k].conj().T


def reconstruction_error(decomp: SuperradiantDecomposition, model: ModelSpec) -> float:
    norm = np.linalg.norm(model.coupling)
    if norm == 0:
        return 0.0
    return float(np.linalg.norm(model.coupling - reconstruct(decomp)) / norm)


def free_model(omega_a: float, epsilon: float = 0.0, d_g: int = 1, d_e: int = 1,
               omega_f: float = 1.0, coupling: Optional[Sequence] = None) -> ModelSpec:
    """Equally spaced detunings in [-1, 1] and an optional coupling matrix"""
    delta_g = np.linspace(-1.0, 1.0, d_g) if d_g > 1 else np.zeros(1)
    delta_e = np.linspace(-1.0, 1.0, d_e) if d_e > 1 else np.zeros(1)
    if coupling is None:
        coupling = np.zeros((d_g, d_e), dtype=complex)
    return build_model(omega_f, omega_a, epsilon, delta_g, delta_e, coupling)
