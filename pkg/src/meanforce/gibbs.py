"""Canonical states, the Hamiltonian of mean force and equilibrium thermodynamics."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Callable

import numpy as np

from .errors import ContractViolation, DomainError, ParameterError
from .operators import (
    LOG_FLOOR,
    TensorSpace,
    check_hermitian,
    eigh,
    func_of_hermitian,
    log_density,
    partial_trace_env,
    von_neumann_entropy,
)

DEFAULT_H_BETA_REL = 1e-4
SUPPORT_VIOLATION_VALUE = 1e30


def check_beta(beta) -> float:
    beta = float(beta)
    if not math.isfinite(beta) or beta <= 0:
        raise ParameterError(f"beta must be positive and finite, got {beta}")
    return beta


def default_h_beta(beta: float, h_beta_rel: float = DEFAULT_H_BETA_REL) -> float:
    return h_beta_rel * beta


@dataclass(frozen=True)
class GibbsState:
    beta: float
    hamiltonian: np.ndarray
    partition_function: float
    density: np.ndarray
    log_partition: float


@dataclass(frozen=True)
class EffectiveHamiltonian:
    """An effective system Hamiltonian at one (time, beta) point.

    ``beta_derivative`` is ``None`` until a finite-difference derivative has been
    attached (see :func:`beta_derivative`).
    """

    beta: float
    time: float
    matrix: np.ndarray
    beta_derivative: np.ndarray | None
    effective_partition: float
    log_effective_partition: float
    hermitization_residual: float = 0.0

    def with_beta_derivative(self, d: np.ndarray) -> "EffectiveHamiltonian":
        return replace(self, beta_derivative=d)


@dataclass(frozen=True)
class StationaryThermo:
    internal_energy: float
    free_energy: float
    entropy: float

    def identity_residual(self, beta: float) -> float:
        """``E - F - Sigma/beta``; zero for a consistent set of functions."""
        return self.internal_energy - self.free_energy - self.entropy / beta


def log_partition_function(h, beta) -> float:
    """``ln Tr exp(-beta H)`` evaluated with the lowest eigenvalue shifted out."""
    beta = check_beta(beta)
    w = eigh(h).eigenvalues
    shifted = -beta * (w - w[0])
    return float(-beta * w[0] + np.log(np.sum(np.exp(shifted))))


def _exp(x: float) -> float:
    # inf rather than OverflowError; the log-partition stays exact
    return math.exp(x) if x < 709.0 else math.inf


def partition_function(h, beta) -> float:
    """``Tr exp(-beta H)``; ``inf`` when out of range, see :func:`log_partition_function`."""
    return _exp(log_partition_function(h, beta))


def gibbs_state(h, beta) -> GibbsState:
    beta = check_beta(beta)
    h = check_hermitian(h, "Hamiltonian")
    w, v = eigh(h)
    weights = np.exp(-beta * (w - w[0]))
    total = weights.sum()
    rho = (v * (weights / total)) @ v.conj().T
    rho = 0.5 * (rho + rho.conj().T)
    log_z = float(-beta * w[0] + np.log(total))
    return GibbsState(beta, h, _exp(log_z), rho, log_z)


def total_hamiltonian(h_s, h_e, h_se, space: TensorSpace) -> np.ndarray:
    h_s = check_hermitian(h_s, "H_S")
    h_e = check_hermitian(h_e, "H_E")
    h_se = check_hermitian(h_se, "H_SE")
    if h_s.shape[0] != space.dim_s or h_e.shape[0] != space.dim_e:
        raise ParameterError(
            f"H_S {h_s.shape} / H_E {h_e.shape} inconsistent with space {space.dim_s}x{space.dim_e}"
        )
    space.check(h_se, "H_SE")
    return np.kron(h_s, np.eye(space.dim_e)) + np.kron(np.eye(space.dim_s), h_e) + h_se


def beta_derivative(builder: Callable[[float], np.ndarray], beta, h_beta) -> np.ndarray:
    """Central difference ``(M(beta+h) - M(beta-h)) / 2h``, Hermitian part."""
    beta = check_beta(beta)
    if not h_beta > 0:
        raise ParameterError(f"h_beta must be positive, got {h_beta}")
    if beta - h_beta <= 0:
        raise ParameterError(f"h_beta={h_beta} too large for beta={beta}")
    d = (np.asarray(builder(beta + h_beta)) - np.asarray(builder(beta - h_beta))) / (2 * h_beta)
    return 0.5 * (d + d.conj().T)


def _mean_force_matrix(h_s, h_e, h_se, space, beta):
    total = total_hamiltonian(h_s, h_e, h_se, space)
    joint = gibbs_state(total, beta)
    reduced = partial_trace_env(joint.density, space)
    log_z_eff = joint.log_partition - log_partition_function(h_e, beta)
    w, v = eigh(0.5 * (reduced + reduced.conj().T))
    if w[0] < LOG_FLOOR:
        raise DomainError(
            f"reduced Gibbs state is numerically singular: eigenvalue {w[0]:.3e} below floor {LOG_FLOOR:g}"
        )
    m = (v * (-(np.log(w) + log_z_eff) / beta)) @ v.conj().T
    return 0.5 * (m + m.conj().T), log_z_eff


def mean_force_hamiltonian(
    h_s, h_e, h_se, space: TensorSpace, beta, h_beta: float | None = None, with_derivative: bool = True
) -> EffectiveHamiltonian:
    """Hamiltonian of mean force of S in the global Gibbs state of S+E.

    The effective partition function is ``Z_SE / Z_E`` and the returned matrix
    satisfies ``exp(-beta H) / Z_eff == Tr_E rho_SE``.
    """
    beta = check_beta(beta)
    matrix, log_z_eff = _mean_force_matrix(h_s, h_e, h_se, space, beta)
    deriv = None
    if with_derivative:
        h = default_h_beta(beta) if h_beta is None else h_beta
        deriv = beta_derivative(lambda b: _mean_force_matrix(h_s, h_e, h_se, space, b)[0], beta, h)
    return EffectiveHamiltonian(beta, 0.0, matrix, deriv, _exp(log_z_eff), log_z_eff)


def effective_density(eff: EffectiveHamiltonian) -> np.ndarray:
    beta, lz = eff.beta, eff.log_effective_partition
    return func_of_hermitian(eff.matrix, lambda w: np.exp(-beta * w - lz))


def effective_log_density(eff: EffectiveHamiltonian) -> np.ndarray:
    """``ln rho_eff = -beta H_eff - ln Z_eff``, exact for the Gibbs form."""
    return -eff.beta * eff.matrix - eff.log_effective_partition * np.eye(eff.matrix.shape[0])


def _require_derivative(eff: EffectiveHamiltonian, beta: float) -> np.ndarray:
    if not math.isclose(eff.beta, beta, rel_tol=1e-12):
        raise ParameterError(f"effective Hamiltonian built at beta={eff.beta}, requested {beta}")
    if eff.beta_derivative is None:
        raise ParameterError("effective Hamiltonian has no beta derivative attached")
    return eff.beta_derivative


def stationary_thermo(eff: EffectiveHamiltonian, beta) -> StationaryThermo:
    beta = check_beta(beta)
    d = _require_derivative(eff, beta)
    rho = effective_density(eff)
    ln_rho = effective_log_density(eff)
    h = eff.matrix
    energy = np.trace(rho @ (h + beta * d)).real
    free = np.trace(rho @ (h + ln_rho / beta)).real
    entropy = np.trace(rho @ (beta**2 * d - ln_rho)).real
    return StationaryThermo(float(energy), float(free), float(entropy))


def asymptotic_thermo(h_s, beta) -> StationaryThermo:
    """Long-time thermal values built from the bare system Hamiltonian."""
    g = gibbs_state(h_s, beta)
    energy = np.trace(g.density @ g.hamiltonian).real
    return StationaryThermo(float(energy), -g.log_partition / g.beta, von_neumann_entropy(g.density))


def _check_density(rho, name, tol=1e-8):
    rho = check_hermitian(rho, name, tol=1e-10)
    tr = np.trace(rho).real
    if abs(tr - 1) > tol:
        raise ContractViolation(f"{name} has trace {tr}, expected 1")
    wmin = np.linalg.eigvalsh(rho)[0]
    if wmin < -1e-10:
        raise ContractViolation(f"{name} is not positive semidefinite (eigenvalue {wmin:.3e})")
    return rho


def relative_entropy_with_support(rho1, rho2, floor: float = LOG_FLOOR) -> tuple[float, bool]:
    """Quantum relative entropy ``Tr rho1 (ln rho1 - ln rho2)`` and a support-violation flag.

    When ``rho1`` carries weight on the (floored) kernel of ``rho2`` the true value
    is infinite; ``SUPPORT_VIOLATION_VALUE`` is returned with the flag set.
    """
    rho1 = _check_density(rho1, "rho1")
    rho2 = _check_density(rho2, "rho2")
    q, v = np.linalg.eigh(rho2)
    kernel = v[:, q <= floor]
    if kernel.shape[1]:
        leak = np.trace(kernel.conj().T @ rho1 @ kernel).real
        if leak > 1e-12:
            return SUPPORT_VIOLATION_VALUE, True
    value = np.trace(rho1 @ (log_density(rho1, floor) - log_density(rho2, floor))).real
    return float(value), False


def relative_entropy(rho1, rho2, floor: float = LOG_FLOOR) -> float:
    return relative_entropy_with_support(rho1, rho2, floor)[0]


def second_law_slack(s_t: float, s_0: float, e_t: float, e_0: float, beta) -> float:
    """``S(t) - S(0) - beta (E(t) - E(0))``; non-negative when the inequality holds."""
    return (s_t - s_0) - beta * (e_t - e_0)
