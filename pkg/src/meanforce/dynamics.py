"""Reduced dynamics of S coupled to E and time-dependent thermodynamic functions.

Block convention: an operator ``M`` on S+E, expressed in the eigenbasis of H_E,
is stored as ``blocks[g, b, i, k] = <i g| M |k b>`` -- an S-operator for every
pair of environment levels ``(g, b)``.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Callable, Sequence

import numpy as np

from .errors import ContractViolation, OracleDeviationError, ParameterError
from .gibbs import (
    EffectiveHamiltonian,
    beta_derivative,
    check_beta,
    default_h_beta,
    gibbs_state,
    log_partition_function,
    second_law_slack,
    total_hamiltonian,
)
from .operators import (
    TensorSpace,
    check_hermitian,
    commutator_norm,
    eigh,
    hermitize,
    log_density,
    partial_trace_env,
)

log = logging.getLogger(__name__)

DEFAULT_TOL_TRAJ = 1e-6
FIRST_LAW_TOL = 1e-12


class Commutation(str, Enum):
    GENERIC = "generic"
    ENV_COMMUTING = "env_commuting"
    SYS_COMMUTING = "sys_commuting"
    BOTH = "both"


class Eq18Mode(str, Enum):
    LITERAL = "literal"
    LOG_FORM = "log_form"


@dataclass(frozen=True)
class OpenSystem:
    """System, environment and coupling Hamiltonians on an S-major product space."""

    h_s: np.ndarray
    h_e: np.ndarray
    h_se: np.ndarray
    space: TensorSpace = field(init=False)

    def __post_init__(self):
        h_s = check_hermitian(self.h_s, "H_S")
        h_e = check_hermitian(self.h_e, "H_E")
        object.__setattr__(self, "h_s", hermitize(h_s)[0])
        object.__setattr__(self, "h_e", hermitize(h_e)[0])
        object.__setattr__(self, "space", TensorSpace(h_s.shape[0], h_e.shape[0]))
        h_se = check_hermitian(self.h_se, "H_SE")
        self.space.check(h_se, "H_SE")
        object.__setattr__(self, "h_se", hermitize(h_se)[0])

    @property
    def total(self) -> np.ndarray:
        return total_hamiltonian(self.h_s, self.h_e, self.h_se, self.space)

    def with_h_s(self, h_s) -> "OpenSystem":
        return OpenSystem(h_s, self.h_e, self.h_se)


@dataclass(frozen=True)
class JointInitialState:
    """Initial state of S+E: a product with a thermal bath, or an entangled pure state.

    Entangled amplitudes ``a[i, nu]`` refer to the computational basis of S and E.
    """

    kind: str
    rho_s0: np.ndarray | None = None
    bath_beta: float | None = None
    amplitudes: np.ndarray | None = None

    @classmethod
    def product(cls, rho_s0, bath_beta) -> "JointInitialState":
        rho = check_hermitian(rho_s0, "rho_S(0)")
        tr = np.trace(rho).real
        if abs(tr - 1) > 1e-12:
            raise ContractViolation(f"rho_S(0) has trace {tr!r}, expected 1")
        return cls("product", hermitize(rho)[0], check_beta(bath_beta))

    @classmethod
    def entangled(cls, amplitudes) -> "JointInitialState":
        a = np.asarray(amplitudes, dtype=complex)
        if a.ndim != 2:
            raise ParameterError("entanglement amplitudes must form a dim_S x dim_E table")
        norm = float(np.sum(np.abs(a) ** 2))
        if abs(norm - 1) > 1e-12:
            raise ContractViolation(f"entanglement amplitudes have squared norm {norm!r}, expected 1")
        return cls("entangled", amplitudes=a)

    @property
    def is_product(self) -> bool:
        return self.kind == "product"

    def with_bath_beta(self, beta) -> "JointInitialState":
        if not self.is_product:
            raise ParameterError("bath temperature is only defined for product initial states")
        return replace(self, bath_beta=check_beta(beta))

    def joint_density(self, system: OpenSystem) -> np.ndarray:
        space = system.space
        if self.is_product:
            if self.rho_s0.shape[0] != space.dim_s:
                raise ParameterError(f"rho_S(0) has dimension {self.rho_s0.shape[0]}, system has {space.dim_s}")
            return np.kron(self.rho_s0, gibbs_state(system.h_e, self.bath_beta).density)
        if self.amplitudes.shape != (space.dim_s, space.dim_e):
            raise ParameterError(
                f"amplitude table has shape {self.amplitudes.shape}, expected ({space.dim_s}, {space.dim_e})"
            )
        psi = self.amplitudes.reshape(-1)
        return np.outer(psi, psi.conj())


@dataclass(frozen=True)
class ReducedTrajectory:
    times: np.ndarray
    states: np.ndarray
    method: str
    oracle_deviation: float | None = None

    def __post_init__(self):
        for k, rho in enumerate(self.states):
            if not np.all(np.isfinite(rho)):
                raise ContractViolation(f"non-finite reduced state at t={self.times[k]}")

    def traces(self) -> np.ndarray:
        return np.einsum("tii->t", self.states).real

    def state_at(self, t: float) -> np.ndarray:
        return self.states[grid_index(self.times, t)]


@dataclass(frozen=True)
class DrivenHamiltonianSpec:
    """A time-dependent system Hamiltonian ``H_S(t)`` with optional analytic rate."""

    base: np.ndarray
    time_dependence: Callable[[float], np.ndarray]
    derivative: Callable[[float], np.ndarray] | None = None

    def __post_init__(self):
        base = check_hermitian(self.base, "H_S(0)")
        h0 = np.asarray(self.time_dependence(0.0), dtype=complex)
        if h0.shape != base.shape or np.max(np.abs(h0 - base)) > 1e-12:
            raise ContractViolation("H_S(t) at t=0 differs from the base Hamiltonian")

    @classmethod
    def static(cls, h_s) -> "DrivenHamiltonianSpec":
        h = np.asarray(h_s, dtype=complex)
        zero = np.zeros_like(h)
        return cls(h, lambda t: h, lambda t: zero)

    def at(self, t: float) -> np.ndarray:
        return np.asarray(self.time_dependence(t), dtype=complex)

    def rate(self, t: float, step: float) -> np.ndarray:
        if self.derivative is not None:
            return np.asarray(self.derivative(t), dtype=complex)
        return time_derivative(self.at, t, step)


@dataclass(frozen=True)
class ThermoRecord:
    t: float
    internal_energy: float
    free_energy: float
    entropy: float
    heat: float = math.nan
    work: float = math.nan
    trace: float = 1.0
    second_law_slack: float = math.nan


def time_derivative(fn: Callable[[float], np.ndarray], s: float, step: float) -> np.ndarray:
    """Central difference, or second-order forward difference where ``s - step < 0``."""
    if step <= 0:
        raise ParameterError(f"finite-difference step must be positive, got {step}")
    if s - step >= 0:
        return (np.asarray(fn(s + step)) - np.asarray(fn(s - step))) / (2 * step)
    return (-3 * np.asarray(fn(s)) + 4 * np.asarray(fn(s + step)) - np.asarray(fn(s + 2 * step))) / (2 * step)


def grid_index(times: np.ndarray, t: float) -> int:
    k = int(np.argmin(np.abs(times - t)))
    if abs(times[k] - t) > 1e-9 * max(1.0, abs(t)):
        raise ParameterError(f"time {t} is not on the trajectory grid")
    return k


def check_time_grid(times) -> np.ndarray:
    times = np.asarray(times, dtype=float)
    if times.ndim != 1 or times.size == 0:
        raise ParameterError("time grid must be a non-empty 1-d sequence")
    if times[0] != 0.0:
        raise ParameterError(f"time grid must start at 0, starts at {times[0]}")
    if np.any(np.diff(times) <= 0):
        raise ParameterError("time grid must be strictly ascending")
    return times


def uniform_grid(t_end: float, dt: float) -> np.ndarray:
    n = int(round(t_end / dt))
    if n < 0 or abs(n * dt - t_end) > 1e-9 * max(1.0, t_end):
        raise ParameterError(f"t_end={t_end} is not a multiple of dt={dt}")
    return dt * np.arange(n + 1)


# -- exact evolution ---------------------------------------------------------


def joint_trajectory_exact(h_total, rho_se0, times) -> np.ndarray:
    """``U(t) rho U(t)^dagger`` at each time from one eigendecomposition of H."""
    w, v = eigh(h_total)
    r0 = v.conj().T @ np.asarray(rho_se0, dtype=complex) @ v
    out = np.empty((len(times),) + r0.shape, dtype=complex)
    for k, t in enumerate(times):
        phase = np.exp(-1j * w * t)
        out[k] = v @ (phase[:, None] * r0 * phase.conj()[None, :]) @ v.conj().T
    return out


def evolve_joint_exact(system: OpenSystem, init: JointInitialState, times) -> ReducedTrajectory:
    times = check_time_grid(times)
    joint = joint_trajectory_exact(system.total, init.joint_density(system), times)
    states = np.array([partial_trace_env(r, system.space) for r in joint])
    return ReducedTrajectory(times, states, "exact_partial_trace")


# -- projected equation of motion -------------------------------------------


def env_eigenbasis(system: OpenSystem) -> np.ndarray:
    return eigh(system.h_e).eigenvectors


def to_env_blocks(m, space: TensorSpace, v_e: np.ndarray) -> np.ndarray:
    """Rotate E into the basis ``v_e`` and split into ``blocks[g, b] = <g|M|b>``."""
    u = np.kron(np.eye(space.dim_s), v_e)
    m = u.conj().T @ np.asarray(m, dtype=complex) @ u
    return m.reshape(space.dim_s, space.dim_e, space.dim_s, space.dim_e).transpose(1, 3, 0, 2).copy()


def from_env_blocks(blocks: np.ndarray, v_e: np.ndarray) -> np.ndarray:
    d_e, _, d_s, _ = blocks.shape
    m = blocks.transpose(2, 0, 3, 1).reshape(d_s * d_e, d_s * d_e)
    u = np.kron(np.eye(d_s), v_e)
    return u @ m @ u.conj().T


def reduced_from_blocks(blocks: np.ndarray) -> np.ndarray:
    """``rho_S = sum_g rho_Sg`` over the E-diagonal blocks."""
    return np.einsum("ggik->ik", blocks)


def projection_rhs(rho_blocks: np.ndarray, h_blocks: np.ndarray, h_se_blocks: np.ndarray) -> np.ndarray:
    """Time derivative of every block of rho_SE under H, in the H_E eigenbasis.

    The E-diagonal blocks ``rho_Sg`` use the decomposition into the commutator
    with ``H_d^g = <g|H|g>`` plus the exchange sums through the off-diagonal
    coupling blocks; the remaining blocks use the plain block commutator.
    """
    d_e = rho_blocks.shape[0]
    out = -1j * (
        np.einsum("gdij,dbjk->gbik", h_blocks, rho_blocks)
        - np.einsum("gdij,dbjk->gbik", rho_blocks, h_blocks)
    )
    diag = np.arange(d_e)
    h_d = h_blocks[diag, diag]
    r_d = rho_blocks[diag, diag]
    coupling = h_se_blocks.copy()
    coupling[diag, diag] = 0.0
    omega_in = np.einsum("gbij,bgjk->gik", coupling, rho_blocks)
    omega_out = np.einsum("gbij,bgjk->gik", rho_blocks, coupling)
    out[diag, diag] = -1j * (h_d @ r_d - r_d @ h_d) - 1j * (omega_in - omega_out)
    return out


def _step_indices(times: np.ndarray, step: float) -> np.ndarray:
    if not step > 0:
        raise ParameterError(f"integrator step must be positive, got {step}")
    ratio = times / step
    idx = np.rint(ratio).astype(int)
    if np.any(np.abs(ratio - idx) > 1e-9 * np.maximum(1.0, ratio)):
        raise ParameterError(f"integrator step {step} does not divide the output grid")
    return idx


def integrate_projection(
    system: OpenSystem,
    init: JointInitialState,
    times,
    step: float,
    drive: DrivenHamiltonianSpec | None = None,
    cross_check: bool = False,
    tol_traj: float = DEFAULT_TOL_TRAJ,
) -> ReducedTrajectory:
    """Classical RK4 on the block equations of motion.

    With ``drive`` the system Hamiltonian is ``drive.at(t)`` at every stage.
    ``cross_check`` compares against :func:`evolve_joint_exact` (static H only)
    and raises :class:`OracleDeviationError` above ``tol_traj``.
    """
    times = check_time_grid(times)
    idx = _step_indices(times, step)
    space = system.space
    v_e = env_eigenbasis(system)
    h_se_b = to_env_blocks(system.h_se, space, v_e)
    if drive is None:
        h_static = to_env_blocks(system.total, space, v_e)

        def h_at(t):
            return h_static
    else:
        rest = to_env_blocks(np.kron(np.eye(space.dim_s), system.h_e) + system.h_se, space, v_e)
        diag = np.arange(space.dim_e)

        def h_at(t):
            h = rest.copy()
            h[diag, diag] += drive.at(t)
            return h

    def rhs(t, r):
        return projection_rhs(r, h_at(t), h_se_b)

    r = to_env_blocks(init.joint_density(system), space, v_e)
    states = np.empty((len(times), space.dim_s, space.dim_s), dtype=complex)
    n_done = 0
    for k, target in enumerate(idx):
        while n_done < target:
            t = n_done * step
            k1 = rhs(t, r)
            k2 = rhs(t + step / 2, r + (step / 2) * k1)
            k3 = rhs(t + step / 2, r + (step / 2) * k2)
            k4 = rhs(t + step, r + step * k3)
            r = r + (step / 6) * (k1 + 2 * k2 + 2 * k3 + k4)
            n_done += 1
        states[k] = reduced_from_blocks(r)
    traj = ReducedTrajectory(times, states, "projected_eom")
    if cross_check:
        if drive is not None:
            raise ParameterError("exact cross-check needs a time-independent Hamiltonian")
        dev = trajectory_deviation(traj, evolve_joint_exact(system, init, times))
        traj = replace(traj, oracle_deviation=dev)
        if dev > tol_traj:
            raise OracleDeviationError(
                f"projected integration deviates from exact evolution by {dev:.3e} > {tol_traj:.1e}", dev
            )
    return traj


def trajectory_deviation(a: ReducedTrajectory, b: ReducedTrajectory) -> float:
    """Max over times of the Frobenius distance between reduced states."""
    if a.states.shape != b.states.shape or not np.allclose(a.times, b.times):
        raise ParameterError("trajectories are on different grids")
    return float(np.max(np.linalg.norm(a.states - b.states, axis=(1, 2))))


# -- commutation special cases ------------------------------------------------


def commutation_norms(system: OpenSystem) -> tuple[float, float]:
    """Frobenius norms of ``[I x H_E, H_SE]`` and ``[H_S x I, H_SE]``."""
    d_s, d_e = system.space.dim_s, system.space.dim_e
    env = np.kron(np.eye(d_s), system.h_e)
    sys_ = np.kron(system.h_s, np.eye(d_e))
    return commutator_norm(env, system.h_se), commutator_norm(sys_, system.h_se)


def classify_commutation(system: OpenSystem, tol: float = 1e-10) -> Commutation:
    d_s, d_e = system.space.dim_s, system.space.dim_e
    env_norm, sys_norm = commutation_norms(system)
    coupling = np.linalg.norm(system.h_se)
    env_scale = max(1.0, np.linalg.norm(np.kron(np.eye(d_s), system.h_e)) * coupling)
    sys_scale = max(1.0, np.linalg.norm(np.kron(system.h_s, np.eye(d_e))) * coupling)
    env_ok = env_norm <= tol * env_scale
    sys_ok = sys_norm <= tol * sys_scale
    if env_ok and sys_ok:
        return Commutation.BOTH
    if env_ok:
        return Commutation.ENV_COMMUTING
    if sys_ok:
        return Commutation.SYS_COMMUTING
    return Commutation.GENERIC


def propagate_env_commuting(
    system: OpenSystem, init: JointInitialState, times, tol: float = 1e-10
) -> ReducedTrajectory:
    """Propagate each E-diagonal block alone under ``H_d^g``.

    Exact when H_SE has no off-diagonal blocks in the H_E eigenbasis, which is
    the case ``[H_E, H_SE] = 0`` with non-degenerate H_E.
    """
    times = check_time_grid(times)
    space = system.space
    v_e = env_eigenbasis(system)
    h_b = to_env_blocks(system.total, space, v_e)
    diag = np.arange(space.dim_e)
    off = h_b.copy()
    off[diag, diag] = 0.0
    leak = float(np.max(np.abs(off))) if off.size else 0.0
    if leak > tol * max(1.0, float(np.max(np.abs(system.h_se)))):
        raise ParameterError(
            f"coupling has off-diagonal environment blocks of size {leak:.3e}; "
            "block-diagonal propagation does not apply"
        )
    r0 = to_env_blocks(init.joint_density(system), space, v_e)[diag, diag]
    spectra = [eigh(h_b[g, g]) for g in diag]
    states = np.zeros((len(times), space.dim_s, space.dim_s), dtype=complex)
    for g, (w, v) in enumerate(spectra):
        rg = v.conj().T @ r0[g] @ v
        for k, t in enumerate(times):
            phase = np.exp(-1j * w * t)
            states[k] += v @ (phase[:, None] * rg * phase.conj()[None, :]) @ v.conj().T
    return ReducedTrajectory(times, states, "simplified_diagonal")


def system_populations(traj: ReducedTrajectory, h_s) -> np.ndarray:
    """Diagonal of ``rho_S(t)`` in the eigenbasis of ``h_s``; shape ``(n_times, dim_S)``."""
    v = eigh(h_s).eigenvectors
    return np.einsum("ai,tab,bi->ti", v.conj(), traj.states, v).real


# -- effective Hamiltonians ---------------------------------------------------


def effective_from_matrix(matrix, beta, t) -> EffectiveHamiltonian:
    h, residual = hermitize(matrix)
    if residual > 1e-12:
        log.debug("hermitized effective Hamiltonian at t=%g, residual %.3e", t, residual)
    lz = log_partition_function(h, beta)
    return EffectiveHamiltonian(beta, float(t), h, None, math.exp(lz) if lz < 709.0 else math.inf, lz, residual)


def effective_hamiltonian_t(
    rho_t, rho_0, h_s, beta, mode: Eq18Mode | str = Eq18Mode.LITERAL, time: float = 0.0
) -> EffectiveHamiltonian:
    """Time-dependent effective Hamiltonian of a system with static H_S.

    ``literal`` shifts H_S by ``-(rho(t) - rho(0)) / beta``; ``log_form`` uses the
    difference of the matrix logarithms instead.
    """
    beta = check_beta(beta)
    mode = Eq18Mode(mode)
    rho_t = np.asarray(rho_t, dtype=complex)
    rho_0 = np.asarray(rho_0, dtype=complex)
    if mode is Eq18Mode.LITERAL:
        delta = rho_t - rho_0
    elif np.array_equal(rho_t, rho_0):
        delta = np.zeros_like(rho_t)
    else:
        delta = log_density(rho_t) - log_density(rho_0)
    return effective_from_matrix(np.asarray(h_s, dtype=complex) - delta / beta, beta, time)


def cumulative_trapezoid(values: np.ndarray, times: np.ndarray) -> np.ndarray:
    dt = np.diff(times).reshape((-1,) + (1,) * (values.ndim - 1))
    out = np.zeros_like(values)
    out[1:] = np.cumsum(0.5 * dt * (values[1:] + values[:-1]), axis=0)
    return out


def _grid_step(times: np.ndarray) -> float:
    return float(times[1] - times[0]) if len(times) > 1 else 1.0


def drive_rates(traj_times: np.ndarray, spec: DrivenHamiltonianSpec) -> np.ndarray:
    step = _grid_step(traj_times)
    return np.array([spec.rate(s, step) for s in traj_times])


def driven_effective_hamiltonians(
    traj: ReducedTrajectory, spec: DrivenHamiltonianSpec, beta
) -> list[EffectiveHamiltonian]:
    """Effective Hamiltonian of a driven system at every trajectory time.

    ``H(t) = H_S(0) - (rho(t) - rho(0))/beta + int_0^t (rho(s) - rho(0)) dH_S/ds ds``
    with the integral by the composite trapezoid rule on the trajectory grid.
    """
    beta = check_beta(beta)
    delta = traj.states - traj.states[0]
    integrand = delta @ drive_rates(traj.times, spec)
    integral = cumulative_trapezoid(integrand, traj.times)
    h0 = np.asarray(spec.base, dtype=complex)
    return [
        effective_from_matrix(h0 - delta[k] / beta + integral[k], beta, t) for k, t in enumerate(traj.times)
    ]


def driven_effective_hamiltonian(
    traj: ReducedTrajectory, spec: DrivenHamiltonianSpec, beta, t: float
) -> EffectiveHamiltonian:
    k = grid_index(traj.times, t)
    sub = ReducedTrajectory(traj.times[: k + 1], traj.states[: k + 1], traj.method)
    return driven_effective_hamiltonians(sub, spec, beta)[-1]


# -- thermodynamic functions --------------------------------------------------


def _energy_terms(rho_t, eff: EffectiveHamiltonian, beta):
    if eff.beta_derivative is None:
        raise ParameterError("effective Hamiltonian has no beta derivative attached")
    if not math.isclose(eff.beta, beta, rel_tol=1e-12):
        raise ParameterError(f"effective Hamiltonian built at beta={eff.beta}, requested {beta}")
    return np.asarray(rho_t, dtype=complex), eff.matrix, eff.beta_derivative


def internal_energy_driven(rho_t, eff: EffectiveHamiltonian, beta) -> float:
    rho, h, d = _energy_terms(rho_t, eff, beta)
    return float(np.trace(rho @ (h + beta * d)).real)


def thermo_t(rho_t, eff: EffectiveHamiltonian, beta) -> ThermoRecord:
    """Internal energy, free energy and entropy at one time.

    ``ln rho_eff(t) = -beta H(t) - ln Z_eff(t)`` is the logarithm of the
    effective Gibbs form built from ``eff``.
    """
    beta = check_beta(beta)
    rho, h, d = _energy_terms(rho_t, eff, beta)
    ln_eff = -beta * h - eff.log_effective_partition * np.eye(h.shape[0])
    energy = np.trace(rho @ (h + beta * d)).real
    free = np.trace(rho @ (h + ln_eff / beta)).real
    entropy = np.trace(rho @ (beta**2 * d - ln_eff)).real
    return ThermoRecord(eff.time, float(energy), float(free), float(entropy), trace=float(np.trace(rho).real))


def work_and_heat(
    traj: ReducedTrajectory, spec: DrivenHamiltonianSpec, internal_energy: Sequence[float]
) -> tuple[np.ndarray, np.ndarray]:
    """Cumulative work ``int Tr[rho dH_S/ds] ds`` and heat ``Delta E - W`` on the grid."""
    e = np.asarray(internal_energy, dtype=float)
    power = np.einsum("tij,tji->t", traj.states, drive_rates(traj.times, spec)).real
    work = cumulative_trapezoid(power, traj.times)
    heat = (e - e[0]) - work
    residual = np.abs((e - e[0]) - heat - work)
    scale = np.maximum(1.0, np.abs(e) + np.abs(work))
    if np.any(residual > FIRST_LAW_TOL * scale):
        raise ContractViolation(f"first-law bookkeeping residual {residual.max():.3e}")
    return work, heat


@dataclass
class ThermoRun:
    trajectory: ReducedTrajectory
    effective: list[EffectiveHamiltonian]
    records: list[ThermoRecord]


def thermodynamic_trajectory(
    system: OpenSystem,
    init: JointInitialState,
    times,
    beta,
    *,
    mode: Eq18Mode | str = Eq18Mode.LITERAL,
    drive: DrivenHamiltonianSpec | None = None,
    integrator: str | None = None,
    step: float | None = None,
    h_beta: float | None = None,
) -> ThermoRun:
    """Evolve a product initial state and evaluate the thermodynamic functions.

    Beta derivatives of the effective Hamiltonian are central differences over
    full re-runs of the dynamics with the bath at ``beta +- h_beta``.
    """
    beta = check_beta(beta)
    if not init.is_product:
        raise ContractViolation("thermodynamic functions require a product initial state of S and E")
    times = check_time_grid(times)
    mode = Eq18Mode(mode)
    if drive is not None:
        if np.max(np.abs(drive.base - system.h_s)) > 1e-12:
            raise ContractViolation("drive base Hamiltonian differs from H_S")
        if mode is not Eq18Mode.LITERAL:
            raise ParameterError("driven effective Hamiltonian has no log_form variant")
    integrator = integrator or ("exact" if drive is None else "rk4")
    if integrator == "exact" and drive is not None:
        raise ParameterError("exact integrator needs a time-independent Hamiltonian; use rk4")
    if integrator not in ("exact", "rk4"):
        raise ParameterError(f"unknown integrator {integrator!r}")
    if integrator == "rk4" and step is None:
        raise ParameterError("rk4 integrator needs a step")
    h = default_h_beta(beta) if h_beta is None else h_beta

    def evolve(b):
        start = init.with_bath_beta(b)
        if integrator == "exact":
            return evolve_joint_exact(system, start, times)
        return integrate_projection(system, start, times, step, drive=drive)

    def effective(traj, b):
        if drive is None:
            rho0 = traj.states[0]
            return [
                effective_hamiltonian_t(traj.states[k], rho0, system.h_s, b, mode, t)
                for k, t in enumerate(times)
            ]
        return driven_effective_hamiltonians(traj, drive, b)

    traj = evolve(beta)
    effs = effective(traj, beta)
    cache = {}

    def matrices(b):
        if b not in cache:
            cache[b] = np.array([e.matrix for e in effective(evolve(b), b)])
        return cache[b]

    effs = [e.with_beta_derivative(beta_derivative(lambda b: matrices(b)[k], beta, h)) for k, e in enumerate(effs)]
    records = [thermo_t(traj.states[k], effs[k], beta) for k in range(len(times))]

    spec = drive if drive is not None else DrivenHamiltonianSpec.static(system.h_s)
    work, heat = work_and_heat(traj, spec, [r.internal_energy for r in records])
    r0 = records[0]
    records = [
        replace(
            r,
            work=float(work[k]),
            heat=float(heat[k]),
            second_law_slack=second_law_slack(r.entropy, r0.entropy, r.internal_energy, r0.internal_energy, beta),
        )
        for k, r in enumerate(records)
    ]
    return ThermoRun(traj, effs, records)
