"""Two-level atom coupled to a single cavity mode through a ramped coupling.

The atom is the system, the field mode the environment. Within the rotating
wave approximation the joint Hamiltonian splits into 2x2 doublets
``{|n, up>, |n+1, down>}`` whose dressed energies, mixing angles and Gibbs
weights are available in closed form. The 2x2 system density matrix is kept
in the dressed basis ordered ``(minus, plus)``.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from .dynamics import (
    DrivenHamiltonianSpec,
    ReducedTrajectory,
    ThermoRecord,
    cumulative_trapezoid,
    effective_from_matrix,
    time_derivative,
)
from .errors import DegeneracyError, DomainError, ParameterError
from .gibbs import EffectiveHamiltonian, beta_derivative, check_beta, default_h_beta, second_law_slack

log = logging.getLogger(__name__)

MINUS, PLUS = "minus", "plus"


def _baseline_grid() -> np.ndarray:
    return 0.01 * np.arange(2001)


@dataclass(frozen=True)
class JCParams:
    """Model configuration. ``omega_a`` is a constant or a vectorised function of time."""

    omega_c: float = 1.0
    omega_a: float | Callable[[np.ndarray], np.ndarray] = 1.05
    Omega: float = 0.2
    ramp_alpha: float = 0.5
    beta: float = 1.0
    n_max: int = 60
    t_grid: np.ndarray = field(default_factory=_baseline_grid)
    quadrature_step: float = 0.005
    rwa_ratio: float = 0.2
    cutoff_ratio: float = 1e-12

    def __post_init__(self):
        check_beta(self.beta)
        for name in ("omega_c", "Omega", "ramp_alpha", "quadrature_step"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise ParameterError(f"{name} must be positive, got {value}")
        if int(self.n_max) != self.n_max or self.n_max < 1:
            raise ParameterError(f"n_max must be a positive integer, got {self.n_max}")
        grid = np.asarray(self.t_grid, dtype=float)
        if grid.ndim != 1 or grid[0] != 0 or np.any(np.diff(grid) <= 0):
            raise ParameterError("t_grid must be ascending and start at 0")
        object.__setattr__(self, "t_grid", grid)
        if np.any(self.omega_a_at(grid) <= 0):
            raise ParameterError("omega_a must stay positive on the time grid")

    def omega_a_at(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        if callable(self.omega_a):
            return np.broadcast_to(np.asarray(self.omega_a(t), dtype=float), t.shape).copy()
        return np.full(t.shape, float(self.omega_a))

    def with_beta(self, beta) -> "JCParams":
        return replace(self, beta=beta)

    def with_n_max(self, n_max: int) -> "JCParams":
        return replace(self, n_max=n_max)

    @property
    def levels(self) -> np.ndarray:
        return np.arange(self.n_max + 1)


@dataclass(frozen=True)
class JCDensity:
    t: float
    rho_mm: complex
    rho_pp: complex
    rho_mp: complex
    rho_pm: complex
    raw_trace: float
    normalized: bool

    def matrix(self) -> np.ndarray:
        return np.array([[self.rho_mm, self.rho_mp], [self.rho_pm, self.rho_pp]], dtype=complex)


@dataclass(frozen=True)
class JCTrajectory:
    times: np.ndarray
    rho_mm: np.ndarray
    rho_pp: np.ndarray
    rho_mp: np.ndarray
    raw_trace: np.ndarray
    normalized: bool

    @property
    def rho_pm(self) -> np.ndarray:
        return np.conj(self.rho_mp)

    def matrices(self) -> np.ndarray:
        out = np.empty((len(self.times), 2, 2), dtype=complex)
        out[:, 0, 0] = self.rho_mm
        out[:, 0, 1] = self.rho_mp
        out[:, 1, 0] = self.rho_pm
        out[:, 1, 1] = self.rho_pp
        return out

    def at(self, k: int) -> JCDensity:
        return JCDensity(
            float(self.times[k]),
            complex(self.rho_mm[k]),
            complex(self.rho_pp[k]),
            complex(self.rho_mp[k]),
            complex(self.rho_pm[k]),
            float(self.raw_trace[k]),
            self.normalized,
        )

    def as_reduced(self) -> ReducedTrajectory:
        return ReducedTrajectory(self.times, self.matrices(), "jc_closed_form")


# -- closed-form level structure ---------------------------------------------


def ramp(t, alpha) -> np.ndarray:
    """Switch-on profile ``1 - exp(-alpha t)``."""
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise DomainError("ramp is defined for t >= 0 only")
    return -np.expm1(-alpha * t)


def detuning(t, params: JCParams) -> np.ndarray:
    return params.omega_a_at(t) - params.omega_c


def effective_coupling(t, params: JCParams) -> np.ndarray:
    return ramp(t, params.ramp_alpha) * params.Omega


def _doublet_gap(n, t, params):
    n = np.asarray(n, dtype=float)
    delta = detuning(t, params)
    g = effective_coupling(t, params)
    return np.sqrt(delta**2 + (n + 1) * g**2)


def dressed_energies(n, t, params: JCParams) -> tuple[np.ndarray, np.ndarray]:
    """``(E_minus, E_plus)`` of doublet ``n``; broadcasts ``n`` against ``t``."""
    gap = _doublet_gap(n, t, params)
    centre = (np.asarray(n, dtype=float) + 0.5) * params.omega_c
    return centre - 0.5 * gap, centre + 0.5 * gap


def mixing_angle(n, t, params: JCParams) -> np.ndarray:
    """Instantaneous doublet mixing angle in ``[0, pi)``."""
    n_arr = np.asarray(n, dtype=float)
    y = effective_coupling(t, params) * np.sqrt(n_arr + 1)
    x = detuning(t, params) * np.ones_like(y)
    y = y * np.ones_like(x)
    bad = (x == 0) & (y == 0)
    if np.any(bad):
        where = np.argwhere(bad)[0]
        raise DegeneracyError(f"doublet mixing angle undefined (zero detuning and coupling) at index {tuple(where)}, n={n}, t={t}")
    return np.mod(np.arctan2(y, x), np.pi)


def _cumulative_quadrature(fn, times, step) -> np.ndarray:
    """Composite trapezoid ``int_0^t fn(s) ds`` on a uniform grid of spacing ``step``.

    ``fn`` maps a 1-d array of times to values with time on the last axis.
    Times falling between nodes get a final partial trapezoid.
    """
    times = np.asarray(times, dtype=float)
    t_max = float(np.max(times)) if times.size else 0.0
    n_nodes = int(math.floor(t_max / step + 1e-9)) + 1
    nodes = step * np.arange(n_nodes)
    values = fn(nodes)
    cum = np.zeros_like(values)
    cum[..., 1:] = np.cumsum(0.5 * step * (values[..., 1:] + values[..., :-1]), axis=-1)
    idx = np.minimum(np.floor(times / step + 1e-9).astype(int), n_nodes - 1)
    rem = times - nodes[idx]
    out = cum[..., idx]
    partial = rem > 1e-12 * np.maximum(1.0, times)
    if np.any(partial):
        f_t = fn(times)
        out = out + np.where(partial, 0.5 * rem * (values[..., idx] + f_t), 0.0)
    return out


def phase_integral(n, branch: str, t, params: JCParams) -> np.ndarray:
    """``int_0^t E_n(s) ds`` for one branch by the composite trapezoid rule."""
    if branch not in (MINUS, PLUS):
        raise ParameterError(f"branch must be {MINUS!r} or {PLUS!r}")
    pick = 0 if branch == MINUS else 1
    n_col = np.asarray(n, dtype=float)[..., None]
    t_arr = np.atleast_1d(np.asarray(t, dtype=float))
    out = _cumulative_quadrature(lambda s: dressed_energies(n_col, s, params)[pick], t_arr, params.quadrature_step)
    return out if np.ndim(t) else out[..., 0]


def gibbs_weights(t, params: JCParams) -> tuple[np.ndarray, np.ndarray]:
    """Branch-wise normalised Gibbs weights, shape ``(n_max + 1, len(t))``."""
    t = np.atleast_1d(np.asarray(t, dtype=float))
    e_minus, e_plus = dressed_energies(params.levels[:, None], t, params)

    def normalise(e):
        w = np.exp(-params.beta * (e - e.min(axis=0)))
        return w / w.sum(axis=0)

    return normalise(e_minus), normalise(e_plus)


def validate_params(params: JCParams) -> list[str]:
    """RWA and Fock-cutoff guards; returns (and logs) warning messages."""
    warnings = []
    t = params.t_grid
    wa = params.omega_a_at(t)
    ratio = np.abs(wa - params.omega_c) / (wa + params.omega_c)
    if np.any(ratio > params.rwa_ratio):
        warnings.append(
            f"RWA guard: |omega_c - omega_a| / (omega_c + omega_a) reaches {ratio.max():.3g} > {params.rwa_ratio}"
        )
    d_minus, d_plus = gibbs_weights(t, params)
    tail = max(float(np.max(d_minus[-1] / d_minus.max(axis=0))), float(np.max(d_plus[-1] / d_plus.max(axis=0))))
    if tail > params.cutoff_ratio:
        warnings.append(f"cutoff: weight of level n_max={params.n_max} is {tail:.3g} of the largest weight")
    for w in warnings:
        log.warning(w)
    return warnings


# -- system density -----------------------------------------------------------


def jc_density_trajectory(params: JCParams, normalize: bool = True, times=None) -> JCTrajectory:
    """Dressed-basis 2x2 density at every time of ``times`` (default ``params.t_grid``).

    Diagonal elements are half the sum of squared branch weights; coherences
    carry the accumulated phase difference of the two branches.
    """
    times = params.t_grid if times is None else np.atleast_1d(np.asarray(times, dtype=float))
    d_minus, d_plus = gibbs_weights(times, params)
    n_col = params.levels[:, None]
    # int (E_minus - E_plus) = -int gap
    gap_phase = _cumulative_quadrature(lambda s: _doublet_gap(n_col, s, params), times, params.quadrature_step)
    rho_mm = 0.5 * np.sum(d_minus**2, axis=0)
    rho_pp = 0.5 * np.sum(d_plus**2, axis=0)
    rho_mp = 0.5 * np.sum(d_minus * d_plus * np.exp(1j * gap_phase), axis=0)
    raw = rho_mm + rho_pp
    if np.any(raw < 1e-14):
        raise DegeneracyError("density has vanishing trace")
    if normalize:
        rho_mm, rho_pp, rho_mp = rho_mm / raw, rho_pp / raw, rho_mp / raw
    return JCTrajectory(times, rho_mm.astype(complex), rho_pp.astype(complex), rho_mp, raw, normalize)


def jc_density(t: float, params: JCParams, normalize: bool = True) -> JCDensity:
    return jc_density_trajectory(params, normalize, times=[t]).at(0)


def jc_trace_of_H_S_elements(s, params: JCParams) -> tuple[np.ndarray, np.ndarray]:
    """``(H^{++}(s), H^{--}(s))``: per-doublet ``+-omega_a cos(alpha_n)/2`` summed with branch weights."""
    s_arr = np.atleast_1d(np.asarray(s, dtype=float))
    d_minus, d_plus = gibbs_weights(s_arr, params)
    half_cos = 0.5 * params.omega_a_at(s_arr) * np.cos(mixing_angle(params.levels[:, None], s_arr, params))
    h_pp = np.sum(d_plus * half_cos, axis=0)
    h_mm = -np.sum(d_minus * half_cos, axis=0)
    if np.ndim(s) == 0:
        return h_pp[0], h_mm[0]
    return h_pp, h_mm


def _h_s_diag(s, params):
    h_pp, h_mm = jc_trace_of_H_S_elements(s, params)
    return h_mm, h_pp


def h_s_rates(s, params: JCParams) -> tuple[float, float]:
    """``(dH^{--}/ds, dH^{++}/ds)`` by finite differences of step ``quadrature_step``."""
    d = time_derivative(lambda x: np.array(_h_s_diag(x, params)), float(s), params.quadrature_step)
    return float(d[0]), float(d[1])


def jc_system_hamiltonian_spec(params: JCParams) -> DrivenHamiltonianSpec:
    """The 2x2 dressed-basis ``H_S(s) = diag(H^{--}(s), H^{++}(s))`` as a drive."""

    def at(s):
        h_mm, h_pp = _h_s_diag(float(s), params)
        return np.diag([h_mm, h_pp]).astype(complex)

    def rate(s):
        return np.diag(h_s_rates(s, params)).astype(complex)

    return DrivenHamiltonianSpec(at(0.0), at, rate)


def jc_effective_hamiltonians(params: JCParams, traj: JCTrajectory) -> list[EffectiveHamiltonian]:
    """Dressed-basis effective Hamiltonian at every trajectory time.

    Diagonal: ``-+omega_a(t)/2``. The ``(-,+)`` coherence pairs with the rate of
    ``H^{++}`` and the ``(+,-)`` coherence with the rate of ``H^{--}``.
    """
    beta = params.beta
    times = traj.times
    rates = np.array([h_s_rates(s, params) for s in times])
    d_mp = traj.rho_mp - traj.rho_mp[0]
    d_pm = traj.rho_pm - traj.rho_pm[0]
    h_mp = -(d_mp - beta * cumulative_trapezoid(d_mp * rates[:, 1], times)) / beta
    h_pm = -(d_pm - beta * cumulative_trapezoid(d_pm * rates[:, 0], times)) / beta
    half_wa = 0.5 * params.omega_a_at(times)
    out = []
    for k, t in enumerate(times):
        m = np.array([[-half_wa[k], h_mp[k]], [h_pm[k], half_wa[k]]], dtype=complex)
        out.append(effective_from_matrix(m, beta, t))
    return out


def jc_effective_hamiltonian(t: float, params: JCParams, traj: JCTrajectory) -> EffectiveHamiltonian:
    k = int(np.argmin(np.abs(traj.times - t)))
    if abs(traj.times[k] - t) > 1e-9 * max(1.0, abs(t)):
        raise ParameterError(f"time {t} is not on the density trajectory grid")
    sub = JCTrajectory(
        traj.times[: k + 1], traj.rho_mm[: k + 1], traj.rho_pp[: k + 1],
        traj.rho_mp[: k + 1], traj.raw_trace[: k + 1], traj.normalized,
    )
    return jc_effective_hamiltonians(params, sub)[-1]


# -- thermodynamics -----------------------------------------------------------


def _pair_trace(rho: np.ndarray, x: np.ndarray) -> float:
    """``rho^{+-} x^{-+} + rho^{-+} x^{+-} + rho^{++} x^{++} + rho^{--} x^{--}``."""
    return float((rho[1, 0] * x[0, 1] + rho[0, 1] * x[1, 0] + rho[1, 1] * x[1, 1] + rho[0, 0] * x[0, 0]).real)


def _shannon_of_spectrum(rho: np.ndarray) -> float:
    p = np.linalg.eigvalsh(0.5 * (rho + rho.conj().T))
    p = p[p > 0]
    return float(-np.sum(p * np.log(p)))


@dataclass
class JCRun:
    params: JCParams
    trajectory: JCTrajectory
    effective: list[EffectiveHamiltonian]
    records: list[ThermoRecord]
    first_law_residual: np.ndarray
    warnings: list[str]


def jc_thermo(params: JCParams, normalize: bool = True, h_beta: float | None = None) -> JCRun:
    """Full thermodynamic record of the model on ``params.t_grid``.

    Beta derivatives difference the effective Hamiltonian over complete
    re-evaluations at ``beta +- h_beta``.
    """
    warnings = validate_params(params)
    beta = params.beta
    h = default_h_beta(beta) if h_beta is None else h_beta
    traj = jc_density_trajectory(params, normalize)
    effs = jc_effective_hamiltonians(params, traj)
    cache = {}

    def matrices(b):
        if b not in cache:
            p = params.with_beta(b)
            cache[b] = np.array([e.matrix for e in jc_effective_hamiltonians(p, jc_density_trajectory(p, normalize))])
        return cache[b]

    effs = [e.with_beta_derivative(beta_derivative(lambda b: matrices(b)[k], beta, h)) for k, e in enumerate(effs)]

    rho = traj.matrices()
    times = traj.times
    rates = np.array([h_s_rates(s, params) for s in times])
    power = (traj.rho_pp * rates[:, 1] + traj.rho_mm * rates[:, 0]).real
    work = cumulative_trapezoid(power, times)
    half_wa0 = 0.5 * float(params.omega_a_at(0.0))

    energies, entropies, frees = [], [], []
    for k, eff in enumerate(effs):
        x, d = eff.matrix, eff.beta_derivative
        shannon = _shannon_of_spectrum(rho[k])
        energies.append(_pair_trace(rho[k], x + beta * d))
        entropies.append(shannon + beta**2 * _pair_trace(rho[k], d))
        frees.append(_pair_trace(rho[k], x) - shannon / beta)
    energies = np.array(energies)
    heat = energies + half_wa0 - work
    residual = heat - (energies - energies[0] - work)
    records = [
        ThermoRecord(
            float(t),
            float(energies[k]),
            float(frees[k]),
            float(entropies[k]),
            heat=float(heat[k]),
            work=float(work[k]),
            trace=float(np.trace(rho[k]).real),
            second_law_slack=second_law_slack(entropies[k], entropies[0], energies[k], energies[0], beta),
        )
        for k, t in enumerate(times)
    ]
    return JCRun(params, traj, effs, records, residual, warnings)
