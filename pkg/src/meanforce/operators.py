"""Dense complex linear algebra on finite-dimensional Hilbert spaces.

Joint S-E indices are S-major throughout: ``k = i_S * dim_E + i_E``, which is
the ordering produced by :func:`numpy.kron` with the system factor first.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, NamedTuple

import numpy as np

from .errors import ContractViolation, DimensionError, DomainError

HERMITIAN_TOL = 1e-12
LOG_FLOOR = 1e-14
# eigenvalues of a "density" below -NEGATIVE_TOL are treated as genuine errors
NEGATIVE_TOL = 1e-10


@dataclass(frozen=True)
class TensorSpace:
    dim_s: int
    dim_e: int

    def __post_init__(self):
        if self.dim_s < 1 or self.dim_e < 1:
            raise DimensionError(f"dimensions must be positive, got {self.dim_s}x{self.dim_e}")

    @property
    def total_dim(self) -> int:
        return self.dim_s * self.dim_e

    def check(self, m: np.ndarray, name: str = "operator") -> None:
        if m.shape != (self.total_dim, self.total_dim):
            raise DimensionError(
                f"{name} has shape {m.shape}, expected ({self.total_dim}, {self.total_dim})"
            )


class SpectralDecomposition(NamedTuple):
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    def reconstruct(self) -> np.ndarray:
        v = self.eigenvectors
        return (v * self.eigenvalues) @ v.conj().T


def as_square(m, name: str = "matrix") -> np.ndarray:
    m = np.asarray(m, dtype=complex)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise DimensionError(f"{name} must be square, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise ContractViolation(f"{name} has non-finite entries")
    return m


def hermitian_asymmetry(m: np.ndarray) -> float:
    """Largest entrywise deviation from Hermiticity, ``max |M_ij - conj(M_ji)|``."""
    m = np.asarray(m)
    return float(np.max(np.abs(m - m.conj().T))) if m.size else 0.0


def check_hermitian(m, name: str = "operator", tol: float = HERMITIAN_TOL) -> np.ndarray:
    m = as_square(m, name)
    scale = max(1.0, float(np.max(np.abs(m))))
    asym = hermitian_asymmetry(m)
    if asym > tol * scale:
        raise ContractViolation(
            f"{name} is not Hermitian: max asymmetry {asym:.3e} exceeds {tol * scale:.3e}"
        )
    return m


def hermitize(m: np.ndarray) -> tuple[np.ndarray, float]:
    """Return ``(M + M^dagger)/2`` and the Frobenius norm of the discarded anti-Hermitian part."""
    m = np.asarray(m, dtype=complex)
    h = 0.5 * (m + m.conj().T)
    return h, float(np.linalg.norm(m - h))


def tensor_product(a, b) -> np.ndarray:
    a = as_square(a, "left factor")
    b = as_square(b, "right factor")
    return np.kron(a, b)


def partial_trace_env(rho_se, space: TensorSpace) -> np.ndarray:
    """Trace out the environment factor of an S-major joint operator."""
    rho_se = as_square(rho_se, "joint operator")
    space.check(rho_se, "joint operator")
    r = rho_se.reshape(space.dim_s, space.dim_e, space.dim_s, space.dim_e)
    return np.einsum("iaja->ij", r)


def partial_trace_sys(rho_se, space: TensorSpace) -> np.ndarray:
    rho_se = as_square(rho_se, "joint operator")
    space.check(rho_se, "joint operator")
    r = rho_se.reshape(space.dim_s, space.dim_e, space.dim_s, space.dim_e)
    return np.einsum("iaib->ab", r)


def eigh(h, tol: float = HERMITIAN_TOL) -> SpectralDecomposition:
    """Eigendecomposition of a Hermitian operator, eigenvalues ascending."""
    h = check_hermitian(h, tol=tol)
    w, v = np.linalg.eigh(0.5 * (h + h.conj().T))
    return SpectralDecomposition(w, v)


def func_of_hermitian(h, f: Callable[[np.ndarray], np.ndarray], tol: float = HERMITIAN_TOL) -> np.ndarray:
    """Apply a real scalar function to a Hermitian operator through its spectrum."""
    w, v = eigh(h, tol=tol)
    with np.errstate(all="ignore"):
        fw = np.asarray(f(w), dtype=float)
    if not np.all(np.isfinite(fw)):
        bad = w[~np.isfinite(fw)]
        raise DomainError(f"function undefined on eigenvalue(s) {bad}")
    out = (v * fw) @ v.conj().T
    return 0.5 * (out + out.conj().T)


def expm_hermitian(h, scale: complex = 1.0) -> np.ndarray:
    """``exp(scale * H)`` for Hermitian H; ``scale`` may be complex (e.g. ``-1j*t``)."""
    w, v = eigh(h)
    return (v * np.exp(scale * w)) @ v.conj().T


def floored_spectrum(rho, floor: float = LOG_FLOOR, name: str = "density") -> SpectralDecomposition:
    """Spectrum of a positive semidefinite operator with eigenvalues clamped at ``floor``.

    Eigenvalues below ``-NEGATIVE_TOL`` (relative to the largest one) are not
    round-off and raise :class:`DomainError`.
    """
    w, v = eigh(rho)
    scale = max(1.0, float(np.max(np.abs(w))))
    if w[0] < -NEGATIVE_TOL * scale:
        raise DomainError(f"{name} has negative eigenvalue {w[0]:.3e}; logarithm undefined")
    return SpectralDecomposition(np.maximum(w, floor), v)


def log_density(rho, floor: float = LOG_FLOOR) -> np.ndarray:
    w, v = floored_spectrum(rho, floor)
    out = (v * np.log(w)) @ v.conj().T
    return 0.5 * (out + out.conj().T)


def von_neumann_entropy(rho) -> float:
    """``-Tr rho ln rho`` with the 0 ln 0 = 0 convention."""
    w = np.linalg.eigvalsh(check_hermitian(rho, "density"))
    w = w[w > LOG_FLOOR]
    return float(-np.sum(w * np.log(w)))


def commutator(a, b) -> np.ndarray:
    a = as_square(a, "left operand")
    b = as_square(b, "right operand")
    if a.shape != b.shape:
        raise DimensionError(f"commutator of shapes {a.shape} and {b.shape}")
    return a @ b - b @ a


def commutator_norm(a, b) -> float:
    return float(np.linalg.norm(commutator(a, b)))


def frobenius(m) -> float:
    return float(np.linalg.norm(np.asarray(m)))


def sigma_x() -> np.ndarray:
    return np.array([[0, 1], [1, 0]], dtype=complex)


def sigma_y() -> np.ndarray:
    return np.array([[0, -1j], [1j, 0]], dtype=complex)


def sigma_z() -> np.ndarray:
    return np.array([[1, 0], [0, -1]], dtype=complex)
