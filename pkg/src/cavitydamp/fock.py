"""Truncated Fock-space linear algebra.

States are 1-D complex arrays of length ``dim`` and density matrices are
``dim x dim`` complex arrays. Nothing here mutates its inputs.
"""
from __future__ import annotations

import numpy as np
from scipy.linalg import expm

HERMITIAN_TOL = 1e-12
TRACE_TOL = 1e-12
POSITIVITY_TOL = 1e-10


def make_fock(n: int, dim: int) -> np.ndarray:
    """Return the number state ``|n>`` in a space of ``dim`` levels."""
    if dim < 1:
        raise ValueError(f"dim must be positive, got {dim}")
    if not 0 <= n < dim:
        raise ValueError(f"photon number {n} out of range for dim={dim}")
    v = np.zeros(dim, dtype=complex)
    v[n] = 1.0
    return v


def normalize(v: np.ndarray) -> np.ndarray:
    v = np.asarray(v, dtype=complex)
    norm = np.linalg.norm(v)
    if norm == 0:
        raise ValueError("cannot normalize the zero vector")
    return v / norm


def outer(v: np.ndarray) -> np.ndarray:
    """Projector ``|v><v|``; unnormalized input gives trace ``<v|v>``."""
    v = np.asarray(v, dtype=complex)
    return np.outer(v, v.conj())


def dag(x: np.ndarray) -> np.ndarray:
    return np.asarray(x).conj().T


def is_hermitian(rho: np.ndarray, tol: float = HERMITIAN_TOL) -> bool:
    rho = np.asarray(rho)
    return bool(np.max(np.abs(rho - dag(rho)), initial=0.0) <= tol)


def check_density_matrix(rho: np.ndarray, normalized: bool = True) -> None:
    """Raise ``ValueError`` unless ``rho`` is Hermitian, PSD and (optionally) unit trace."""
    rho = np.asarray(rho)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        raise ValueError(f"density matrix must be square, got shape {rho.shape}")
    if not np.all(np.isfinite(rho)):
        raise ValueError("density matrix has non-finite entries")
    if not is_hermitian(rho):
        raise ValueError("density matrix is not Hermitian")
    if normalized and abs(np.trace(rho) - 1) > TRACE_TOL:
        raise ValueError(f"density matrix trace {np.trace(rho).real!r} != 1")
    if min_eigenvalue(rho) < -POSITIVITY_TOL:
        raise ValueError("density matrix is not positive semidefinite")


def fidelity(target: np.ndarray, rho: np.ndarray) -> float:
    """Overlap ``<target|rho|target>`` of a pure target with a mixed state.

    Args:
        target: Normalized state vector.
        rho: Normalized density matrix of the same dimension.

    Returns:
        The fidelity, a real number in [0, 1].
    """
    target = np.asarray(target, dtype=complex)
    rho = np.asarray(rho, dtype=complex)
    if rho.shape != (target.size, target.size):
        raise ValueError(
            f"dimension mismatch: target has dim {target.size}, rho has shape {rho.shape}"
        )
    value = target.conj() @ rho @ target
    return float(value.real)


def min_eigenvalue(rho: np.ndarray) -> float:
    """Smallest eigenvalue of a Hermitian matrix."""
    rho = np.asarray(rho, dtype=complex)
    # tolerance scales with the entries so unnormalized inputs are accepted
    scale = max(1.0, float(np.max(np.abs(rho), initial=0.0)))
    if not is_hermitian(rho, HERMITIAN_TOL * scale):
        raise ValueError("min_eigenvalue requires a Hermitian matrix")
    return float(np.linalg.eigvalsh(rho)[0])


def annihilation(dim: int) -> np.ndarray:
    return np.diag(np.sqrt(np.arange(1, dim, dtype=float)), k=1).astype(complex)


def displacement(alpha: complex, dim: int, pad: int = 20) -> np.ndarray:
    """Displacement operator ``exp(alpha a^dag - alpha^* a)`` cropped to ``dim`` levels.

    The exponential is taken in ``dim + pad`` levels and the leading block is
    returned, which keeps truncation error away from the low-lying elements.
    """
    if dim < 1:
        raise ValueError(f"dim must be positive, got {dim}")
    return displacement_padded(alpha, dim + pad)[:dim, :dim]


def displacement_padded(alpha: complex, work_dim: int) -> np.ndarray:
    """Full ``work_dim x work_dim`` exponential of the truncated generator."""
    a = annihilation(work_dim)
    return expm(alpha * dag(a) - np.conj(alpha) * a)


def random_state(dim: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-like random normalized state (complex Gaussian amplitudes)."""
    v = rng.normal(size=dim) + 1j * rng.normal(size=dim)
    return v / np.linalg.norm(v)
