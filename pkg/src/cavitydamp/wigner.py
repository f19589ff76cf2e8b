"""Wigner functions and density-matrix element tables.

``W(alpha) = (2/pi) Tr[D(alpha)^dag rho D(alpha) P]`` with ``P`` the photon
number parity, normalized so that the integral over ``d^2 alpha = dq dp`` is
``Tr rho``. Displacements are built in a padded Fock space whose size grows
with ``|alpha|`` and only the rows touching ``rho`` are kept.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .fock import annihilation

IMAG_DISCARD_TOL = 1e-9
IMAG_ERROR_TOL = 1e-6
BASE_PAD = 20


class WignerTruncationError(ArithmeticError):
    pass


def working_dim(dim: int, alpha_max: float) -> int:
    """Padded size ``dim + 20 + |alpha|^2 + 8|alpha|`` (rounded up).

    Twenty extra levels suffice near the origin; far out the displaced states
    reach photon numbers around ``|alpha|^2`` with a spread of a few ``|alpha|``.
    """
    r = abs(alpha_max)
    return dim + BASE_PAD + int(math.ceil(r * r + 8 * r))


@lru_cache(maxsize=16)
def _generator_eig(work_dim: int) -> tuple[np.ndarray, np.ndarray]:
    a = annihilation(work_dim)
    # a^dag - a is anti-Hermitian; diagonalize i (a^dag - a)
    lam, vec = np.linalg.eigh(1j * (a.conj().T - a))
    return lam, vec


def displacement_rows(alpha: complex, dim: int, work_dim: int) -> np.ndarray:
    """First ``dim`` rows of the ``work_dim``-level displacement ``D(alpha)``."""
    lam, vec = _generator_eig(work_dim)
    r, theta = abs(alpha), np.angle(alpha)
    phases = np.exp(1j * theta * np.arange(work_dim))
    # D = R exp(r (a^dag - a)) R^dag with R = diag(e^{i n theta})
    top = (phases[:dim, None] * vec[:dim]) * np.exp(-1j * r * lam)
    return (top @ vec.conj().T) * phases.conj()[None, :]


def _parity(work_dim: int) -> np.ndarray:
    return 1.0 - 2.0 * (np.arange(work_dim) % 2)


def wigner_point(rho: np.ndarray, alpha: complex, work_dim: int | None = None) -> float:
    """Wigner function of ``rho`` at the phase-space point ``alpha``.

    Raises:
        WignerTruncationError: the imaginary part exceeds 1e-6, i.e. the padded
            space is too small for this ``alpha``.
    """
    rho = np.asarray(rho, dtype=complex)
    dim = rho.shape[0]
    if work_dim is None:
        work_dim = working_dim(dim, abs(alpha))
    b = displacement_rows(alpha, dim, work_dim)
    diag = np.einsum("in,ij,jn->n", b.conj(), rho, b)
    w = (2 / np.pi) * np.dot(_parity(work_dim), diag)
    return _real_part(w)


def _real_part(w: complex) -> float:
    if abs(w.imag) > IMAG_ERROR_TOL:
        raise WignerTruncationError(f"imaginary residue {w.imag:.2e} in Wigner value")
    return float(w.real)


@dataclass(frozen=True)
class WignerGrid:
    """``values[i, j]`` is ``W(q[i] + i p[j])``."""

    q: np.ndarray
    p: np.ndarray
    values: np.ndarray
    max_imag: float

    @property
    def cell_area(self) -> float:
        dq = self.q[1] - self.q[0] if self.q.size > 1 else 1.0
        dp = self.p[1] - self.p[0] if self.p.size > 1 else 1.0
        return float(dq * dp)

    @property
    def min_value(self) -> float:
        return float(self.values.min())

    @property
    def integral(self) -> float:
        return float(self.values.sum() * self.cell_area)

    @property
    def negative_volume(self) -> float:
        """Summed volume of the negative cells (a non-positive number)."""
        return float(self.values[self.values < 0].sum() * self.cell_area)


def _axis(lo: float, hi: float, step: float) -> np.ndarray:
    count = int(math.floor((hi - lo) / step + 1e-9)) + 1
    return lo + step * np.arange(count)


def wigner_grid(rho, q_range=(-4.0, 4.0), p_range=(-4.0, 4.0), step=0.1) -> WignerGrid:
    """Sample the Wigner function on a rectangular grid with inclusive ends."""
    if step <= 0:
        raise ValueError("step must be positive")
    rho = np.asarray(rho, dtype=complex)
    dim = rho.shape[0]
    q = _axis(*q_range, step)
    p = _axis(*p_range, step)
    reach = math.hypot(max(abs(q[0]), abs(q[-1])), max(abs(p[0]), abs(p[-1])))
    work_dim = working_dim(dim, reach)
    parity = _parity(work_dim)
    values = np.empty((q.size, p.size))
    max_imag = 0.0
    for i, qi in enumerate(q):
        for j, pj in enumerate(p):
            b = displacement_rows(complex(qi, pj), dim, work_dim)
            w = (2 / np.pi) * np.dot(parity, np.einsum("in,ij,jn->n", b.conj(), rho, b))
            max_imag = max(max_imag, abs(w.imag))
            values[i, j] = _real_part(w)
    return WignerGrid(q, p, values, max_imag)


def rho_histogram(rho) -> list[tuple[int, int, float, float, float]]:
    """Rows ``(i, j, re, im, abs)`` for every element of ``rho``."""
    rho = np.asarray(rho, dtype=complex)
    return [
        (i, j, float(v.real), float(v.imag), float(abs(v)))
        for (i, j), v in np.ndenumerate(rho)
    ]


def write_grid_csv(grid: WignerGrid, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["q", "p", "w"])
        for (i, j), v in np.ndenumerate(grid.values):
            w.writerow([repr(float(grid.q[i])), repr(float(grid.p[j])), repr(float(v))])


def write_histogram_csv(rows, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["i", "j", "re", "im", "abs"])
        for i, j, re, im, mag in rows:
            w.writerow([i, j, repr(re), repr(im), repr(mag)])
