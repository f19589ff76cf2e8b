"""Zero-temperature photon damping of a single cavity mode.

Two independent routes are provided: :func:`damp_closed_form` evaluates the
alternating triple sum for the reduced density operator of an initially pure
field, and :func:`damp_kraus` applies the amplitude-damping Kraus operators to
an arbitrary density matrix. They are kept deliberately separate so that each
can check the other.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .fock import outer

_NORM_TOL = 1e-9


@dataclass(frozen=True)
class DampingParams:
    """Cavity decay settings.

    Attributes:
        gamma: Photon-number decay rate in 1/s.
        duration: Elapsed time in s.
        delta_omega: Frequency shift in rad/s.
        carrier_omega: Field frequency in rad/s, only used with
            ``apply_carrier_phase``.
        apply_carrier_phase: Include the free rotation at ``carrier_omega``.
    """

    gamma: float
    duration: float
    delta_omega: float = 0.0
    carrier_omega: float = 0.0
    apply_carrier_phase: bool = False

    def __post_init__(self):
        if self.gamma < 0:
            raise ValueError(f"gamma must be non-negative, got {self.gamma}")
        if self.duration < 0:
            raise ValueError(f"duration must be non-negative, got {self.duration}")


def mu_factor(p: DampingParams) -> complex:
    """Per-photon survival amplitude ``exp(-[gamma/2 + i(dw + w)] t)``."""
    omega = p.delta_omega
    if p.apply_carrier_phase:
        omega += p.carrier_omega
    return complex(np.exp(-(p.gamma / 2 + 1j * omega) * p.duration))


def survival(gamma: float, duration: float) -> complex:
    """Real survival amplitude for the default frame (no phase)."""
    return mu_factor(DampingParams(gamma, duration))


def damp_closed_form(c: np.ndarray, mu: complex) -> np.ndarray:
    """Reduced field state after damping an initially pure superposition.

    Evaluates, term by term,

        sum_{n,m} sum_{j<=m} sum_{l<=j} C_n C_m^* (-1)^l |mu|^{2j} mu^{n-m}
            / (l! (m-j)!) * sqrt(n! m! / ((j+n-l-m)! (j-l)!))
            |j+n-l-m><j-l|

    with the reservoir initially in its vacuum. Terms whose ket index would be
    negative vanish.

    Args:
        c: Normalized Fock amplitudes ``C_0 .. C_N``.
        mu: Complex survival amplitude, see :func:`mu_factor`.

    Returns:
        The ``(N+1) x (N+1)`` density matrix.
    """
    c = np.asarray(c, dtype=complex)
    if abs(np.vdot(c, c).real - 1) > _NORM_TOL:
        raise ValueError("damp_closed_form requires a normalized state")
    dim = c.size
    mag = abs(mu)
    phase = mu / mag if mag > 0 else 1.0
    fact = [math.factorial(k) for k in range(2 * dim)]
    rho = np.zeros((dim, dim), dtype=complex)
    for n in range(dim):
        if c[n] == 0:
            continue
        for m in range(dim):
            if c[m] == 0:
                continue
            pref = c[n] * np.conj(c[m]) * phase ** (n - m)
            for j in range(m + 1):
                for l in range(j + 1):
                    ket = j + n - l - m
                    if ket < 0:
                        continue
                    bra = j - l
                    # |mu|^{2j} mu^{n-m} folded into one power, which is never negative here
                    weight = mag ** (2 * j + n - m) * (-1) ** l / (fact[l] * fact[m - j])
                    weight *= math.sqrt(fact[n] * fact[m] / (fact[ket] * fact[bra]))
                    rho[ket, bra] += pref * weight
    return rho


def kraus_set(mu_mag: float, dim: int) -> list[np.ndarray]:
    """Amplitude-damping Kraus operators ``A_l`` with ``l`` photons lost.

    ``<n-l|A_l|n> = sqrt(C(n, l)) mu_mag^(n-l) (1 - mu_mag^2)^(l/2)``.
    """
    return [a.copy() for a in _kraus_cached(float(mu_mag), dim)]


@lru_cache(maxsize=256)
def _kraus_cached(mu_mag: float, dim: int) -> tuple[np.ndarray, ...]:
    if not 0 < mu_mag <= 1:
        raise ValueError(f"mu_mag must lie in (0, 1], got {mu_mag}")
    loss = 1.0 - mu_mag**2
    ops = []
    for l in range(dim):
        a = np.zeros((dim, dim), dtype=complex)
        for n in range(l, dim):
            a[n - l, n] = math.sqrt(math.comb(n, l)) * mu_mag ** (n - l) * loss ** (l / 2)
        a.setflags(write=False)
        ops.append(a)
    return tuple(ops)


def damp_kraus(rho: np.ndarray, mu: complex) -> np.ndarray:
    """Apply the damping channel to any density matrix.

    The phase of ``mu`` multiplies element ``(n, m)`` by ``phase^(n-m)``.
    """
    rho = np.asarray(rho, dtype=complex)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {rho.shape}")
    dim = rho.shape[0]
    mu = complex(mu)
    mag = abs(mu)
    if mag == 0:
        # fully decayed (or exp underflow): everything ends in the vacuum
        out = np.zeros_like(rho)
        out[0, 0] = np.trace(rho)
        return out
    ops = _kraus_stack(float(mag), dim)
    out = (ops @ rho @ ops.conj().transpose(0, 2, 1)).sum(axis=0)
    if mu.imag == 0 and mu.real > 0:
        return out
    rot = (mu / mag) ** np.arange(dim)
    return out * np.outer(rot, rot.conj())


@lru_cache(maxsize=256)
def _kraus_stack(mu_mag: float, dim: int) -> np.ndarray:
    ops = np.stack(_kraus_cached(mu_mag, dim))
    ops.setflags(write=False)
    return ops


def damp_pure_kraus(c: np.ndarray, mu: complex) -> np.ndarray:
    return damp_kraus(outer(c), mu)


def binomial_populations(n: int, gamma_t: float) -> np.ndarray:
    """Photon-number distribution after damping ``|n>`` for time ``t`` at rate ``gamma``."""
    keep = math.exp(-gamma_t)
    return np.array(
        [math.comb(n, m) * keep**m * (1 - keep) ** (n - m) for m in range(n + 1)]
    )
