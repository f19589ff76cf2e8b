"""Field plus environment pure-state evolution through loss epochs.

Each relaxation interval (an *epoch*) lets the field hand photons to the
reservoir. The reservoir content of an epoch is kept as an orthonormal
collective state labelled only by how many photons were lost in it, so a
branch of the joint state is identified by the field photon number together
with the tuple of per-epoch loss counts. Tracing the reservoir out then means
summing over branches whose loss records coincide.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

NORM_TOL = 1e-12

LossRecord = tuple[int, ...]


class EpochError(ValueError):
    """An epoch was applied twice or out of order."""


@dataclass(frozen=True)
class JointState:
    """Sparse field-environment state.

    ``branches`` maps a loss record (one lost-photon count per applied epoch,
    in the order of ``epochs``) to the field amplitudes carried by that
    reservoir state.
    """

    dim: int
    branches: dict[LossRecord, np.ndarray] = field(default_factory=dict)
    epochs: tuple[int, ...] = ()

    def amplitude(self, n: int, record: LossRecord) -> complex:
        v = self.branches.get(tuple(record))
        return 0j if v is None else complex(v[n])

    def items(self):
        """Yield ``((n, record), amplitude)`` for every nonzero amplitude."""
        for record, v in self.branches.items():
            for n in np.flatnonzero(v):
                yield (int(n), record), complex(v[n])

    def norm_sq(self) -> float:
        return float(sum(np.vdot(v, v).real for v in self.branches.values()))

    def scaled(self, factor: complex) -> "JointState":
        return JointState(
            self.dim, {r: factor * v for r, v in self.branches.items()}, self.epochs
        )

    def map_field(self, fn) -> "JointState":
        """Apply ``fn`` to the field vector of every branch (reservoir is a spectator)."""
        return JointState(
            self.dim, {r: fn(v) for r, v in self.branches.items()}, self.epochs
        )


def embed(v: np.ndarray) -> JointState:
    """Field state with the reservoir in its vacuum and no epochs yet."""
    v = np.asarray(v, dtype=complex)
    return JointState(v.size, {(): v.copy()})


def loss_weight(n: int, k: int, mu_mag: float) -> float:
    """Amplitude for ``n`` photons to leave ``k`` survivors in one epoch.

    ``sqrt(C(n, k)) mu^k (1 - mu^2)^((n-k)/2)``; the squares sum to one over ``k``.
    """
    if not 0 <= k <= n:
        raise ValueError(f"need 0 <= k <= n, got n={n}, k={k}")
    if not 0 <= mu_mag <= 1:
        raise ValueError(f"mu_mag must lie in [0, 1], got {mu_mag}")
    s = 1.0 - mu_mag**2
    return math.sqrt(math.comb(n, k)) * mu_mag**k * s ** ((n - k) / 2)


def apply_epoch(j: JointState, mu: complex, epoch: int) -> JointState:
    """Let every branch lose photons to a fresh reservoir sector.

    Branch ``|n, record>`` fans out into ``|k, record + (n-k,)>`` with amplitude
    ``loss_weight(n, k) * phase^k`` where ``phase = mu/|mu|``.
    """
    if epoch in j.epochs:
        raise EpochError(f"epoch {epoch} already applied")
    if j.epochs and epoch < j.epochs[-1]:
        raise EpochError(f"epoch {epoch} precedes already applied epoch {j.epochs[-1]}")
    mag = abs(mu)
    phase = mu / mag if mag > 0 else 1.0
    dim = j.dim
    # fan-out table: weights[n, k]
    weights = np.zeros((dim, dim), dtype=complex)
    for n in range(dim):
        for k in range(n + 1):
            weights[n, k] = loss_weight(n, k, mag) * phase**k
    out: dict[LossRecord, np.ndarray] = {}
    for record, v in j.branches.items():
        for lost in range(dim):
            idx = np.arange(lost, dim)
            amps = np.zeros(dim, dtype=complex)
            amps[idx - lost] = weights[idx, idx - lost] * v[idx]
            if not np.any(amps):
                continue
            key = record + (lost,)
            if key in out:
                out[key] = out[key] + amps
            else:
                out[key] = amps
    return JointState(dim, out, j.epochs + (epoch,))


def trace_out_env(j: JointState) -> np.ndarray:
    """Reduced field density matrix ``sum_records |v_r><v_r|``."""
    rho = np.zeros((j.dim, j.dim), dtype=complex)
    for v in j.branches.values():
        rho += np.outer(v, v.conj())
    return rho


def damp_dilation(c: np.ndarray, mu: complex) -> np.ndarray:
    """One damping epoch on a pure state, reservoir traced out."""
    return trace_out_env(apply_epoch(embed(c), mu, 0))
