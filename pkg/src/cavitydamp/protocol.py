"""Photon-by-photon cavity state engineering with a leaky cavity.

Atoms prepared in ``|e> + i eps |g>`` cross an initially empty cavity one at a
time, exchange excitation with the field through a resonant Jaynes-Cummings
interaction and are kept only when detected in ``|g>``. After each detection
the field relaxes for a while before the next atom arrives.

Two engines compute the same result: :func:`run_protocol_oracle` propagates a
density matrix with Kraus damping, :func:`run_protocol_dilation` propagates a
field-reservoir pure state through loss epochs. For two atoms the reduced
state is also available in closed form via :func:`appendix_a`.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from numpy.polynomial import Polynomial

from . import dilation
from .channel import damp_kraus, kraus_set, survival
from .fock import fidelity, make_fock, outer

E, G = 0, 1
_PROB_FLOOR = 1e-14
_TRUNC_TOL = 1e-12


class PostSelectionError(RuntimeError):
    """The ground-state detection of an atom has (numerically) zero probability."""

    def __init__(self, step: int, probability: float):
        super().__init__(
            f"post-selection failed at step {step}: probability {probability:.3e}"
        )
        self.step = step
        self.probability = probability


class TruncationError(RuntimeError):
    """An excited atom met a field already at the top Fock level."""


@dataclass(frozen=True)
class AtomStep:
    """One atom of the sequence.

    Attributes:
        epsilon: Ramsey parameter; the atom enters as ``|e> + i*epsilon|g>``.
        g_tau: Coupling times interaction time.
        relax_duration: Damping time (s) between this atom's detection and the
            next event.
    """

    epsilon: complex
    g_tau: float
    relax_duration: float = 0.0

    def __post_init__(self):
        if self.g_tau < 0:
            raise ValueError(f"g_tau must be non-negative, got {self.g_tau}")
        if self.relax_duration < 0:
            raise ValueError(f"relax_duration must be non-negative, got {self.relax_duration}")


@dataclass(frozen=True)
class ProtocolConfig:
    steps: tuple[AtomStep, ...]
    gamma: float
    target: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "steps", tuple(self.steps))
        target = np.asarray(self.target, dtype=complex)
        object.__setattr__(self, "target", target)
        if not self.steps:
            raise ValueError("protocol needs at least one atom")
        if self.gamma < 0:
            raise ValueError(f"gamma must be non-negative, got {self.gamma}")
        if target.size != len(self.steps) + 1:
            raise ValueError(
                f"target has dim {target.size}, expected {len(self.steps) + 1} for "
                f"{len(self.steps)} atoms"
            )
        if abs(np.vdot(target, target).real - 1) > 1e-12:
            raise ValueError("target state must be normalized")

    @property
    def dim(self) -> int:
        return self.target.size

    def with_epsilons(self, eps) -> "ProtocolConfig":
        steps = tuple(
            AtomStep(complex(e), s.g_tau, s.relax_duration) for e, s in zip(eps, self.steps)
        )
        return ProtocolConfig(steps, self.gamma, self.target)


@dataclass(frozen=True)
class EngineerResult:
    rho: np.ndarray
    step_probabilities: tuple[float, ...]
    total_probability: float
    fidelity: float
    rate: float


def two_atom_config(eps1, eps2, g_tau1, g_tau2, gamma, t_prime, t, target=None):
    """Two-atom configuration; ``t_prime`` follows the first detection, ``t`` the second."""
    if target is None:
        target = np.ones(3) / math.sqrt(3)
    return ProtocolConfig(
        (AtomStep(complex(eps1), g_tau1, t_prime), AtomStep(complex(eps2), g_tau2, t)),
        gamma,
        target,
    )


def prepare_atom(epsilon: complex) -> np.ndarray:
    """Normalized atom amplitudes on ``(|e>, |g>)``."""
    epsilon = complex(epsilon)
    return np.array([1.0, 1j * epsilon]) / math.sqrt(1 + abs(epsilon) ** 2)


def jc_unitary(g_tau: float, dim: int) -> np.ndarray:
    """Resonant Jaynes-Cummings propagator on atom (x) field, atom index major.

    ``|e,n> -> C_n|e,n> - i S_n|g,n+1>`` with ``C_n = cos(g_tau sqrt(n+1))``,
    ``S_n = sin(g_tau sqrt(n+1))``. The state ``|e, dim-1>`` has no partner in
    the truncated space and is left alone; :func:`jc_step` refuses to act on it.
    """
    u = np.zeros((2 * dim, 2 * dim), dtype=complex)
    u[G * dim, G * dim] = 1.0
    u[E * dim + dim - 1, E * dim + dim - 1] = 1.0
    for n in range(dim - 1):
        c = math.cos(g_tau * math.sqrt(n + 1))
        s = math.sin(g_tau * math.sqrt(n + 1))
        e_n, g_n1 = E * dim + n, G * dim + n + 1
        u[e_n, e_n] = c
        u[g_n1, g_n1] = c
        u[g_n1, e_n] = -1j * s
        u[e_n, g_n1] = -1j * s
    return u


@lru_cache(maxsize=256)
def _jc_cached(g_tau: float, dim: int) -> np.ndarray:
    u = jc_unitary(g_tau, dim)
    u.setflags(write=False)
    return u


def jc_step(joint: np.ndarray, g_tau: float) -> np.ndarray:
    """Evolve a ``(2, dim)`` atom-field amplitude array."""
    joint = np.asarray(joint, dtype=complex)
    dim = joint.shape[1]
    if abs(joint[E, dim - 1]) > _TRUNC_TOL:
        raise TruncationError("excited atom with field at the top Fock level")
    return (_jc_cached(float(g_tau), dim) @ joint.reshape(-1)).reshape(2, dim)


def postselect_ground(joint: np.ndarray, step: int = 0) -> tuple[np.ndarray, float]:
    """Project on ``|g>``; returns the unnormalized field part and its weight."""
    field_part = np.asarray(joint, dtype=complex)[G].copy()
    prob = float(np.vdot(field_part, field_part).real)
    if prob <= _PROB_FLOOR:
        raise PostSelectionError(step, prob)
    return field_part, prob


def _result(cfg: ProtocolConfig, rho: np.ndarray, probs: list[float]) -> EngineerResult:
    total = float(np.prod(probs))
    fid = min(max(fidelity(cfg.target, rho), 0.0), 1.0)
    return EngineerResult(rho, tuple(probs), total, fid, total * fid)


def ground_operator(epsilon: complex, g_tau: float, dim: int) -> np.ndarray:
    """Field operator ``<g| U_JC |atom>`` for an atom prepared with ``epsilon``."""
    atom = prepare_atom(epsilon)
    u = _jc_cached(float(g_tau), dim)
    return atom[E] * u[G * dim:, E * dim:E * dim + dim] + atom[G] * u[G * dim:, G * dim:]


def run_protocol_oracle(cfg: ProtocolConfig) -> EngineerResult:
    """Density-matrix engine: JC interaction, ground projection, Kraus damping.

    The atom is traced out by projection, so each detection acts on the field
    as ``rho -> M rho M^dag`` with ``M = <g|U|atom>``.
    """
    dim = cfg.dim
    rho = outer(make_fock(0, dim))
    probs = []
    for k, step in enumerate(cfg.steps):
        atom = prepare_atom(step.epsilon)
        if abs(atom[E]) ** 2 * abs(rho[dim - 1, dim - 1]) > _TRUNC_TOL:
            raise TruncationError("excited atom with field at the top Fock level")
        m = ground_operator(step.epsilon, step.g_tau, dim)
        ground = m @ rho @ m.conj().T
        prob = float(np.trace(ground).real)
        if prob <= _PROB_FLOOR:
            raise PostSelectionError(k, prob)
        probs.append(prob)
        rho = damp_kraus(ground / prob, survival(cfg.gamma, step.relax_duration))
    return _result(cfg, rho, probs)


def run_protocol_dilation(cfg: ProtocolConfig) -> EngineerResult:
    """Pure-state engine: field-reservoir branches, one loss epoch per atom."""
    dim = cfg.dim
    state = dilation.embed(make_fock(0, dim))
    probs = []
    for k, step in enumerate(cfg.steps):
        atom = prepare_atom(step.epsilon)
        projected = {}
        for record, v in state.branches.items():
            joint = jc_step(np.outer(atom, v), step.g_tau)
            projected[record] = joint[G]
        prob = float(sum(np.vdot(v, v).real for v in projected.values()))
        if prob <= _PROB_FLOOR:
            raise PostSelectionError(k, prob)
        probs.append(prob)
        state = dilation.JointState(dim, projected, state.epochs).scaled(1 / math.sqrt(prob))
        state = dilation.apply_epoch(state, survival(cfg.gamma, step.relax_duration), k)
    return _result(cfg, dilation.trace_out_env(state), probs)


ENGINES = {"oracle": run_protocol_oracle, "dilation": run_protocol_dilation}


class OracleKernel:
    """The oracle engine with the Ramsey parameters left free.

    Everything that does not depend on ``epsilon`` (JC blocks, damping
    superoperators) is built once, which makes repeated evaluation inside an
    optimizer several times cheaper than :func:`run_protocol_oracle`.
    """

    def __init__(self, cfg: ProtocolConfig):
        dim = cfg.dim
        self.dim = dim
        self.target = cfg.target
        self.steps = []
        for step in cfg.steps:
            u = _jc_cached(float(step.g_tau), dim)
            from_e = u[G * dim:, E * dim:E * dim + dim]
            from_g = u[G * dim:, G * dim:]
            mu = survival(cfg.gamma, step.relax_duration)
            # row-major vec: vec(K rho K^dag) = (K (x) conj K) vec(rho)
            sup = sum(np.kron(k, k.conj()) for k in _damping_ops(mu, dim))
            self.steps.append((from_e, from_g, sup))

    def __call__(self, epsilons) -> tuple[float, float]:
        """``(F, P)`` for the given Ramsey parameters."""
        dim = self.dim
        rho = np.zeros((dim, dim), dtype=complex)
        rho[0, 0] = 1.0
        total = 1.0
        for k, ((from_e, from_g, sup), eps) in enumerate(zip(self.steps, epsilons)):
            atom = prepare_atom(eps)
            if abs(atom[E]) ** 2 * abs(rho[dim - 1, dim - 1]) > _TRUNC_TOL:
                raise TruncationError("excited atom with field at the top Fock level")
            m = atom[E] * from_e + atom[G] * from_g
            ground = m @ rho @ m.conj().T
            prob = float(ground.trace().real)
            if prob <= _PROB_FLOOR:
                raise PostSelectionError(k, prob)
            total *= prob
            rho = (sup @ ground.reshape(-1)).reshape(dim, dim) / prob
        fid = float(np.vdot(self.target, rho @ self.target).real)
        return min(max(fid, 0.0), 1.0), total


def _damping_ops(mu: complex, dim: int) -> list[np.ndarray]:
    mag = abs(mu)
    if mag == 0:
        ops = []
        for n in range(dim):
            a = np.zeros((dim, dim), dtype=complex)
            a[0, n] = 1.0
            ops.append(a)
        return ops
    rot = np.diag((mu / mag) ** np.arange(dim))
    return [rot @ a for a in kraus_set(mag, dim)]


# -- lossless limit -----------------------------------------------------------


def _cs(g_tau: float, n: int) -> tuple[float, float]:
    """``(C_n, S_n)``; ``n = -1`` gives ``(1, 0)``."""
    if n < 0:
        return 1.0, 0.0
    x = g_tau * math.sqrt(n + 1)
    return math.cos(x), math.sin(x)


def vogel_state(epsilons, g_taus, dim: int | None = None) -> np.ndarray:
    """Unnormalized field left by lossless atoms, up to a global phase.

    Each detected atom maps ``psi_n -> S_{n-1} psi_{n-1} - eps C_{n-1} psi_n``.
    """
    if dim is None:
        dim = len(g_taus) + 1
    psi = make_fock(0, dim)
    for eps, gt in zip(epsilons, g_taus):
        new = np.zeros(dim, dtype=complex)
        for n in range(dim):
            c_prev, s_prev = _cs(gt, n - 1)
            new[n] = -eps * c_prev * psi[n]
            if n > 0:
                new[n] += s_prev * psi[n - 1]
        psi = new
    return psi


def vogel_solutions(target, g_taus) -> list[list[complex]]:
    """All Ramsey settings that produce ``target`` exactly when the cavity is lossless.

    Works backwards from the last atom: with the previous field written as a
    polynomial in the unknown ``eps``, the vacuum component gives a polynomial
    equation whose roots are the admissible settings for that atom.
    """
    target = np.asarray(target, dtype=complex)
    m = len(g_taus)
    if target.size < m + 1:
        raise ValueError("target dimension too small for the number of atoms")
    if np.any(np.abs(target[m + 1:]) > 0):
        raise ValueError("target has more photons than atoms")

    def back(psi, k):
        # psi holds photon numbers 0..k; returns list of (eps, previous psi)
        gt = g_taus[k - 1]
        _, s_top = _cs(gt, k - 1)
        if abs(psi[k]) < 1e-14 or abs(s_top) < 1e-14:
            raise ValueError(f"atom {k} cannot reach the requested top photon number")
        prev = [Polynomial([0j])] * k
        prev[k - 1] = Polynomial([psi[k] / s_top])
        eps = Polynomial([0, 1])
        for n in range(k - 1, 0, -1):
            c_prev, s_prev = _cs(gt, n - 1)
            if abs(s_prev) < 1e-14:
                raise ValueError(f"atom {k} has a vanishing Rabi factor S_{n - 1}")
            prev[n - 1] = (psi[n] + eps * c_prev * prev[n]) / s_prev
        constraint = psi[0] + eps * prev[0]
        roots = constraint.roots() if constraint.degree() > 0 else []
        out = []
        for r in roots:
            vec = np.array([p(r) for p in prev], dtype=complex)
            out.append((complex(r), vec))
        return out

    solutions = []

    def recurse(psi, k, chosen):
        if k == 0:
            solutions.append(list(reversed(chosen)))
            return
        for eps, prev in back(psi, k):
            recurse(prev, k - 1, chosen + [eps])

    recurse(target[: m + 1], m, [])
    return solutions


def vogel_solve(target, g_taus) -> list[complex]:
    """One lossless solution, chosen as the one with the smallest largest ``|eps|``."""
    sols = vogel_solutions(target, g_taus)
    if not sols:
        raise ValueError("no lossless solution")
    return min(sols, key=lambda s: max(abs(e) for e in s))


# -- two-atom closed form -----------------------------------------------------


@dataclass(frozen=True)
class CoeffSet:
    """Unnormalized two-atom field: ``a|2><2| + b|1><1| + c|0><0|``
    plus ``d|2><1| + f|2><0| + g|1><0|`` and their conjugates."""

    a: float
    b: float
    c: float
    d: complex
    f: complex
    g: complex

    def assemble(self) -> np.ndarray:
        norm = 1.0 / (self.a + self.b + self.c)
        rho = np.diag([self.c, self.b, self.a]).astype(complex)
        rho[2, 1], rho[2, 0], rho[1, 0] = self.d, self.f, self.g
        rho[1, 2], rho[0, 2], rho[0, 1] = np.conj([self.d, self.f, self.g])
        return norm * rho


def appendix_a(eps1, eps2, g_tau1, g_tau2, gamma, t_prime, t) -> CoeffSet:
    """Closed-form coefficients of the two-atom field.

    Obtained by expanding the reservoir overlaps of the field-reservoir
    operators after both atoms, with the first relaxation lasting ``t_prime``
    and the second ``t``. The atoms' normalization and the detection phases
    are left out, so the result is proportional to the engine output.
    """
    e1, e2 = complex(eps1), complex(eps2)
    _, s01 = _cs(g_tau1, 0)
    c02, s02 = _cs(g_tau2, 0)
    _, s12 = _cs(g_tau2, 1)
    u1 = math.exp(-gamma * t_prime / 2)
    u2 = math.exp(-gamma * t / 2)
    l1 = 1 - u1**2
    l2 = 1 - u2**2
    cross = 2 * (e1 * e2.conjugate()).real
    a1, a2 = abs(e1) ** 2, abs(e2) ** 2

    a = (s01 * s12) ** 2 * u1**2 * u2**4
    b = (
        2 * (s01 * s12) ** 2 * u1**2 * u2**2 * l2
        + a2 * (s01 * c02) ** 2 * u1**2 * u2**2
        + (s01 * s02) ** 2 * u2**2 * l1
        + a1 * s02**2 * u2**2
        + cross * s01 * c02 * s02 * u1 * u2**2
    )
    c = (
        a2 * s01**2 * l1
        + a1 * a2
        + (s01 * s12) ** 2 * u1**2 * l2**2
        + a2 * (s01 * c02) ** 2 * u1**2 * l2
        + (s01 * s02) ** 2 * l1 * l2
        + a1 * s02**2 * l2
        + cross * s01 * s02 * c02 * u1 * l2
    )
    d = (
        -e2.conjugate() * s01**2 * s12 * c02 * u1**2 * u2**3
        - e1.conjugate() * s01 * s12 * s02 * u1 * u2**3
    )
    f = e1.conjugate() * e2.conjugate() * s01 * s12 * u1 * u2**2
    g = (
        -e2.conjugate() * s01**2 * s02 * u2 * l1
        - e1.conjugate() * a2 * s01 * c02 * u1 * u2
        - e2.conjugate() * a1 * s02 * u2
        - math.sqrt(2) * e2.conjugate() * s01**2 * s12 * c02 * u1**2 * u2 * l2
        - math.sqrt(2) * e1.conjugate() * s01 * s02 * s12 * u1 * u2 * l2
    )
    return CoeffSet(a, b, c, complex(d), complex(f), complex(g))
