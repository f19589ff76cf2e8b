"""Fidelity maximization over the Ramsey parameters and gτ-plane sweeps."""
from __future__ import annotations

import csv
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy.stats import qmc

from .protocol import ENGINES, AtomStep, OracleKernel, PostSelectionError, ProtocolConfig

CSV_HEADER = ["g_tau1", "g_tau2", "re_eps1", "im_eps1", "re_eps2", "im_eps2", "F", "P", "R"]
SEARCH_BOX = 3.0
DEFAULT_STARTS = 16
DEFAULT_GAMMA = 100.0
DEFAULT_GAMMA_T = 0.1
TARGET_PHASE_STATE = np.ones(3) / math.sqrt(3)

# (g_tau1, g_tau2, eps1, eps2, F, P, R) as published for the truncated phase state
TABLE1_ROWS = (
    (0.6, 3.0, 2.7693 + 0j, -0.1583 + 0j, 0.9253, 0.0697, 0.0645),
    (1.3, 1.2, -0.8508 + 0.2874j, -0.8838 - 0.1600j, 0.8789, 0.8831, 0.7761),
    (1.4, 2.8, 1.2349 + 0.8632j, -0.3583 + 0.2427j, 0.9087, 0.3637, 0.3305),
)


class NonFiniteObjective(ArithmeticError):
    pass


@dataclass
class SimplexResult:
    x: np.ndarray
    value: float
    iterations: int
    converged: bool
    evaluations: int


def nelder_mead(
    f: Callable[[np.ndarray], float],
    x0,
    *,
    step: float = 0.5,
    tol: float = 1e-8,
    max_iter: int = 2000,
    alpha: float = 1.0,
    gamma: float = 2.0,
    rho: float = 0.5,
    sigma: float = 0.5,
) -> SimplexResult:
    """Maximize ``f`` with the Nelder-Mead simplex method.

    Args:
        f: Objective to maximize.
        x0: Starting point; the initial simplex adds ``step`` along each axis.
        step: Edge length of the initial simplex.
        tol: Stop when the largest vertex-to-vertex distance drops below this.
        max_iter: Iteration cap.
        alpha, gamma, rho, sigma: Reflection, expansion, contraction and
            shrink coefficients.

    Raises:
        NonFiniteObjective: ``f`` returned NaN or infinity.
    """
    x0 = np.asarray(x0, dtype=float)
    n = x0.size
    evals = 0

    def cost(x):
        nonlocal evals
        evals += 1
        v = f(x)
        if not math.isfinite(v):
            raise NonFiniteObjective(f"objective returned {v!r} at x={x.tolist()}")
        return -v

    simplex = np.vstack([x0] + [x0 + step * e for e in np.eye(n)])
    fs = np.array([cost(x) for x in simplex])
    it = 0
    converged = False
    while True:
        order = np.argsort(fs, kind="stable")
        simplex, fs = simplex[order], fs[order]
        diffs = simplex[:, None, :] - simplex[None, :, :]
        if np.sqrt(np.max(np.sum(diffs**2, axis=-1))) < tol:
            converged = True
            break
        if it >= max_iter:
            break
        it += 1
        centroid = simplex[:-1].mean(axis=0)
        worst = simplex[-1]
        xr = centroid + alpha * (centroid - worst)
        fr = cost(xr)
        if fr < fs[0]:
            xe = centroid + gamma * (xr - centroid)
            fe = cost(xe)
            if fe < fr:
                simplex[-1], fs[-1] = xe, fe
            else:
                simplex[-1], fs[-1] = xr, fr
            continue
        if fr < fs[-2]:
            simplex[-1], fs[-1] = xr, fr
            continue
        if fr < fs[-1]:
            xc = centroid + rho * (xr - centroid)
            fc = cost(xc)
            accept = fc <= fr
        else:
            xc = centroid + rho * (worst - centroid)
            fc = cost(xc)
            accept = fc < fs[-1]
        if accept:
            simplex[-1], fs[-1] = xc, fc
            continue
        best = simplex[0]
        for i in range(1, n + 1):
            simplex[i] = best + sigma * (simplex[i] - best)
            fs[i] = cost(simplex[i])
    return SimplexResult(simplex[0].copy(), float(-fs[0]), it, converged, evals)


@dataclass(frozen=True)
class ObjectiveSpec:
    """Protocol whose Ramsey parameters are free; ``objective`` is ``fidelity`` or ``rate``."""

    base: ProtocolConfig
    objective: str = "fidelity"
    engine: str = "oracle"

    def __post_init__(self):
        if self.objective not in ("fidelity", "rate"):
            raise ValueError(f"unknown objective {self.objective!r}")
        if self.engine not in ENGINES:
            raise ValueError(f"unknown engine {self.engine!r}")

    @property
    def n_params(self) -> int:
        return 2 * len(self.base.steps)


@dataclass
class OptResult:
    eps: tuple[complex, ...]
    fidelity: float
    probability: float
    rate: float
    iterations: int
    converged: bool
    start_index: int = -1


def _eps_from_x(x) -> list[complex]:
    x = np.asarray(x, dtype=float)
    return [complex(re, im) for re, im in zip(x[0::2], x[1::2])]


def evaluate_objective(spec: ObjectiveSpec, eps_values) -> tuple[float, float, float]:
    """``(F, P, R)`` of the protocol run with the given Ramsey parameters."""
    res = ENGINES[spec.engine](spec.base.with_epsilons(eps_values))
    return res.fidelity, res.total_probability, res.rate


def _objective(spec: ObjectiveSpec):
    if spec.engine == "oracle":
        kernel = OracleKernel(spec.base)

        def evaluate(eps):
            fid, prob = kernel(eps)
            return (fid, prob, prob * fid)
    else:
        def evaluate(eps):
            return evaluate_objective(spec, eps)

    pick = 0 if spec.objective == "fidelity" else 2

    def f(x):
        try:
            return evaluate(_eps_from_x(x))[pick]
        except PostSelectionError:
            # the field is undefined when no atom can be detected in |g>
            return 0.0

    return f


def start_points(n_params: int, starts: int, seed: int = 0) -> np.ndarray:
    """Scrambled Halton points in the search box; a prefix of a longer request."""
    sampler = qmc.Halton(d=n_params, scramble=True, seed=seed)
    return qmc.scale(sampler.random(starts), -SEARCH_BOX, SEARCH_BOX)


def maximize(spec: ObjectiveSpec, starts: int = DEFAULT_STARTS, seed: int = 0, **nm_opts) -> OptResult:
    """Best of ``starts`` Nelder-Mead runs over the complex Ramsey parameters."""
    if starts < 1:
        raise ValueError("need at least one start")
    f = _objective(spec)
    best = None
    best_idx = -1
    for i, x0 in enumerate(start_points(spec.n_params, starts, seed)):
        try:
            res = nelder_mead(f, x0, **nm_opts)
        except NonFiniteObjective:
            continue
        if best is None or res.value > best.value:
            best, best_idx = res, i
    if best is None:
        raise NonFiniteObjective("all starts failed")
    eps = _eps_from_x(best.x)
    fid, prob, rate = evaluate_objective(spec, eps)
    return OptResult(tuple(eps), fid, prob, rate, best.iterations, best.converged, best_idx)


def two_atom_spec(
    g_tau1: float,
    g_tau2: float,
    gamma: float = DEFAULT_GAMMA,
    t_prime: float = DEFAULT_GAMMA_T / DEFAULT_GAMMA,
    t: float = DEFAULT_GAMMA_T / DEFAULT_GAMMA,
    target=TARGET_PHASE_STATE,
    objective: str = "fidelity",
) -> ObjectiveSpec:
    steps = (AtomStep(0j, g_tau1, t_prime), AtomStep(0j, g_tau2, t))
    return ObjectiveSpec(ProtocolConfig(steps, gamma, target), objective)


@dataclass(frozen=True)
class SweepGrid:
    """Inclusive ``(start, stop, step)`` ranges for both interaction parameters."""

    g_tau1: tuple[float, float, float]
    g_tau2: tuple[float, float, float]
    gamma: float = DEFAULT_GAMMA
    t_prime: float = DEFAULT_GAMMA_T / DEFAULT_GAMMA
    t: float = DEFAULT_GAMMA_T / DEFAULT_GAMMA
    objective: str = "fidelity"

    def __post_init__(self):
        for name in ("g_tau1", "g_tau2"):
            lo, hi, step = getattr(self, name)
            if step <= 0:
                raise ValueError(f"{name} step must be positive")
            if hi < lo:
                raise ValueError(f"{name} range is empty")

    @staticmethod
    def axis(lo: float, hi: float, step: float) -> np.ndarray:
        count = int(math.floor((hi - lo) / step + 1e-9)) + 1
        return lo + step * np.arange(count)

    def cells(self) -> list[tuple[float, float]]:
        return [
            (float(a), float(b))
            for a in self.axis(*self.g_tau1)
            for b in self.axis(*self.g_tau2)
        ]


@dataclass
class SweepRow:
    g_tau1: float
    g_tau2: float
    result: OptResult
    error: str = ""

    def as_csv(self) -> list:
        e1, e2 = self.result.eps
        r = self.result
        return [self.g_tau1, self.g_tau2, e1.real, e1.imag, e2.real, e2.imag,
                r.fidelity, r.probability, r.rate]


def _run_cell(args) -> SweepRow:
    grid, (gt1, gt2), starts, seed = args
    spec = two_atom_spec(gt1, gt2, grid.gamma, grid.t_prime, grid.t, objective=grid.objective)
    try:
        res = maximize(spec, starts, seed)
        return SweepRow(gt1, gt2, res)
    except (NonFiniteObjective, PostSelectionError) as exc:
        nan = float("nan")
        return SweepRow(gt1, gt2, OptResult((0j, 0j), nan, nan, nan, 0, False), str(exc))


def sweep(grid: SweepGrid, starts: int = DEFAULT_STARTS, seed: int = 0, workers: int = 1) -> list[SweepRow]:
    """Optimize every cell of ``grid``; rows come back in grid order."""
    jobs = [(grid, cell, starts, seed) for cell in grid.cells()]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(_run_cell, jobs))
    return [_run_cell(job) for job in jobs]


def write_sweep_csv(rows: Sequence[SweepRow], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(CSV_HEADER)
        for row in rows:
            w.writerow([repr(float(v)) for v in row.as_csv()])


def read_sweep_csv(path) -> list[dict]:
    with open(path, newline="") as fh:
        return [{k: float(v) for k, v in rec.items()} for rec in csv.DictReader(fh)]


def table1_eval(gamma: float = DEFAULT_GAMMA, gamma_t: float = DEFAULT_GAMMA_T) -> list[tuple[float, float, float]]:
    """``(F, P, R)`` at the published Ramsey settings for each table row."""
    out = []
    for gt1, gt2, e1, e2, *_ in TABLE1_ROWS:
        spec = two_atom_spec(gt1, gt2, gamma, gamma_t / gamma, gamma_t / gamma)
        out.append(evaluate_objective(spec, [e1, e2]))
    return out
