"""Command-line entry point: ``cavitydamp <subcommand> ...``.

Exit status is 0 on success, 2 for bad input and 3 for numerical failures
(failed post-selection, non-finite objective, truncation trouble).
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .channel import DampingParams, damp_closed_form, damp_kraus, mu_factor
from .dilation import damp_dilation
from .fock import outer
from .io import (
    InputError,
    config_from_json,
    dump_json,
    load_json,
    result_to_json,
    rho_from_json,
    rho_to_json,
    state_from_json,
)
from .optimize import (
    CSV_HEADER,
    DEFAULT_GAMMA,
    DEFAULT_GAMMA_T,
    DEFAULT_STARTS,
    TABLE1_ROWS,
    TARGET_PHASE_STATE,
    NonFiniteObjective,
    SweepGrid,
    maximize,
    sweep,
    two_atom_spec,
    write_sweep_csv,
)
from .protocol import ENGINES, PostSelectionError, TruncationError
from .wigner import WignerTruncationError, rho_histogram, wigner_grid, write_grid_csv, write_histogram_csv

log = logging.getLogger("cavitydamp")

EXIT_INPUT = 2
EXIT_NUMERIC = 3
SEED_ENV = "CAVITYDAMP_SEED"
DAMP_METHODS = ("closed-form", "dilation", "kraus")


def _provenance(command: str, **params) -> dict:
    return {"command": command, "version": __version__, "parameters": params}


def _write_meta(path: Path, provenance: dict) -> None:
    Path(str(path) + ".meta.json").write_text(json.dumps(provenance, indent=2) + "\n")


def cmd_damp(args) -> None:
    state = state_from_json(load_json(args.state), str(args.state))
    norm = float(np.vdot(state, state).real)
    if abs(norm - 1) > 1e-9:
        raise InputError(f"{args.state}: state is not normalized (norm^2 = {norm!r})")
    try:
        params = DampingParams(args.gamma, args.t, delta_omega=args.delta_omega)
    except ValueError as exc:
        raise InputError(str(exc)) from None
    mu = mu_factor(params)
    if args.method == "closed-form":
        rho = damp_closed_form(state, mu)
    elif args.method == "dilation":
        rho = damp_dilation(state, mu)
    else:
        rho = damp_kraus(outer(state), mu)
    prov = _provenance(
        "damp",
        method=args.method,
        gamma=args.gamma,
        t=args.t,
        delta_omega=args.delta_omega,
        state=str(args.state),
        initial_amps=[[z.real, z.imag] for z in state],
    )
    dump_json(rho_to_json(rho), args.out, prov)


def cmd_engineer(args) -> None:
    raw = load_json(args.config)
    cfg = config_from_json(raw, str(args.config))
    res = ENGINES[args.engine](cfg)
    raw.pop("provenance", None)
    dump_json(result_to_json(res), args.out, _provenance("engineer", engine=args.engine, config=raw))


def _target(args):
    if args.target is None:
        return TARGET_PHASE_STATE
    return state_from_json(load_json(args.target), str(args.target))


def cmd_optimize(args) -> None:
    spec = two_atom_spec(
        args.g_tau1, args.g_tau2, args.gamma, args.t_prime, args.t, _target(args), args.objective
    )
    res = maximize(spec, args.starts, args.seed)
    out = {
        "eps": [[e.real, e.imag] for e in res.eps],
        "fidelity": res.fidelity,
        "probability": res.probability,
        "rate": res.rate,
        "iterations": res.iterations,
        "converged": res.converged,
    }
    prov = _provenance(
        "optimize", g_tau1=args.g_tau1, g_tau2=args.g_tau2, gamma=args.gamma,
        t=args.t, t_prime=args.t_prime, seed=args.seed, starts=args.starts,
        objective=args.objective, target=[[z.real, z.imag] for z in spec.base.target],
    )
    dump_json(out, args.out, prov)


def cmd_sweep(args) -> None:
    try:
        grid = SweepGrid(
            tuple(args.g_tau1), tuple(args.g_tau2), args.gamma, args.t_prime, args.t, args.objective
        )
    except ValueError as exc:
        raise InputError(str(exc)) from None
    rows = sweep(grid, args.starts, args.seed, args.workers)
    write_sweep_csv(rows, args.out)
    failed = [(r.g_tau1, r.g_tau2, r.error) for r in rows if r.error]
    _write_meta(
        args.out,
        _provenance(
            "sweep", g_tau1=list(args.g_tau1), g_tau2=list(args.g_tau2), gamma=args.gamma,
            t=args.t, t_prime=args.t_prime, seed=args.seed, starts=args.starts,
            objective=args.objective, failed_cells=failed,
        ),
    )
    for gt1, gt2, err in failed:
        log.warning("cell (%g, %g) failed: %s", gt1, gt2, err)


def cmd_table1(args) -> None:
    results = []
    for gt1, gt2, *_ in TABLE1_ROWS:
        spec = two_atom_spec(gt1, gt2, args.gamma, args.t_prime, args.t)
        res = maximize(spec, args.starts, args.seed)
        e1, e2 = res.eps
        results.append([gt1, gt2, e1.real, e1.imag, e2.real, e2.imag, res.fidelity, res.probability, res.rate])
    with open(args.out, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(CSV_HEADER)
        for row in results:
            w.writerow([repr(float(v)) for v in row])
    _write_meta(
        args.out,
        _provenance(
            "table1", gamma=args.gamma, t=args.t, t_prime=args.t_prime, seed=args.seed,
            starts=args.starts, published=[
                {"g_tau1": r[0], "g_tau2": r[1], "eps1": [r[2].real, r[2].imag],
                 "eps2": [r[3].real, r[3].imag], "F": r[4], "P": r[5], "R": r[6]}
                for r in TABLE1_ROWS
            ],
        ),
    )


def cmd_wigner(args) -> None:
    if args.rho is not None:
        rho = rho_from_json(load_json(args.rho), str(args.rho))
        source = {"rho": str(args.rho)}
    elif args.state is not None:
        rho = outer(state_from_json(load_json(args.state), str(args.state)))
        source = {"state": str(args.state)}
    else:
        cfg = config_from_json(load_json(args.config), str(args.config))
        rho = ENGINES["oracle"](cfg).rho
        source = {"config": str(args.config)}
    if args.step <= 0:
        raise InputError("--step must be positive")
    grid = wigner_grid(rho, tuple(args.q_range), tuple(args.p_range), args.step)
    write_grid_csv(grid, args.out)
    prov = _provenance(
        "wigner", q_range=list(args.q_range), p_range=list(args.p_range), step=args.step,
        min_value=grid.min_value, negative_volume=grid.negative_volume,
        integral=grid.integral, rho=rho_to_json(rho), **source,
    )
    _write_meta(args.out, prov)
    if args.hist_out is not None:
        write_histogram_csv(rho_histogram(rho), args.hist_out)
        _write_meta(args.hist_out, prov)


def _default_seed() -> int:
    try:
        return int(os.environ.get(SEED_ENV, "0"))
    except ValueError:
        return 0


def _add_protocol_args(p, single_point: bool = True) -> None:
    if single_point:
        p.add_argument("--g-tau1", type=float, required=True)
        p.add_argument("--g-tau2", type=float, required=True)
    p.add_argument("--gamma", type=float, default=DEFAULT_GAMMA, help="decay rate in 1/s")
    p.add_argument("--t", type=float, default=DEFAULT_GAMMA_T / DEFAULT_GAMMA,
                   help="relaxation after the second detection, s")
    p.add_argument("--t-prime", type=float, default=DEFAULT_GAMMA_T / DEFAULT_GAMMA,
                   help="relaxation after the first detection, s")
    p.add_argument("--seed", type=int, default=_default_seed(),
                   help=f"start-point seed (default ${SEED_ENV} or 0)")
    p.add_argument("--starts", type=int, default=DEFAULT_STARTS)
    p.add_argument("--objective", choices=("fidelity", "rate"), default="fidelity")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cavitydamp", description="Cavity damping and lossy state-engineering simulations."
    )
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("damp", help="damp a pure field state")
    p.add_argument("--state", type=Path, required=True)
    p.add_argument("--gamma", type=float, required=True)
    p.add_argument("--t", type=float, required=True)
    p.add_argument("--delta-omega", type=float, default=0.0)
    p.add_argument("--method", choices=DAMP_METHODS, default="closed-form")
    p.add_argument("--out", type=Path, required=True)
    p.set_defaults(func=cmd_damp)

    p = sub.add_parser("engineer", help="run the atom sequence of a config file")
    p.add_argument("config", type=Path)
    p.add_argument("--engine", choices=sorted(ENGINES), default="oracle")
    p.add_argument("--out", type=Path, required=True)
    p.set_defaults(func=cmd_engineer)

    p = sub.add_parser("optimize", help="maximize over eps1, eps2 at one (g_tau1, g_tau2)")
    _add_protocol_args(p)
    p.add_argument("--target", type=Path, help="target state JSON (default: (|0>+|1>+|2>)/sqrt3)")
    p.add_argument("--out", type=Path, required=True)
    p.set_defaults(func=cmd_optimize)

    p = sub.add_parser("sweep", help="optimize every cell of a g_tau grid (CSV)")
    p.add_argument("--g-tau1", type=float, nargs=3, metavar=("LO", "HI", "STEP"), required=True)
    p.add_argument("--g-tau2", type=float, nargs=3, metavar=("LO", "HI", "STEP"), required=True)
    _add_protocol_args(p, single_point=False)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out", type=Path, required=True)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("table1", help="re-optimize the three published table rows (CSV)")
    _add_protocol_args(p, single_point=False)
    p.add_argument("--out", type=Path, required=True)
    p.set_defaults(func=cmd_table1)

    p = sub.add_parser("wigner", help="Wigner grid and density-matrix table")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--rho", type=Path)
    src.add_argument("--state", type=Path)
    src.add_argument("--config", type=Path, help="protocol config; uses the oracle engine output")
    p.add_argument("--q-range", type=float, nargs=2, default=(-3.0, 3.0))
    p.add_argument("--p-range", type=float, nargs=2, default=(-3.0, 3.0))
    p.add_argument("--step", type=float, default=0.1)
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--hist-out", type=Path)
    p.set_defaults(func=cmd_wigner)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        args.func(args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (PostSelectionError, NonFiniteObjective, TruncationError, WignerTruncationError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    return 0


if __name__ == "__main__":
    sys.exit(main())
