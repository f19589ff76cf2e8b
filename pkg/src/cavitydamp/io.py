"""JSON (de)serialization. Complex numbers are written as ``[re, im]``."""
from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .protocol import AtomStep, EngineerResult, ProtocolConfig

PROVENANCE_KEY = "provenance"


class InputError(ValueError):
    """Malformed or inconsistent input file."""


def _cx(z: complex) -> list[float]:
    z = complex(z)
    return [z.real, z.imag]


def _from_cx(pair, where: str) -> complex:
    if not (isinstance(pair, (list, tuple)) and len(pair) == 2):
        raise InputError(f"{where}: complex numbers must be [re, im], got {pair!r}")
    try:
        return complex(float(pair[0]), float(pair[1]))
    except (TypeError, ValueError) as exc:
        raise InputError(f"{where}: {exc}") from None


def _check_keys(obj, required: set[str], optional: set[str], where: str) -> None:
    if not isinstance(obj, dict):
        raise InputError(f"{where}: expected an object, got {type(obj).__name__}")
    missing = required - obj.keys()
    if missing:
        raise InputError(f"{where}: missing keys {sorted(missing)}")
    unknown = obj.keys() - required - optional - {PROVENANCE_KEY}
    if unknown:
        raise InputError(f"{where}: unknown keys {sorted(unknown)}")


def state_to_json(v) -> dict:
    v = np.asarray(v, dtype=complex)
    return {"dim": int(v.size), "amps": [_cx(z) for z in v]}


def state_from_json(obj, where: str = "state") -> np.ndarray:
    _check_keys(obj, {"dim", "amps"}, set(), where)
    amps = obj["amps"]
    if not isinstance(amps, list) or len(amps) != obj["dim"]:
        raise InputError(f"{where}: 'amps' must list exactly dim={obj['dim']} entries")
    return np.array([_from_cx(z, f"{where}.amps[{i}]") for i, z in enumerate(amps)])


def rho_to_json(rho) -> dict:
    rho = np.asarray(rho, dtype=complex)
    return {"dim": int(rho.shape[0]), "entries": [[_cx(z) for z in row] for row in rho]}


def rho_from_json(obj, where: str = "rho") -> np.ndarray:
    _check_keys(obj, {"dim", "entries"}, set(), where)
    dim = obj["dim"]
    rows = obj["entries"]
    if not isinstance(rows, list) or len(rows) != dim or any(
        not isinstance(r, list) or len(r) != dim for r in rows
    ):
        raise InputError(f"{where}: 'entries' must be a {dim}x{dim} array")
    return np.array(
        [[_from_cx(z, f"{where}.entries[{i}][{j}]") for j, z in enumerate(r)] for i, r in enumerate(rows)]
    )


def config_to_json(cfg: ProtocolConfig) -> dict:
    return {
        "gamma": cfg.gamma,
        "steps": [
            {"epsilon": _cx(s.epsilon), "g_tau": s.g_tau, "relax_duration": s.relax_duration}
            for s in cfg.steps
        ],
        "target": state_to_json(cfg.target),
    }


def config_from_json(obj, where: str = "config") -> ProtocolConfig:
    _check_keys(obj, {"gamma", "steps", "target"}, set(), where)
    steps = []
    if not isinstance(obj["steps"], list):
        raise InputError(f"{where}.steps must be a list")
    for i, s in enumerate(obj["steps"]):
        loc = f"{where}.steps[{i}]"
        _check_keys(s, {"epsilon", "g_tau"}, {"relax_duration"}, loc)
        try:
            steps.append(
                AtomStep(
                    _from_cx(s["epsilon"], loc + ".epsilon"),
                    float(s["g_tau"]),
                    float(s.get("relax_duration", 0.0)),
                )
            )
        except ValueError as exc:
            raise InputError(f"{loc}: {exc}") from None
    target = state_from_json(obj["target"], where + ".target")
    try:
        return ProtocolConfig(tuple(steps), float(obj["gamma"]), target)
    except ValueError as exc:
        raise InputError(f"{where}: {exc}") from None


def result_to_json(res: EngineerResult) -> dict:
    return {
        "rho": rho_to_json(res.rho),
        "step_probabilities": list(res.step_probabilities),
        "total_probability": res.total_probability,
        "fidelity": res.fidelity,
        "rate": res.rate,
    }


def load_json(path) -> dict:
    """Read a JSON file, turning syntax errors into :class:`InputError` with line context."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror}") from None
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        lines = text.splitlines()
        line = lines[exc.lineno - 1] if 0 < exc.lineno <= len(lines) else ""
        raise InputError(
            f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}\n    {line}\n    {' ' * (exc.colno - 1)}^"
        ) from None


def dump_json(obj: dict, path, provenance: dict | None = None) -> None:
    out = dict(obj)
    if provenance is not None:
        out[PROVENANCE_KEY] = provenance
    Path(path).write_text(json.dumps(out, indent=2) + "\n")
