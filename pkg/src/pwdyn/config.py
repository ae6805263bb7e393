"""Run configuration: JSON schema, validation and construction of engine inputs."""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import jsonschema
import numpy as np

from pwdyn import blocks, qstate
from pwdyn.engines.process import ProcessSpec
from pwdyn.quadrature import Grid
from pwdyn.renewal import WaitingTimeDist

SCHEMA_VERSION = 1

_POS = {"type": "number", "exclusiveMinimum": 0}
_MATRIX = {
    "oneOf": [
        {"type": "string", "enum": sorted(blocks.OPERATORS) + ["zero"]},
        {"type": "array", "items": {"type": "array", "items": {"type": "number"}}},
        {"type": "object", "additionalProperties": False, "required": ["re"],
         "properties": {"re": {"type": "array"}, "im": {"type": "array"}}},
    ]
}


def _obj(required, props):
    return {"type": "object", "additionalProperties": False, "required": required, "properties": props}


SCHEMA = _obj(["schema_version", "process", "grid", "engine"], {
    "schema_version": {"const": SCHEMA_VERSION},
    "process": _obj(["map", "channel", "waiting_time"], {
        "map": {"oneOf": [
            _obj(["kind"], {"kind": {"const": "identity"}}),
            _obj(["kind", "lambda"], {"kind": {"const": "dephasing"}, "lambda": _POS,
                                      "profile": {"const": "cos"}}),
            _obj(["kind", "lambda", "gamma"], {"kind": {"const": "damping"}, "lambda": _POS, "gamma": _POS}),
            _obj(["kind"], {"kind": {"const": "semigroup"}, "hamiltonian": _MATRIX,
                            "jumps": {"type": "array", "items": _obj(["operator"], {
                                "operator": _MATRIX, "rate": {"type": "number", "minimum": 0}})}}),
        ]},
        "channel": {"oneOf": [
            _obj(["kind", "index"], {"kind": {"const": "pauli"}, "index": {"enum": ["0", "x", "y", "z"]}}),
            _obj(["kind", "operators"], {"kind": {"const": "kraus"},
                                         "operators": {"type": "array", "minItems": 1, "items": _MATRIX}}),
        ]},
        "waiting_time": {"oneOf": [
            _obj(["kind"], {"kind": {"const": "none"}}),
            _obj(["kind", "rate"], {"kind": {"const": "exponential"}, "rate": _POS}),
            _obj(["kind", "stages", "rate"], {"kind": {"const": "erlang"},
                                              "stages": {"type": "integer", "minimum": 1}, "rate": _POS}),
        ]},
    }),
    "grid": _obj(["t_max", "steps"], {"t_max": _POS, "steps": {"type": "integer", "minimum": 2}}),
    "engine": {"oneOf": [
        _obj(["kind"], {"kind": {"enum": ["volterra", "closed_form", "master_equation"]}}),
        _obj(["kind", "n_traj", "seed"], {"kind": {"const": "monte_carlo"},
                                          "n_traj": {"type": "integer", "minimum": 1},
                                          "seed": {"type": "integer", "minimum": 0},
                                          "stride": {"type": "integer", "minimum": 1}}),
    ]},
    "initial_state": {"oneOf": [
        _obj(["bloch"], {"bloch": {"type": "array", "items": {"type": "number"}, "minItems": 3, "maxItems": 3}}),
        _obj(["matrix"], {"matrix": _MATRIX}),
    ]},
    "witness": _obj([], {"n_random": {"type": "integer", "minimum": 0},
                         "seed": {"type": "integer", "minimum": 0},
                         "eps_growth": _POS}),
})


class ConfigError(ValueError):
    """Configuration violates the schema or describes an invalid process."""


def _matrix(value) -> np.ndarray:
    if isinstance(value, str):
        return np.zeros((2, 2), dtype=complex) if value == "zero" else blocks.OPERATORS[value]
    if isinstance(value, dict):
        re = np.asarray(value["re"], dtype=float)
        return re + 1j * np.asarray(value.get("im", np.zeros_like(re)), dtype=float)
    return np.asarray(value, dtype=complex)


@dataclass(frozen=True, eq=False)
class RunConfig:
    raw: dict
    process: ProcessSpec
    engine: dict
    initial_state: np.ndarray | None
    witness: dict

    def echo(self) -> dict:
        return self.raw


def _field(err: jsonschema.ValidationError) -> str:
    path = "/".join(str(p) for p in err.absolute_path)
    return path or "<root>"


def _kind_mismatch(errors) -> bool:
    return any(list(e.relative_path) == ["kind"] for e in errors)


def _resolve(err: jsonschema.ValidationError) -> jsonschema.ValidationError:
    """Descend into the alternative whose ``kind`` matches, so messages name the real field."""
    if err.validator != "oneOf" or not err.context:
        return err
    branches: dict = {}
    for sub in err.context:
        branches.setdefault(sub.relative_schema_path[0], []).append(sub)
    matching = [subs for subs in branches.values() if not _kind_mismatch(subs)]
    if len(matching) == 1:
        return _resolve(jsonschema.exceptions.best_match(matching[0]))
    return err


def validate_raw(raw: dict) -> None:
    validator = jsonschema.Draft202012Validator(SCHEMA)
    errors = sorted(validator.iter_errors(raw), key=lambda e: [str(p) for p in e.absolute_path])
    if errors:
        msgs = []
        for err in map(_resolve, errors):
            msg = f"config field '{_field(err)}': {err.message}"
            if msg not in msgs:
                msgs.append(msg)
        raise ConfigError("; ".join(msgs))


def build_map(spec: dict) -> blocks.TimedMap:
    kind = spec["kind"]
    if kind == "identity":
        return blocks.IdentityMap()
    if kind == "dephasing":
        return blocks.DephasingMap(spec["lambda"])
    if kind == "damping":
        return blocks.DampingMap(spec["lambda"], spec["gamma"])
    jumps = spec.get("jumps", [])
    lind = blocks.LindbladSpec(_matrix(spec.get("hamiltonian", "zero")),
                               tuple(_matrix(j["operator"]) for j in jumps),
                               tuple(float(j.get("rate", 1.0)) for j in jumps))
    return blocks.SemigroupMap(lind)


def build_channel(spec: dict):
    if spec["kind"] == "pauli":
        return blocks.PauliChannel(spec["index"])
    return blocks.KrausChannel(tuple(_matrix(k) for k in spec["operators"]))


def build_waiting_time(spec: dict) -> WaitingTimeDist | None:
    """Waiting-time law; kind "none" means no jumps at all, so Lambda = F."""
    if spec["kind"] == "none":
        return None
    if spec["kind"] == "exponential":
        return WaitingTimeDist.exponential(spec["rate"])
    return WaitingTimeDist.erlang(spec["stages"], spec["rate"])


def build_state(spec: dict) -> np.ndarray:
    if "bloch" in spec:
        x, y, z = spec["bloch"]
        if x * x + y * y + z * z > 1 + 1e-12:
            raise ConfigError("config field 'initial_state/bloch': vector longer than 1")
        return qstate.bloch_state(x, y, z)
    try:
        return qstate.validate_state(_matrix(spec["matrix"]))
    except qstate.InvalidStateError as exc:
        raise ConfigError(f"config field 'initial_state/matrix': {exc}") from exc


def parse_config(raw: dict) -> RunConfig:
    validate_raw(raw)
    proc = raw["process"]
    try:
        F = build_map(proc["map"])
    except (ValueError, KeyError) as exc:
        raise ConfigError(f"config field 'process/map': {exc}") from exc
    try:
        E = build_channel(proc["channel"])
    except (ValueError, KeyError) as exc:
        raise ConfigError(f"config field 'process/channel': {exc}") from exc
    f = build_waiting_time(proc["waiting_time"])
    grid = Grid.from_horizon(raw["grid"]["t_max"], raw["grid"]["steps"])
    try:
        process = ProcessSpec(F, E, f, grid)
    except ValueError as exc:
        raise ConfigError(f"config field 'process': {exc}") from exc
    engine = dict(raw["engine"])
    if engine["kind"] == "monte_carlo":
        engine.setdefault("stride", 1)
        if grid.steps % engine["stride"]:
            raise ConfigError("config field 'engine/stride': must divide grid/steps")
    if engine["kind"] == "closed_form" and not (
            isinstance(F, (blocks.DephasingMap, blocks.DampingMap)) and isinstance(E, blocks.PauliChannel)):
        raise ConfigError("config field 'engine/kind': closed_form needs a dephasing or damping map "
                          "with a Pauli channel")
    rho0 = build_state(raw["initial_state"]) if "initial_state" in raw else None
    if rho0 is not None and rho0.shape[0] != process.dim:
        raise ConfigError("config field 'initial_state': dimension does not match the process")
    witness = {"n_random": 32, "seed": 0, "eps_growth": 1e-9, **raw.get("witness", {})}
    return RunConfig(raw, process, engine, rho0, witness)


def load_config(path) -> RunConfig:
    try:
        raw = json.loads(Path(path).read_text())
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from exc
    return parse_config(raw)
