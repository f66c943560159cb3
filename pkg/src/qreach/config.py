"""YAML run configuration: schema validation with line-numbered diagnostics.

A configuration is one YAML mapping::

    schema_version: 1
    experiment: fig1a            # experiment runs only
    params: {u_bar: [0, 1, 5]}   # grid overrides
    simulation: {dt: 0.002, n_traj: 300, seed: 7}
    system: {...}                # bound / simulate / custom
    target: {...}
    output: {dir: out}

Grids are a number, a list of numbers, or ``{start, stop, num, endpoint}``.
Matrices are nested lists whose entries are numbers or complex literals
such as ``"0.5-1j"``.
"""
from __future__ import annotations

from typing import Any

import jsonschema
import numpy as np
import yaml

from . import models
from . import quantum_core as qc
from .bound import HamiltonianTerm, SystemSpec
from .errors import ConfigError

SCHEMA_VERSION = 1

_number = {"type": "number"}
_nonneg = {"type": "number", "minimum": 0}
_range = {
    "type": "object",
    "properties": {"start": _number, "stop": _number,
                   "num": {"type": "integer", "minimum": 1}, "endpoint": {"type": "boolean"}},
    "required": ["start", "stop", "num"],
    "additionalProperties": False,
}
_grid = {"anyOf": [_number, {"type": "array", "items": _number, "minItems": 1}, _range]}
_nonneg_range = dict(_range, properties=dict(_range["properties"], start=_nonneg, stop=_nonneg))
_nonneg_grid = {"anyOf": [_nonneg, {"type": "array", "items": _nonneg, "minItems": 1},
                          _nonneg_range]}
_entry = {"anyOf": [_number, {"type": "string"}]}
_matrix = {"type": "array", "minItems": 1,
           "items": {"type": "array", "minItems": 1, "items": _entry}}
_vector = {"type": "array", "minItems": 1, "items": _entry}

_state = {
    "anyOf": [
        _vector,
        _matrix,
        {"type": "object", "required": ["type"],
         "properties": {
             "type": {"enum": ["qubit", "qutrit", "dicke", "fock", "ghz", "plus", "bell",
                               "basis", "maximally_mixed"]},
             "theta": _number, "phi": _number, "l": _number, "m": _number,
             "n": {"type": "integer", "minimum": 0}, "dim": {"type": "integer", "minimum": 1},
             "N": {"type": "integer", "minimum": 1}, "index": {"type": "integer", "minimum": 0},
             "name": {"enum": ["phi_plus", "phi_minus", "psi_plus", "psi_minus"]},
             "basis": {"enum": ["product", "dicke"]}},
         "additionalProperties": False},
    ]
}

_system = {
    "type": "object",
    "properties": {
        "model": {"enum": ["qubit", "qutrit", "dicke", "fock", "bell_collective", "bell_local",
                           "dephasing"]},
        "kappa": _nonneg, "gamma": _nonneg, "u_bar": _nonneg,
        "l": {"type": "number", "minimum": 0}, "dim": {"type": "integer", "minimum": 2},
        "N": {"type": "integer", "minimum": 1}, "basis": {"enum": ["product", "dicke"]},
        "hamiltonians": {"type": "array", "items": {
            "type": "object", "required": ["matrix"],
            "properties": {"matrix": _matrix, "u_max": _nonneg, "fixed": {"type": "boolean"}},
            "additionalProperties": False}},
        "decoherence_ops": {"type": "array", "items": _matrix},
        "measurement_ops": {"type": "array", "items": _matrix},
        "truncation_levels": {"type": "integer", "minimum": 0},
    },
    "additionalProperties": False,
}

SCHEMA = {
    "type": "object",
    "required": ["schema_version"],
    "properties": {
        "schema_version": {"const": SCHEMA_VERSION},
        "experiment": {"enum": ["fig1a", "fig1b", "fig1c", "fig2a", "fig2b", "fig3a", "fig3b",
                                "bell", "asymptotics", "custom"]},
        "params": {
            "type": "object",
            "properties": {
                "theta": _grid, "phi": _grid, "m": _grid, "l": _grid, "n": _grid, "N": _grid,
                "kappa": _nonneg_grid, "gamma": _nonneg_grid, "u_bar": _nonneg_grid,
                "U": _nonneg_grid, "beta": _grid,
                "engine_max_N": {"type": "integer", "minimum": 0},
            },
            "additionalProperties": False,
        },
        "simulation": {
            "type": "object",
            "properties": {
                "method": {"enum": ["rk4", "euler_maruyama", "kraus"]},
                "dt": {"type": "number", "exclusiveMinimum": 0},
                "t_final": {"type": "number", "exclusiveMinimum": 0},
                "n_traj": {"type": "integer", "minimum": 1},
                "seed": {"type": "integer", "minimum": 0, "maximum": 2 ** 64 - 1},
                "record_every": {"type": "integer", "minimum": 1},
                "renormalize_every": {"type": "integer", "minimum": 1},
                "alpha": {"type": "number", "exclusiveMinimum": 0},
                "beta": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
                "feedback": {"type": "boolean"},
                "controls": {"type": "array", "items": _number},
                "emit_records": {"type": "boolean"},
            },
            "additionalProperties": False,
        },
        "system": _system,
        "target": _state,
        "targets": {"type": "array", "items": _state, "minItems": 1},
        "initial_state": _state,
        "output": {
            "type": "object",
            "properties": {"dir": {"type": "string"}, "prefix": {"type": "string"}},
            "additionalProperties": False,
        },
    },
    "additionalProperties": False,
}


def _line_map(node, path=(), out=None):
    """Map key paths in a composed YAML tree to 1-based line numbers."""
    if out is None:
        out = {}
    out[path] = node.start_mark.line + 1
    if isinstance(node, yaml.MappingNode):
        for k, v in node.value:
            _line_map(v, path + (k.value,), out)
            out[path + (k.value,)] = k.start_mark.line + 1
    elif isinstance(node, yaml.SequenceNode):
        for i, v in enumerate(node.value):
            _line_map(v, path + (i,), out)
    return out


class Config(dict):
    """Validated configuration mapping; ``line(path)`` locates a field in the source."""

    def __init__(self, data, lines=None, source="<config>"):
        super().__init__(data)
        self.lines = lines or {}
        self.source = source

    def line(self, *path) -> int | None:
        while path:
            if path in self.lines:
                return self.lines[path]
            path = path[:-1]
        return self.lines.get(())

    def error(self, message, *path):
        field = ".".join(str(p) for p in path) or None
        return ConfigError(message, field=field, line=self.line(*path))


def _schema_error(err, cfg: "Config"):
    # for anyOf failures best_match descends to the most relevant sub-error
    best = jsonschema.exceptions.best_match([err])
    return cfg.error(best.message, *best.absolute_path)


def parse_config(text: str, source: str = "<config>") -> Config:
    """Parse and validate YAML text, raising ``ConfigError`` with field and line."""
    try:
        node = yaml.compose(text)
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        raise ConfigError(f"invalid YAML: {getattr(exc, 'problem', exc)}",
                          line=mark.line + 1 if mark else None) from None
    if not isinstance(data, dict):
        raise ConfigError("configuration must be a YAML mapping", line=1)
    cfg = Config(data, _line_map(node), source)
    errors = list(jsonschema.Draft202012Validator(SCHEMA).iter_errors(data))
    if errors:
        # deepest first, ties broken by message for stable diagnostics
        raise _schema_error(max(errors, key=lambda e: (len(e.absolute_path), e.message)), cfg)
    return cfg


def load_config(path) -> Config:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from None
    return parse_config(text, str(path))


def expand_grid(value) -> np.ndarray:
    """Number, list or ``{start, stop, num, endpoint}`` to a 1-D float array."""
    if isinstance(value, dict):
        return np.linspace(value["start"], value["stop"], value["num"],
                           endpoint=value.get("endpoint", True))
    return np.atleast_1d(np.asarray(value, dtype=float))


def _entry_value(x):
    if isinstance(x, str):
        try:
            return complex(x.replace(" ", ""))
        except ValueError:
            raise ValueError(f"not a complex number: {x!r}") from None
    return x


def parse_matrix(rows) -> np.ndarray:
    widths = {len(r) for r in rows}
    if len(widths) != 1:
        raise ValueError("matrix rows have differing lengths")
    return np.array([[_entry_value(x) for x in r] for r in rows], dtype=complex)


def build_system(cfg: Config, key: str = "system") -> SystemSpec:
    """Construct the ``SystemSpec`` described by ``cfg[key]``."""
    sysd = cfg.get(key)
    if sysd is None:
        raise cfg.error(f"missing '{key}' section", key)
    model = sysd.get("model")
    kappa, gamma, u_bar = (sysd.get(k, 0.0) for k in ("kappa", "gamma", "u_bar"))
    try:
        if model is None:
            if not any(k in sysd for k in ("hamiltonians", "decoherence_ops", "measurement_ops")):
                raise cfg.error("system needs a 'model' or explicit operators", key)
            hams = [HamiltonianTerm(parse_matrix(h["matrix"]), h.get("u_max", 0.0),
                                    h.get("fixed", False)) for h in sysd.get("hamiltonians", [])]
            return SystemSpec(hams,
                              [parse_matrix(m) for m in sysd.get("decoherence_ops", [])],
                              [parse_matrix(m) for m in sysd.get("measurement_ops", [])],
                              sysd.get("truncation_levels", 0))
        if model == "qubit":
            return models.qubit_system(kappa, gamma, u_bar)
        if model == "qutrit":
            return models.qutrit_system(kappa, gamma, u_bar)
        if model == "dicke":
            if "l" not in sysd:
                raise cfg.error("dicke model needs 'l'", key)
            return models.dicke_system(sysd["l"], kappa, gamma, u_bar)
        if model == "fock":
            if "dim" not in sysd:
                raise cfg.error("fock model needs 'dim'", key)
            return models.fock_system(sysd["dim"], kappa, gamma, u_bar)
        if model == "bell_collective":
            return models.bell_collective_system(gamma, u_bar=u_bar)
        if model == "bell_local":
            return models.bell_local_system(gamma, u_bar=u_bar)
        if "N" not in sysd:
            raise cfg.error("dephasing model needs 'N'", key)
        return models.dephasing_system(sysd["N"], gamma, u_bar=u_bar, basis=sysd.get("basis", "dicke"))
    except ConfigError:
        raise
    except ValueError as exc:
        raise cfg.error(str(exc), key) from None


def build_state(cfg: Config, key: str, index: int | None = None, density: bool = False):
    """Vector (or density matrix when ``density``) described at ``cfg[key]`` or ``cfg[key][index]``."""
    spec = cfg[key] if index is None else cfg[key][index]
    path = (key,) if index is None else (key, index)
    try:
        if isinstance(spec, list):
            if spec and isinstance(spec[0], list):
                rho = parse_matrix(spec)
                if not density:
                    raise ValueError("a pure state is required here")
                return qc.as_density(rho)
            psi = qc.as_state(np.array([_entry_value(x) for x in spec], dtype=complex))
        else:
            kind = spec["type"]
            get = spec.get
            if kind == "maximally_mixed":
                if not density:
                    raise ValueError("a pure state is required here")
                return qc.maximally_mixed(spec["dim"])
            if kind == "qubit":
                psi = qc.qubit_target(get("theta", 0.0), get("phi", 0.0))
            elif kind == "qutrit":
                psi = qc.qutrit_target(get("theta", 0.0), get("phi", 0.0))
            elif kind == "dicke":
                psi = qc.dicke_state(spec["l"], spec["m"])
            elif kind == "fock":
                psi = qc.fock_state(spec["n"], spec["dim"])
            elif kind == "ghz":
                psi = qc.ghz_state(spec["N"], get("basis", "product"))
            elif kind == "plus":
                psi = qc.plus_product_state(spec["N"], get("basis", "product"))
            elif kind == "bell":
                psi = qc.bell_states()[spec["name"]]
            else:
                psi = qc.basis_state(spec["index"], spec["dim"])
    except KeyError as exc:
        raise cfg.error(f"state is missing field {exc}", *path) from None
    except ValueError as exc:
        raise cfg.error(str(exc), *path) from None
    return qc.projector(psi) if density else psi


def require_section(cfg: Config, key: str):
    if key not in cfg:
        raise cfg.error(f"missing '{key}' section", key)
    return cfg[key]


def canonical(data: Any):
    """Deterministic plain-data form used for config hashing."""
    if isinstance(data, dict):
        return {str(k): canonical(v) for k, v in sorted(data.items())}
    if isinstance(data, (list, tuple)):
        return [canonical(v) for v in data]
    if isinstance(data, np.ndarray):
        return canonical(data.tolist())
    if isinstance(data, (np.floating, float)):
        return float(data)
    if isinstance(data, (np.integer,)):
        return int(data)
    if isinstance(data, complex):
        return [data.real, data.imag]
    return data
