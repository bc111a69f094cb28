"""Run configuration: schema, defaults, validation and resolution."""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import ValidationError
from .grid import SpectralField, TorusGrid, random_vector_field, taylor_green
from .models import FAMILIES, ModelSpec
from .noise import NoiseBasis, build_basis

_SCHEMA = {
    "grid": {"d": int, "n": int, "dealias_fraction": float},
    "model": {"family": str, "nu": float, "passive_kind": str},
    "basis": {"kind": str, "amplitude": float, "eta_kind": str, "eta_amplitude": float,
              "members": list, "eta_members": list},
    "time": {"T": float, "dt": float, "save_stride": int, "scheme": str},
    "seeds": {"master": int, "w": int, "b_base": int},
    "initial": {"kind": str, "seed": int, "kmax": int, "amplitude": float},
    "diagnostics": {"loop": dict, "flavor": str, "n_label": int, "M": int,
                    "m_sizes": list, "sweep": dict, "which": list},
    "output": {"directory": str, "formats": list},
}

_DEFAULTS = {
    "grid": {"dealias_fraction": 2.0 / 3.0},
    "model": {"nu": 0.0, "passive_kind": "oneform"},
    "basis": {"kind": "trig-solenoidal", "amplitude": 0.1, "eta_kind": "none",
              "eta_amplitude": 1.0, "members": None, "eta_members": None},
    "time": {"save_stride": 1, "scheme": "strat_heun"},
    "seeds": {"master": 0, "w": None, "b_base": None},
    "initial": {"kind": "random-solenoidal", "seed": 7, "kmax": 3, "amplitude": 1.0},
    "diagnostics": {"loop": {"kind": "circle", "P": 192, "radius": 1.0},
                    "flavor": "strat", "n_label": 48, "M": 64,
                    "m_sizes": None, "sweep": None, "which": None},
    "output": {"directory": None, "formats": ["csv", "json"]},
}

_REQUIRED = {
    "grid": ("d", "n"),
    "model": ("family",),
    "time": ("T", "dt"),
}


@dataclass
class RunConfig:
    """Fully resolved run configuration."""

    raw: dict

    def section(self, name: str) -> dict:
        return self.raw[name]

    # -- constructed objects ----------------------------------------------
    def grid(self) -> TorusGrid:
        gsec = self.raw["grid"]
        return TorusGrid(gsec["d"], gsec["n"], gsec["dealias_fraction"])

    def basis(self, grid: TorusGrid | None = None) -> NoiseBasis:
        grid = grid if grid is not None else self.grid()
        bsec = self.raw["basis"]
        members = _load_member_fields(grid, bsec["members"])
        eta_members = _load_member_fields(grid, bsec["eta_members"])
        return build_basis(grid, bsec["kind"], bsec["amplitude"], members,
                           bsec["eta_kind"], bsec["eta_amplitude"], eta_members)

    def model(self, grid: TorusGrid | None = None) -> ModelSpec:
        msec = self.raw["model"]
        return ModelSpec(msec["family"], self.basis(grid), nu=msec["nu"],
                         passive_kind=msec["passive_kind"])

    def initial_field(self, grid: TorusGrid) -> SpectralField:
        isec = self.raw["initial"]
        if isec["kind"] == "taylor-green":
            return taylor_green(grid, isec["amplitude"])
        if isec["kind"] == "random-solenoidal":
            return random_vector_field(grid, isec["seed"], kmax=isec["kmax"],
                                       amplitude=isec["amplitude"], solenoidal=True)
        raise ValidationError(f"unknown initial kind {isec['kind']!r}")

    def seeds(self) -> tuple:
        ssec = self.raw["seeds"]
        master = ssec["master"]
        w = ssec["w"] if ssec["w"] is not None else master * 1000 + 1
        b = ssec["b_base"] if ssec["b_base"] is not None else master * 1000 + 2
        return master, w, b

    def canonical_json(self) -> str:
        return json.dumps(self.raw, sort_keys=True, separators=(",", ":"))

    def digest(self) -> str:
        import hashlib

        return hashlib.sha256(self.canonical_json().encode()).hexdigest()[:16]


def _load_member_fields(grid: TorusGrid, entries):
    if entries is None:
        return None
    from .reporting import read_field_dump

    fields = []
    for i, e in enumerate(entries):
        f = read_field_dump(e)
        if f.grid != grid or f.rank != 1:
            raise ValidationError(f"basis member {i} ({e}) does not match the run grid")
        fields.append(f)
    return tuple(fields)


def _coerce(section: str, key: str, value, want):
    if want is float and isinstance(value, int) and not isinstance(value, bool):
        return float(value)
    if want in (int, float) and isinstance(value, bool):
        raise ValidationError(f"{section}.{key}: expected {want.__name__}, got bool")
    if value is not None and not isinstance(value, want):
        raise ValidationError(
            f"{section}.{key}: expected {want.__name__}, got {type(value).__name__}")
    return value


def resolve_config(data: dict) -> RunConfig:
    """Validate raw mapping data, apply defaults, run semantic checks."""
    if not isinstance(data, dict):
        raise ValidationError("config root must be a mapping")
    resolved = {}
    for section, keys in _SCHEMA.items():
        got = data.get(section, {})
        if not isinstance(got, dict):
            raise ValidationError(f"section {section!r} must be a mapping")
        for k in got:
            if k not in keys:
                raise ValidationError(f"unknown key {section}.{k}")
        out = dict(_DEFAULTS.get(section, {}))
        out.update({k: _coerce(section, k, v, keys[k]) for k, v in got.items()})
        for k in _REQUIRED.get(section, ()):
            if k not in out:
                raise ValidationError(f"missing required key {section}.{k}")
        resolved[section] = out
    for section in data:
        if section not in _SCHEMA:
            raise ValidationError(f"unknown section {section!r}")

    msec, tsec = resolved["model"], resolved["time"]
    if msec["family"] not in FAMILIES:
        raise ValidationError(f"model.family must be one of {FAMILIES}")
    if msec["nu"] < 0:
        raise ValidationError("model.nu must be nonnegative")
    if tsec["dt"] <= 0 or tsec["T"] <= 0:
        raise ValidationError("time.T and time.dt must be positive")
    if tsec["scheme"] not in ("strat_heun", "ito_em"):
        raise ValidationError(f"unknown time.scheme {tsec['scheme']!r}")
    n_steps = tsec["T"] / tsec["dt"]
    if abs(round(n_steps) - n_steps) > 1e-9 * max(1.0, n_steps):
        raise ValidationError("time.T must be an integer multiple of time.dt")

    cfg = RunConfig(resolved)
    cfg.grid()       # validates grid block
    cfg.basis()      # validates basis block incl. member solenoidality
    cfg.model()      # validates family/nu/eta consistency
    return cfg


def parse_config(path: str) -> RunConfig:
    """Load and resolve a JSON run configuration file."""
    with open(path, "r", encoding="utf-8") as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as e:
            raise ValidationError(f"config {path}: invalid JSON at line {e.lineno}: {e.msg}")
    return resolve_config(data)
