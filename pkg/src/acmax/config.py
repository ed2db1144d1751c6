"""Run configuration: parsing, validation, and round-trip emission.

Configs are TOML files (JSON accepted as an alternative, chosen by file
extension) with tables ``[geometry]``, ``[data]``, ``[solver]`` and
``[outputs]`` plus a top-level ``seed``.  Unknown keys are rejected so a
config is always a faithful record of an experiment.
"""

from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

try:
    import tomllib  # Python >= 3.11
except ModuleNotFoundError:  # pragma: no cover - version dependent
    import tomli as tomllib

from .errors import ConfigError
from .geometries import GeometrySpec
from .solve import SolveOptions

__all__ = ["RunConfig", "parse_config", "emit_config", "config_to_dict"]

_DATA_TYPES = ("zero", "constant", "trig", "manufactured", "file")


@dataclass
class DataSpec:
    """Choice of right-hand side F."""

    type: str = "zero"
    constant: float = 0.0
    # trig terms: list of {k: multi-index, amp: float, kind: cos|sin}
    terms: list = field(default_factory=list)
    # manufactured reference potential, same term schema
    phi_star: list = field(default_factory=list)
    path: str = ""

    def __post_init__(self):
        if self.type not in _DATA_TYPES:
            raise ConfigError(f"unknown data type {self.type!r}; "
                              f"expected one of {_DATA_TYPES}")


@dataclass
class OutputSpec:
    directory: str = "out"
    formats: list = field(default_factory=lambda: ["json", "binary-fields"])

    def __post_init__(self):
        allowed = {"json", "csv", "binary-fields"}
        for fmt in self.formats:
            if fmt not in allowed:
                raise ConfigError(f"unknown output format {fmt!r}")


@dataclass
class RunConfig:
    geometry: GeometrySpec
    data: DataSpec = field(default_factory=DataSpec)
    solver: SolveOptions = field(default_factory=SolveOptions)
    outputs: OutputSpec = field(default_factory=OutputSpec)
    seed: int = 0


def _build(cls, table: dict, context: str):
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = set(table) - names
    if unknown:
        raise ConfigError(f"unknown key(s) {sorted(unknown)} in [{context}]")
    try:
        return cls(**table)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"[{context}]: {exc}") from exc


def config_from_dict(raw: dict) -> RunConfig:
    raw = dict(raw)
    unknown = set(raw) - {"geometry", "data", "solver", "outputs", "seed"}
    if unknown:
        raise ConfigError(f"unknown top-level key(s) {sorted(unknown)}")
    if "geometry" not in raw:
        raise ConfigError("config must contain a [geometry] table")
    geometry = _build(GeometrySpec, raw["geometry"], "geometry")
    data = _build(DataSpec, raw.get("data", {}), "data")
    solver = _build(SolveOptions, raw.get("solver", {}), "solver")
    outputs = _build(OutputSpec, raw.get("outputs", {}), "outputs")
    seed = raw.get("seed", 0)
    if not isinstance(seed, int):
        raise ConfigError("seed must be an integer")
    return RunConfig(geometry, data, solver, outputs, seed)


def parse_config(path) -> RunConfig:
    """Parse a TOML (or JSON) config file into a validated RunConfig."""
    path = Path(path)
    try:
        text = path.read_bytes()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    if path.suffix == ".json":
        try:
            raw = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"invalid JSON in {path}: {exc}") from exc
    else:
        try:
            raw = tomllib.loads(text.decode())
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"invalid TOML in {path}: {exc}") from exc
    return config_from_dict(raw)


def config_to_dict(cfg: RunConfig) -> dict:
    """Plain-dict form of a config (the emit half of the round trip)."""
    return {
        "geometry": dataclasses.asdict(cfg.geometry),
        "data": dataclasses.asdict(cfg.data),
        "solver": dataclasses.asdict(cfg.solver),
        "outputs": dataclasses.asdict(cfg.outputs),
        "seed": cfg.seed,
    }


def emit_config(cfg: RunConfig, path) -> None:
    """Write a config back to disk as JSON (parse(emit(c)) == c)."""
    path = Path(path)
    path.write_text(json.dumps(config_to_dict(cfg), indent=2, sort_keys=True) + "\n")
