"""Run-configuration documents: schema, parsing and geometry construction.

A config is a single JSON object::

    {
      "geometry":    {"dimension": 1, "bounds": [[0, 100]]},
      "tiling":      {"kind": "singletons"},
      "bipartition": {"boxes": [[[45, 55]]]},
      "betas":       ["all-ground", "all-thermal(1)", "alternating(1)"],
      "time_grid":   {"t_max": 20, "n_steps": 41, "include_zero": true},
      "disorder":    {"k_max": 1.0, "master_seed": 1, "n_realizations": 200},
      "compute":     {"upsilon_route": false, "bounds": false, "efc": false},
      "alpha": 0.25,
      "efc":         {"s": 0.5, "kind": "singular", "distance_range": [2, 30]},
      "output":      {"prefix": "run"}
    }

Inverse temperatures are numbers or the string ``"inf"``.
"""

from __future__ import annotations

import copy
import json
import math
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import jsonschema
import numpy as np

from . import lattice as lat
from .errors import ConfigurationError, InvalidParameterError
from .gaussian import INFINITY

_BETA_VALUE = {"oneOf": [{"type": "number", "exclusiveMinimum": 0}, {"type": "string", "enum": ["inf", "Infinity"]}]}
_INTERVAL = {"type": "array", "items": {"type": "integer"}, "minItems": 2, "maxItems": 2}
_BOX = {"type": "array", "items": _INTERVAL, "minItems": 1}

SCHEMA: dict[str, Any] = {
    "type": "object",
    "required": ["geometry", "tiling", "bipartition", "time_grid", "disorder"],
    "properties": {
        "geometry": {
            "type": "object",
            "required": ["dimension", "bounds"],
            "properties": {"dimension": {"type": "integer", "minimum": 1}, "bounds": _BOX},
            "additionalProperties": False,
        },
        "tiling": {
            "type": "object",
            "required": ["kind"],
            "properties": {
                "kind": {"enum": ["single", "singletons", "slabs", "blocks", "crafted", "boxes", "random"]},
                "axis": {"type": "integer", "minimum": 0},
                "width": {"type": "integer", "minimum": 1},
                "widths": {"type": "array", "items": {"type": "integer", "minimum": 1}},
                "boxes": {"type": "array", "items": _BOX},
                "box": _BOX,
                "n_cuts": {"type": "integer", "minimum": 0},
                "seed": {"type": "integer", "minimum": 0},
            },
            "additionalProperties": False,
        },
        "bipartition": {
            "type": "object",
            "properties": {
                "boxes": {"type": "array", "items": _BOX, "minItems": 1},
                "sites": {"type": "array", "items": {"type": "array", "items": {"type": "integer"}}, "minItems": 1},
            },
            "minProperties": 1,
            "maxProperties": 1,
            "additionalProperties": False,
        },
        "betas": {
            "type": "array",
            "minItems": 1,
            "items": {"oneOf": [{"type": "string"}, {"type": "array", "items": _BETA_VALUE, "minItems": 1}]},
        },
        "time_grid": {
            "type": "object",
            "required": ["t_max", "n_steps"],
            "properties": {
                "t_max": {"type": "number", "minimum": 0},
                "n_steps": {"type": "integer", "minimum": 1},
                "include_zero": {"type": "boolean"},
            },
            "additionalProperties": False,
        },
        "disorder": {
            "type": "object",
            "required": ["k_max", "master_seed", "n_realizations"],
            "properties": {
                "k_max": {"type": "number", "exclusiveMinimum": 0},
                "master_seed": {"type": "integer", "minimum": 0},
                "n_realizations": {"type": "integer", "minimum": 1},
                "distribution": {"enum": ["uniform", "truncated-exponential"]},
                "rate": {"type": "number", "exclusiveMinimum": 0},
            },
            "additionalProperties": False,
        },
        "compute": {
            "type": "object",
            "properties": {
                "upsilon_route": {"type": "boolean"},
                "bounds": {"type": "boolean"},
                "efc": {"type": "boolean"},
            },
            "additionalProperties": False,
        },
        "alpha": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
        "efc": {
            "type": "object",
            "properties": {
                "s": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
                "kind": {"enum": ["singular", "plain", "regular"]},
                "distance_range": _INTERVAL,
                "n_realizations": {"type": "integer", "minimum": 2},
                "C": {"type": "number", "exclusiveMinimum": 0},
                "eta": {"type": "number", "exclusiveMinimum": 0},
            },
            "additionalProperties": False,
        },
        "workers": {"type": "integer", "minimum": 1},
        "output": {"type": "object", "properties": {"prefix": {"type": "string"}}},
        "scan": {"type": "object", "properties": {"rows": {"type": "array", "minItems": 1, "items": {"type": "object"}}}},
        "validate": {
            "type": "object",
            "properties": {
                "n_instances": {"type": "integer", "minimum": 1},
                "seed": {"type": "integer", "minimum": 0},
                "max_sites": {"type": "integer", "minimum": 2},
                "include_config": {"type": "boolean"},
                "inject_fault": {"enum": ["partial_transpose_sign"]},
            },
            "additionalProperties": False,
        },
    },
    "additionalProperties": False,
}

DEFAULT_BETAS = ("all-ground", "all-thermal(1)", "alternating(1)")

_PRESET_RE = re.compile(r"^(all-ground|all-thermal|alternating)(?:\(([^)]*)\))?$")


def parse_beta(value) -> float:
    if isinstance(value, str):
        if value.strip().lower() in ("inf", "infinity"):
            return INFINITY
        try:
            value = float(value)
        except ValueError:
            raise InvalidParameterError(f"unrecognised inverse temperature {value!r}") from None
    value = float(value)
    if math.isnan(value):
        raise InvalidParameterError("inverse temperature is NaN")
    if not value > 0:
        raise InvalidParameterError(f"inverse temperatures must be positive, got {value}")
    return value


@dataclass(frozen=True)
class BetaPreset:
    """A rule assigning one inverse temperature to each tile."""

    label: str
    kind: str
    beta: float = 1.0
    values: tuple = ()

    def resolve(self, M: int) -> tuple[float, ...]:
        if self.kind == "all-ground":
            return (INFINITY,) * M
        if self.kind == "all-thermal":
            return (self.beta,) * M
        if self.kind == "alternating":
            return tuple(INFINITY if m % 2 == 0 else self.beta for m in range(M))
        if len(self.values) != M:
            raise ConfigurationError(f"beta list {self.label!r} has {len(self.values)} entries but the tiling has {M} tiles")
        return self.values


def parse_beta_preset(entry) -> BetaPreset:
    if isinstance(entry, (list, tuple)):
        values = tuple(parse_beta(v) for v in entry)
        label = "custom[" + ",".join("inf" if math.isinf(v) else f"{v:g}" for v in values) + "]"
        return BetaPreset(label, "custom", values=values)
    m = _PRESET_RE.match(str(entry).strip())
    if not m:
        raise ConfigurationError(f"unknown beta preset {entry!r}")
    kind, arg = m.group(1), m.group(2)
    if kind == "all-ground":
        if arg:
            raise ConfigurationError("all-ground takes no argument")
        return BetaPreset("all-ground", kind, INFINITY)
    beta = parse_beta(arg) if arg else 1.0
    return BetaPreset(f"{kind}({'inf' if math.isinf(beta) else format(beta, 'g')})", kind, beta)


@dataclass(frozen=True)
class TimeGrid:
    t_max: float
    n_steps: int
    include_zero: bool = True

    def times(self) -> np.ndarray:
        if self.include_zero:
            return np.linspace(0.0, self.t_max, self.n_steps)
        return np.linspace(self.t_max / self.n_steps, self.t_max, self.n_steps)


@dataclass(frozen=True)
class Geometry:
    lattice: lat.Lattice
    tiling: lat.Tiling
    bipartition: lat.Bipartition
    dual: lat.DualGraph


@dataclass
class QuenchConfig:
    dimension: int
    bounds: tuple
    tiling: dict
    bipartition: dict
    betas: tuple[BetaPreset, ...]
    time_grid: TimeGrid
    k_max: float
    master_seed: int
    n_realizations: int
    distribution: str = "uniform"
    rate: float = 1.0
    compute_upsilon_route: bool = False
    compute_bounds: bool = False
    compute_efc: bool = False
    alpha: float | None = None
    efc: dict = field(default_factory=dict)
    workers: int | None = None
    raw: dict = field(default_factory=dict, repr=False)

    @property
    def s(self) -> float:
        return float(self.efc.get("s", 0.5))

    @property
    def bound_alpha(self) -> float:
        return float(self.alpha) if self.alpha is not None else self.s / 2.0

    @classmethod
    def from_dict(cls, doc: dict) -> "QuenchConfig":
        validate_document(doc)
        g, d, c = doc["geometry"], doc["disorder"], doc.get("compute", {})
        tg = doc["time_grid"]
        cfg = cls(
            dimension=int(g["dimension"]),
            bounds=tuple(tuple(b) for b in g["bounds"]),
            tiling=dict(doc["tiling"]),
            bipartition=dict(doc["bipartition"]),
            betas=tuple(parse_beta_preset(b) for b in doc.get("betas", DEFAULT_BETAS)),
            time_grid=TimeGrid(float(tg["t_max"]), int(tg["n_steps"]), bool(tg.get("include_zero", True))),
            k_max=float(d["k_max"]),
            master_seed=int(d["master_seed"]),
            n_realizations=int(d["n_realizations"]),
            distribution=d.get("distribution", "uniform"),
            rate=float(d.get("rate", 1.0)),
            compute_upsilon_route=bool(c.get("upsilon_route", False)),
            compute_bounds=bool(c.get("bounds", False)),
            compute_efc=bool(c.get("efc", False)),
            alpha=doc.get("alpha"),
            efc=dict(doc.get("efc", {})),
            workers=doc.get("workers"),
            raw=copy.deepcopy(doc),
        )
        cfg.build_geometry()  # fail fast on geometric inconsistencies
        return cfg

    def build_geometry(self) -> Geometry:
        try:
            lattice = lat.build_box(self.dimension, self.bounds)
            tiling = build_tiling_from_section(lattice, self.tiling, self.bipartition)
            bp = build_bipartition_from_section(lattice, self.bipartition)
        except (lat.GeometryError, KeyError, TypeError) as exc:
            raise ConfigurationError(f"invalid geometry: {exc}") from exc
        return Geometry(lattice, tiling, bp, lat.dual_graph(tiling))

    def ensemble_key(self) -> str:
        """Everything that determines the disorder ensemble and the state, but not the cut."""
        doc = copy.deepcopy(self.raw)
        doc.pop("bipartition", None)
        doc.pop("output", None)
        doc.pop("workers", None)
        if self.tiling.get("kind") == "crafted":
            doc["bipartition"] = self.raw.get("bipartition")
        return json.dumps(doc, sort_keys=True)


def build_tiling_from_section(lattice: lat.Lattice, section: dict, bipartition: dict | None = None) -> lat.Tiling:
    kind = section["kind"]
    if kind == "single":
        return lat.single_tile(lattice)
    if kind == "singletons":
        return lat.singleton_tiling(lattice)
    if kind == "slabs":
        return lat.slab_tiling(lattice, section.get("axis", 0), section.get("width", 1))
    if kind == "blocks":
        return lat.block_tiling(lattice, section["widths"])
    if kind == "boxes":
        return lat.build_tiling(lattice, section["boxes"])
    if kind == "random":
        rng = np.random.default_rng(section.get("seed", 0))
        return lat.random_box_tiling(lattice, rng, section.get("n_cuts", 4))
    if kind == "crafted":
        box = section.get("box")
        if box is None:
            boxes = (bipartition or {}).get("boxes")
            if not boxes or len(boxes) != 1:
                raise ConfigurationError("crafted tiling needs a 'box' or a single-box bipartition")
            box = boxes[0]
        return lat.crafted_tiling(lattice, box)
    raise ConfigurationError(f"unknown tiling kind {kind!r}")


def build_bipartition_from_section(lattice: lat.Lattice, section: dict) -> lat.Bipartition:
    if "boxes" in section:
        return lat.box_bipartition(lattice, section["boxes"])
    return lat.boundary(lattice, [tuple(s) for s in section["sites"]])


def validate_document(doc) -> None:
    if not isinstance(doc, dict):
        raise ConfigurationError("config must be a JSON object")
    validator = jsonschema.Draft7Validator(SCHEMA)
    errors = sorted(validator.iter_errors(doc), key=lambda e: list(e.absolute_path))
    if errors:
        lines = []
        for e in errors:
            where = "/".join(str(p) for p in e.absolute_path) or "<root>"
            lines.append(f"{where}: {e.message}")
        raise ConfigurationError("config does not match the schema:\n  " + "\n  ".join(lines))
    bounds = doc["geometry"]["bounds"]
    if len(bounds) != doc["geometry"]["dimension"]:
        raise ConfigurationError("geometry/bounds: number of intervals must equal dimension")
    try:
        for b in doc.get("betas", []):
            parse_beta_preset(b)
    except InvalidParameterError as exc:
        raise ConfigurationError(f"betas: {exc}") from exc


def load_document(path) -> dict:
    path = Path(path)
    if not path.is_file():
        raise ConfigurationError(f"config file not found: {path}")
    text = path.read_text()
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"{path}: invalid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc


def deep_merge(base: dict, override: dict) -> dict:
    out = copy.deepcopy(base)
    for key, value in override.items():
        if key in out and isinstance(out[key], dict) and isinstance(value, dict):
            out[key] = deep_merge(out[key], value)
        else:
            out[key] = copy.deepcopy(value)
    return out


def scan_documents(doc: dict) -> list[dict]:
    """Expand ``scan.rows`` overrides against the base document."""
    rows = doc.get("scan", {}).get("rows")
    base = {k: v for k, v in doc.items() if k != "scan"}
    if not rows:
        raise ConfigurationError("scan config needs a non-empty 'scan.rows' list")
    return [deep_merge(base, row) for row in rows]
