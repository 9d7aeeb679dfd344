"""JSON configuration schema, validation and atomic output helpers."""

from __future__ import annotations

import csv
import io
import json
import math
import os
import tempfile
from typing import Iterable, Mapping, Sequence

import jsonschema

from .fourier_grid import ContractError, Grid
from .models import SmoothnessClass, noise_from_spec

__all__ = [
    "SCHEMA",
    "ConfigError",
    "validate_config",
    "load_config",
    "class_from_config",
    "noise_from_config",
    "grid_from_config",
    "write_atomic",
    "write_json",
    "emit_plotdata",
    "read_samples",
]

_POS = {"type": "number", "exclusiveMinimum": 0}
_N = {"type": "integer", "minimum": 3}

SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "properties": {
        "class": {
            "type": "object",
            "properties": {"alpha": _POS, "r": _POS, "L": _POS},
            "required": ["alpha", "r", "L"],
            "additionalProperties": False,
        },
        "noise": {
            "type": "object",
            "properties": {
                "kind": {"enum": ["gaussian", "stable", "cauchy", "none"]},
                "sigma": _POS,
                "s": {"type": "number", "exclusiveMinimum": 0, "maximum": 2},
                "c": _POS,
                "scale": _POS,
                "u0": _POS,
                "nd_B": _POS,
                "nd_gamma1": {"type": "number"},
            },
            "required": ["kind"],
            "additionalProperties": False,
            "allOf": [
                {"if": {"properties": {"kind": {"const": "gaussian"}}}, "then": {"required": ["sigma"]}},
                {"if": {"properties": {"kind": {"const": "stable"}}}, "then": {"required": ["s"]}},
            ],
        },
        "target": {
            "type": "object",
            "properties": {
                "kind": {"enum": ["cauchy", "gaussian", "stable"]},
                "scale": _POS,
                "sigma": _POS,
                "r": {"type": "number", "exclusiveMinimum": 0, "maximum": 2},
                "c0": _POS,
            },
            "required": ["kind"],
            "additionalProperties": False,
        },
        "n": _N,
        "n_list": {"type": "array", "items": _N, "minItems": 1},
        "equation": {"enum": ["HSTAR", "HPLUS", "ADAPTIVE", "ADAPTIVE_CRITICAL"]},
        "h": _POS,
        "loss": {"enum": ["pointwise", "l2"]},
        "bandwidth": {
            "type": "object",
            "properties": {
                "rule": {"enum": ["HSTAR", "ADAPTIVE", "ADAPTIVE_CRITICAL", "FIXED"]},
                "h": _POS,
                "A": _POS,
                "alpha0": _POS,
            },
            "required": ["rule"],
            "additionalProperties": False,
        },
        "replications": {"type": "integer", "minimum": 1},
        "eval_points": {"type": "array", "items": {"type": "number"}, "minItems": 1},
        "master_seed": {"type": "integer", "minimum": 0, "maximum": 2**64 - 1},
        "grid": {
            "type": "object",
            "properties": {"n_points": {"type": "integer", "minimum": 8}, "x_max": _POS},
            "additionalProperties": False,
        },
        "lower_bound": {
            "type": "object",
            "properties": {"kind": {"enum": ["pointwise", "l2"]}, "delta": _POS, "D": _POS, "c0": _POS},
            "additionalProperties": False,
        },
        "samples": {"type": "string"},
    },
    "additionalProperties": False,
}

REQUIRED = {
    "bandwidth": ("class", "noise", "n"),
    "rates": ("class", "noise"),
    "bounds": ("class", "noise", "n"),
    "estimate": ("noise",),
    "lowerbound": ("class", "noise"),
    "simulate": ("class", "noise", "target"),
}


class ConfigError(ContractError):
    """Configuration failed validation; the message names the offending field."""


def _field_path(error: jsonschema.ValidationError) -> str:
    path = ".".join(str(p) for p in error.absolute_path)
    if error.validator == "required":
        missing = error.message.split("'")[1]
        path = f"{path}.{missing}" if path else missing
    return path or "<root>"


def validate_config(config: Mapping, subcommand: str) -> None:
    validator = jsonschema.Draft202012Validator(SCHEMA)
    errors = sorted(validator.iter_errors(config), key=lambda e: list(e.absolute_path))
    if errors:
        e = errors[0]
        raise ConfigError(f"{_field_path(e)}: {e.message}")
    for key in REQUIRED.get(subcommand, ()):
        if key not in config:
            raise ConfigError(f"{key}: required for '{subcommand}'")


def load_config(path: str, subcommand: str) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            config = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: not valid JSON ({exc})") from exc
    if not isinstance(config, dict):
        raise ConfigError("<root>: config must be a JSON object")
    validate_config(config, subcommand)
    return config


def class_from_config(config: Mapping) -> SmoothnessClass:
    c = config["class"]
    return SmoothnessClass(float(c["alpha"]), float(c["r"]), float(c["L"]))


def noise_from_config(config: Mapping):
    return noise_from_spec(config["noise"])


def grid_from_config(config: Mapping, default: Grid) -> Grid:
    g = config.get("grid", {})
    return Grid(int(g.get("n_points", default.n_points)), float(g.get("x_max", default.x_max)))


def write_atomic(path: str, text: str) -> None:
    """Write through a temporary file in the target directory, then rename over ``path``."""
    directory = os.path.dirname(os.path.abspath(path))
    try:
        fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=os.path.basename(path))
        try:
            with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
                fh.write(text)
            os.replace(tmp, path)
        except BaseException:
            if os.path.exists(tmp):
                os.unlink(tmp)
            raise
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror or exc}") from exc


def _clean(obj):
    if isinstance(obj, float):
        return obj if math.isfinite(obj) else repr(obj)
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if hasattr(obj, "item") and callable(obj.item):
        return _clean(obj.item())
    return obj


def dumps(obj) -> str:
    return json.dumps(_clean(obj), indent=2, sort_keys=True) + "\n"


def write_json(obj, path) -> None:
    text = dumps(obj)
    if path is None:
        print(text, end="")
    else:
        write_atomic(path, text)


def _format(value) -> str:
    if isinstance(value, bool):
        return str(value).lower()
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        return format(value, ".17g")
    return str(value)


def emit_plotdata(table: Sequence[Mapping], path, columns: Iterable[str] | None = None) -> None:
    """CSV with a header row, 17-significant-digit floats and LF line endings."""
    rows = list(table)
    if not rows:
        raise ContractError("refusing to write an empty table")
    columns = list(columns) if columns is not None else list(rows[0])
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([_format(row[c]) for c in columns])
    if path is None:
        print(buf.getvalue(), end="")
    else:
        write_atomic(path, buf.getvalue())


def read_samples(path: str) -> list[float]:
    """One-column CSV of observations; a non-numeric first line is taken as a header."""
    values = []
    try:
        with open(path, encoding="utf-8", newline="") as fh:
            for i, row in enumerate(csv.reader(fh)):
                if not row or not row[0].strip():
                    continue
                try:
                    values.append(float(row[0]))
                except ValueError:
                    if i == 0:
                        continue
                    raise ConfigError(f"samples: line {i + 1} is not a number: {row[0]!r}")
    except OSError as exc:
        raise ConfigError(f"samples: cannot read {path}: {exc.strerror or exc}") from exc
    if not values:
        raise ConfigError(f"samples: {path} holds no observations")
    return values
