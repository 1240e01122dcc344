"""Run configuration: a single JSON config file validated against a published
schema before any work starts. Command-line flags override file values.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Union

import jsonschema

from .assets import SourceKind
from .composer import CompositionConfig
from .geometry import CanvasSize

_RANGE2 = {
    "type": "array",
    "items": {"type": "number"},
    "minItems": 2,
    "maxItems": 2,
}
_INT_RANGE2 = {
    "type": "array",
    "items": {"type": "integer"},
    "minItems": 2,
    "maxItems": 2,
}

RUN_CONFIG_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "layerforge run configuration",
    "type": "object",
    "required": ["pools", "out_dir"],
    "additionalProperties": False,
    "properties": {
        "canvas": _INT_RANGE2,
        "seed": {"type": "integer"},
        "count": {"type": "integer", "minimum": 0},
        "workers": {"type": "integer", "minimum": 1},
        "out_dir": {"type": "string"},
        "pools": {
            "type": "object",
            "required": ["base"],
            "additionalProperties": False,
            "properties": {
                "base": {"type": "string"},
                "donor": {"type": "string"},
                "image_crop": {"type": "string"},
                "text": {"type": "string"},
                "foreground_object": {"type": "string"},
            },
        },
        "image_crop_cap": {"type": "integer", "minimum": 1},
        "p_image_crop": {"type": "number", "minimum": 0, "maximum": 1},
        "p_text": {"type": "number", "minimum": 0, "maximum": 1},
        "crop_scale": _RANGE2,
        "text_scale": _RANGE2,
        "fg_scale": _RANGE2,
        "fg_count_range": _INT_RANGE2,
        "remove_range": _INT_RANGE2,
        "donor_count_range": _INT_RANGE2,
        "donor_layers_range": _INT_RANGE2,
        "max_candidates": {"type": "integer", "minimum": 1},
        "max_layers": {"type": "integer", "minimum": 1},
        "refiner": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "endpoint": {"type": "string"},
                "timeout": {"type": "number", "exclusiveMinimum": 0},
                "max_retries": {"type": "integer", "minimum": 1},
                "word_range": _INT_RANGE2,
                "fallback": {"type": "boolean"},
            },
        },
    },
}

_POOL_KEYS = {
    "base": SourceKind.BASE,
    "donor": SourceKind.DONOR,
    "image_crop": SourceKind.IMAGE_CROP,
    "text": SourceKind.TEXT,
    "foreground_object": SourceKind.FOREGROUND_OBJECT,
}


class ConfigError(ValueError):
    """Invalid or unusable run configuration."""


@dataclass
class RunConfig:
    composition: CompositionConfig
    pool_dirs: dict[SourceKind, Path]
    out_dir: Path
    count: int = 0
    workers: int = 1
    image_crop_cap: Optional[int] = None
    refiner: dict = field(default_factory=dict)


def _tuple2(value, cast) -> tuple:
    return (cast(value[0]), cast(value[1]))


def load_run_config(path: Union[str, Path]) -> RunConfig:
    """Parse and validate a run config file; raises ConfigError with schema
    diagnostics on any mismatch."""
    path = Path(path)
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    try:
        jsonschema.validate(data, RUN_CONFIG_SCHEMA)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"config {path}: {exc.message} (at {where})") from exc

    kwargs: dict = {}
    if "canvas" in data:
        kwargs["canvas"] = CanvasSize(*_tuple2(data["canvas"], int))
    if "seed" in data:
        kwargs["global_seed"] = int(data["seed"])
    for key in ("p_image_crop", "p_text"):
        if key in data:
            kwargs[key] = float(data[key])
    for key in ("crop_scale", "text_scale", "fg_scale"):
        if key in data:
            kwargs[key] = _tuple2(data[key], float)
    for key in ("fg_count_range", "remove_range", "donor_count_range",
                "donor_layers_range"):
        if key in data:
            kwargs[key] = _tuple2(data[key], int)
    for key in ("max_candidates", "max_layers"):
        if key in data:
            kwargs[key] = int(data[key])
    try:
        composition = CompositionConfig(**kwargs)
    except ValueError as exc:
        raise ConfigError(f"config {path}: {exc}") from exc

    pool_dirs = {
        _POOL_KEYS[k]: (path.parent / v if not Path(v).is_absolute() else Path(v))
        for k, v in data["pools"].items()
    }
    out_dir = Path(data["out_dir"])
    if not out_dir.is_absolute():
        out_dir = path.parent / out_dir
    return RunConfig(
        composition=composition,
        pool_dirs=pool_dirs,
        out_dir=out_dir,
        count=int(data.get("count", 0)),
        workers=int(data.get("workers", 1)),
        image_crop_cap=data.get("image_crop_cap"),
        refiner=dict(data.get("refiner", {})),
    )
