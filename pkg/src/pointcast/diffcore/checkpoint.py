"""Checkpoint serialization.

Plain JSON with parameters stored as flat float lists. Python's float repr
round-trips bit-exactly, so save -> load -> save reproduces the same bytes.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from pointcast.diffcore.params import ModelParams
from pointcast.errors import ValidationError

FORMAT_NAME = "pointcast-checkpoint"
FORMAT_VERSION = 1


def save_checkpoint(path, params: ModelParams, config: dict, normalizer=None, seed=None):
    payload = {
        "format": FORMAT_NAME,
        "version": FORMAT_VERSION,
        "seed": seed,
        "config": config,
        "normalizer": normalizer,
        "params": [
            {
                "name": name,
                "shape": list(t.data.shape),
                "values": [float(v) for v in t.data.reshape(-1)],
            }
            for name, t in params.items()
        ],
    }
    text = json.dumps(payload, indent=1, sort_keys=False)
    Path(path).write_text(text + "\n")


def load_checkpoint(path) -> dict:
    """Parse a checkpoint file. Returns the payload with params as arrays."""
    try:
        payload = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ValidationError(f"cannot read checkpoint {path}: {exc}") from exc
    if not isinstance(payload, dict) or payload.get("format") != FORMAT_NAME:
        raise ValidationError(f"{path} is not a {FORMAT_NAME} file")
    if payload.get("version") != FORMAT_VERSION:
        raise ValidationError(
            f"unsupported checkpoint version {payload.get('version')!r}"
        )
    arrays = {}
    for entry in payload.get("params", []):
        name = entry["name"]
        shape = tuple(entry["shape"])
        values = np.asarray(entry["values"], dtype=np.float64)
        if values.size != int(np.prod(shape)):
            raise ValidationError(f"parameter {name}: values do not fill shape {shape}")
        arrays[name] = values.reshape(shape)
    payload["params"] = arrays
    return payload


def restore_into(params: ModelParams, arrays: dict):
    """Load checkpoint arrays into an already-built parameter set."""
    if set(arrays.keys()) != set(params.names()):
        missing = set(params.names()) - set(arrays.keys())
        extra = set(arrays.keys()) - set(params.names())
        raise ValidationError(
            f"checkpoint does not match model (missing={sorted(missing)}, extra={sorted(extra)})"
        )
    params.restore(arrays)
