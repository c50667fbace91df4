"""JSON model files (``.rem.json``), fit reports and CSV experiment tables."""
from __future__ import annotations

import csv
import datetime as _dt
import hashlib
import json
import os
from pathlib import Path

import numpy as np

from .errors import IntegrityError, SchemaError, SchemaVersionError
from .grid import VoxelGrid
from .model import SparseModel
from .propagation import PropagationConfig

SCHEMA_VERSION = 1


def _timestamp() -> str:
    # SOURCE_DATE_EPOCH pins the stamp for reproducible output files
    epoch = os.environ.get("SOURCE_DATE_EPOCH")
    when = (_dt.datetime.fromtimestamp(int(epoch), _dt.timezone.utc) if epoch
            else _dt.datetime.now(_dt.timezone.utc))
    return when.strftime("%Y-%m-%dT%H:%M:%SZ")


def digest_array(*arrays) -> str:
    h = hashlib.sha256()
    for a in arrays:
        h.update(np.ascontiguousarray(np.asarray(a, dtype=float)).tobytes())
    return "sha256:" + h.hexdigest()


def model_to_dict(model: SparseModel, input_digest: str | None = None) -> dict:
    meta = dict(model.metadata)
    meta.setdefault("created_utc", _timestamp())
    if input_digest is not None:
        meta["input_digest"] = input_digest
    return {
        "schema_version": SCHEMA_VERSION,
        "algorithm": model.algorithm,
        "grid": None if model.grid is None else model.grid.to_dict(),
        "propagation": model.propagation.to_dict(),
        "support": [
            {"index": idx, "center_xyz_m": [float(v) for v in pos], "power_w": float(p)}
            for idx, pos, p in zip(model.support, model.positions, model.powers)
        ],
        "rho": model.rho,
        "n_sources_requested": model.n_sources_requested,
        "metadata": meta,
    }


def model_from_dict(d: dict) -> SparseModel:
    version = d.get("schema_version")
    if version != SCHEMA_VERSION:
        raise SchemaVersionError(f"unsupported model schema_version {version!r} (expected {SCHEMA_VERSION})")
    try:
        support = d["support"]
        return SparseModel(
            algorithm=d["algorithm"],
            support=tuple(s["index"] for s in support),
            positions=np.array([s["center_xyz_m"] for s in support], dtype=float).reshape(-1, 3),
            powers=np.array([s["power_w"] for s in support], dtype=float),
            rho=d["rho"],
            n_sources_requested=int(d["n_sources_requested"]),
            propagation=PropagationConfig.from_dict(d["propagation"]),
            grid=None if d.get("grid") is None else VoxelGrid.from_dict(d["grid"]),
            metadata=dict(d.get("metadata", {})),
        )
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, IntegrityError):
            raise
        raise IntegrityError(f"malformed model file: {exc}") from exc


def save_model(model: SparseModel, path, input_digest: str | None = None) -> None:
    text = json.dumps(model_to_dict(model, input_digest), indent=2)
    Path(path).write_text(text + "\n")


def load_model(path) -> SparseModel:
    try:
        d = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{path}: not valid JSON ({exc})") from exc
    return model_from_dict(d)


def save_json(obj, path) -> None:
    Path(path).write_text(json.dumps(obj, indent=2) + "\n")


def _cell(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return v


def write_table(rows, path, columns) -> None:
    """Long-format CSV; floats are written with ``repr`` (full precision).

    ``path`` may also be an open text stream.
    """
    if hasattr(path, "write"):
        _write_rows(path, rows, columns)
        return
    with Path(path).open("w", newline="") as fh:
        _write_rows(fh, rows, columns)


def _write_rows(fh, rows, columns):
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([_cell(r.get(c, "")) for c in columns])


def read_table(path) -> list[dict]:
    with Path(path).open(newline="") as fh:
        return list(csv.DictReader(fh))
