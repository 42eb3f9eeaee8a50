"""Snapshot checkpoints: a little-endian float64 blob plus a JSON manifest.

``<name>.json`` lists the arrays (sorted by name) with shapes and offsets,
the snapshot metadata, the network spec and the sha256 of the blob
``<name>.bin``.  Loading checks sizes and the hash before decoding.
"""

from __future__ import annotations

import hashlib
import json
import os
from pathlib import Path

import numpy as np

from .encoders import EncoderMode
from .errors import CorruptionError
from .io import atomic_write_bytes, atomic_write_text, canonical_json
from .league import PolicySnapshot, Role, freeze
from .policy import NetSpec

FORMAT_VERSION = 1
DTYPE = "<f8"


def save_snapshot(snapshot: PolicySnapshot, directory: str | os.PathLike,
                  config_hash: str = "") -> Path:
    """Write ``<id>.bin`` and ``<id>.json``; returns the manifest path."""
    directory = Path(directory)
    arrays, offset, blob = [], 0, bytearray()
    for name in sorted(snapshot.params):
        a = np.ascontiguousarray(snapshot.params[name], dtype=DTYPE)
        arrays.append({"name": name, "shape": list(a.shape), "offset": offset, "count": a.size})
        blob += a.tobytes()
        offset += a.size
    data = bytes(blob)
    manifest = {
        "format_version": FORMAT_VERSION,
        "dtype": DTYPE,
        "snapshot_id": snapshot.snapshot_id,
        "role": snapshot.role.value,
        "generation": snapshot.generation,
        "created_step": snapshot.created_step,
        "mode": snapshot.mode.value,
        "net_spec": snapshot.spec.to_dict() if snapshot.spec is not None else None,
        "config_hash": config_hash,
        "arrays": arrays,
        "nbytes": len(data),
        "sha256": hashlib.sha256(data).hexdigest(),
    }
    atomic_write_bytes(directory / f"{snapshot.snapshot_id}.bin", data)
    return atomic_write_text(directory / f"{snapshot.snapshot_id}.json",
                             canonical_json(manifest) + "\n")


def load_snapshot(path: str | os.PathLike) -> PolicySnapshot:
    """Read a snapshot from its manifest (``.json``) or blob (``.bin``) path."""
    path = Path(path)
    manifest_path = path.with_suffix(".json")
    blob_path = path.with_suffix(".bin")
    try:
        manifest = json.loads(manifest_path.read_text())
        data = blob_path.read_bytes()
    except FileNotFoundError as exc:
        raise CorruptionError(f"missing checkpoint file: {exc.filename}") from None
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise CorruptionError(f"unreadable manifest {manifest_path}: {exc}") from None
    try:
        if manifest["format_version"] != FORMAT_VERSION or manifest["dtype"] != DTYPE:
            raise CorruptionError(f"unsupported checkpoint format in {manifest_path}")
        if len(data) != manifest["nbytes"]:
            raise CorruptionError(
                f"{blob_path} holds {len(data)} bytes, manifest says {manifest['nbytes']}")
        if hashlib.sha256(data).hexdigest() != manifest["sha256"]:
            raise CorruptionError(f"hash mismatch for {blob_path}")
        flat = np.frombuffer(data, dtype=DTYPE)
        params = {}
        for entry in manifest["arrays"]:
            start, count = entry["offset"], entry["count"]
            params[entry["name"]] = flat[start:start + count].astype(np.float64).reshape(
                entry["shape"])
        spec = NetSpec.from_dict(manifest["net_spec"]) if manifest["net_spec"] else None
        return PolicySnapshot(manifest["snapshot_id"], Role(manifest["role"]),
                              int(manifest["generation"]), int(manifest["created_step"]),
                              EncoderMode(manifest["mode"]), freeze(params), spec)
    except CorruptionError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise CorruptionError(f"malformed manifest {manifest_path}: {exc}") from None
