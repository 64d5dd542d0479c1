"""Bit-exact checkpoint format: a JSON manifest plus a raw blob.

The manifest lists every parameter (name, kind, shape, byte offset,
length) followed by any buffers (BatchNorm running statistics), and the
blob is their little-endian float64 data concatenated in manifest order.
Offsets must be contiguous and non-overlapping starting at zero and the
blob length must match exactly; load_checkpoint validates all of that
before returning, so a round trip is the identity on (names, shapes,
bits).
"""

import hashlib
import json
from pathlib import Path

import numpy as np

from .errors import ConfigError, ParseError
from .tensor import PARAM_KINDS, ParameterSet

DTYPE_TAG = "<f8"
FORMAT_NAME = "dfreg-checkpoint"
FORMAT_VERSION = 1

MANIFEST_FILE = "model.json"
BLOB_FILE = "model.bin"


def config_hash(config: dict) -> str:
    """sha256 over the canonical JSON encoding of a config mapping."""
    text = json.dumps(config, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def save_checkpoint(params: ParameterSet, meta: dict, buffers: dict = None):
    """Serialize to (manifest JSON string, blob bytes)."""
    buffers = buffers or {}
    entries = []
    chunks = []
    offset = 0
    for p in params:
        data = np.ascontiguousarray(p.value, dtype=np.dtype(DTYPE_TAG)).tobytes()
        entries.append({"name": p.name, "kind": p.kind,
                        "shape": list(p.value.shape),
                        "offset": offset, "nbytes": len(data)})
        chunks.append(data)
        offset += len(data)
    buffer_entries = []
    for name in buffers:
        arr = np.ascontiguousarray(buffers[name], dtype=np.dtype(DTYPE_TAG))
        data = arr.tobytes()
        buffer_entries.append({"name": name, "shape": list(arr.shape),
                               "offset": offset, "nbytes": len(data)})
        chunks.append(data)
        offset += len(data)
    blob = b"".join(chunks)
    manifest = {
        "format": FORMAT_NAME,
        "version": FORMAT_VERSION,
        "dtype": DTYPE_TAG,
        "blob_nbytes": len(blob),
        "blob_sha256": hashlib.sha256(blob).hexdigest(),
        "params": entries,
        "buffers": buffer_entries,
        "meta": meta,
    }
    return json.dumps(manifest, indent=1, sort_keys=True), blob


def _check_layout(entries, start: int, what: str) -> int:
    offset = start
    for e in entries:
        for key in ("name", "shape", "offset", "nbytes"):
            if key not in e:
                raise ParseError(f"{what} entry missing {key!r}")
        if e["offset"] != offset:
            raise ParseError(
                f"{what} {e['name']!r}: offset {e['offset']} is not contiguous "
                f"(expected {offset})"
            )
        size = 8
        for d in e["shape"]:
            size *= d
        if e["nbytes"] != size:
            raise ParseError(
                f"{what} {e['name']!r}: nbytes {e['nbytes']} does not match "
                f"shape {tuple(e['shape'])} (expected {size})"
            )
        offset += e["nbytes"]
    return offset


def load_checkpoint(manifest_text: str, blob: bytes):
    """Deserialize and validate. Returns (params, buffers, meta)."""
    try:
        manifest = json.loads(manifest_text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"manifest is not valid JSON: {exc}") from exc
    if manifest.get("format") != FORMAT_NAME:
        raise ParseError(f"unknown checkpoint format {manifest.get('format')!r}")
    if manifest.get("dtype") != DTYPE_TAG:
        raise ParseError(
            f"unknown dtype tag {manifest.get('dtype')!r} (only {DTYPE_TAG!r})"
        )
    end = _check_layout(manifest.get("params", []), 0, "parameter")
    end = _check_layout(manifest.get("buffers", []), end, "buffer")
    if end != len(blob):
        raise ParseError(
            f"blob length mismatch: manifest declares {end} bytes, blob has {len(blob)}"
        )
    declared_sha = manifest.get("blob_sha256")
    if declared_sha is not None:
        actual_sha = hashlib.sha256(blob).hexdigest()
        if actual_sha != declared_sha:
            raise ParseError(
                f"blob sha256 mismatch: manifest declares {declared_sha}, "
                f"blob hashes to {actual_sha}"
            )
    params = ParameterSet()
    for e in manifest["params"]:
        if e.get("kind") not in PARAM_KINDS:
            raise ParseError(f"parameter {e['name']!r} has unknown kind {e.get('kind')!r}")
        arr = np.frombuffer(blob, dtype=np.dtype(DTYPE_TAG), count=e["nbytes"] // 8,
                            offset=e["offset"]).reshape(e["shape"]).copy()
        params.add(e["name"], e["kind"], arr)
    buffers = {}
    for e in manifest.get("buffers", []):
        buffers[e["name"]] = np.frombuffer(
            blob, dtype=np.dtype(DTYPE_TAG), count=e["nbytes"] // 8,
            offset=e["offset"]).reshape(e["shape"]).copy()
    return params, buffers, manifest.get("meta", {})


def save_checkpoint_dir(directory, params: ParameterSet, meta: dict,
                        buffers: dict = None) -> None:
    directory = Path(directory)
    manifest_text, blob = save_checkpoint(params, meta, buffers)
    (directory / MANIFEST_FILE).write_text(manifest_text + "\n")
    (directory / BLOB_FILE).write_bytes(blob)


def load_checkpoint_dir(directory):
    directory = Path(directory)
    manifest_path = directory / MANIFEST_FILE
    blob_path = directory / BLOB_FILE
    if not manifest_path.exists():
        raise ConfigError(f"checkpoint manifest not found: {manifest_path}")
    if not blob_path.exists():
        raise ConfigError(f"checkpoint blob not found: {blob_path}")
    return load_checkpoint(manifest_path.read_text(), blob_path.read_bytes())
