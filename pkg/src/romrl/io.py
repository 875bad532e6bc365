"""Artifact persistence: snapshot binaries, sensor tables, metadata documents.

Binary layout (little endian)::

    b"ROMSNAP1" | uint32 rows | uint32 cols | rows*cols float64, row-major

A multi-block file is a plain concatenation of such records; the block names
and order live in the accompanying metadata document. Everything written here
is byte-deterministic for identical inputs.
"""

import csv
import hashlib
import json
import os
import struct

import numpy as np

from .errors import DataIntegrityError

MAGIC = b"ROMSNAP1"
_HEADER = struct.Struct("<8sII")


def canonical_json(obj):
    """Deterministic JSON text (sorted keys, fixed separators)."""
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), allow_nan=True,
                      default=_json_default)


def _json_default(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, np.generic):
        return obj.item()
    raise TypeError(f"not JSON serializable: {type(obj).__name__}")


def config_hash(cfg):
    """SHA-256 of the canonical JSON form of a config mapping."""
    return hashlib.sha256(canonical_json(cfg).encode()).hexdigest()


def file_sha256(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def array_sha256(arr):
    arr = np.ascontiguousarray(arr, dtype="<f8")
    h = hashlib.sha256()
    h.update(str(arr.shape).encode())
    h.update(arr.tobytes())
    return h.hexdigest()


def _as_2d(arr):
    arr = np.asarray(arr, dtype=np.float64)
    if arr.ndim == 0:
        arr = arr.reshape(1, 1)
    elif arr.ndim == 1:
        arr = arr.reshape(1, -1)
    elif arr.ndim != 2:
        raise ValueError("blocks must be at most 2-D")
    return np.ascontiguousarray(arr, dtype="<f8")


def _pack(arr):
    arr = _as_2d(arr)
    return _HEADER.pack(MAGIC, arr.shape[0], arr.shape[1]) + arr.tobytes()


def write_snapshots(path, snapshots):
    """Write a (count, length) array as a single ROMSNAP1 record."""
    with open(path, "wb") as fh:
        fh.write(_pack(snapshots))


def _unpack(buf, offset, path):
    if len(buf) - offset < _HEADER.size:
        raise DataIntegrityError(f"{path}: truncated header at byte {offset}")
    magic, rows, cols = _HEADER.unpack_from(buf, offset)
    if magic != MAGIC:
        raise DataIntegrityError(f"{path}: bad magic {magic!r} at byte {offset}")
    start = offset + _HEADER.size
    stop = start + 8 * rows * cols
    if stop > len(buf):
        raise DataIntegrityError(f"{path}: payload shorter than header claims")
    arr = np.frombuffer(buf, dtype="<f8", count=rows * cols, offset=start)
    return arr.reshape(rows, cols).astype(np.float64), stop


def read_snapshots(path):
    with open(path, "rb") as fh:
        buf = fh.read()
    arr, stop = _unpack(buf, 0, path)
    if stop != len(buf):
        raise DataIntegrityError(f"{path}: trailing bytes after snapshot block")
    return arr


def write_blocks(path, blocks):
    """Write named arrays as consecutive records; returns ``[(name, shape), ...]``."""
    layout = []
    with open(path, "wb") as fh:
        for name, arr in blocks.items():
            a = np.asarray(arr, dtype=np.float64)
            layout.append([name, list(a.shape)])
            fh.write(_pack(a))
    return layout


def read_blocks(path, layout):
    with open(path, "rb") as fh:
        buf = fh.read()
    out = {}
    offset = 0
    for name, shape in layout:
        arr, offset = _unpack(buf, offset, path)
        out[name] = arr.reshape(shape)
    if offset != len(buf):
        raise DataIntegrityError(f"{path}: trailing bytes after last block")
    return out


def write_metadata(path, meta):
    text = json.dumps(meta, sort_keys=True, indent=2, default=_json_default)
    with open(path, "w") as fh:
        fh.write(text + "\n")


def read_metadata(path):
    with open(path) as fh:
        return json.load(fh)


def fmt(x):
    """Round-trip-safe decimal text for a float (17 significant digits)."""
    return format(float(x), ".17g")


def write_table(path, header, columns):
    """Write equal-length numeric columns as CSV with 17 significant digits."""
    cols = [np.asarray(c, dtype=np.float64).ravel() for c in columns]
    n = len(cols[0]) if cols else 0
    if any(len(c) != n for c in cols):
        raise ValueError("table columns differ in length")
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for i in range(n):
            w.writerow([fmt(c[i]) for c in cols])


def read_table(path):
    """Read a table written by :func:`write_table` into ``(header, (rows, cols) array)``."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    header = rows[0]
    data = np.array([[float(v) for v in r] for r in rows[1:]], dtype=np.float64)
    return header, data.reshape(len(rows) - 1, len(header))


def ensure_dir(path):
    os.makedirs(path, exist_ok=True)
    return path


def append_jsonl(path, record):
    with open(path, "a") as fh:
        fh.write(canonical_json(record) + "\n")


def read_jsonl(path):
    with open(path) as fh:
        return [json.loads(line) for line in fh if line.strip()]
