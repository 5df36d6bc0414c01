"""Versioned binary container for named float64 arrays plus JSON metadata.

Layout (all integers little-endian)::

    magic      4 bytes   b"PMAC"
    version    uint16
    kind       uint16 length + ASCII
    header     uint32 length + UTF-8 JSON {"meta": ..., "arrays": [[name, shape], ...]}
    payload    concatenated arrays, row-major, '<f8'

Writing is deterministic: the JSON header is emitted with sorted keys and no
timestamps, so identical content gives identical bytes.
"""

from __future__ import annotations

import io
import json
import struct
from pathlib import Path

import numpy as np

MAGIC = b"PMAC"
VERSION = 1


class CheckpointError(ValueError):
    pass


def dumps(kind: str, meta: dict, arrays: list) -> bytes:
    names_shapes = []
    chunks = []
    for name, arr in arrays:
        arr = np.ascontiguousarray(arr, dtype="<f8")
        names_shapes.append([name, list(arr.shape)])
        chunks.append(arr.tobytes(order="C"))
    header = json.dumps({"meta": meta, "arrays": names_shapes}, sort_keys=True).encode("utf-8")
    kind_b = kind.encode("ascii")
    out = io.BytesIO()
    out.write(MAGIC)
    out.write(struct.pack("<H", VERSION))
    out.write(struct.pack("<H", len(kind_b)))
    out.write(kind_b)
    out.write(struct.pack("<I", len(header)))
    out.write(header)
    for chunk in chunks:
        out.write(chunk)
    return out.getvalue()


def loads(data: bytes, kind: str | None = None):
    """Inverse of :func:`dumps`; returns ``(kind, meta, [(name, array), ...])``."""
    view = memoryview(data)
    if bytes(view[:4]) != MAGIC:
        raise CheckpointError("not a checkpoint container (bad magic)")
    (version,) = struct.unpack_from("<H", view, 4)
    if version != VERSION:
        raise CheckpointError(f"unsupported container version {version}")
    (klen,) = struct.unpack_from("<H", view, 6)
    found_kind = bytes(view[8 : 8 + klen]).decode("ascii")
    if kind is not None and found_kind != kind:
        raise CheckpointError(f"expected a {kind!r} container, found {found_kind!r}")
    pos = 8 + klen
    (hlen,) = struct.unpack_from("<I", view, pos)
    pos += 4
    header = json.loads(bytes(view[pos : pos + hlen]).decode("utf-8"))
    pos += hlen
    arrays = []
    for name, shape in header["arrays"]:
        count = int(np.prod(shape)) if shape else 1
        nbytes = 8 * count
        if pos + nbytes > len(view):
            raise CheckpointError("truncated checkpoint payload")
        arr = np.frombuffer(view[pos : pos + nbytes], dtype="<f8").astype(np.float64).reshape(shape)
        arrays.append((name, arr))
        pos += nbytes
    if pos != len(view):
        raise CheckpointError("trailing bytes after checkpoint payload")
    return found_kind, header["meta"], arrays


def save(path, kind: str, meta: dict, arrays: list) -> Path:
    path = Path(path)
    path.write_bytes(dumps(kind, meta, arrays))
    return path


def load(path, kind: str | None = None):
    return loads(Path(path).read_bytes(), kind)
