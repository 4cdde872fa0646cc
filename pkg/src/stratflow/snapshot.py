"""Binary field snapshots.

Layout (all little-endian)::

    offset  size  content
    0       8     magic  b"STRATFLD"
    8       4     uint32 format version (1)
    12      4     uint32 reserved, zero
    16      8     uint64 n1
    24      8     uint64 n2
    32      8*n1*n2  float64 values, row-major: index i (x1) outer, j (x2) inner
"""
from __future__ import annotations

import struct

import numpy as np

MAGIC = b"STRATFLD"
VERSION = 1
_HEADER = struct.Struct("<8sII")
_DIMS = struct.Struct("<QQ")


class SnapshotError(ValueError):
    pass


def dumps(values):
    values = np.ascontiguousarray(values, dtype="<f8")
    if values.ndim != 2:
        raise SnapshotError("snapshot must be a 2-D field")
    n1, n2 = values.shape
    return _HEADER.pack(MAGIC, VERSION, 0) + _DIMS.pack(n1, n2) + values.tobytes()


def loads(data):
    if len(data) < _HEADER.size + _DIMS.size:
        raise SnapshotError("truncated snapshot header")
    magic, version, _ = _HEADER.unpack_from(data, 0)
    if magic != MAGIC:
        raise SnapshotError(f"bad magic {magic!r}")
    if version != VERSION:
        raise SnapshotError(f"unsupported snapshot version {version}")
    n1, n2 = _DIMS.unpack_from(data, _HEADER.size)
    offset = _HEADER.size + _DIMS.size
    expected = offset + 8 * n1 * n2
    if len(data) != expected:
        raise SnapshotError(f"snapshot payload has {len(data)} bytes, expected {expected}")
    return np.frombuffer(data, dtype="<f8", offset=offset).reshape(n1, n2).astype(float)


def write(path, values):
    with open(path, "wb") as fh:
        fh.write(dumps(values))


def read(path):
    with open(path, "rb") as fh:
        return loads(fh.read())
