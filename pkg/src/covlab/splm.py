"""Dense matrix file IO in the SPLM format.

Layout: a 16-byte header (magic b"SPLM", u32 rows, u32 cols, u32 reserved,
all little-endian) followed by the row-major float64 payload.  Only real
matrices are supported; complex data has no representation in this format.
"""
from __future__ import annotations

import struct

import numpy as np

MAGIC = b"SPLM"
_HEADER = struct.Struct("<4sIII")


def write_matrix(path, matrix) -> None:
    a = np.ascontiguousarray(matrix, dtype=np.float64)
    if a.ndim != 2:
        raise ValueError(f"expected a 2-d array, got shape {a.shape}")
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, a.shape[0], a.shape[1], 0))
        fh.write(a.astype("<f8", copy=False).tobytes())


def read_matrix(path) -> np.ndarray:
    with open(path, "rb") as fh:
        head = fh.read(_HEADER.size)
        if len(head) != _HEADER.size:
            raise ValueError(f"{path}: truncated header")
        magic, rows, cols, _ = _HEADER.unpack(head)
        if magic != MAGIC:
            raise ValueError(f"{path}: bad magic {magic!r}, expected {MAGIC!r}")
        payload = fh.read(rows * cols * 8)
    if len(payload) != rows * cols * 8:
        raise ValueError(f"{path}: truncated payload for {rows}x{cols} matrix")
    return np.frombuffer(payload, dtype="<f8").reshape(rows, cols).copy()
