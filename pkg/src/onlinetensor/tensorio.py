"""Dense tensor file formats.

T3D: magic ``T3D1``, three little-endian uint32 dims ``(n1, n2, n3)``, then
``n1*n2*n3`` little-endian float64 values, face-major and row-major within a
face (index ``k*n1*n2 + i*n2 + j``).

CSV: a header line ``n1,n2,n3`` followed by one value per line in the same order.
"""
from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .errors import ParseError
from .tensor_core import as_tensor3

MAGIC = b"T3D1"
_HEADER = struct.Struct("<4sIII")


def _to_stream(X: np.ndarray) -> np.ndarray:
    return np.ascontiguousarray(X.transpose(2, 0, 1)).ravel()


def _from_stream(values: np.ndarray, dims) -> np.ndarray:
    n1, n2, n3 = dims
    return values.reshape(n3, n1, n2).transpose(1, 2, 0).copy()


def save_t3d(path, X) -> None:
    X = as_tensor3(X)
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, *X.shape))
        fh.write(_to_stream(X).astype("<f8").tobytes())


def load_t3d(path) -> np.ndarray:
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size:
        raise ParseError(f"{path}: truncated header")
    magic, n1, n2, n3 = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise ParseError(f"{path}: bad magic {magic!r}")
    count = n1 * n2 * n3
    body = raw[_HEADER.size:]
    if len(body) != 8 * count:
        raise ParseError(f"{path}: expected {count} values, found {len(body) / 8:g}")
    return _from_stream(np.frombuffer(body, dtype="<f8").astype(np.float64), (n1, n2, n3))


def save_csv(path, X) -> None:
    X = as_tensor3(X)
    with open(path, "w") as fh:
        fh.write("{},{},{}\n".format(*X.shape))
        for v in _to_stream(X):
            fh.write(f"{float(v)!r}\n")


def load_csv(path) -> np.ndarray:
    with open(path) as fh:
        lines = [ln.strip() for ln in fh if ln.strip()]
    if not lines:
        raise ParseError(f"{path}: empty file")
    try:
        dims = tuple(int(x) for x in lines[0].split(","))
        values = np.array([float(x) for x in lines[1:]])
    except ValueError as exc:
        raise ParseError(f"{path}: {exc}") from exc
    if len(dims) != 3 or min(dims) < 1:
        raise ParseError(f"{path}: bad header {lines[0]!r}")
    if values.size != dims[0] * dims[1] * dims[2]:
        raise ParseError(f"{path}: expected {np.prod(dims)} values, found {values.size}")
    return _from_stream(values, dims)


def load_tensor(path) -> np.ndarray:
    """Load a T3D or CSV tensor, chosen by file extension (``.csv`` or anything else)."""
    path = Path(path)
    if path.suffix.lower() == ".csv":
        return load_csv(path)
    return load_t3d(path)


def save_tensor(path, X) -> None:
    path = Path(path)
    if path.suffix.lower() == ".csv":
        save_csv(path, X)
    else:
        save_t3d(path, X)
