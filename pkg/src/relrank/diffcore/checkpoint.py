"""Flat binary checkpoints: a (name, shape) header table, then row-major
float64 little-endian payloads in header order."""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from ..errors import DataError
from .autodiff import Array

_MAGIC = b"RRCP"
_VERSION = 1


def save_checkpoint(path, params: dict[str, Array]) -> None:
    """Write parameters sorted by name so identical dicts give identical bytes."""
    names = sorted(params)
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<BI", _VERSION, len(names)))
        for name in names:
            encoded = name.encode("utf-8")
            value = np.asarray(params[name], dtype=np.float64)
            fh.write(struct.pack("<H", len(encoded)))
            fh.write(encoded)
            fh.write(struct.pack("<B", value.ndim))
            for dim in value.shape:
                fh.write(struct.pack("<I", dim))
        for name in names:
            value = np.ascontiguousarray(params[name], dtype=np.float64)
            fh.write(value.astype("<f8", copy=False).tobytes())


def load_checkpoint(path) -> dict[str, Array]:
    raw = Path(path).read_bytes()
    if raw[:4] != _MAGIC:
        raise DataError(f"{path}: not a checkpoint file")
    version, count = struct.unpack_from("<BI", raw, 4)
    if version != _VERSION:
        raise DataError(f"{path}: unsupported checkpoint version {version}")
    offset = 9
    entries: list[tuple[str, tuple[int, ...]]] = []
    for _ in range(count):
        (name_len,) = struct.unpack_from("<H", raw, offset)
        offset += 2
        name = raw[offset : offset + name_len].decode("utf-8")
        offset += name_len
        (ndim,) = struct.unpack_from("<B", raw, offset)
        offset += 1
        shape = struct.unpack_from(f"<{ndim}I", raw, offset)
        offset += 4 * ndim
        entries.append((name, tuple(shape)))
    params: dict[str, Array] = {}
    for name, shape in entries:
        size = int(np.prod(shape, dtype=np.int64)) if shape else 1
        values = np.frombuffer(raw, dtype="<f8", count=size, offset=offset)
        offset += 8 * size
        params[name] = values.astype(np.float64).reshape(shape)
    if offset != len(raw):
        raise DataError(f"{path}: trailing bytes after checkpoint payload")
    return params
