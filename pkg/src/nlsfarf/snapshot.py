"""Binary field snapshots.

Layout (all little-endian)::

    magic      8 bytes  b"NLSFARF1"
    version    u32      1
    dim        u32
    N_i        u32 x dim
    L_i        f64 x dim
    farfield   f64 re, f64 im
    time       f64
    payload    2 * prod(N_i) f64, interleaved (re, im), row-major, axis 0 slowest
"""
from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .grid import Field, make_grid

__all__ = ["MAGIC", "VERSION", "SnapshotError", "write_snapshot", "read_snapshot", "encode_snapshot", "decode_snapshot"]

MAGIC = b"NLSFARF1"
VERSION = 1


class SnapshotError(ValueError):
    def __init__(self, message: str, offset: int):
        self.offset = offset
        super().__init__(f"byte {offset}: {message}")


def encode_snapshot(field: Field, t: float) -> bytes:
    g = field.grid
    parts = [
        MAGIC,
        struct.pack("<II", VERSION, g.dim),
        struct.pack(f"<{g.dim}I", *g.points),
        struct.pack(f"<{g.dim}d", *g.extents),
        struct.pack("<ddd", field.farfield.real, field.farfield.imag, float(t)),
        np.ascontiguousarray(field.values, dtype="<c16").tobytes(order="C"),
    ]
    return b"".join(parts)


def write_snapshot(field: Field, t: float, path) -> Path:
    path = Path(path)
    path.write_bytes(encode_snapshot(field, t))
    return path


def _need(buf: bytes, offset: int, size: int, what: str):
    if len(buf) < offset + size:
        raise SnapshotError(f"file truncated while reading {what} (need {size} bytes, have {len(buf) - offset})", offset)


def decode_snapshot(buf: bytes) -> tuple[Field, float]:
    off = 0
    _need(buf, off, 8, "magic")
    if buf[:8] != MAGIC:
        raise SnapshotError(f"bad magic {buf[:8]!r}", 0)
    off = 8
    _need(buf, off, 8, "version and dim")
    version, dim = struct.unpack_from("<II", buf, off)
    if version != VERSION:
        raise SnapshotError(f"unsupported version {version}", off)
    off += 4
    if dim not in (1, 2, 3):
        raise SnapshotError(f"invalid dimension {dim}", off)
    off += 4
    _need(buf, off, 4 * dim, "points")
    points = struct.unpack_from(f"<{dim}I", buf, off)
    off += 4 * dim
    _need(buf, off, 8 * dim, "extents")
    extents = struct.unpack_from(f"<{dim}d", buf, off)
    off += 8 * dim
    _need(buf, off, 24, "farfield and time")
    re, im, t = struct.unpack_from("<ddd", buf, off)
    off += 24
    try:
        grid = make_grid(dim, extents, points)
    except ValueError as exc:
        raise SnapshotError(f"invalid grid header: {exc}", 12) from None
    size = 16 * grid.size
    if len(buf) - off != size:
        if len(buf) - off < size:
            raise SnapshotError(f"payload truncated: expected {size} bytes, found {len(buf) - off}", off)
        raise SnapshotError(f"trailing data: expected {size} payload bytes, found {len(buf) - off}", off + size)
    values = np.frombuffer(buf, dtype="<c16", count=grid.size, offset=off).astype(np.complex128).reshape(grid.shape)
    try:
        field = Field(grid, values, complex(re, im))
    except ValueError as exc:
        raise SnapshotError(str(exc), off) from None
    return field, t


def read_snapshot(path) -> tuple[Field, float]:
    return decode_snapshot(Path(path).read_bytes())
