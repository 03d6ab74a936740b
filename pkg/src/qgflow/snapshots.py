"""Binary field snapshots.

Layout: magic bytes "QGF1", u32 nx, u32 ny, f64 lx, f64 ly, then nx*ny
little-endian f64 coefficients in row-major order (k outer, l inner).
"""

import struct
from pathlib import Path

import numpy as np

from .spectral import Grid, SpectralField

MAGIC = b"QGF1"
_HEADER = struct.Struct("<4sIIdd")


def save_field(path, f: SpectralField) -> None:
    grid = f.grid
    payload = _HEADER.pack(MAGIC, grid.nx, grid.ny, grid.lx, grid.ly)
    payload += np.ascontiguousarray(f.coeffs, dtype="<f8").tobytes()
    Path(path).write_bytes(payload)


def load_field(path) -> SpectralField:
    data = Path(path).read_bytes()
    if len(data) < _HEADER.size:
        raise ValueError(f"{path}: truncated snapshot")
    magic, nx, ny, lx, ly = _HEADER.unpack_from(data)
    if magic != MAGIC:
        raise ValueError(f"{path}: bad magic {magic!r}, expected {MAGIC!r}")
    expected = _HEADER.size + 8 * nx * ny
    if len(data) != expected:
        raise ValueError(f"{path}: size {len(data)} != expected {expected}")
    coeffs = np.frombuffer(data, dtype="<f8", offset=_HEADER.size).reshape(nx, ny)
    return SpectralField(Grid(nx, ny, lx, ly), coeffs)
