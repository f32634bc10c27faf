"""VLF1 binary field format.

Layout (little-endian):
    magic        4 bytes  'VLF1'
    n            u32      points per axis
    components   u32      1, 3 or 9
    L            f64      domain side length
    offset       3 x f64  origin offset
    time_stamp   f64
    data         components * n^3 f64, component-major, x fastest
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .grid import GridField, GridSpec

MAGIC = b"VLF1"
_HEADER = struct.Struct("<4sIId3dd")


class VLFFormatError(ValueError):
    pass


def write_field(field: GridField, path: str | Path) -> None:
    spec = field.spec
    header = _HEADER.pack(
        MAGIC,
        spec.n_points_per_axis,
        field.components,
        spec.domain_length,
        *spec.origin_offset,
        field.time_stamp,
    )
    with open(path, "wb") as fh:
        fh.write(header)
        for c in range(field.components):
            # x fastest: Fortran order over (x, y, z) axes
            fh.write(np.ascontiguousarray(field.data[c].ravel(order="F"), dtype="<f8").tobytes())


def read_field(path: str | Path) -> GridField:
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size:
        raise VLFFormatError(f"{path}: truncated header")
    magic, n, components, L, ox, oy, oz, t = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise VLFFormatError(f"{path}: bad magic {magic!r}")
    expected = _HEADER.size + components * n**3 * 8
    if len(raw) != expected:
        raise VLFFormatError(f"{path}: expected {expected} bytes, found {len(raw)}")
    flat = np.frombuffer(raw, dtype="<f8", offset=_HEADER.size)
    data = np.stack(
        [flat[c * n**3 : (c + 1) * n**3].reshape((n, n, n), order="F") for c in range(components)]
    )
    spec = GridSpec(n, L, (ox, oy, oz))
    return GridField(spec, data, t)
