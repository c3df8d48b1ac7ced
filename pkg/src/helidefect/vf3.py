"""Reader and writer for the VF3 binary field format.

Layout (little-endian, no padding)::

    magic      4 bytes   b"VF3\\0"
    version    u16
    dims       3 x u32   (Nx, Ny, Nz)
    components u8        1, 3 or 9
    lengths    3 x f64
    payload    f64       component-major, x fastest within a component
"""

import struct
from pathlib import Path

import numpy as np

from .errors import FormatError, TruncatedFile
from .grid import AXES, GridSpec, field_of_rank

MAGIC = b"VF3\x00"
VERSION = 1
HEADER = struct.Struct("<4sH3IB3d")
_RANK_OF = {1: 0, 3: 1, 9: 2}


def header_bytes(f):
    return HEADER.pack(MAGIC, VERSION, *f.grid.dims, f.ncomp, *f.grid.lengths)


def encode(f) -> bytes:
    comps = f.components
    payload = np.concatenate([c.ravel(order="F") for c in comps]).astype("<f8")
    return header_bytes(f) + payload.tobytes()


def decode(data: bytes, periodic_axes=AXES):
    if len(data) < HEADER.size:
        raise TruncatedFile(f"file shorter than the {HEADER.size}-byte header")
    magic, version, nx, ny, nz, ncomp, lx, ly, lz = HEADER.unpack_from(data, 0)
    if magic != MAGIC:
        raise FormatError(f"bad magic {magic!r}")
    if version != VERSION:
        raise FormatError(f"unsupported version {version}")
    if ncomp not in _RANK_OF:
        raise FormatError(f"unsupported component count {ncomp}")
    try:
        grid = GridSpec((nx, ny, nz), (lx, ly, lz), periodic_axes)
    except ValueError as exc:
        raise FormatError(f"invalid header: {exc}") from None
    expected = ncomp * nx * ny * nz * 8
    payload = data[HEADER.size :]
    if len(payload) < expected:
        raise TruncatedFile(f"payload has {len(payload)} bytes, header implies {expected}")
    if len(payload) > expected:
        raise FormatError(f"{len(payload) - expected} trailing bytes after payload")
    flat = np.frombuffer(payload, dtype="<f8").astype(np.float64)
    comps = flat.reshape(ncomp, nz, ny, nx).transpose(0, 3, 2, 1)
    rank = _RANK_OF[ncomp]
    values = comps.reshape((3,) * rank + (nx, ny, nz))
    return field_of_rank(rank, grid, np.ascontiguousarray(values))


def write_field(f, path):
    Path(path).write_bytes(encode(f))


def read_field(path, periodic_axes=AXES):
    """Read a VF3 file; pass ``periodic_axes=("x", "y")`` for slab data."""
    return decode(Path(path).read_bytes(), periodic_axes)
