"""
Volume File Format

Binary container for one dense float64 array:

    magic     8 bytes  b"BMDSVOL1"
    version   u32      1
    dtype     u32      0 (float64)
    ndim      u32
    dims      ndim x u64
    payload   prod(dims) x float64, row-major

All integers and floats are little-endian.
"""

from pathlib import Path
from typing import Union
import struct

import numpy as np

from bmdsnet.errors import FormatError

MAGIC = b"BMDSVOL1"
VERSION = 1
DTYPE_F64 = 0
_HEADER = struct.Struct("<III")


def encode_volume(array: np.ndarray) -> bytes:
    array = np.ascontiguousarray(array, dtype="<f8")
    parts = [MAGIC, _HEADER.pack(VERSION, DTYPE_F64, array.ndim)]
    parts.append(struct.pack(f"<{array.ndim}Q", *array.shape))
    parts.append(array.tobytes(order="C"))
    return b"".join(parts)


def decode_volume(blob: bytes, source: str = "<bytes>") -> np.ndarray:
    if len(blob) < len(MAGIC) + _HEADER.size or blob[:len(MAGIC)] != MAGIC:
        raise FormatError(f"{source}: not a volume file (bad magic)")
    offset = len(MAGIC)
    version, dtype, ndim = _HEADER.unpack_from(blob, offset)
    offset += _HEADER.size
    if version != VERSION:
        raise FormatError(f"{source}: unsupported volume version {version}")
    if dtype != DTYPE_F64:
        raise FormatError(f"{source}: unsupported dtype tag {dtype}")
    dims_size = 8 * ndim
    if len(blob) < offset + dims_size:
        raise FormatError(f"{source}: truncated header")
    dims = struct.unpack_from(f"<{ndim}Q", blob, offset)
    offset += dims_size
    expected = 8 * int(np.prod(dims, dtype=np.int64))
    if len(blob) - offset != expected:
        raise FormatError(
            f"{source}: payload is {len(blob) - offset} bytes, expected {expected} for dims {dims}"
        )
    data = np.frombuffer(blob, dtype="<f8", offset=offset).reshape(dims)
    return data.astype(np.float64)


def write_volume(path: Union[str, Path], array: np.ndarray) -> None:
    Path(path).write_bytes(encode_volume(array))


def read_volume(path: Union[str, Path]) -> np.ndarray:
    path = Path(path)
    try:
        blob = path.read_bytes()
    except OSError as e:
        raise FormatError(f"Cannot read volume file {path}: {e}") from e
    return decode_volume(blob, source=str(path))
