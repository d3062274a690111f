"""
Checkpoint Format

Binary parameter store with training metadata:

    magic       8 bytes   b"BMDSCKP1"
    version     u32       1
    config_hash 64 bytes  ASCII hex SHA-256 of the training config
    meta_len    u64
    metadata    meta_len bytes of UTF-8 JSON (sorted keys, compact separators)
    count       u32       number of parameters
    per parameter, in stored order:
        name_len u32, name (UTF-8), ndim u32, dims (ndim x u64),
        raster (prod(dims) x float64)

Little-endian throughout. Parameter order is the model's registration order,
so loading and re-saving a checkpoint reproduces the same bytes.
"""

from collections import OrderedDict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Optional, Union
import json
import logging
import struct

import numpy as np

from bmdsnet.errors import FormatError

logger = logging.getLogger(__name__)

MAGIC = b"BMDSCKP1"
VERSION = 1
HASH_LEN = 64


@dataclass
class Checkpoint:
    """Named parameters plus metadata (epoch, best metric, seed, histories, ...)."""
    config_hash: str
    params: "OrderedDict[str, np.ndarray]" = field(default_factory=OrderedDict)
    metadata: Dict[str, Any] = field(default_factory=dict)

    @property
    def is_bayesian(self) -> bool:
        return any(name.startswith("head.mu_") for name in self.params)


def _encode_metadata(metadata: Dict[str, Any]) -> bytes:
    return json.dumps(metadata, sort_keys=True, separators=(",", ":")).encode("utf-8")


def encode_checkpoint(ckpt: Checkpoint) -> bytes:
    if len(ckpt.config_hash) != HASH_LEN:
        raise FormatError(f"config hash must be {HASH_LEN} hex chars, got {len(ckpt.config_hash)}")
    meta = _encode_metadata(ckpt.metadata)
    parts = [
        MAGIC,
        struct.pack("<I", VERSION),
        ckpt.config_hash.encode("ascii"),
        struct.pack("<Q", len(meta)),
        meta,
        struct.pack("<I", len(ckpt.params)),
    ]
    for name, array in ckpt.params.items():
        raw_name = name.encode("utf-8")
        array = np.ascontiguousarray(array, dtype="<f8")
        parts.append(struct.pack("<I", len(raw_name)))
        parts.append(raw_name)
        parts.append(struct.pack("<I", array.ndim))
        parts.append(struct.pack(f"<{array.ndim}Q", *array.shape))
        parts.append(array.tobytes(order="C"))
    return b"".join(parts)


class _Reader:
    def __init__(self, blob: bytes, source: str):
        self.blob = blob
        self.offset = 0
        self.source = source

    def take(self, n: int) -> bytes:
        if self.offset + n > len(self.blob):
            raise FormatError(f"{self.source}: truncated checkpoint at byte {self.offset}")
        chunk = self.blob[self.offset:self.offset + n]
        self.offset += n
        return chunk

    def unpack(self, fmt: str):
        size = struct.calcsize(fmt)
        return struct.unpack(fmt, self.take(size))


def decode_checkpoint(blob: bytes, source: str = "<bytes>") -> Checkpoint:
    r = _Reader(blob, source)
    if r.take(len(MAGIC)) != MAGIC:
        raise FormatError(f"{source}: not a checkpoint (bad magic)")
    (version,) = r.unpack("<I")
    if version != VERSION:
        raise FormatError(f"{source}: unsupported checkpoint version {version}")
    config_hash = r.take(HASH_LEN).decode("ascii")
    (meta_len,) = r.unpack("<Q")
    try:
        metadata = json.loads(r.take(meta_len).decode("utf-8"))
    except ValueError as e:
        raise FormatError(f"{source}: corrupt metadata: {e}") from e

    (count,) = r.unpack("<I")
    params: "OrderedDict[str, np.ndarray]" = OrderedDict()
    for _ in range(count):
        (name_len,) = r.unpack("<I")
        name = r.take(name_len).decode("utf-8")
        (ndim,) = r.unpack("<I")
        dims = r.unpack(f"<{ndim}Q") if ndim else ()
        n = int(np.prod(dims, dtype=np.int64))
        raster = np.frombuffer(r.take(8 * n), dtype="<f8").reshape(dims)
        params[name] = raster.astype(np.float64)
    if r.offset != len(blob):
        raise FormatError(f"{source}: {len(blob) - r.offset} trailing bytes")
    return Checkpoint(config_hash=config_hash, params=params, metadata=metadata)


def save_checkpoint(path: Union[str, Path], ckpt: Checkpoint) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(encode_checkpoint(ckpt))
    logger.info(f"Saved checkpoint {path} ({len(ckpt.params)} tensors)")


def load_checkpoint(path: Union[str, Path], expected_hash: Optional[str] = None,
                    allow_mismatch: bool = False) -> Checkpoint:
    """
    Read a checkpoint, optionally checking its config hash.

    Raises:
        FormatError: on a malformed file, or a hash mismatch unless allow_mismatch
    """
    path = Path(path)
    try:
        blob = path.read_bytes()
    except OSError as e:
        raise FormatError(f"Cannot read checkpoint {path}: {e}") from e
    ckpt = decode_checkpoint(blob, source=str(path))
    if expected_hash is not None and ckpt.config_hash != expected_hash:
        if not allow_mismatch:
            raise FormatError(
                f"{path}: config hash {ckpt.config_hash[:12]}... does not match the current "
                f"config {expected_hash[:12]}... (pass --force to override)"
            )
        logger.warning(f"{path}: config hash mismatch overridden")
    return ckpt
