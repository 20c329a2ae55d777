"""Binary checkpoint format for named float64 tensors.

Layout (all integers little-endian):

    magic   4 bytes  "TKC1"
    version u32      currently 1
    count   u32      number of named tensors
    entry*  count times:
        name_len u16, name UTF-8 bytes
        dtype    u8   (0 = float64, the only defined code)
        rank     u8
        dims     rank x u32
        payload  prod(dims) x f64, row-major
    crc32   u32      CRC-32 of everything between the version field and here

Loading only parses; nothing in the format is executable.
"""
from __future__ import annotations

import struct
import zlib
from pathlib import Path

import numpy as np

from .errors import (
    CheckpointCorruptionError,
    CheckpointFormatError,
    CheckpointVersionError,
)

MAGIC = b"TKC1"
VERSION = 1
DTYPE_F64 = 0


def save_checkpoint(path: str | Path, tensors: dict[str, np.ndarray]) -> None:
    names = list(tensors)
    if len(set(names)) != len(names):
        raise CheckpointFormatError("duplicate tensor names")
    body = bytearray()
    body += struct.pack("<I", len(names))
    for name in names:
        arr = np.asarray(tensors[name], dtype=np.float64, order="C")
        encoded = name.encode("utf-8")
        if len(encoded) > 0xFFFF:
            raise CheckpointFormatError(f"tensor name too long: {name[:32]}...")
        body += struct.pack("<H", len(encoded))
        body += encoded
        body += struct.pack("<BB", DTYPE_F64, arr.ndim)
        body += struct.pack(f"<{arr.ndim}I", *arr.shape)
        body += arr.astype("<f8").tobytes()
    blob = MAGIC + struct.pack("<I", VERSION) + bytes(body)
    blob += struct.pack("<I", zlib.crc32(bytes(body)) & 0xFFFFFFFF)
    Path(path).write_bytes(blob)


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def read(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise CheckpointFormatError("truncated checkpoint")
        out = self.data[self.pos : self.pos + n]
        self.pos += n
        return out

    def unpack(self, fmt: str):
        return struct.unpack(fmt, self.read(struct.calcsize(fmt)))


def load_checkpoint(path: str | Path) -> dict[str, np.ndarray]:
    data = Path(path).read_bytes()
    if len(data) < len(MAGIC) + 8:
        raise CheckpointFormatError("file too short to be a checkpoint")
    if data[: len(MAGIC)] != MAGIC:
        raise CheckpointFormatError("bad magic")
    (version,) = struct.unpack("<I", data[4:8])
    if version != VERSION:
        raise CheckpointVersionError(f"unsupported checkpoint version {version}")
    body, (stored_crc,) = data[8:-4], struct.unpack("<I", data[-4:])
    if zlib.crc32(body) & 0xFFFFFFFF != stored_crc:
        raise CheckpointCorruptionError("payload CRC mismatch")

    r = _Reader(body)
    (count,) = r.unpack("<I")
    out: dict[str, np.ndarray] = {}
    for _ in range(count):
        (name_len,) = r.unpack("<H")
        name = r.read(name_len).decode("utf-8")
        dtype, rank = r.unpack("<BB")
        if dtype != DTYPE_F64:
            raise CheckpointFormatError(f"unknown dtype code {dtype}")
        dims = r.unpack(f"<{rank}I") if rank else ()
        n_items = int(np.prod(dims)) if rank else 1
        payload = r.read(8 * n_items)
        if name in out:
            raise CheckpointFormatError(f"duplicate tensor name {name!r}")
        out[name] = np.frombuffer(payload, dtype="<f8").reshape(dims).copy()
    if r.pos != len(body):
        raise CheckpointFormatError("trailing bytes after tensor table")
    return out


def pack_states(**groups: dict[str, np.ndarray] | None) -> dict[str, np.ndarray]:
    """Flatten prefixed state dicts into one tensor table."""
    out: dict[str, np.ndarray] = {}
    for prefix, state in groups.items():
        if state is None:
            continue
        for name, arr in state.items():
            out[f"{prefix}.{name}"] = arr
    return out


def unpack_states(tensors: dict[str, np.ndarray]) -> dict[str, dict[str, np.ndarray]]:
    out: dict[str, dict[str, np.ndarray]] = {}
    for name, arr in tensors.items():
        prefix, _, rest = name.partition(".")
        out.setdefault(prefix, {})[rest] = arr
    return out
