"""Versioned binary checkpoint format.

Layout: magic b"MIND", format version (u32 LE), then for each named array:
name length (u64 LE), UTF-8 name, rank (u64 LE), dims (u64 LE each), raw
float32 little-endian data.  Arrays are written in sorted-name order so a
given parameter set always serializes to identical bytes.
"""
from __future__ import annotations

import struct

import numpy as np

from ..errors import ContractError, ParseError

MAGIC = b"MIND"
VERSION = 1


def save_checkpoint(path: str, arrays: dict[str, np.ndarray]) -> None:
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", VERSION))
        for name in sorted(arrays):
            arr = np.asarray(arrays[name], dtype=np.float32)  # keeps 0-d rank
            raw = name.encode("utf-8")
            fh.write(struct.pack("<Q", len(raw)))
            fh.write(raw)
            fh.write(struct.pack("<Q", arr.ndim))
            for d in arr.shape:
                fh.write(struct.pack("<Q", d))
            fh.write(arr.astype("<f4").tobytes())


def load_checkpoint(path: str) -> dict[str, np.ndarray]:
    arrays: dict[str, np.ndarray] = {}
    with open(path, "rb") as fh:
        if fh.read(4) != MAGIC:
            raise ParseError(f"{path}: not a checkpoint (bad magic)")
        (version,) = struct.unpack("<I", fh.read(4))
        if version != VERSION:
            raise ParseError(f"{path}: unsupported checkpoint version {version}")
        while True:
            head = fh.read(8)
            if not head:
                break
            if len(head) != 8:
                raise ParseError(f"{path}: truncated name length")
            (name_len,) = struct.unpack("<Q", head)
            name = fh.read(name_len).decode("utf-8")
            (rank,) = struct.unpack("<Q", fh.read(8))
            dims = struct.unpack(f"<{rank}Q", fh.read(8 * rank)) if rank else ()
            count = int(np.prod(dims)) if dims else 1
            buf = fh.read(4 * count)
            if len(buf) != 4 * count:
                raise ParseError(f"{path}: truncated data for {name!r}")
            arrays[name] = np.frombuffer(buf, dtype="<f4").reshape(dims).copy()
    return arrays


def validate_shapes(arrays: dict[str, np.ndarray], expected: dict[str, tuple]) -> None:
    """Every expected name must be present with the right shape; extras rejected."""
    missing = sorted(set(expected) - set(arrays))
    extra = sorted(set(arrays) - set(expected))
    if missing:
        raise ContractError(f"checkpoint missing parameters: {missing[:5]}...")
    if extra:
        raise ContractError(f"checkpoint has unknown parameters: {extra[:5]}...")
    for name, shape in expected.items():
        got = arrays[name].shape
        if tuple(got) != tuple(shape):
            raise ContractError(f"checkpoint shape mismatch for {name}: {got} != {shape}")
