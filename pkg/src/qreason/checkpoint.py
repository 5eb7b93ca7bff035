"""Flat binary parameter checkpoints.

Layout: magic b"QRCK", format version (u32), parameter count (u32), then per
parameter: name length (u16), utf-8 name bytes, rank (u8), dims (u32 each),
raw little-endian float32 data. Integers are little-endian. Round-trips are
bit-exact for float32 parameters.
"""
from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .engine import Tensor

MAGIC = b"QRCK"
VERSION = 1


def save_params(path, params: dict[str, Tensor]) -> None:
    chunks = [MAGIC, struct.pack("<II", VERSION, len(params))]
    for name in sorted(params):
        # asarray with order="C" keeps 0-d shapes (ascontiguousarray would not)
        arr = np.asarray(params[name].value, dtype="<f4", order="C")
        nb = name.encode("utf-8")
        chunks.append(struct.pack("<H", len(nb)))
        chunks.append(nb)
        chunks.append(struct.pack("<B", arr.ndim))
        chunks.append(struct.pack(f"<{arr.ndim}I", *arr.shape))
        chunks.append(arr.tobytes())
    Path(path).write_bytes(b"".join(chunks))


def load_params(path) -> dict[str, Tensor]:
    buf = Path(path).read_bytes()
    if buf[:4] != MAGIC:
        raise ValueError(f"{path}: not a parameter checkpoint (bad magic)")
    version, count = struct.unpack_from("<II", buf, 4)
    if version != VERSION:
        raise ValueError(f"{path}: unsupported checkpoint version {version}")
    off = 12
    params: dict[str, Tensor] = {}
    for _ in range(count):
        (nlen,) = struct.unpack_from("<H", buf, off)
        off += 2
        name = buf[off : off + nlen].decode("utf-8")
        off += nlen
        (rank,) = struct.unpack_from("<B", buf, off)
        off += 1
        dims = struct.unpack_from(f"<{rank}I", buf, off)
        off += 4 * rank
        size = int(np.prod(dims)) if rank else 1
        arr = np.frombuffer(buf, dtype="<f4", count=size, offset=off).reshape(dims).copy()
        off += 4 * size
        params[name] = Tensor(arr, op=f"param:{name}")
    if off != len(buf):
        raise ValueError(f"{path}: trailing bytes in checkpoint")
    return params
