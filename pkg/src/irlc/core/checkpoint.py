"""Binary checkpoint container.

Layout (all integers little-endian u32)::

    b"IRLCCKPT" | version | count
    count x ( name_len | name utf-8 | ndim | dims... | prod(dims) float64 LE )
    crc32 of everything above
"""
from __future__ import annotations

import struct
import zlib

import numpy as np

MAGIC = b"IRLCCKPT"
VERSION = 1


class CheckpointError(ValueError):
    pass


def encode(state: dict) -> bytes:
    parts = [MAGIC, struct.pack("<II", VERSION, len(state))]
    for name, value in state.items():
        value = np.asarray(value, dtype="<f8")
        raw = name.encode("utf-8")
        parts.append(struct.pack("<I", len(raw)))
        parts.append(raw)
        parts.append(struct.pack("<I", value.ndim))
        parts.append(struct.pack(f"<{value.ndim}I", *value.shape))
        parts.append(np.ascontiguousarray(value).tobytes())
    body = b"".join(parts)
    return body + struct.pack("<I", zlib.crc32(body))


def decode(blob: bytes) -> dict:
    if len(blob) < len(MAGIC) + 12 or blob[: len(MAGIC)] != MAGIC:
        raise CheckpointError("not a checkpoint file (bad magic)")
    body, (crc,) = blob[:-4], struct.unpack("<I", blob[-4:])
    if zlib.crc32(body) != crc:
        raise CheckpointError("checkpoint CRC mismatch")
    off = len(MAGIC)
    version, count = struct.unpack_from("<II", body, off)
    off += 8
    if version != VERSION:
        raise CheckpointError(f"unsupported checkpoint version {version}")
    state = {}
    try:
        for _ in range(count):
            (n,) = struct.unpack_from("<I", body, off)
            off += 4
            name = body[off : off + n].decode("utf-8")
            off += n
            (ndim,) = struct.unpack_from("<I", body, off)
            off += 4
            shape = struct.unpack_from(f"<{ndim}I", body, off)
            off += 4 * ndim
            size = int(np.prod(shape, dtype=np.int64))
            if off + 8 * size > len(body):
                raise CheckpointError(f"truncated payload for {name!r}")
            state[name] = np.frombuffer(body, dtype="<f8", count=size, offset=off).reshape(shape).astype(np.float64)
            off += 8 * size
    except struct.error as exc:
        raise CheckpointError(f"truncated checkpoint: {exc}") from None
    if off != len(body):
        raise CheckpointError("trailing bytes after last parameter")
    return state


def save(path, state: dict):
    with open(path, "wb") as f:
        f.write(encode(state))


def load(path) -> dict:
    with open(path, "rb") as f:
        return decode(f.read())
