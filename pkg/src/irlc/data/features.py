"""Feature container.

Layout, little-endian throughout::

    b"IRLCFEAT" | version u32
    per image: id_len u32 | id utf-8 | N u32 | d_v u32 | width f32 | height f32
               | N*4 f32 boxes | N*d_v f32 features
    crc32 u32 over all preceding bytes

Values are stored as float32; loading widens to float64.
"""
from __future__ import annotations

import struct
import zlib

import numpy as np

from .records import SceneRecord

MAGIC = b"IRLCFEAT"
VERSION = 1


class FeatureFileError(ValueError):
    pass


def encode_scenes(scenes) -> bytes:
    parts = [MAGIC, struct.pack("<I", VERSION)]
    for s in scenes:
        raw = s.image_id.encode("utf-8")
        d_v = s.features.shape[1] if s.features.ndim == 2 else 0
        parts.append(struct.pack("<I", len(raw)) + raw)
        parts.append(struct.pack("<IIff", s.n, d_v, s.width, s.height))
        parts.append(np.ascontiguousarray(s.boxes, dtype="<f4").tobytes())
        parts.append(np.ascontiguousarray(s.features, dtype="<f4").tobytes())
    body = b"".join(parts)
    return body + struct.pack("<I", zlib.crc32(body))


def iter_decode(blob: bytes):
    if len(blob) < len(MAGIC) + 8 or blob[: len(MAGIC)] != MAGIC:
        raise FeatureFileError("not a feature container (bad magic)")
    body, (crc,) = blob[:-4], struct.unpack("<I", blob[-4:])
    if zlib.crc32(body) != crc:
        raise FeatureFileError("feature container checksum mismatch (truncated or corrupt file)")
    (version,) = struct.unpack_from("<I", body, len(MAGIC))
    if version != VERSION:
        raise FeatureFileError(f"unsupported feature container version {version}")
    off = len(MAGIC) + 4
    while off < len(body):
        try:
            (n_id,) = struct.unpack_from("<I", body, off)
            off += 4
            image_id = body[off : off + n_id].decode("utf-8")
            off += n_id
            n, d_v, width, height = struct.unpack_from("<IIff", body, off)
            off += 16
        except struct.error:
            raise FeatureFileError(f"truncated record header at byte {off}") from None
        need = 4 * (4 * n + n * d_v)
        if off + need > len(body):
            raise FeatureFileError(f"record {image_id!r} at byte {off} is truncated")
        boxes = np.frombuffer(body, "<f4", 4 * n, off).reshape(n, 4).astype(np.float64)
        off += 16 * n
        feats = np.frombuffer(body, "<f4", n * d_v, off).reshape(n, d_v).astype(np.float64)
        off += 4 * n * d_v
        yield SceneRecord(image_id=image_id, width=float(width), height=float(height), boxes=boxes, features=feats)


def write_features(path, scenes):
    with open(path, "wb") as f:
        f.write(encode_scenes(scenes))


def read_features(path):
    with open(path, "rb") as f:
        return list(iter_decode(f.read()))


def load_features(path, image_id):
    """The SceneRecord for ``image_id`` from a container file."""
    with open(path, "rb") as f:
        blob = f.read()
    for scene in iter_decode(blob):
        if scene.image_id == image_id:
            return scene
    raise KeyError(f"image {image_id!r} not found in {path}")
