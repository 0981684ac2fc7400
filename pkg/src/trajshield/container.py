"""Self-describing binary container for model weights.

Layout (all integers little-endian)::

    magic      8 bytes  b"TRJSHLD\\0"
    version    u32
    meta_len   u32, then meta_len bytes of UTF-8 ``key=value`` lines
                (values are JSON)
    n_tensors  u32, then per tensor:
        name_len u16, name (UTF-8), ndim u8, dims u64 * ndim,
        values float64 little-endian, row-major
    crc32      u32 of everything before it
"""

from __future__ import annotations

import json
import os
import struct
import zlib
from typing import Mapping

import numpy as np

from .data import atomic_write_bytes

MAGIC = b"TRJSHLD\0"
VERSION = 1


class ContainerError(ValueError):
    """Unreadable, truncated or incompatible container."""


def dumps(meta: Mapping[str, object], tensors: Mapping[str, np.ndarray]) -> bytes:
    meta_text = "".join(f"{k}={json.dumps(v, sort_keys=True)}\n" for k, v in meta.items())
    meta_bytes = meta_text.encode("utf-8")
    parts = [MAGIC, struct.pack("<II", VERSION, len(meta_bytes)), meta_bytes,
             struct.pack("<I", len(tensors))]
    for name, arr in tensors.items():
        arr = np.ascontiguousarray(arr, dtype="<f8")
        raw_name = name.encode("utf-8")
        parts.append(struct.pack("<HB", len(raw_name), arr.ndim) + raw_name)
        parts.append(struct.pack(f"<{arr.ndim}Q", *arr.shape))
        parts.append(arr.tobytes())
    body = b"".join(parts)
    return body + struct.pack("<I", zlib.crc32(body))


def loads(blob: bytes) -> tuple[dict, dict[str, np.ndarray]]:
    if len(blob) < len(MAGIC) + 12 or not blob.startswith(MAGIC):
        raise ContainerError("not a trajshield container (bad magic or truncated)")
    body, (crc,) = blob[:-4], struct.unpack("<I", blob[-4:])
    if zlib.crc32(body) != crc:
        raise ContainerError("corrupt container: checksum mismatch (truncated or modified file)")
    pos = len(MAGIC)
    version, meta_len = struct.unpack_from("<II", body, pos)
    if version != VERSION:
        raise ContainerError(f"unsupported container version {version} (expected {VERSION})")
    pos += 8
    meta = {}
    for line in body[pos:pos + meta_len].decode("utf-8").splitlines():
        key, _, value = line.partition("=")
        meta[key] = json.loads(value)
    pos += meta_len
    (n,) = struct.unpack_from("<I", body, pos)
    pos += 4
    tensors = {}
    try:
        for _ in range(n):
            name_len, ndim = struct.unpack_from("<HB", body, pos)
            pos += 3
            name = body[pos:pos + name_len].decode("utf-8")
            pos += name_len
            shape = struct.unpack_from(f"<{ndim}Q", body, pos)
            pos += 8 * ndim
            count = int(np.prod(shape)) if ndim else 1
            arr = np.frombuffer(body, dtype="<f8", count=count, offset=pos).reshape(shape)
            tensors[name] = arr.astype(np.float64)
            pos += 8 * count
    except (struct.error, ValueError) as exc:
        raise ContainerError(f"corrupt container: {exc}") from None
    if pos != len(body):
        raise ContainerError("corrupt container: trailing bytes")
    return meta, tensors


def save(path: str | os.PathLike, meta, tensors):
    atomic_write_bytes(path, dumps(meta, tensors))


def load(path: str | os.PathLike):
    with open(path, "rb") as fh:
        return loads(fh.read())
