"""Weight checkpoint container.

Layout (all integers little-endian):

    magic   4 bytes  b"CLWB"
    version u16      currently 1
    meta    u32 length + UTF-8 JSON (config, strategy, epoch, extras)
    count   u32      number of named tensors
    tensor  u16 name length, name UTF-8,
            u8 dtype code (0 = float32, 1 = float64, 2 = int64),
            u8 ndim, u32 per dimension,
            raw little-endian IEEE-754 / two's-complement payload

Tensors serialize in sorted-name order so identical states produce
byte-identical files.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from ..errors import InvalidArgumentError

MAGIC = b"CLWB"
VERSION = 1
_DTYPES = {0: "<f4", 1: "<f8", 2: "<i8"}
_CODES = {np.dtype(np.float32): 0, np.dtype(np.float64): 1,
          np.dtype(np.int64): 2}


def save_checkpoint(path, tensors: dict[str, np.ndarray], meta: dict) -> None:
    blob = [MAGIC, struct.pack("<H", VERSION)]
    meta_bytes = json.dumps(meta, sort_keys=True).encode("utf-8")
    blob.append(struct.pack("<I", len(meta_bytes)))
    blob.append(meta_bytes)
    blob.append(struct.pack("<I", len(tensors)))
    for name in sorted(tensors):
        arr = np.ascontiguousarray(tensors[name])
        if arr.dtype not in _CODES:
            arr = arr.astype(np.float64)
        code = _CODES[arr.dtype]
        arr = arr.astype(_DTYPES[code])
        nb = name.encode("utf-8")
        blob.append(struct.pack("<H", len(nb)))
        blob.append(nb)
        blob.append(struct.pack("<BB", code, arr.ndim))
        blob.append(struct.pack(f"<{arr.ndim}I", *arr.shape))
        blob.append(arr.tobytes())
    Path(path).write_bytes(b"".join(blob))


def load_checkpoint(path) -> tuple[dict, dict[str, np.ndarray]]:
    raw = Path(path).read_bytes()
    if raw[:4] != MAGIC:
        raise InvalidArgumentError(f"{path} is not a checkpoint file")
    off = 4
    (version,) = struct.unpack_from("<H", raw, off)
    off += 2
    if version != VERSION:
        raise InvalidArgumentError(f"unsupported checkpoint version {version}")
    (meta_len,) = struct.unpack_from("<I", raw, off)
    off += 4
    meta = json.loads(raw[off:off + meta_len].decode("utf-8"))
    off += meta_len
    (count,) = struct.unpack_from("<I", raw, off)
    off += 4
    tensors: dict[str, np.ndarray] = {}
    for _ in range(count):
        (nlen,) = struct.unpack_from("<H", raw, off)
        off += 2
        name = raw[off:off + nlen].decode("utf-8")
        off += nlen
        code, ndim = struct.unpack_from("<BB", raw, off)
        off += 2
        shape = struct.unpack_from(f"<{ndim}I", raw, off)
        off += 4 * ndim
        dt = np.dtype(_DTYPES[code])
        size = int(np.prod(shape)) if ndim else 1
        arr = np.frombuffer(raw, dtype=dt, count=size, offset=off)
        off += size * dt.itemsize
        tensors[name] = arr.reshape(shape).copy()
    return meta, tensors
