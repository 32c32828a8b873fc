# src/senres/checkpoint.py
from __future__ import annotations

"""
SPRM parameter container.

  magic  "SPRM"       4 bytes
  version            u16  (1)
  count              u32
  per parameter, sorted by name:
    name length      u16
    name             UTF-8
    rank             u8   (at most 8)
    dims             u32 × rank
    data             f64 little-endian, C order

All integers little-endian. Parameters are always stored at 64-bit so a
float32 training run still round-trips through the same reader.
"""

import math
import struct
from pathlib import Path
from typing import Dict, Mapping, Union

import numpy as np

from .errors import FormatError
from .ids import digest_bytes

MAGIC = b"SPRM"
VERSION = 1
MAX_RANK = 8

_HEAD = struct.Struct("<4sHI")


def encode_params(params: Mapping[str, np.ndarray]) -> bytes:
    out = [_HEAD.pack(MAGIC, VERSION, len(params))]
    for name in sorted(params):
        arr = np.asarray(params[name], dtype="<f8")
        raw = name.encode("utf-8")
        if len(raw) > 0xFFFF:
            raise FormatError(f"parameter name too long: {name[:40]}…")
        if arr.ndim > 0xFF:
            raise FormatError(f"{name}: rank {arr.ndim} not representable")
        out.append(struct.pack("<H", len(raw)))
        out.append(raw)
        out.append(struct.pack(f"<B{arr.ndim}I", arr.ndim, *arr.shape))
        out.append(np.ascontiguousarray(arr).tobytes())
    return b"".join(out)


def decode_params(buf: bytes, *, source: str = "<bytes>") -> Dict[str, np.ndarray]:
    def need(pos: int, n: int, what: str) -> None:
        if pos + n > len(buf):
            raise FormatError(f"{source}: truncated while reading {what} at byte {pos}")

    need(0, _HEAD.size, "header")
    magic, version, count = _HEAD.unpack_from(buf, 0)
    if magic != MAGIC:
        raise FormatError(f"{source}: bad magic {magic!r} (expected {MAGIC!r})")
    if version != VERSION:
        raise FormatError(f"{source}: unsupported SPRM version {version}")
    pos = _HEAD.size
    params: Dict[str, np.ndarray] = {}
    for i in range(count):
        need(pos, 2, f"name length of parameter {i}")
        (nlen,) = struct.unpack_from("<H", buf, pos)
        pos += 2
        need(pos, nlen, f"name of parameter {i}")
        try:
            name = buf[pos:pos + nlen].decode("utf-8")
        except UnicodeDecodeError:
            raise FormatError(f"{source}: parameter {i} name is not valid UTF-8") from None
        pos += nlen
        if name in params:
            raise FormatError(f"{source}: duplicate parameter {name!r}")
        need(pos, 1, f"rank of {name}")
        rank = buf[pos]
        pos += 1
        if rank > MAX_RANK:
            raise FormatError(f"{source}: {name} has rank {rank} (at most {MAX_RANK})")
        need(pos, 4 * rank, f"dims of {name}")
        dims = struct.unpack_from(f"<{rank}I", buf, pos)
        pos += 4 * rank
        nbytes = 8 * math.prod(dims)
        need(pos, nbytes, f"data of {name}")
        try:
            arr = np.frombuffer(buf, dtype="<f8", count=nbytes // 8, offset=pos).reshape(dims).astype(np.float64)
        except (ValueError, OverflowError) as e:
            raise FormatError(f"{source}: {name} with dims {dims} is unreadable ({e})") from None
        if not np.isfinite(arr).all():
            raise FormatError(f"{source}: {name} contains non-finite values")
        params[name] = arr
        pos += nbytes
    if pos != len(buf):
        raise FormatError(f"{source}: {len(buf) - pos} trailing bytes after {count} parameters")
    return params


def save_params(path: Union[str, Path], params: Mapping[str, np.ndarray]) -> str:
    """Write an SPRM file; returns its sha256."""
    data = encode_params(params)
    p = Path(path)
    p.parent.mkdir(parents=True, exist_ok=True)
    tmp = p.with_suffix(p.suffix + ".tmp")
    tmp.write_bytes(data)
    tmp.replace(p)
    return digest_bytes(data)


def load_params(path: Union[str, Path]) -> Dict[str, np.ndarray]:
    p = Path(path)
    try:
        buf = p.read_bytes()
    except OSError as e:
        raise FormatError(f"{p}: cannot read checkpoint ({e.strerror})") from None
    return decode_params(buf, source=str(p))


__all__ = ["MAGIC", "VERSION", "encode_params", "decode_params", "save_params", "load_params"]
