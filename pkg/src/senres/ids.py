# src/senres/ids.py
from __future__ import annotations

"""
Run identity and reproducibility helpers.

- CRC64-ECMA → base36 short run ids (stable across machines).
- sha256 digests for input files, arrays and written artifacts.
- make_rng(): the one seeded RNG factory used project-wide (PCG64).
"""

import hashlib
from pathlib import Path
from typing import Iterable

import numpy as np

_POLY = 0x42F0E1EBA9EA3693
_MASK = 0xFFFFFFFFFFFFFFFF

def _make_table() -> tuple[int, ...]:
    tbl = []
    for i in range(256):
        c = i << 56
        for _ in range(8):
            c = ((c << 1) ^ _POLY) & _MASK if c & (1 << 63) else (c << 1) & _MASK
        tbl.append(c)
    return tuple(tbl)

_TABLE = _make_table()
_A36 = "0123456789ABCDEFGHIJKLMNOPQRSTUVWXYZ"

def crc64(data: bytes) -> int:
    crc = 0
    for b in data:
        crc = _TABLE[((crc >> 56) ^ b) & 0xFF] ^ ((crc << 8) & _MASK)
    return crc

def run_id(*parts: object, length: int = 10) -> str:
    """Join parts with '|' and hash to a short base-36 id, e.g. run_id("simclr", 7, cfg_json)."""
    n = crc64("|".join(str(p) for p in parts).encode("utf-8"))
    out = []
    while n:
        n, r = divmod(n, 36)
        out.append(_A36[r])
    return ("".join(reversed(out)) or "0")[:length]

# ── digests ──────────────────────────────────────────────────────────────────

def digest_bytes(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()

def digest_file(path: str | Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fp:
        for chunk in iter(lambda: fp.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()

def digest_arrays(named: Iterable[tuple[str, np.ndarray]]) -> str:
    """Order-sensitive digest over (name, array) pairs; dtype and shape are part of the hash."""
    h = hashlib.sha256()
    for name, arr in named:
        a = np.ascontiguousarray(arr)
        h.update(name.encode("utf-8"))
        h.update(str(a.dtype).encode("ascii"))
        h.update(repr(a.shape).encode("ascii"))
        h.update(a.tobytes())
    return h.hexdigest()

# ── randomness ───────────────────────────────────────────────────────────────

def make_rng(seed: int, *stream: int) -> np.random.Generator:
    """
    Deterministic generator for (seed, stream...), e.g. make_rng(seed, epoch, window_index).
    Identical arguments give bit-identical draws on every platform numpy supports.
    """
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([int(seed), *(int(s) for s in stream)])))

def derive_seed(seed: int, *stream: int) -> int:
    return int(make_rng(seed, *stream).integers(0, 2**31 - 1))

__all__ = ["crc64", "run_id", "digest_bytes", "digest_file", "digest_arrays", "make_rng", "derive_seed"]
