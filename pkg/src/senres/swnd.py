# src/senres/swnd.py
from __future__ import annotations

"""
SWND window container.

  magic        "SWND"                4 bytes
  version      u16 = 1
  flags        u16   bit 0: per-window subject ids present
  count        u32
  T            u32
  C            u32
  classes      u16, then per class: u16 length + UTF-8 name
  per window:  label u16, [subject u16 if flag bit 0], T·C f32 (time-major)

The sample rate is not part of the container: readers take it as an
argument (default 50 Hz) and callers that know better pass it in.

Little-endian throughout. Reading validates exact length, finiteness and
label range, so a corrupted or truncated file is always a FormatError.
"""

import struct
from pathlib import Path
from typing import Union

import numpy as np

from .dataset import WindowSet
from .errors import FormatError
from .ids import digest_bytes

MAGIC = b"SWND"
VERSION = 1
FLAG_SUBJECTS = 0x0001
MAX_CELLS = 1 << 24

_HEAD = struct.Struct("<4sHHIIIH")


def encode_windowset(ws: WindowSet) -> bytes:
    flags = FLAG_SUBJECTS if ws.subjects is not None else 0
    n, T, C = ws.data.shape
    if ws.num_classes > 0xFFFF:
        raise FormatError(f"{ws.num_classes} classes do not fit the class table")
    if ws.subjects is not None and ws.subjects.size and (ws.subjects.min() < 0 or ws.subjects.max() > 0xFFFF):
        raise FormatError("subject ids must fit in u16")
    head = [_HEAD.pack(MAGIC, VERSION, flags, n, T, C, ws.num_classes)]
    for name in ws.class_names:
        raw = name.encode("utf-8")
        head.append(struct.pack("<H", len(raw)) + raw)
    fields = [("label", "<u2")]
    if flags & FLAG_SUBJECTS:
        fields.append(("subject", "<u2"))
    fields.append(("data", "<f4", (T, C)))
    rec = np.zeros(n, dtype=np.dtype(fields))
    rec["label"] = ws.labels
    if flags & FLAG_SUBJECTS:
        rec["subject"] = ws.subjects
    rec["data"] = ws.data
    return b"".join(head) + rec.tobytes()


def decode_windowset(buf: bytes, *, source: str = "<bytes>", sample_rate_hz: float = 50.0) -> WindowSet:
    if len(buf) < _HEAD.size:
        raise FormatError(f"{source}: truncated header ({len(buf)} bytes)")
    magic, version, flags, n, T, C, k = _HEAD.unpack_from(buf, 0)
    if magic != MAGIC:
        raise FormatError(f"{source}: bad magic {magic!r} (expected {MAGIC!r})")
    if version != VERSION:
        raise FormatError(f"{source}: unsupported SWND version {version}")
    if flags & ~FLAG_SUBJECTS:
        raise FormatError(f"{source}: unknown flag bits 0x{flags:04x}")
    if T < 2 or C < 1:
        raise FormatError(f"{source}: invalid window shape {T}×{C}")
    pos = _HEAD.size
    names = []
    for i in range(k):
        if pos + 2 > len(buf):
            raise FormatError(f"{source}: truncated class table at entry {i}")
        (ln,) = struct.unpack_from("<H", buf, pos)
        pos += 2
        if pos + ln > len(buf):
            raise FormatError(f"{source}: truncated class name {i}")
        try:
            names.append(buf[pos:pos + ln].decode("utf-8"))
        except UnicodeDecodeError:
            raise FormatError(f"{source}: class name {i} is not valid UTF-8") from None
        pos += ln
    rec_size = 2 + (2 if flags & FLAG_SUBJECTS else 0) + 4 * T * C
    expected = pos + n * rec_size
    if len(buf) != expected:
        raise FormatError(f"{source}: expected {expected} bytes for {n} windows, found {len(buf)}")
    if T * C > MAX_CELLS:
        raise FormatError(f"{source}: window shape {T}×{C} exceeds {MAX_CELLS} values")
    fields = [("label", "<u2")]
    if flags & FLAG_SUBJECTS:
        fields.append(("subject", "<u2"))
    fields.append(("data", "<f4", (T, C)))
    try:
        rec = np.frombuffer(buf, dtype=np.dtype(fields), count=n, offset=pos)
    except (ValueError, OverflowError) as e:
        raise FormatError(f"{source}: unreadable window records ({e})") from None
    data = np.array(rec["data"], dtype=np.float32)
    if not np.isfinite(data).all():
        bad = int(np.flatnonzero(~np.isfinite(data).reshape(n, -1).all(axis=1))[0])
        raise FormatError(f"{source}: window {bad} contains non-finite values")
    labels = rec["label"].astype(np.int64)
    if n and labels.max() >= k:
        bad = int(np.flatnonzero(labels >= k)[0])
        raise FormatError(f"{source}: window {bad} has label {labels[bad]} outside {k} classes")
    subjects = rec["subject"].astype(np.int64) if flags & FLAG_SUBJECTS else None
    return WindowSet(data, labels, tuple(names), subjects, sample_rate_hz=sample_rate_hz, provenance={"swnd": source})


def write_swnd(ws: WindowSet, path: Union[str, Path]) -> str:
    """Write atomically; returns the file's sha256."""
    data = encode_windowset(ws)
    p = Path(path)
    p.parent.mkdir(parents=True, exist_ok=True)
    tmp = p.with_suffix(p.suffix + ".tmp")
    tmp.write_bytes(data)
    tmp.replace(p)
    return digest_bytes(data)


def read_swnd(path: Union[str, Path], *, sample_rate_hz: float = 50.0) -> WindowSet:
    p = Path(path)
    try:
        buf = p.read_bytes()
    except OSError as e:
        raise FormatError(f"{p}: cannot read ({e.strerror})") from None
    ws = decode_windowset(buf, source=str(p), sample_rate_hz=sample_rate_hz)
    return ws.with_data(ws.data, swnd_sha256=digest_bytes(buf))


__all__ = ["MAGIC", "VERSION", "FLAG_SUBJECTS", "encode_windowset", "decode_windowset", "write_swnd", "read_swnd"]
