# src/senres/io.py
from __future__ import annotations

"""
Output layer for the CLI and the training loops.

stdout carries payloads only (JSON documents, tables, final paths); every human
message goes to stderr, filtered by verbosity:

  quiet     errors only
  normal    info, success, warnings, headings
  verbose   + one line per epoch
  trace     + one line per batch

JSON mode silences everything on stderr except errors.
"""

import datetime as _dt
import json
import os
import re
import shutil
import sys
import threading
import time
from contextlib import contextmanager
from dataclasses import dataclass, field
from typing import Any, Iterator, Literal, Optional, Sequence, TextIO

import numpy as np

from .errors import ConfigError

Verbosity = Literal["quiet", "normal", "verbose", "trace"]
ColorMode = Literal["auto", "always", "never"]

_LEVEL = {"quiet": 0, "normal": 1, "verbose": 2, "trace": 3}


def _env_on(name: str) -> bool:
    return os.environ.get(name, "").strip().lower() in ("1", "true", "yes", "on")


@dataclass
class _Output:
    verbosity: Verbosity = "normal"
    color_mode: ColorMode = field(default_factory=lambda: os.environ.get("SENRES_COLOR", "auto"))  # type: ignore[assignment]
    json_mode: bool = field(default_factory=lambda: _env_on("SENRES_JSON"))
    timestamps: bool = field(default_factory=lambda: _env_on("SENRES_TIMESTAMPS"))
    width: int = field(default_factory=lambda: max(40, shutil.get_terminal_size((100, 20)).columns))
    log: Optional[TextIO] = None
    lock: threading.RLock = field(default_factory=threading.RLock)

    def level(self) -> int:
        return -1 if self.json_mode else _LEVEL[self.verbosity]

    def colored(self) -> bool:
        if self.color_mode == "never" or "NO_COLOR" in os.environ:
            return False
        if self.color_mode == "always":
            return True
        return _isatty(sys.stderr)


_OUT = _Output()


def _isatty(stream: Any) -> bool:
    try:
        return bool(stream.isatty())
    except (AttributeError, ValueError):
        return False


def configure(
    *,
    verbosity: Optional[Verbosity] = None,
    color: Optional[ColorMode] = None,
    json_mode: Optional[bool] = None,
    timestamps: Optional[bool] = None,
    log_path: Optional[str] = None,
) -> None:
    """Set process-wide output switches; None leaves a switch as it is.

    An unopenable log path raises ConfigError and keeps the previous log.
    """
    with _OUT.lock:
        if verbosity is not None:
            if verbosity not in _LEVEL:
                raise ValueError(f"unknown verbosity {verbosity!r}")
            _OUT.verbosity = verbosity
        if color is not None:
            _OUT.color_mode = color
        if json_mode is not None:
            _OUT.json_mode = bool(json_mode)
        if timestamps is not None:
            _OUT.timestamps = bool(timestamps)
        if log_path is not None:
            try:
                log = open(log_path, "a", encoding="utf-8")
            except OSError as e:
                raise ConfigError(f"cannot open log file {log_path}: {e.strerror or e}") from None
            if _OUT.log is not None:
                _OUT.log.close()
            _OUT.log = log


def json_mode() -> bool:
    return _OUT.json_mode


# ── ANSI ─────────────────────────────────────────────────────────────────────

_CODES = {"red": 31, "green": 32, "yellow": 33, "blue": 34, "magenta": 35, "cyan": 36}
_ANSI = re.compile(r"\x1b\[[0-9;]*m")


def _paint(text: str, color: Optional[str] = None, *, bold: bool = False, dim: bool = False) -> str:
    if not _OUT.colored():
        return text
    codes = [str(c) for c, on in ((1, bold), (2, dim)) if on]
    if color:
        codes.append(str(_CODES[color]))
    return f"\x1b[{';'.join(codes)}m{text}\x1b[0m" if codes else text


def _plain(text: str) -> str:
    return _ANSI.sub("", text)


# ── emitters ─────────────────────────────────────────────────────────────────

def _write(stream: TextIO, text: str) -> None:
    line = text.rstrip("\n") + "\n"
    with _OUT.lock:
        try:
            stream.write(line)
            stream.flush()
        except (BrokenPipeError, ValueError):
            pass
        if _OUT.log is not None:
            _OUT.log.write(_plain(line))
            _OUT.log.flush()


def _say(min_level: int, text: str, color: Optional[str] = None, *, dim: bool = False) -> None:
    if _OUT.level() < min_level:
        return
    stamp = _paint(f"[{_dt.datetime.now():%H:%M:%S}] ", "blue", dim=True) if _OUT.timestamps else ""
    _write(sys.stderr, stamp + _paint(text, color, dim=dim))


def _json_default(o: Any) -> Any:
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    if callable(getattr(o, "to_dict", None)):
        return o.to_dict()
    return str(o)


def emit_json(obj: Any, *, indent: Optional[int] = None) -> None:
    _write(sys.stdout, json.dumps(obj, default=_json_default, sort_keys=True, indent=indent))


def emit_out(text: str) -> None:
    _write(sys.stdout, text)


def emit_info(msg: str) -> None:
    _say(1, msg)


def emit_success(msg: str) -> None:
    _say(1, msg, "green")


def emit_warn(msg: str) -> None:
    _say(0, f"warning: {msg}", "yellow")


def emit_err(msg: str) -> None:
    # shown in every mode, JSON included
    stamp = f"[{_dt.datetime.now():%H:%M:%S}] " if _OUT.timestamps else ""
    _write(sys.stderr, stamp + _paint(msg, "red"))


def emit_verbose(msg: str) -> None:
    _say(2, msg, "cyan")


def emit_trace(msg: str) -> None:
    _say(3, msg, "magenta", dim=True)


def heading(text: str) -> None:
    _say(1, _paint(text, bold=True) + "\n" + _paint("─" * _OUT.width, dim=True))


def render_table(headers: Sequence[str], rows: Sequence[Sequence[Any]]) -> str:
    """Left-aligned columns, three spaces apart; cells are never truncated."""
    cells = [[str(c) for c in r] for r in rows]
    widths = [max([len(_plain(h))] + [len(_plain(r[i])) for r in cells if i < len(r)]) for i, h in enumerate(headers)]

    def line(r: Sequence[str]) -> str:
        return "   ".join(c + " " * (w - len(_plain(c))) for c, w in zip(r, widths)).rstrip()

    out = [line(list(headers)), "─" * (sum(widths) + 3 * (len(widths) - 1))]
    out.extend(line(r) for r in cells)
    return "\n".join(out)


# ── progress ─────────────────────────────────────────────────────────────────

class EpochProgress:
    """Single-line epoch counter with elapsed time and the latest loss; TTY only."""

    def __init__(self, total: int, label: str) -> None:
        self.total = max(1, int(total))
        self.label = label
        self.done = 0
        self.suffix = ""
        self.t0 = time.perf_counter()
        self._drawn = 0.0

    @property
    def live(self) -> bool:
        return _OUT.level() >= 1 and _isatty(sys.stderr)

    def update(self, n: int = 1, *, suffix: str = "") -> None:
        self.done = min(self.total, self.done + n)
        self.suffix = suffix or self.suffix
        now = time.perf_counter()
        if self.live and (self.done == self.total or now - self._drawn >= 0.1):
            self._drawn = now
            elapsed = now - self.t0
            text = f"{self.label}: epoch {self.done}/{self.total}  {elapsed:6.1f}s  {self.suffix}"
            sys.stderr.write("\r" + text[: _OUT.width - 1].ljust(_OUT.width - 1))
            sys.stderr.flush()

    def close(self) -> None:
        if self.live and self._drawn:
            sys.stderr.write("\n")
            sys.stderr.flush()


@contextmanager
def progress(total: int, label: str = "") -> Iterator[EpochProgress]:
    bar = EpochProgress(total, label)
    try:
        yield bar
    finally:
        bar.close()


__all__ = [
    "Verbosity", "ColorMode", "configure", "json_mode",
    "emit_json", "emit_out", "emit_info", "emit_success", "emit_warn", "emit_err",
    "emit_verbose", "emit_trace", "heading", "render_table", "progress",
]
