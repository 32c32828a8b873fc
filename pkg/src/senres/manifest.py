# src/senres/manifest.py
from __future__ import annotations

import json
import platform
import time
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Union

import numpy as np

from . import __version__
from .errors import ConfigError, FormatError, ParseError
from .ids import run_id


@dataclass
class RepetitionOut:
    repetition: int
    split_seed: int
    macro_f1: float
    train_windows: int
    test_windows: int
    epoch_losses: List[float] = field(default_factory=list)


@dataclass
class RunManifest:
    """
    Everything needed to re-run and to compare a run: config snapshot, seeds,
    per-epoch losses, per-repetition scores and sha256 of inputs and outputs.
    """
    kind: str                                   # pretrain | supervised | linear | finetune
    method: str                                 # label used by `report`
    config: Dict[str, Any]
    seed: int
    run_id: str = ""
    label_fraction: Optional[float] = None
    epoch_losses: List[float] = field(default_factory=list)
    repetitions: List[RepetitionOut] = field(default_factory=list)
    inputs: Dict[str, str] = field(default_factory=dict)
    artifacts: Dict[str, str] = field(default_factory=dict)
    notes: List[str] = field(default_factory=list)
    wall_clock_s: float = 0.0
    started_at: str = ""
    versions: Dict[str, str] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if not self.run_id:
            self.run_id = run_id(self.kind, self.method, self.seed, json.dumps(self.config, sort_keys=True, default=str))
        if not self.versions:
            self.versions = {"senres": __version__, "numpy": np.__version__, "python": platform.python_version()}

    # -- derived ---------------------------------------------------------------
    @property
    def scores(self) -> List[float]:
        return [r.macro_f1 for r in self.repetitions]

    def expected_repetitions(self) -> Optional[int]:
        ev = self.config.get("evaluation") if isinstance(self.config, dict) else None
        if isinstance(ev, dict) and "repetitions" in ev:
            return int(ev["repetitions"])
        return None

    def check(self) -> None:
        want = self.expected_repetitions()
        if want is not None and self.repetitions and len(self.repetitions) != want:
            raise ConfigError(f"manifest {self.run_id}: {len(self.repetitions)} repetitions, config says {want}")

    # -- timing ----------------------------------------------------------------
    def start_clock(self) -> float:
        self.started_at = time.strftime("%Y-%m-%dT%H:%M:%S%z")
        return time.perf_counter()

    def stop_clock(self, t0: float) -> None:
        self.wall_clock_s = round(time.perf_counter() - t0, 3)

    # -- (de)serialisation -----------------------------------------------------
    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    def to_json(self, *, indent: int = 2) -> str:
        return json.dumps(self.to_dict(), indent=indent, sort_keys=True, default=_plain)

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "RunManifest":
        known = {f.name for f in fields(cls)}
        missing = {"kind", "method", "config", "seed"} - set(d)
        if missing:
            raise FormatError(f"manifest lacks field(s): {', '.join(sorted(missing))}")
        kw = {k: v for k, v in d.items() if k in known}
        kw["repetitions"] = [RepetitionOut(**r) for r in d.get("repetitions", [])]
        return cls(**kw)

    def save(self, path: Union[str, Path]) -> Path:
        p = Path(path)
        p.parent.mkdir(parents=True, exist_ok=True)
        p.write_text(self.to_json() + "\n", encoding="utf-8")
        return p

    @classmethod
    def load(cls, path: Union[str, Path]) -> "RunManifest":
        p = Path(path)
        try:
            raw = json.loads(p.read_text(encoding="utf-8"))
        except OSError as e:
            raise FormatError(f"{p}: cannot read manifest ({e.strerror})") from None
        except json.JSONDecodeError as e:
            raise ParseError(f"invalid JSON: {e.msg}", path=str(p), line=e.lineno) from None
        if not isinstance(raw, dict):
            raise FormatError(f"{p}: manifest must be a JSON object")
        try:
            return cls.from_dict(raw)
        except TypeError as e:
            raise FormatError(f"{p}: malformed manifest ({e})") from None


def _plain(o: Any) -> Any:
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    if hasattr(o, "to_dict"):
        return o.to_dict()
    return str(o)


__all__ = ["RepetitionOut", "RunManifest"]
