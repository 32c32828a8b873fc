# src/senres/config.py
from __future__ import annotations

"""
Run configuration: one JSON document, profile defaults underneath, CLI flags on top.

    {
      "profile": "desk",
      "seed": 7,
      "output_dir": "runs/desk",
      "dataset": {"kind": "swnd", "path": "ucihar.swnd"},
      "encoder": {"conv_layers": 4, "filters": 64},
      "augmentation": {"branch1": {"kind": "identity"},
                       "branch2": {"kind": "resample", "params": {"M": 1, "N": 0}}},
      "framework": {"framework": "simclr", "epochs": 50},
      "evaluation": {"protocol": "linear", "label_fraction": 0.01}
    }
"""

import json
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Mapping, Optional, Union

from .augment import AugmentSpec
from .contrastive import FRAMEWORKS, PretrainConfig
from .encoder import EncoderConfig
from .errors import ConfigError, ParseError, SenresError
from .evaluation import EvalConfig

PROFILES = ("full", "desk")
DATASET_KINDS = ("swnd", "ucihar", "csv", "synthetic")

# laptop-CPU encoder for the desk profile
DESK_ENCODER = EncoderConfig(conv_layers=2, filters=32, kernel=5, lstm_layers=1, hidden=32, dropout=0.5)


def default_workers() -> int:
    raw = os.environ.get("SENRES_WORKERS", "").strip()
    if not raw:
        return 1
    try:
        n = int(raw)
    except ValueError:
        raise ConfigError(f"SENRES_WORKERS must be an integer, got {raw!r}") from None
    if n < 1:
        raise ConfigError(f"SENRES_WORKERS must be >= 1, got {n}")
    return n


def _check_profile(profile: str) -> None:
    if profile not in PROFILES:
        raise ConfigError(f"unknown profile {profile!r} (expected one of {', '.join(PROFILES)})")


def encoder_defaults(profile: str) -> Dict[str, Any]:
    _check_profile(profile)
    return (EncoderConfig() if profile == "full" else DESK_ENCODER).to_dict()


def framework_defaults(profile: str, framework: str) -> Dict[str, Any]:
    _check_profile(profile)
    if framework not in FRAMEWORKS:
        raise ConfigError(f"unknown framework {framework!r} (expected simclr or moco)")
    if profile == "full":
        return {"framework": framework, "epochs": 200, "lr": 1e-3, "K": 8192, "momentum": 0.999}
    return {
        "framework": framework,
        "epochs": 50,
        "lr": 1e-3,
        "batch_size": 128 if framework == "simclr" else 64,
        "K": 512,
        "momentum": 0.999,
    }


def evaluation_defaults(profile: str) -> Dict[str, Any]:
    _check_profile(profile)
    return {"epochs": 200 if profile == "full" else 50, "repetitions": 10}


@dataclass(frozen=True)
class DatasetConfig:
    kind: str = "swnd"
    path: Optional[str] = None
    schema: Optional[str] = None
    window_len: Optional[int] = None
    overlap: Optional[float] = None

    def __post_init__(self) -> None:
        if self.kind not in DATASET_KINDS:
            raise ConfigError(f"unknown dataset kind {self.kind!r} (expected one of {', '.join(DATASET_KINDS)})")

    def to_dict(self) -> Dict[str, Any]:
        return {"kind": self.kind, "path": self.path, "schema": self.schema,
                "window_len": self.window_len, "overlap": self.overlap}


@dataclass(frozen=True)
class RunConfig:
    profile: str = "full"
    seed: int = 0
    output_dir: str = "runs"
    workers: int = 1
    dataset: DatasetConfig = field(default_factory=DatasetConfig)
    framework: PretrainConfig = field(default_factory=PretrainConfig)
    evaluation: EvalConfig = field(default_factory=EvalConfig)
    supervised_augment: Optional[AugmentSpec] = None

    @property
    def encoder(self) -> EncoderConfig:
        return self.framework.encoder

    def validate_paths(self) -> None:
        for label, p in (("dataset.path", self.dataset.path), ("dataset.schema", self.dataset.schema)):
            if p is not None and not Path(p).exists():
                raise ConfigError(f"{label}: {p} does not exist")

    def to_dict(self) -> Dict[str, Any]:
        return {
            "profile": self.profile,
            "seed": self.seed,
            "output_dir": self.output_dir,
            "workers": self.workers,
            "dataset": self.dataset.to_dict(),
            "encoder": self.encoder.to_dict(),
            "augmentation": {
                "branch1": self.framework.branch1.to_dict(),
                "branch2": self.framework.branch2.to_dict(),
                "supervised": self.supervised_augment.to_dict() if self.supervised_augment else None,
            },
            "framework": self.framework.to_dict(),
            "evaluation": self.evaluation.to_dict(),
        }


def load_config_file(path: Union[str, Path]) -> Dict[str, Any]:
    p = Path(path)
    try:
        raw = json.loads(p.read_text(encoding="utf-8"))
    except OSError as e:
        raise ConfigError(f"{p}: cannot read config ({e.strerror})") from None
    except json.JSONDecodeError as e:
        raise ParseError(f"invalid JSON: {e.msg}", path=str(p), line=e.lineno) from None
    if not isinstance(raw, dict):
        raise ConfigError(f"{p}: config must be a JSON object")
    return raw


def _section(raw: Mapping[str, Any], name: str) -> Dict[str, Any]:
    sec = raw.get(name) or {}
    if not isinstance(sec, Mapping):
        raise ConfigError(f"config section {name!r} must be an object")
    return dict(sec)


def _spec(value: Any, where: str) -> Optional[AugmentSpec]:
    if value is None or isinstance(value, AugmentSpec):
        return value
    try:
        return AugmentSpec.from_dict(value)
    except SenresError as e:
        raise ConfigError(f"{where}: {e}") from None


def _drop_none(d: Optional[Mapping[str, Any]]) -> Dict[str, Any]:
    return {k: v for k, v in (d or {}).items() if v is not None}


def resolve(
    raw: Optional[Mapping[str, Any]] = None,
    *,
    profile: Optional[str] = None,
    seed: Optional[int] = None,
    output_dir: Optional[str] = None,
    workers: Optional[int] = None,
    dataset: Optional[Mapping[str, Any]] = None,
    encoder: Optional[Mapping[str, Any]] = None,
    framework: Optional[Mapping[str, Any]] = None,
    evaluation: Optional[Mapping[str, Any]] = None,
    branch1: Optional[AugmentSpec] = None,
    branch2: Optional[AugmentSpec] = None,
    supervised_augment: Optional[AugmentSpec] = None,
) -> RunConfig:
    """Profile defaults ← config document ← flag overrides (None means "not given")."""
    raw = dict(raw or {})
    unknown = set(raw) - {"profile", "seed", "output_dir", "workers", "dataset", "encoder",
                          "augmentation", "framework", "evaluation"}
    if unknown:
        raise ConfigError(f"unknown config section(s): {', '.join(sorted(unknown))}")
    prof = profile or raw.get("profile") or "full"
    _check_profile(prof)
    the_seed = int(seed if seed is not None else raw.get("seed", 0))
    n_workers = int(workers if workers is not None else raw.get("workers") or default_workers())
    if n_workers < 1:
        raise ConfigError(f"workers must be >= 1, got {n_workers}")

    fw_raw = {**_section(raw, "framework"), **_drop_none(framework)}
    fw_name = fw_raw.get("framework", "simclr")
    enc_cfg = EncoderConfig.from_dict({**encoder_defaults(prof), **_section(raw, "encoder"), **_drop_none(encoder)})

    aug = _section(raw, "augmentation")
    b1 = branch1 or _spec(aug.get("branch1"), "augmentation.branch1")
    b2 = branch2 or _spec(aug.get("branch2"), "augmentation.branch2")
    sup = supervised_augment or _spec(aug.get("supervised"), "augmentation.supervised")

    fw_kw: Dict[str, Any] = {**framework_defaults(prof, fw_name), **fw_raw,
                             "encoder": enc_cfg, "seed": the_seed, "workers": n_workers}
    if b1 is not None:
        fw_kw["branch1"] = b1
    if b2 is not None:
        fw_kw["branch2"] = b2
    ev_kw: Dict[str, Any] = {**evaluation_defaults(prof), **_section(raw, "evaluation"), **_drop_none(evaluation),
                             "encoder": enc_cfg, "seed": the_seed, "workers": n_workers}
    try:
        fw_cfg = PretrainConfig.from_dict(fw_kw)
        ev_cfg = EvalConfig.from_dict(ev_kw)
        ds_cfg = DatasetConfig(**{**_section(raw, "dataset"), **_drop_none(dataset)})
    except TypeError as e:
        raise ConfigError(f"invalid config: {e}") from None
    return RunConfig(
        profile=prof,
        seed=the_seed,
        output_dir=str(output_dir or raw.get("output_dir") or "runs"),
        workers=n_workers,
        dataset=ds_cfg,
        framework=fw_cfg,
        evaluation=ev_cfg,
        supervised_augment=sup,
    )


__all__ = [
    "PROFILES", "DATASET_KINDS", "DESK_ENCODER", "default_workers", "encoder_defaults",
    "framework_defaults", "evaluation_defaults", "DatasetConfig", "RunConfig",
    "load_config_file", "resolve",
]
