# src/senres/evaluation.py
from __future__ import annotations

"""
Downstream protocols.

  supervised   encoder + linear head from scratch, optionally on an augmented training set
  linear       frozen encoder, only the linear head trains (features computed once)
  finetune     encoder initialised from a checkpoint, everything trains

Each repetition redraws the train/test split from derive_seed(seed, repetition)
and scores macro-F1 on the held-out windows.
"""

import math
from dataclasses import dataclass, field, replace
from typing import Any, Callable, Dict, List, Mapping, Optional

import numpy as np
from joblib import Parallel, delayed

from . import tensor as tn
from .augment import AugmentSpec
from .dataset import SplitSpec, WindowSet, expand_training_set, split, standardize
from .encoder import (
    EncoderConfig, ModelParams, classify, encode, init_classifier, init_encoder,
    represent, validate_encoder,
)
from .errors import ConfigError, NumericError
from .ids import derive_seed, digest_arrays, make_rng
from .io import emit_info, emit_verbose, emit_warn
from .manifest import RepetitionOut, RunManifest
from .metrics import mean_f1
from .tensor import AdamState, Tape, Tensor

PROTOCOLS = ("supervised", "linear", "finetune")

_SHUFFLE, _DROPOUT = 21, 22


def batch_size_for(fraction: float) -> int:
    """Label-fraction batch rule: 1% → 50, 10% → 500, larger → 1000."""
    if fraction <= 0.01:
        return 50
    if fraction <= 0.10:
        return 500
    return 1000


@dataclass(frozen=True)
class EvalConfig:
    protocol: str = "linear"
    label_fraction: float = 0.01
    batch_size: Optional[int] = None
    epochs: int = 200
    lr: Optional[float] = None
    augment_times: int = 0
    repetitions: int = 10
    seed: int = 0
    stratified: bool = True
    test_subjects: int = 0
    zscore: bool = False
    precision: str = "float64"
    workers: int = 1
    encoder: EncoderConfig = field(default_factory=EncoderConfig)

    def __post_init__(self) -> None:
        if self.protocol not in PROTOCOLS:
            raise ConfigError(f"unknown protocol {self.protocol!r} (expected one of {', '.join(PROTOCOLS)})")
        if not 0.0 < self.label_fraction < 1.0:
            raise ConfigError(f"label fraction must be in (0, 1), got {self.label_fraction}")
        if self.repetitions < 1:
            raise ConfigError(f"repetitions must be >= 1, got {self.repetitions}")
        if self.epochs < 0:
            raise ConfigError(f"epochs must be >= 0, got {self.epochs}")
        if self.augment_times < 0:
            raise ConfigError(f"augment times must be >= 0, got {self.augment_times}")
        if self.batch_size is None:
            object.__setattr__(self, "batch_size", batch_size_for(self.label_fraction))
        if self.lr is None:
            object.__setattr__(self, "lr", 1e-2 if self.protocol == "linear" else 5e-4)
        if self.batch_size < 1:  # type: ignore[operator]
            raise ConfigError(f"batch size must be >= 1, got {self.batch_size}")
        if not self.lr > 0:  # type: ignore[operator]
            raise ConfigError(f"learning rate must be > 0, got {self.lr}")
        if self.precision not in ("float64", "float32"):
            raise ConfigError(f"precision must be float64 or float32, got {self.precision!r}")

    @property
    def dtype(self):
        return np.float64 if self.precision == "float64" else np.float32

    def split_spec(self, repetition: int) -> SplitSpec:
        return SplitSpec(self.label_fraction, derive_seed(self.seed, repetition), self.stratified, self.test_subjects)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "protocol": self.protocol, "label_fraction": self.label_fraction, "batch_size": self.batch_size,
            "epochs": self.epochs, "lr": self.lr, "augment_times": self.augment_times,
            "repetitions": self.repetitions, "seed": self.seed, "stratified": self.stratified,
            "test_subjects": self.test_subjects, "zscore": self.zscore, "precision": self.precision,
            "workers": self.workers, "encoder": self.encoder.to_dict(),
        }

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "EvalConfig":
        kw = dict(d)
        unknown = set(kw) - set(cls.__dataclass_fields__)
        if unknown:
            raise ConfigError(f"unknown evaluation field(s): {', '.join(sorted(unknown))}")
        if "encoder" in kw and not isinstance(kw["encoder"], EncoderConfig):
            kw["encoder"] = EncoderConfig.from_dict(kw["encoder"])
        return cls(**kw)

    def with_overrides(self, **kw: Any) -> "EvalConfig":
        return replace(self, **{k: v for k, v in kw.items() if v is not None})


@dataclass
class EvalResult:
    macro_f1: float
    params: ModelParams
    epoch_losses: List[float] = field(default_factory=list)
    train_windows: int = 0
    test_windows: int = 0
    split_seed: int = 0


# ──────────────────────────────────────────────────────────────────────────────
# Training core
# ──────────────────────────────────────────────────────────────────────────────

Forward = Callable[[np.ndarray, bool, Optional[np.random.Generator]], Tensor]


def _fit(
    inputs: np.ndarray,
    labels: np.ndarray,
    trainable: ModelParams,
    forward: Forward,
    cfg: EvalConfig,
    seed: int,
) -> List[float]:
    """Mini-batch cross-entropy with Adam; the incomplete last batch is kept."""
    n = len(inputs)
    batch = min(int(cfg.batch_size), n)  # type: ignore[arg-type]
    adam = AdamState(lr=float(cfg.lr))  # type: ignore[arg-type]
    losses: List[float] = []
    for epoch in range(cfg.epochs):
        order = make_rng(seed, _SHUFFLE, epoch).permutation(n)
        acc = []
        for b, lo in enumerate(range(0, n, batch)):
            idx = order[lo:lo + batch]
            trainable.clear_grads()
            with Tape() as tape:
                loss = tn.cross_entropy(forward(inputs[idx], True, make_rng(seed, _DROPOUT, epoch, b)), labels[idx])
            value = loss.item()
            if not math.isfinite(value):
                raise NumericError(f"non-finite classification loss ({value})", epoch=epoch + 1)
            tape.backward(loss)
            tn.adam_step(trainable, trainable.grads(), adam)
            acc.append(value)
        losses.append(float(np.mean(acc)))
        emit_verbose(f"{cfg.protocol} epoch {epoch + 1}/{cfg.epochs}: loss {losses[-1]:.5f}")
    return losses


def _check_classes(train: WindowSet) -> None:
    empty = [name for name, n in zip(train.class_names, train.class_counts()) if n == 0]
    if empty:
        raise ConfigError(f"training set has no windows for class(es): {', '.join(empty)}")


def _predict_full(data: np.ndarray, params: ModelParams, enc: EncoderConfig, dtype) -> np.ndarray:
    feats = represent(data.astype(dtype, copy=False), params, enc)
    return np.argmax(classify(Tensor(feats, dtype=dtype), params).data, axis=1)


def train_supervised(
    train: WindowSet,
    cfg: EvalConfig,
    aug: Optional[AugmentSpec] = None,
    *,
    seed: Optional[int] = None,
    init: Optional[ModelParams] = None,
) -> EvalResult:
    """
    Encoder + linear head trained end to end. With `aug`, the training set is
    the original windows plus cfg.augment_times augmented copies. `init`
    (an encoder) turns this into fine-tuning. macro_f1 is on the training set.
    """
    seed = cfg.seed if seed is None else seed
    if len(train) == 0:
        raise ConfigError("empty training set")
    _check_classes(train)
    cfg.encoder.check_window(train.T)
    if aug is not None:
        if cfg.augment_times == 0:
            emit_warn("augmentation given but augment_times is 0; training on the original windows")
        train = expand_training_set(train, aug, cfg.augment_times, seed, workers=cfg.workers)
    dtype = cfg.dtype
    enc = init.copy(requires_grad=True).astype(dtype) if init is not None else init_encoder(cfg.encoder, train.C, seed, dtype=dtype)
    params = enc.merged(init_classifier(cfg.encoder.hidden, train.num_classes, seed, dtype=dtype))
    x = train.data.astype(dtype)

    def forward(xb: np.ndarray, training: bool, rng: Optional[np.random.Generator]) -> Tensor:
        return classify(encode(xb, params, cfg.encoder, training=training, rng=rng), params)

    losses = _fit(x, train.labels, params, forward, cfg, seed)
    f1 = mean_f1(_predict_full(x, params, cfg.encoder, dtype), train.labels, train.num_classes)
    return EvalResult(f1, params, losses, len(train))


def _prepare(labeled: WindowSet, cfg: EvalConfig, repetition: int):
    spec = cfg.split_spec(repetition)
    train, test = split(labeled, spec)
    if cfg.zscore:
        train, test, _ = standardize(train, test)
    return train, test, spec.seed


def linear_evaluate(
    encoder_params: ModelParams,
    labeled: WindowSet,
    cfg: EvalConfig,
    *,
    repetition: int = 0,
) -> EvalResult:
    """Frozen encoder (eval mode, never updated); only the classifier trains."""
    validate_encoder(encoder_params, cfg.encoder, labeled.C)
    train, test, split_seed = _prepare(labeled, cfg, repetition)
    _check_classes(train)
    dtype = cfg.dtype
    frozen = encoder_params.copy(requires_grad=False).astype(dtype)
    feats_train = represent(train.data.astype(dtype), frozen, cfg.encoder)
    feats_test = represent(test.data.astype(dtype), frozen, cfg.encoder)
    head = init_classifier(cfg.encoder.hidden, labeled.num_classes, split_seed, dtype=dtype)

    def forward(fb: np.ndarray, training: bool, rng: Optional[np.random.Generator]) -> Tensor:
        return classify(Tensor(fb, dtype=dtype), head)

    losses = _fit(feats_train, train.labels, head, forward, cfg, split_seed)
    preds = np.argmax(classify(Tensor(feats_test, dtype=dtype), head).data, axis=1)
    f1 = mean_f1(preds, test.labels, labeled.num_classes)
    return EvalResult(f1, frozen.merged(head), losses, len(train), len(test), split_seed)


def fine_tune(
    encoder_params: ModelParams,
    labeled: WindowSet,
    cfg: EvalConfig,
    *,
    repetition: int = 0,
) -> EvalResult:
    """Encoder starts from the checkpoint and trains together with the classifier."""
    validate_encoder(encoder_params, cfg.encoder, labeled.C)
    train, test, split_seed = _prepare(labeled, cfg, repetition)
    _check_classes(train)
    dtype = cfg.dtype
    params = encoder_params.copy(requires_grad=True).astype(dtype).merged(
        init_classifier(cfg.encoder.hidden, labeled.num_classes, split_seed, dtype=dtype)
    )

    def forward(xb: np.ndarray, training: bool, rng: Optional[np.random.Generator]) -> Tensor:
        return classify(encode(xb, params, cfg.encoder, training=training, rng=rng), params)

    losses = _fit(train.data.astype(dtype), train.labels, params, forward, cfg, split_seed)
    preds = _predict_full(test.data, params, cfg.encoder, dtype)
    f1 = mean_f1(preds, test.labels, labeled.num_classes)
    return EvalResult(f1, params, losses, len(train), len(test), split_seed)


def supervised_evaluate(
    labeled: WindowSet,
    cfg: EvalConfig,
    aug: Optional[AugmentSpec] = None,
    *,
    repetition: int = 0,
) -> EvalResult:
    train, test, split_seed = _prepare(labeled, cfg, repetition)
    res = train_supervised(train, cfg, aug, seed=split_seed)
    preds = _predict_full(test.data, res.params, cfg.encoder, cfg.dtype)
    res.macro_f1 = mean_f1(preds, test.labels, labeled.num_classes)
    res.test_windows, res.split_seed = len(test), split_seed
    return res


# ──────────────────────────────────────────────────────────────────────────────
# Repetition driver
# ──────────────────────────────────────────────────────────────────────────────

def run_protocol(
    labeled: WindowSet,
    cfg: EvalConfig,
    *,
    encoder_params: Optional[ModelParams] = None,
    aug: Optional[AugmentSpec] = None,
    method: Optional[str] = None,
    extra_config: Optional[Mapping[str, Any]] = None,
    inputs: Optional[Mapping[str, str]] = None,
) -> RunManifest:
    """cfg.repetitions independent split/train/score rounds, collected in one manifest."""
    if cfg.protocol != "supervised" and encoder_params is None:
        raise ConfigError(f"{cfg.protocol} evaluation needs an encoder checkpoint")
    config = {"evaluation": cfg.to_dict(), **(dict(extra_config) if extra_config else {})}
    if aug is not None:
        config["augmentation"] = aug.to_dict()
    manifest = RunManifest(
        kind=cfg.protocol,
        method=method or cfg.protocol,
        config=config,
        seed=cfg.seed,
        label_fraction=cfg.label_fraction,
        inputs={"windows": digest_arrays([("data", labeled.data), ("labels", labeled.labels)]), **(inputs or {})},
    )
    if encoder_params is not None:
        manifest.inputs["encoder"] = encoder_params.digest()
    t0 = manifest.start_clock()

    def one(rep: int) -> EvalResult:
        if cfg.protocol == "supervised":
            return supervised_evaluate(labeled, cfg, aug, repetition=rep)
        if cfg.protocol == "linear":
            return linear_evaluate(encoder_params, labeled, cfg, repetition=rep)  # type: ignore[arg-type]
        return fine_tune(encoder_params, labeled, cfg, repetition=rep)  # type: ignore[arg-type]

    if cfg.workers > 1 and cfg.repetitions > 1:
        results = Parallel(n_jobs=cfg.workers, prefer="threads")(delayed(one)(r) for r in range(cfg.repetitions))
    else:
        results = [one(r) for r in range(cfg.repetitions)]
    for rep, res in enumerate(results):
        manifest.repetitions.append(RepetitionOut(
            repetition=rep,
            split_seed=res.split_seed,
            macro_f1=float(res.macro_f1),
            train_windows=res.train_windows,
            test_windows=res.test_windows,
            epoch_losses=list(res.epoch_losses),
        ))
        emit_info(f"repetition {rep + 1}/{cfg.repetitions}: macro-F1 {res.macro_f1:.4f}")
    for res in results:
        if res.epoch_losses:
            manifest.epoch_losses = list(res.epoch_losses)
            break
    manifest.stop_clock(t0)
    return manifest


__all__ = [
    "PROTOCOLS", "batch_size_for", "EvalConfig", "EvalResult",
    "train_supervised", "linear_evaluate", "fine_tune", "supervised_evaluate", "run_protocol",
]
