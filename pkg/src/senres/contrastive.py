# src/senres/contrastive.py
from __future__ import annotations

"""
Contrastive pretraining.

  simclr   two views per window interleaved as rows (2k, 2k+1), NT-Xent over the batch
  moco     online query encoder θ, momentum key encoder ξ, InfoNCE against a FIFO
           queue of past keys; ξ ← mξ + (1−m)θ after every optimiser step

Both return the encoder only; projection heads are dropped after pretraining.
"""

import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Union

import numpy as np

from . import tensor as tn
from .augment import AugmentSpec, IDENTITY, augment_array
from .dataset import WindowSet
from .encoder import (
    ENCODER, EncoderConfig, ModelParams, ProjectionConfig,
    encode, init_encoder, init_projection, project,
)
from .errors import ConfigError, InvalidParamsError, InvalidStateError, NumericError, ShapeError
from .ids import digest_arrays, make_rng
from .io import emit_trace, emit_verbose, progress
from .manifest import RunManifest
from .tensor import AdamState, Tape, Tensor

FRAMEWORKS = ("simclr", "moco")

_DEFAULTS: Dict[str, Dict[str, Any]] = {
    "simclr": {"temperature": 0.1, "batch_size": 2048, "projection": (256, 128, 50)},
    "moco": {"temperature": 0.07, "batch_size": 1024, "projection": (256, 128)},
}

# rng stream ids
_SHUFFLE, _VIEW1, _VIEW2, _DROPOUT = 11, 12, 13, 14


# ──────────────────────────────────────────────────────────────────────────────
# Negative-key queue
# ──────────────────────────────────────────────────────────────────────────────

class Queue:
    """Ring buffer of K key vectors of width P; the oldest entries are overwritten first."""

    def __init__(self, K: int, P: int, *, dtype=np.float64) -> None:
        if K < 1 or P < 1:
            raise InvalidParamsError(f"queue needs K >= 1 and P >= 1, got K={K} P={P}")
        self.K, self.P = int(K), int(P)
        self.buffer = np.zeros((self.K, self.P), dtype=dtype)
        self.cursor = 0
        self.fill = 0

    def __len__(self) -> int:
        return self.fill

    @property
    def full(self) -> bool:
        return self.fill == self.K

    def push(self, keys: Union[Tensor, np.ndarray]) -> None:
        k = keys.data if isinstance(keys, Tensor) else np.asarray(keys)
        if k.ndim != 2 or k.shape[1] != self.P:
            raise ShapeError(f"queue of width {self.P} cannot take keys of shape {k.shape}")
        B = k.shape[0]
        if B > self.K:
            raise InvalidParamsError(f"cannot push {B} keys into a queue of capacity {self.K}")
        pos = (self.cursor + np.arange(B)) % self.K
        self.buffer[pos] = k
        self.cursor = (self.cursor + B) % self.K
        self.fill = min(self.K, self.fill + B)

    def snapshot(self) -> np.ndarray:
        """Filled entries in storage order."""
        return self.buffer[: self.fill].copy()

    def ordered(self) -> np.ndarray:
        """Filled entries oldest first."""
        if not self.full:
            return self.buffer[: self.fill].copy()
        return np.roll(self.buffer, -self.cursor, axis=0)


def queue_push(queue: Queue, keys: Union[Tensor, np.ndarray]) -> None:
    queue.push(keys)


# ──────────────────────────────────────────────────────────────────────────────
# Losses
# ──────────────────────────────────────────────────────────────────────────────

def nt_xent(Z: Tensor, temperature: float) -> Tensor:
    """
    Rows (2k, 2k+1) are positive pairs. Each row's denominator sums over every
    other row, the positive included; cosine similarity via normalised dots.
    """
    if Z.ndim != 2 or Z.shape[0] < 2 or Z.shape[0] % 2:
        raise ShapeError(f"nt_xent needs an even number (>= 2) of rows, got shape {Z.shape}")
    if temperature <= 0:
        raise InvalidParamsError(f"temperature must be > 0, got {temperature}")
    n2 = Z.shape[0]
    u = tn.l2_normalize(Z)
    S = (u @ u.T) / temperature
    others = ~np.eye(n2, dtype=bool)
    partner = np.arange(n2) ^ 1
    return (tn.logsumexp(S, others) - tn.gather(S, partner)).mean()


def info_nce(
    q: Tensor,
    k_pos: Tensor,
    queue: Union[Queue, Tensor, np.ndarray],
    temperature: float,
) -> Tensor:
    """
    Cross-entropy of [q·k_pos, q·queue…]/τ with the positive at index 0.
    Keys and queue are behind a stop-gradient: only q's path is differentiated.
    """
    if isinstance(queue, Queue):
        if len(queue) == 0:
            raise InvalidStateError("info_nce against an empty queue")
        negatives = Tensor(queue.snapshot(), dtype=q.dtype)
    else:
        negatives = tn.as_tensor(queue, q.dtype)
        if negatives.ndim != 2 or negatives.shape[0] == 0:
            raise InvalidStateError(f"info_nce needs a non-empty K×P negative bank, got {negatives.shape}")
    if q.ndim != 2 or q.shape != k_pos.shape:
        raise ShapeError(f"info_nce: q {q.shape} vs k_pos {k_pos.shape}")
    if negatives.shape[1] != q.shape[1]:
        raise ShapeError(f"info_nce: queue width {negatives.shape[1]} vs q width {q.shape[1]}")
    if temperature <= 0:
        raise InvalidParamsError(f"temperature must be > 0, got {temperature}")
    k = tn.stop_gradient(k_pos)
    bank = tn.stop_gradient(negatives)
    l_pos = (q * k).sum(axis=1, keepdims=True)
    l_neg = q @ bank.T
    logits = tn.concat([l_pos, l_neg], axis=1) / temperature
    return tn.cross_entropy(logits, np.zeros(q.shape[0], dtype=np.int64))


def momentum_update(theta: ModelParams, xi: ModelParams, m: float) -> ModelParams:
    """ξ ← m·ξ + (1−m)·θ, in place on ξ."""
    if not 0.0 <= m < 1.0:
        raise InvalidParamsError(f"momentum must be in [0, 1), got {m}")
    theta.check_same_layout(xi)
    for name in xi:
        x = xi[name].data
        x[...] = m * x + (1.0 - m) * theta[name].data
    return xi


# ──────────────────────────────────────────────────────────────────────────────
# Config
# ──────────────────────────────────────────────────────────────────────────────

@dataclass(frozen=True)
class PretrainConfig:
    framework: str = "simclr"
    branch1: AugmentSpec = IDENTITY
    branch2: AugmentSpec = field(default_factory=lambda: AugmentSpec("resample"))
    temperature: Optional[float] = None
    batch_size: Optional[int] = None
    epochs: int = 200
    lr: float = 1e-3
    K: int = 8192
    momentum: float = 0.999
    seed: int = 0
    encoder: EncoderConfig = field(default_factory=EncoderConfig)
    projection: Optional[ProjectionConfig] = None
    precision: str = "float64"
    checkpoint_every: int = 0
    checkpoint_dir: Optional[str] = None
    workers: int = 1

    def __post_init__(self) -> None:
        if self.framework not in FRAMEWORKS:
            raise ConfigError(f"unknown framework {self.framework!r} (expected simclr or moco)")
        d = _DEFAULTS[self.framework]
        if self.temperature is None:
            object.__setattr__(self, "temperature", d["temperature"])
        if self.batch_size is None:
            object.__setattr__(self, "batch_size", d["batch_size"])
        if self.projection is None:
            object.__setattr__(self, "projection", ProjectionConfig(d["projection"]))
        if not self.temperature > 0:  # type: ignore[operator]
            raise ConfigError(f"temperature must be > 0, got {self.temperature}")
        if not 0.0 <= self.momentum < 1.0:
            raise ConfigError(f"momentum must be in [0, 1), got {self.momentum}")
        if self.framework == "simclr" and self.batch_size < 2:  # type: ignore[operator]
            raise ConfigError(f"simclr needs batch size >= 2, got {self.batch_size}")
        if self.batch_size < 1:  # type: ignore[operator]
            raise ConfigError(f"batch size must be >= 1, got {self.batch_size}")
        if self.framework == "moco" and self.batch_size > self.K:  # type: ignore[operator]
            raise ConfigError(f"moco batch size {self.batch_size} exceeds queue size K={self.K}")
        if self.K < 1:
            raise ConfigError(f"K must be >= 1, got {self.K}")
        if self.epochs < 0:
            raise ConfigError(f"epochs must be >= 0, got {self.epochs}")
        if not self.lr > 0:
            raise ConfigError(f"learning rate must be > 0, got {self.lr}")
        if self.precision not in ("float64", "float32"):
            raise ConfigError(f"precision must be float64 or float32, got {self.precision!r}")
        if self.checkpoint_every < 0:
            raise ConfigError(f"checkpoint_every must be >= 0, got {self.checkpoint_every}")

    @property
    def dtype(self):
        return np.float64 if self.precision == "float64" else np.float32

    def to_dict(self) -> Dict[str, Any]:
        return {
            "framework": self.framework,
            "branch1": self.branch1.to_dict(),
            "branch2": self.branch2.to_dict(),
            "temperature": self.temperature,
            "batch_size": self.batch_size,
            "epochs": self.epochs,
            "lr": self.lr,
            "K": self.K,
            "momentum": self.momentum,
            "seed": self.seed,
            "encoder": self.encoder.to_dict(),
            "projection": self.projection.to_dict() if self.projection else None,
            "precision": self.precision,
            "checkpoint_every": self.checkpoint_every,
            "checkpoint_dir": self.checkpoint_dir,
            "workers": self.workers,
        }

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "PretrainConfig":
        kw = dict(d)
        unknown = set(kw) - set(cls.__dataclass_fields__)
        if unknown:
            raise ConfigError(f"unknown framework field(s): {', '.join(sorted(unknown))}")
        for b in ("branch1", "branch2"):
            if b in kw and not isinstance(kw[b], AugmentSpec):
                kw[b] = AugmentSpec.from_dict(kw[b])
        if "encoder" in kw and not isinstance(kw["encoder"], EncoderConfig):
            kw["encoder"] = EncoderConfig.from_dict(kw["encoder"])
        if kw.get("projection") is not None and not isinstance(kw["projection"], ProjectionConfig):
            kw["projection"] = ProjectionConfig.from_dict(kw["projection"])
        return cls(**kw)

    def with_overrides(self, **kw: Any) -> "PretrainConfig":
        return replace(self, **{k: v for k, v in kw.items() if v is not None})


# ──────────────────────────────────────────────────────────────────────────────
# Training loop
# ──────────────────────────────────────────────────────────────────────────────

@dataclass
class PretrainResult:
    params: ModelParams          # encoder only
    manifest: RunManifest
    head: ModelParams            # discarded projection head, kept for inspection


def _views(x: np.ndarray, idx: np.ndarray, cfg: PretrainConfig, epoch: int, ws: WindowSet) -> tuple:
    v1 = augment_array(x, cfg.branch1, cfg.seed, _VIEW1, epoch, indices=idx,
                       workers=cfg.workers, sample_rate_hz=ws.sample_rate_hz)
    v2 = augment_array(x, cfg.branch2, cfg.seed, _VIEW2, epoch, indices=idx,
                       workers=cfg.workers, sample_rate_hz=ws.sample_rate_hz)
    return v1.astype(cfg.dtype, copy=False), v2.astype(cfg.dtype, copy=False)


def moco_keys(x: np.ndarray, xi: ModelParams, cfg: PretrainConfig) -> Tensor:
    """Normalised key projections from the momentum encoder, eval mode, no tape."""
    h = encode(Tensor(x, dtype=cfg.dtype), xi, cfg.encoder, training=False)
    return tn.l2_normalize(project(h, xi, cfg.projection)).detach()  # type: ignore[arg-type]


def _step(theta: ModelParams, tape: Tape, loss: Tensor, adam: AdamState) -> float:
    value = loss.item()
    if not math.isfinite(value):
        return value
    tape.backward(loss)
    tn.adam_step(theta, theta.grads(), adam)
    return value


def pretrain(data: WindowSet, cfg: PretrainConfig) -> PretrainResult:
    n = len(data)
    if n == 0:
        raise ConfigError("no windows to pretrain on")
    cfg.encoder.check_window(data.T)
    simclr = cfg.framework == "simclr"
    batch = min(int(cfg.batch_size), n)  # type: ignore[arg-type]
    if simclr and batch < 2:
        raise ConfigError(f"simclr needs at least 2 windows per batch, have {n}")
    proj: ProjectionConfig = cfg.projection  # type: ignore[assignment]

    enc = init_encoder(cfg.encoder, data.C, cfg.seed, dtype=cfg.dtype)
    head = init_projection(proj, cfg.encoder.hidden, cfg.seed, dtype=cfg.dtype)
    theta = enc.merged(head)
    adam = AdamState(lr=cfg.lr)
    xi = theta.copy(requires_grad=False) if not simclr else None
    queue = Queue(cfg.K, proj.out_dim, dtype=cfg.dtype) if not simclr else None

    manifest = RunManifest(
        kind="pretrain",
        method=f"{cfg.framework}:{cfg.branch1.describe()}|{cfg.branch2.describe()}",
        config={"framework": cfg.to_dict()},
        seed=cfg.seed,
        inputs={"windows": digest_arrays([("data", data.data), ("labels", data.labels)])},
    )
    t0 = manifest.start_clock()
    n_batches = n // batch if simclr else math.ceil(n / batch)
    if simclr and n % batch:
        manifest.notes.append(f"last {n % batch} window(s) of each epoch dropped (incomplete simclr batch)")
    x_all = data.data

    with progress(cfg.epochs, f"{cfg.framework} pretrain") as bar:
        for epoch in range(cfg.epochs):
            order = make_rng(cfg.seed, _SHUFFLE, epoch).permutation(n)
            losses: List[float] = []
            for b in range(n_batches):
                idx = order[b * batch:(b + 1) * batch]
                v1, v2 = _views(x_all[idx], idx, cfg, epoch, data)
                drop_rng = make_rng(cfg.seed, _DROPOUT, epoch, b)
                theta.clear_grads()
                if simclr:
                    x = np.empty((2 * len(idx),) + v1.shape[1:], dtype=cfg.dtype)
                    x[0::2], x[1::2] = v1, v2
                    with Tape() as tape:
                        z = project(encode(x, theta, cfg.encoder, training=True, rng=drop_rng), theta, proj)
                        loss = nt_xent(z, cfg.temperature)  # type: ignore[arg-type]
                    value = _step(theta, tape, loss, adam)
                else:
                    assert xi is not None and queue is not None
                    k = moco_keys(v2, xi, cfg)
                    if len(queue) == 0:
                        queue.push(k)
                        emit_trace(f"epoch {epoch + 1} batch {b}: queue warmup, {len(k.data)} keys enqueued")
                        continue
                    with Tape() as tape:
                        q = tn.l2_normalize(project(encode(v1, theta, cfg.encoder, training=True, rng=drop_rng), theta, proj))
                        loss = info_nce(q, k, queue, cfg.temperature)  # type: ignore[arg-type]
                    value = _step(theta, tape, loss, adam)
                    if math.isfinite(value):
                        momentum_update(theta, xi, cfg.momentum)
                        queue.push(k)
                if not math.isfinite(value):
                    raise NumericError(f"non-finite training loss ({value})", epoch=epoch + 1)
                losses.append(value)
                emit_trace(f"epoch {epoch + 1} batch {b}: loss {value:.6f}")
            epoch_loss = float(np.mean(losses)) if losses else None
            manifest.epoch_losses.append(epoch_loss)  # type: ignore[arg-type]
            if epoch_loss is None:
                manifest.notes.append(f"epoch {epoch + 1}: no loss-bearing batch (queue warmup)")
                emit_verbose(f"epoch {epoch + 1}/{cfg.epochs}: queue warmup only")
            else:
                emit_verbose(f"epoch {epoch + 1}/{cfg.epochs}: loss {epoch_loss:.5f}")
            bar.update(1, suffix=f"loss {epoch_loss:.4f}" if epoch_loss is not None else "warmup")
            if cfg.checkpoint_every and cfg.checkpoint_dir and (epoch + 1) % cfg.checkpoint_every == 0:
                path = Path(cfg.checkpoint_dir) / f"epoch{epoch + 1:04d}.sprm"
                manifest.artifacts[str(path)] = theta.subset(ENCODER).save(path)
                emit_verbose(f"checkpoint → {path}")

    manifest.stop_clock(t0)
    return PretrainResult(params=theta.subset(ENCODER), manifest=manifest, head=theta.subset("head."))


__all__ = [
    "FRAMEWORKS", "Queue", "queue_push", "nt_xent", "info_nce", "momentum_update",
    "PretrainConfig", "PretrainResult", "moco_keys", "pretrain",
]
