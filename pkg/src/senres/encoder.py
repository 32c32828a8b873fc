# src/senres/encoder.py
from __future__ import annotations

"""
DeepConvLSTM encoder, projection heads and the linear classifier.

Parameter names (stable across checkpoints):

    encoder.conv{i}.weight   k×Cin×F        encoder.conv{i}.bias   F
    encoder.lstm{i}.w_x      D×4H           encoder.lstm{i}.w_h    H×4H
    encoder.lstm{i}.bias     4H             (gate order: input, forget, candidate, output)
    head.proj{i}.weight      in×out         head.proj{i}.bias      out
    classifier.weight        R×classes      classifier.bias        classes
"""

from dataclasses import asdict, dataclass, fields
from pathlib import Path
from typing import Any, Dict, Iterator, Mapping, Optional, Tuple, Union

import numpy as np

from . import tensor as tn
from .checkpoint import load_params, save_params
from .errors import ConfigError, FormatError, InvalidParamsError, ShapeError
from .ids import digest_arrays, make_rng
from .tensor import LstmWeights, Tensor

ENCODER = "encoder."
HEAD = "head."
CLASSIFIER = "classifier."


# ──────────────────────────────────────────────────────────────────────────────
# Configs
# ──────────────────────────────────────────────────────────────────────────────

@dataclass(frozen=True)
class EncoderConfig:
    conv_layers: int = 4
    filters: int = 64
    kernel: int = 5
    lstm_layers: int = 2
    hidden: int = 128
    dropout: float = 0.5

    def __post_init__(self) -> None:
        for name in ("conv_layers", "filters", "kernel", "lstm_layers", "hidden"):
            if getattr(self, name) < 1:
                raise InvalidParamsError(f"encoder {name} must be positive, got {getattr(self, name)}")
        if not 0.0 <= self.dropout < 1.0:
            raise InvalidParamsError(f"dropout must be in [0, 1), got {self.dropout}")

    def steps_after_conv(self, T: int) -> int:
        return T - self.conv_layers * (self.kernel - 1)

    def check_window(self, T: int) -> None:
        if self.steps_after_conv(T) < 1:
            raise ShapeError(
                f"window of {T} steps too short for {self.conv_layers} conv layers of kernel {self.kernel}"
            )

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "EncoderConfig":
        unknown = set(d) - {f.name for f in fields(cls)}
        if unknown:
            raise ConfigError(f"unknown encoder field(s): {', '.join(sorted(unknown))}")
        return cls(**dict(d))


@dataclass(frozen=True)
class ProjectionConfig:
    dims: Tuple[int, ...] = (256, 128, 50)
    activation: str = "relu"

    def __post_init__(self) -> None:
        object.__setattr__(self, "dims", tuple(int(d) for d in self.dims))
        if not self.dims or min(self.dims) < 1:
            raise InvalidParamsError(f"projection needs >= 1 positive layer dim, got {self.dims}")
        if self.activation != "relu":
            raise InvalidParamsError(f"unsupported projection activation {self.activation!r}")

    @classmethod
    def simclr(cls) -> "ProjectionConfig":
        return cls((256, 128, 50))

    @classmethod
    def moco(cls) -> "ProjectionConfig":
        return cls((256, 128))

    @property
    def out_dim(self) -> int:
        return self.dims[-1]

    def to_dict(self) -> Dict[str, Any]:
        return {"dims": list(self.dims), "activation": self.activation}

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "ProjectionConfig":
        return cls(tuple(d.get("dims", (256, 128, 50))), d.get("activation", "relu"))


# ──────────────────────────────────────────────────────────────────────────────
# Parameter collection
# ──────────────────────────────────────────────────────────────────────────────

class ModelParams(Mapping[str, Tensor]):
    """Named tensors for encoder, heads and classifier."""

    def __init__(self, tensors: Optional[Mapping[str, Tensor]] = None) -> None:
        self._t: Dict[str, Tensor] = dict(tensors or {})

    def __getitem__(self, name: str) -> Tensor:
        try:
            return self._t[name]
        except KeyError:
            raise ShapeError(f"missing parameter {name!r}") from None

    def __iter__(self) -> Iterator[str]:
        return iter(sorted(self._t))

    def __len__(self) -> int:
        return len(self._t)

    def __contains__(self, name: object) -> bool:
        return name in self._t

    def __repr__(self) -> str:
        return f"ModelParams({len(self)} tensors, {self.count()} values)"

    @classmethod
    def from_arrays(cls, arrays: Mapping[str, np.ndarray], *, requires_grad: bool = True, dtype=np.float64) -> "ModelParams":
        return cls({k: Tensor(np.asarray(v, dtype=dtype), requires_grad=requires_grad, name=k) for k, v in arrays.items()})

    def arrays(self) -> Dict[str, np.ndarray]:
        return {k: self._t[k].data for k in self}

    def grads(self) -> Dict[str, Optional[np.ndarray]]:
        return {k: self._t[k].grad for k in self}

    def copy(self, *, requires_grad: Optional[bool] = None) -> "ModelParams":
        return ModelParams({
            k: Tensor(t.data.copy(), requires_grad=t.requires_grad if requires_grad is None else requires_grad, name=k)
            for k, t in self._t.items()
        })

    def subset(self, prefix: str) -> "ModelParams":
        """Tensors whose name starts with prefix; shared, not copied."""
        return ModelParams({k: t for k, t in self._t.items() if k.startswith(prefix)})

    def merged(self, other: "ModelParams") -> "ModelParams":
        clash = set(self._t) & set(other._t)
        if clash:
            raise ShapeError(f"duplicate parameter names: {', '.join(sorted(clash))}")
        return ModelParams({**self._t, **other._t})

    def astype(self, dtype) -> "ModelParams":
        return ModelParams({k: Tensor(t.data, requires_grad=t.requires_grad, dtype=dtype, name=k) for k, t in self._t.items()})

    def clear_grads(self) -> None:
        for t in self._t.values():
            t.grad = None

    def set_requires_grad(self, flag: bool) -> "ModelParams":
        for t in self._t.values():
            t.requires_grad = flag
        return self

    def check_same_layout(self, other: "ModelParams") -> None:
        if set(self._t) != set(other._t):
            diff = sorted(set(self._t) ^ set(other._t))
            raise ShapeError(f"parameter name sets differ: {', '.join(diff[:5])}")
        for k in self:
            if self._t[k].shape != other._t[k].shape:
                raise ShapeError(f"{k}: shape {self._t[k].shape} vs {other._t[k].shape}")

    def count(self) -> int:
        return int(sum(t.size for t in self._t.values()))

    def digest(self) -> str:
        return digest_arrays((k, self._t[k].data.astype(np.float64)) for k in self)

    def save(self, path: Union[str, Path]) -> str:
        return save_params(path, self.arrays())

    @classmethod
    def load(cls, path: Union[str, Path], *, dtype=np.float64) -> "ModelParams":
        return cls.from_arrays(load_params(path), dtype=dtype)


def count_parameters(params: ModelParams, prefix: str = "") -> int:
    return params.subset(prefix).count()


# ──────────────────────────────────────────────────────────────────────────────
# Initialisation
# ──────────────────────────────────────────────────────────────────────────────

def _glorot(rng: np.random.Generator, shape: Tuple[int, ...], fan_in: int, fan_out: int) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape)


def encoder_shapes(config: EncoderConfig, in_channels: int) -> Dict[str, Tuple[int, ...]]:
    shapes: Dict[str, Tuple[int, ...]] = {}
    cin = in_channels
    for i in range(config.conv_layers):
        shapes[f"encoder.conv{i}.weight"] = (config.kernel, cin, config.filters)
        shapes[f"encoder.conv{i}.bias"] = (config.filters,)
        cin = config.filters
    d, H = cin, config.hidden
    for i in range(config.lstm_layers):
        shapes[f"encoder.lstm{i}.w_x"] = (d, 4 * H)
        shapes[f"encoder.lstm{i}.w_h"] = (H, 4 * H)
        shapes[f"encoder.lstm{i}.bias"] = (4 * H,)
        d = H
    return shapes


def init_encoder(config: EncoderConfig, in_channels: int, seed: int, *, dtype=np.float64) -> ModelParams:
    rng = make_rng(seed, 1)
    arrays: Dict[str, np.ndarray] = {}
    for name, shape in encoder_shapes(config, in_channels).items():
        if name.endswith("bias"):
            arrays[name] = np.zeros(shape)
        elif ".conv" in name:
            k, cin, cout = shape
            arrays[name] = _glorot(rng, shape, k * cin, k * cout)
        else:
            arrays[name] = _glorot(rng, shape, shape[0], shape[1])
    return ModelParams.from_arrays(arrays, dtype=dtype)


def init_projection(config: ProjectionConfig, in_dim: int, seed: int, *, dtype=np.float64) -> ModelParams:
    rng = make_rng(seed, 2)
    arrays: Dict[str, np.ndarray] = {}
    d = in_dim
    for i, out in enumerate(config.dims):
        arrays[f"head.proj{i}.weight"] = _glorot(rng, (d, out), d, out)
        arrays[f"head.proj{i}.bias"] = np.zeros(out)
        d = out
    return ModelParams.from_arrays(arrays, dtype=dtype)


def init_classifier(in_dim: int, num_classes: int, seed: int, *, dtype=np.float64) -> ModelParams:
    if num_classes < 1:
        raise InvalidParamsError(f"classifier needs >= 1 class, got {num_classes}")
    rng = make_rng(seed, 3)
    return ModelParams.from_arrays({
        "classifier.weight": _glorot(rng, (in_dim, num_classes), in_dim, num_classes),
        "classifier.bias": np.zeros(num_classes),
    }, dtype=dtype)


def validate_encoder(params: ModelParams, config: EncoderConfig, in_channels: int) -> None:
    """Checkpoint/config agreement; mismatches are format errors."""
    want = encoder_shapes(config, in_channels)
    have = {k: params[k].shape for k in params if k.startswith(ENCODER)}
    missing = sorted(set(want) - set(have))
    if missing:
        raise FormatError(f"checkpoint lacks encoder parameter(s): {', '.join(missing[:4])}")
    extra = sorted(set(have) - set(want))
    if extra:
        raise FormatError(f"checkpoint has unexpected encoder parameter(s): {', '.join(extra[:4])}")
    for k, shape in want.items():
        if have[k] != shape:
            raise FormatError(f"{k}: checkpoint shape {have[k]} but encoder expects {shape}")


# ──────────────────────────────────────────────────────────────────────────────
# Forward passes
# ──────────────────────────────────────────────────────────────────────────────

def encode(
    batch: Union[Tensor, np.ndarray],
    params: ModelParams,
    config: EncoderConfig,
    training: bool = False,
    rng: Optional[np.random.Generator] = None,
) -> Tensor:
    """B×T×C → B×H, the final hidden state of the last LSTM layer."""
    x = batch if isinstance(batch, Tensor) else Tensor(batch, dtype=params[f"{ENCODER}conv0.weight"].dtype)
    if x.ndim != 3:
        raise ShapeError(f"encoder input must be B×T×C, got {x.shape}")
    config.check_window(x.shape[1])
    if training and config.dropout > 0 and rng is None:
        raise InvalidParamsError("training-mode encode with dropout needs an rng")
    for i in range(config.conv_layers):
        x = tn.relu(tn.conv1d(x, params[f"encoder.conv{i}.weight"], params[f"encoder.conv{i}.bias"]))
    B, steps = x.shape[0], x.shape[1]
    H = config.hidden
    layers = [
        LstmWeights(params[f"encoder.lstm{i}.w_x"], params[f"encoder.lstm{i}.w_h"], params[f"encoder.lstm{i}.bias"])
        for i in range(config.lstm_layers)
    ]
    zeros = np.zeros((B, H), dtype=x.dtype)
    h = [Tensor(zeros) for _ in layers]
    c = [Tensor(zeros) for _ in layers]
    for t in range(steps):
        inp = x[:, t, :]
        for i, w in enumerate(layers):
            h[i], c[i] = tn.lstm_step(inp, h[i], c[i], w)
            inp = h[i]
            if training and i < len(layers) - 1 and config.dropout > 0:
                inp = tn.dropout(inp, config.dropout, rng)  # type: ignore[arg-type]
    return h[-1]


def project(h: Tensor, params: ModelParams, config: ProjectionConfig) -> Tensor:
    """MLP with ReLU between layers and none after the last."""
    for i in range(len(config.dims)):
        w = params[f"head.proj{i}.weight"]
        if h.shape[-1] != w.shape[0]:
            raise ShapeError(f"head.proj{i}: input width {h.shape[-1]} vs weight {w.shape}")
        h = h @ w + params[f"head.proj{i}.bias"]
        if i < len(config.dims) - 1:
            h = tn.relu(h)
    return h


def classify(h: Tensor, params: ModelParams) -> Tensor:
    w = params["classifier.weight"]
    if h.ndim != 2 or h.shape[1] != w.shape[0]:
        raise ShapeError(f"classifier: representation {h.shape} vs weight {w.shape}")
    return h @ w + params["classifier.bias"]


def predict(
    data: np.ndarray,
    params: ModelParams,
    config: EncoderConfig,
    *,
    batch_size: int = 512,
) -> np.ndarray:
    """Argmax class ids in eval mode, batched."""
    out = []
    for lo in range(0, len(data), batch_size):
        logits = classify(encode(data[lo:lo + batch_size], params, config, training=False), params)
        out.append(np.argmax(logits.data, axis=1))
    return np.concatenate(out) if out else np.zeros(0, dtype=np.int64)


def represent(
    data: np.ndarray,
    params: ModelParams,
    config: EncoderConfig,
    *,
    batch_size: int = 512,
) -> np.ndarray:
    """Frozen representations, batched, outside any tape."""
    rows = [encode(data[lo:lo + batch_size], params, config, training=False).data
            for lo in range(0, len(data), batch_size)]
    return np.concatenate(rows) if rows else np.zeros((0, config.hidden))


__all__ = [
    "EncoderConfig", "ProjectionConfig", "ModelParams", "count_parameters", "encoder_shapes",
    "init_encoder", "init_projection", "init_classifier", "validate_encoder",
    "encode", "project", "classify", "predict", "represent",
]
