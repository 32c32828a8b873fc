# src/senres/tensor.py
from __future__ import annotations

"""
Dense tensors with reverse-mode differentiation on an explicit tape.

    with Tape() as tape:
        loss = (x @ w).sum()
    tape.backward(loss)        # leaves reached by the tape get .grad

Ops executed while a Tape is active (and touching a requires_grad input) are
recorded; outside a tape they just compute. A tape may be traversed once.

Parameter layout for LSTM gates is fixed as (input, forget, candidate, output)
along the 4H axis of w_x, w_h and bias.
"""

import threading
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Mapping, NamedTuple, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.special import expit

from .errors import ShapeError, TapeError

ArrayLike = Union["Tensor", np.ndarray, float, int, Sequence[float]]
Backward = Callable[[np.ndarray], Tuple[Optional[np.ndarray], ...]]

DEFAULT_DTYPE = np.float64
_FLOATS = (np.float32, np.float64)


class Tensor:
    __slots__ = ("data", "requires_grad", "grad", "name")

    def __init__(self, data: ArrayLike, requires_grad: bool = False, *, dtype=None, name: str = "") -> None:
        if isinstance(data, Tensor):
            data = data.data
        if dtype is None:
            dtype = data.dtype if isinstance(data, np.ndarray) and data.dtype in _FLOATS else DEFAULT_DTYPE
        self.data: np.ndarray = np.array(data, dtype=dtype)
        self.requires_grad = bool(requires_grad)
        self.grad: Optional[np.ndarray] = None
        self.name = name

    @classmethod
    def _wrap(cls, arr: np.ndarray, requires_grad: bool) -> "Tensor":
        t = cls.__new__(cls)
        t.data = arr
        t.requires_grad = requires_grad
        t.grad = None
        t.name = ""
        return t

    # -- introspection -------------------------------------------------------
    @property
    def shape(self) -> Tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return int(self.data.size)

    @property
    def dtype(self):
        return self.data.dtype

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        return float(self.data.reshape(()))

    def detach(self) -> "Tensor":
        return Tensor._wrap(self.data, False)

    def __repr__(self) -> str:
        tag = f" name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.shape}, dtype={self.dtype}, requires_grad={self.requires_grad}{tag})"

    # -- operators -----------------------------------------------------------
    def __add__(self, o: ArrayLike) -> "Tensor": return add(self, o)
    def __radd__(self, o: ArrayLike) -> "Tensor": return add(o, self)
    def __sub__(self, o: ArrayLike) -> "Tensor": return sub(self, o)
    def __rsub__(self, o: ArrayLike) -> "Tensor": return sub(o, self)
    def __mul__(self, o: ArrayLike) -> "Tensor": return mul(self, o)
    def __rmul__(self, o: ArrayLike) -> "Tensor": return mul(o, self)
    def __truediv__(self, o: ArrayLike) -> "Tensor": return div(self, o)
    def __neg__(self) -> "Tensor": return neg(self)
    def __matmul__(self, o: "Tensor") -> "Tensor": return matmul(self, o)
    def __getitem__(self, idx) -> "Tensor": return getitem(self, idx)

    @property
    def T(self) -> "Tensor":
        return transpose(self)

    def sum(self, axis=None, keepdims: bool = False) -> "Tensor":
        return tsum(self, axis=axis, keepdims=keepdims)

    def mean(self, axis=None, keepdims: bool = False) -> "Tensor":
        return mean(self, axis=axis, keepdims=keepdims)

    def reshape(self, *shape) -> "Tensor":
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return reshape(self, shape)


def as_tensor(x: ArrayLike, dtype=None) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x, dtype=dtype)


# ──────────────────────────────────────────────────────────────────────────────
# Tape
# ──────────────────────────────────────────────────────────────────────────────

class _Record(NamedTuple):
    out: Tensor
    inputs: Tuple[Tensor, ...]
    backward: Backward


_tls = threading.local()


def _stack() -> List["Tape"]:
    st = getattr(_tls, "stack", None)
    if st is None:
        st = _tls.stack = []
    return st


def current_tape() -> Optional["Tape"]:
    st = _stack()
    return st[-1] if st else None


class Tape:
    """Ordered record of executed primitives; confined to the thread that opened it."""

    def __init__(self) -> None:
        self._records: List[_Record] = []
        self._used = False

    def __enter__(self) -> "Tape":
        if self._used:
            raise TapeError("tape already traversed; open a new Tape")
        _stack().append(self)
        return self

    def __exit__(self, *exc) -> None:
        st = _stack()
        if st and st[-1] is self:
            st.pop()

    def __len__(self) -> int:
        return len(self._records)

    @property
    def used(self) -> bool:
        return self._used

    def _push(self, rec: _Record) -> None:
        if self._used:
            raise TapeError("cannot record on a traversed tape")
        self._records.append(rec)

    def backward(self, loss: Tensor) -> None:
        if self._used:
            raise TapeError("tape already traversed; gradients are not accumulated across passes")
        if loss.size != 1:
            raise TapeError(f"backward needs a scalar loss, got shape {loss.shape}")
        self._used = True
        records = self._records
        produced = {id(r.out) for r in records}
        grads: Dict[int, np.ndarray] = {id(loss): np.ones_like(loss.data)}
        leaves: Dict[int, Tensor] = {}
        if loss.requires_grad and id(loss) not in produced:
            leaves[id(loss)] = loss
        for rec in records:
            for t in rec.inputs:
                if t.requires_grad and id(t) not in produced:
                    leaves.setdefault(id(t), t)
        for rec in reversed(records):
            g = grads.pop(id(rec.out), None)
            if g is None:
                continue
            for t, gi in zip(rec.inputs, rec.backward(g)):
                if gi is None or not t.requires_grad:
                    continue
                k = id(t)
                grads[k] = grads[k] + gi if k in grads else gi
        for k, t in leaves.items():
            g = grads.get(k)
            t.grad = np.zeros_like(t.data) if g is None else np.asarray(g, dtype=t.data.dtype).reshape(t.shape)


def _emit_op(out: np.ndarray, inputs: Sequence[Tensor], backward: Backward) -> Tensor:
    tape = current_tape()
    track = tape is not None and any(t.requires_grad for t in inputs)
    res = Tensor._wrap(out, track)
    if track:
        tape._push(_Record(res, tuple(inputs), backward))
    return res


def _unbroadcast(g: np.ndarray, shape: Tuple[int, ...]) -> np.ndarray:
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for i, s in enumerate(shape):
        if s == 1 and g.shape[i] != 1:
            g = g.sum(axis=i, keepdims=True)
    return g


def _pair(a: ArrayLike, b: ArrayLike) -> Tuple[Tensor, Tensor]:
    if isinstance(a, Tensor):
        return a, as_tensor(b, a.dtype)
    if isinstance(b, Tensor):
        return as_tensor(a, b.dtype), b
    return as_tensor(a), as_tensor(b)


def _check_broadcast(a: Tensor, b: Tensor, op: str) -> None:
    try:
        np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise ShapeError(f"{op}: shapes {a.shape} and {b.shape} do not broadcast") from None


# ──────────────────────────────────────────────────────────────────────────────
# Elementwise primitives
# ──────────────────────────────────────────────────────────────────────────────

def add(a: ArrayLike, b: ArrayLike) -> Tensor:
    a, b = _pair(a, b)
    _check_broadcast(a, b, "add")
    return _emit_op(a.data + b.data, (a, b), lambda g: (_unbroadcast(g, a.shape), _unbroadcast(g, b.shape)))


def sub(a: ArrayLike, b: ArrayLike) -> Tensor:
    a, b = _pair(a, b)
    _check_broadcast(a, b, "sub")
    return _emit_op(a.data - b.data, (a, b), lambda g: (_unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)))


def mul(a: ArrayLike, b: ArrayLike) -> Tensor:
    a, b = _pair(a, b)
    _check_broadcast(a, b, "mul")
    return _emit_op(
        a.data * b.data, (a, b),
        lambda g: (_unbroadcast(g * b.data, a.shape), _unbroadcast(g * a.data, b.shape)),
    )


def div(a: ArrayLike, b: ArrayLike) -> Tensor:
    a, b = _pair(a, b)
    _check_broadcast(a, b, "div")
    return _emit_op(
        a.data / b.data, (a, b),
        lambda g: (_unbroadcast(g / b.data, a.shape), _unbroadcast(-g * a.data / (b.data * b.data), b.shape)),
    )


def neg(a: Tensor) -> Tensor:
    return _emit_op(-a.data, (a,), lambda g: (-g,))


def stop_gradient(a: Tensor) -> Tensor:
    """Identity forward; the input is seen by the tape but receives a zero gradient."""
    return _emit_op(a.data, (a,), lambda g: (None,))


def exp(a: Tensor) -> Tensor:
    out = np.exp(a.data)
    return _emit_op(out, (a,), lambda g: (g * out,))


def log(a: Tensor) -> Tensor:
    return _emit_op(np.log(a.data), (a,), lambda g: (g / a.data,))


def sigmoid(a: Tensor) -> Tensor:
    s = expit(a.data)
    return _emit_op(s, (a,), lambda g: (g * s * (1.0 - s),))


def tanh(a: Tensor) -> Tensor:
    t = np.tanh(a.data)
    return _emit_op(t, (a,), lambda g: (g * (1.0 - t * t),))


def relu(a: Tensor) -> Tensor:
    pos = a.data > 0
    return _emit_op(np.where(pos, a.data, 0.0).astype(a.dtype), (a,), lambda g: (g * pos,))


# ──────────────────────────────────────────────────────────────────────────────
# Shape / reduction primitives
# ──────────────────────────────────────────────────────────────────────────────

def tsum(a: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    out = np.asarray(a.data.sum(axis=axis, keepdims=keepdims))

    def bw(g: np.ndarray):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, a.shape).copy(),)

    return _emit_op(out, (a,), bw)


def mean(a: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    if axis is None:
        n = a.size
    else:
        axes = axis if isinstance(axis, tuple) else (axis,)
        n = int(np.prod([a.shape[ax] for ax in axes]))
    return div(tsum(a, axis=axis, keepdims=keepdims), float(n))


def reshape(a: Tensor, shape: Tuple[int, ...]) -> Tensor:
    try:
        out = a.data.reshape(shape)
    except ValueError:
        raise ShapeError(f"reshape: cannot view {a.shape} as {shape}") from None
    return _emit_op(out, (a,), lambda g: (g.reshape(a.shape),))


def transpose(a: Tensor) -> Tensor:
    if a.ndim != 2:
        raise ShapeError(f"transpose expects a matrix, got shape {a.shape}")
    return _emit_op(a.data.T.copy(), (a,), lambda g: (g.T,))


def _is_basic_index(idx) -> bool:
    parts = idx if isinstance(idx, tuple) else (idx,)
    return all(isinstance(p, (int, np.integer, slice)) or p is None or p is Ellipsis for p in parts)


def getitem(a: Tensor, idx) -> Tensor:
    out = np.array(a.data[idx])
    basic = _is_basic_index(idx)

    def bw(g: np.ndarray):
        z = np.zeros_like(a.data)
        if basic:
            z[idx] = g
        else:
            np.add.at(z, idx, g)
        return (z,)

    return _emit_op(out, (a,), bw)


def concat(ts: Sequence[Tensor], axis: int = -1) -> Tensor:
    ts = [as_tensor(t) for t in ts]
    try:
        out = np.concatenate([t.data for t in ts], axis=axis)
    except ValueError as e:
        raise ShapeError(f"concat: {e}") from None
    cuts = np.cumsum([t.shape[axis] for t in ts])[:-1]
    return _emit_op(out, ts, lambda g: tuple(np.split(g, cuts, axis=axis)))


def gather(x: Tensor, idx: np.ndarray) -> Tensor:
    """x[i, idx[i]] for a matrix x."""
    idx = np.asarray(idx, dtype=np.int64)
    if x.ndim != 2 or idx.shape != (x.shape[0],):
        raise ShapeError(f"gather: x {x.shape} with index {idx.shape}")
    rows = np.arange(x.shape[0])

    def bw(g: np.ndarray):
        z = np.zeros_like(x.data)
        z[rows, idx] = g
        return (z,)

    return _emit_op(x.data[rows, idx].copy(), (x,), bw)


def logsumexp(x: Tensor, mask: Optional[np.ndarray] = None) -> Tensor:
    """log Σ exp over the last axis, restricted to entries where mask is True."""
    xd = x.data
    if mask is not None:
        mask = np.broadcast_to(np.asarray(mask, dtype=bool), xd.shape)
        xd = np.where(mask, xd, -np.inf)
    m = xd.max(axis=-1, keepdims=True)
    e = np.exp(xd - m)
    s = e.sum(axis=-1, keepdims=True)
    out = (m + np.log(s))[..., 0]
    p = e / s
    return _emit_op(out, (x,), lambda g: (g[..., None] * p,))


def l2_normalize(v: Tensor) -> Tensor:
    """Unit Euclidean norm along the last axis; zero vectors stay zero."""
    n = np.sqrt((v.data * v.data).sum(axis=-1, keepdims=True))
    nz = n > 0
    safe = np.where(nz, n, 1.0)
    y = np.where(nz, v.data / safe, 0.0).astype(v.dtype)

    def bw(g: np.ndarray):
        proj = (y * g).sum(axis=-1, keepdims=True)
        return (np.where(nz, (g - y * proj) / safe, 0.0),)

    return _emit_op(y, (v,), bw)


# ──────────────────────────────────────────────────────────────────────────────
# Linear algebra primitives
# ──────────────────────────────────────────────────────────────────────────────

def matmul(a: Tensor, b: Tensor) -> Tensor:
    a, b = _pair(a, b)
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul: {a.shape} @ {b.shape}")
    return _emit_op(a.data @ b.data, (a, b), lambda g: (g @ b.data.T, a.data.T @ g))


def conv1d(x: Tensor, kernels: Tensor, bias: Tensor) -> Tensor:
    """
    Valid cross-correlation along time.
      x: B×T×Cin, kernels: k×Cin×Cout, bias: Cout → B×(T−k+1)×Cout
    """
    if x.ndim != 3 or kernels.ndim != 3 or bias.ndim != 1:
        raise ShapeError(f"conv1d: x {x.shape}, kernels {kernels.shape}, bias {bias.shape}")
    B, T, cin = x.shape
    k, kc, cout = kernels.shape
    if kc != cin or bias.shape[0] != cout:
        raise ShapeError(f"conv1d: channels x={cin} kernels={kc}, cout={cout} bias={bias.shape[0]}")
    if T < k:
        raise ShapeError(f"conv1d: sequence length {T} shorter than kernel {k}")
    To = T - k + 1
    win = np.lib.stride_tricks.sliding_window_view(x.data, k, axis=1)  # B×To×Cin×k
    out = np.einsum("btck,kco->bto", win, kernels.data, optimize=True) + bias.data

    def bw(g: np.ndarray):
        gw = np.einsum("btck,bto->kco", win, g, optimize=True)
        gb = g.sum(axis=(0, 1))
        gx = np.zeros_like(x.data)
        for j in range(k):
            gx[:, j:j + To, :] += g @ kernels.data[j].T
        return gx, gw, gb

    return _emit_op(out, (x, kernels, bias), bw)


# ──────────────────────────────────────────────────────────────────────────────
# Composite layers and losses
# ──────────────────────────────────────────────────────────────────────────────

class LstmWeights(NamedTuple):
    w_x: Tensor   # D×4H
    w_h: Tensor   # H×4H
    bias: Tensor  # 4H


def lstm_step(x: Tensor, h_prev: Tensor, c_prev: Tensor, params: LstmWeights) -> Tuple[Tensor, Tensor]:
    H = h_prev.shape[-1]
    if params.w_x.shape != (x.shape[-1], 4 * H) or params.w_h.shape != (H, 4 * H) or params.bias.shape != (4 * H,):
        raise ShapeError(
            f"lstm_step: x {x.shape}, h {h_prev.shape}, w_x {params.w_x.shape}, "
            f"w_h {params.w_h.shape}, bias {params.bias.shape}"
        )
    if c_prev.shape != h_prev.shape:
        raise ShapeError(f"lstm_step: c {c_prev.shape} vs h {h_prev.shape}")
    z = x @ params.w_x + h_prev @ params.w_h + params.bias
    i = sigmoid(z[:, 0:H])
    f = sigmoid(z[:, H:2 * H])
    g = tanh(z[:, 2 * H:3 * H])
    o = sigmoid(z[:, 3 * H:4 * H])
    c = f * c_prev + i * g
    h = o * tanh(c)
    return h, c


def dropout(x: Tensor, rate: float, rng: np.random.Generator) -> Tensor:
    if rate <= 0.0:
        return x
    keep = (rng.random(x.shape) >= rate).astype(x.dtype) / (1.0 - rate)
    return x * keep


def cross_entropy(logits: Tensor, labels: np.ndarray) -> Tensor:
    """Mean softmax cross-entropy of integer labels."""
    return (logsumexp(logits) - gather(logits, labels)).mean()


# ──────────────────────────────────────────────────────────────────────────────
# Adam
# ──────────────────────────────────────────────────────────────────────────────

@dataclass
class AdamState:
    lr: float
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: Dict[str, np.ndarray] = field(default_factory=dict)
    v: Dict[str, np.ndarray] = field(default_factory=dict)


def adam_step(params: Mapping[str, Tensor], grads: Mapping[str, Optional[np.ndarray]], state: AdamState) -> None:
    """In-place bias-corrected Adam update; parameters without a gradient are left alone."""
    for name, g in grads.items():
        if name not in params:
            raise ShapeError(f"adam_step: gradient for unknown parameter {name!r}")
        if g is not None and g.shape != params[name].shape:
            raise ShapeError(f"adam_step: {name} grad {g.shape} vs param {params[name].shape}")
    state.step += 1
    t = state.step
    c1 = 1.0 - state.beta1 ** t
    c2 = 1.0 - state.beta2 ** t
    for name, p in params.items():
        g = grads.get(name)
        if g is None:
            continue
        m = state.m.get(name)
        v = state.v.get(name)
        if m is None:
            m = np.zeros_like(p.data, dtype=np.float64)
            v = np.zeros_like(p.data, dtype=np.float64)
        m = state.beta1 * m + (1.0 - state.beta1) * g
        v = state.beta2 * v + (1.0 - state.beta2) * (g * g)
        state.m[name], state.v[name] = m, v
        p.data -= state.lr * (m / c1) / (np.sqrt(v / c2) + state.eps)


# ──────────────────────────────────────────────────────────────────────────────
# Gradient checking
# ──────────────────────────────────────────────────────────────────────────────

def grad_check(
    f: Callable[..., Tensor],
    *points: ArrayLike,
    h: float = 1e-5,
    max_entries: Optional[int] = None,
    seed: int = 0,
) -> float:
    """
    Max relative error between tape gradients and central finite differences
    over every input (or a random subset of max_entries coordinates per input).
    Error per coordinate is |a − n| / max(1, |a|, |n|), evaluated at 64-bit.
    """
    base = [np.array(p, dtype=np.float64) for p in points]
    leaves = [Tensor(b, requires_grad=True) for b in base]
    with Tape() as tape:
        out = f(*leaves)
    if out.requires_grad:
        tape.backward(out)
    rng = np.random.default_rng(seed)
    worst = 0.0
    for k, leaf in enumerate(leaves):
        analytic = leaf.grad if leaf.grad is not None else np.zeros_like(base[k])
        coords = np.arange(base[k].size)
        if max_entries is not None and coords.size > max_entries:
            coords = rng.choice(coords, size=max_entries, replace=False)
        for flat in coords:
            ix = np.unravel_index(int(flat), base[k].shape)
            vals = []
            for sign in (1.0, -1.0):
                shifted = [b.copy() for b in base]
                shifted[k][ix] += sign * h
                vals.append(f(*[Tensor(p) for p in shifted]).item())
            numeric = (vals[0] - vals[1]) / (2.0 * h)
            a = float(analytic[ix])
            err = abs(a - numeric) / max(1.0, abs(a), abs(numeric))
            worst = max(worst, err)
    return worst


__all__ = [
    "Tensor", "Tape", "AdamState", "LstmWeights", "as_tensor", "current_tape",
    "add", "sub", "mul", "div", "neg", "stop_gradient", "exp", "log", "sigmoid", "tanh", "relu",
    "tsum", "mean", "reshape", "transpose", "getitem", "concat", "gather", "logsumexp",
    "l2_normalize", "matmul", "conv1d", "lstm_step", "dropout", "cross_entropy",
    "adam_step", "grad_check",
]
