# src/senres/augment.py
from __future__ import annotations

"""
Augmentation catalog for sensor windows.

Every transform is a pure function of (window, params, rng). Windows are
T×C with channels laid out as accelerometer xyz then gyroscope xyz; rotation
treats every consecutive channel triad as one 3-vector.

Specs are declarative and serialise to plain dicts:

    {"kind": "compose", "children": [
        {"kind": "resample", "params": {"M": 1, "N": 0}},
        {"kind": "rotate"}]}
"""

import dataclasses
import math
from dataclasses import dataclass, field
from typing import Any, Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

import numpy as np
from joblib import Parallel, delayed

from .errors import InvalidChannelsError, InvalidParamsError, ShapeError
from .ids import make_rng
from .resample import KERNELS, MODES, resample_sequence

# ──────────────────────────────────────────────────────────────────────────────
# Types
# ──────────────────────────────────────────────────────────────────────────────

@dataclass(frozen=True, eq=False)
class Window:
    data: np.ndarray                 # T×C
    sample_rate_hz: float = 50.0
    label: Optional[int] = None

    def __post_init__(self) -> None:
        d = np.asarray(self.data)
        if d.ndim != 2:
            raise ShapeError(f"window must be T×C, got shape {d.shape}")
        if d.shape[0] < 2 or d.shape[1] < 1:
            raise ShapeError(f"window needs T > 1 and C >= 1, got {d.shape}")
        if not np.isfinite(d).all():
            raise InvalidParamsError("window contains non-finite values")
        object.__setattr__(self, "data", d)

    @property
    def T(self) -> int:
        return int(self.data.shape[0])

    @property
    def C(self) -> int:
        return int(self.data.shape[1])

    def with_data(self, data: np.ndarray) -> "Window":
        return dataclasses.replace(self, data=data)


@dataclass(frozen=True)
class ResampleParams:
    """
    M inserted nodes per gap and downsample interval N (stride N+1).
    draw_policy "random" redraws M ∈ {1..max_m}, N ∈ {0..M−1} on every call.
    """
    M: int = 1
    N: int = 0
    interpolation: str = "linear"
    mode: str = "A"
    draw_policy: str = "fixed"
    max_m: int = 3

    def __post_init__(self) -> None:
        if self.interpolation not in KERNELS:
            raise InvalidParamsError(f"unknown interpolation {self.interpolation!r} (expected one of {', '.join(KERNELS)})")
        if self.mode not in MODES:
            raise InvalidParamsError(f"unknown mode {self.mode!r} (expected A or B)")
        if self.draw_policy not in ("fixed", "random"):
            raise InvalidParamsError(f"unknown draw policy {self.draw_policy!r}")
        if self.draw_policy == "fixed" and not (self.M >= 1 and 0 <= self.N <= self.M - 1):
            raise InvalidParamsError(f"need 1 <= M and 0 <= N <= M-1, got M={self.M} N={self.N}")
        if self.max_m < 1:
            raise InvalidParamsError(f"max_m must be >= 1, got {self.max_m}")

    def draw(self, rng: np.random.Generator) -> Tuple[int, int]:
        if self.draw_policy == "fixed":
            return self.M, self.N
        m = int(rng.integers(1, self.max_m + 1))
        return m, int(rng.integers(0, m))

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "ResampleParams":
        d = dict(d)
        unknown = set(d) - {f.name for f in dataclasses.fields(cls)}
        if unknown:
            raise InvalidParamsError(f"unknown resample parameter(s): {', '.join(sorted(unknown))}")
        # explicit M/N without a policy means a fixed draw
        if "draw_policy" not in d:
            d["draw_policy"] = "fixed" if ("M" in d or "N" in d) else "random"
        return cls(**d)


def resample_grid(max_m: int = 3) -> List[Tuple[int, int]]:
    """Every valid (M, N) cell with M ≤ max_m."""
    return [(m, n) for m in range(1, max_m + 1) for n in range(m)]


# ──────────────────────────────────────────────────────────────────────────────
# Transforms
# ──────────────────────────────────────────────────────────────────────────────

def resample(w: Window, p: ResampleParams, rng: np.random.Generator) -> Window:
    """One (M, N, s) draw shared by every channel."""
    m, n = p.draw(rng)
    out = resample_sequence(w.data, m, n, rng, kernel=p.interpolation, mode=p.mode)  # type: ignore[arg-type]
    return w.with_data(out.astype(w.data.dtype, copy=False))


def noise(w: Window, rng: np.random.Generator, *, low: float = -0.1, high: float = 0.1) -> Window:
    return w.with_data(w.data + rng.uniform(low, high, size=w.data.shape).astype(w.data.dtype))


def rotation_matrix(axis: Sequence[float], angle: float) -> np.ndarray:
    """Rodrigues rotation about a (normalised) axis."""
    a = np.asarray(axis, dtype=np.float64)
    n = np.linalg.norm(a)
    if a.shape != (3,) or n == 0:
        raise InvalidParamsError(f"rotation axis must be a nonzero 3-vector, got {axis!r}")
    x, y, z = a / n
    K = np.array([[0.0, -z, y], [z, 0.0, -x], [-y, x, 0.0]])
    return np.eye(3) + math.sin(angle) * K + (1.0 - math.cos(angle)) * (K @ K)


def rotate(
    w: Window,
    rng: np.random.Generator,
    *,
    axis: Optional[Sequence[float]] = None,
    angle: Optional[float] = None,
) -> Window:
    """Same rotation for every triad (accelerometer and gyroscope move together)."""
    if w.C % 3 != 0:
        raise InvalidChannelsError(f"rotation needs channel triads, got C={w.C}")
    if axis is None:
        v = rng.standard_normal(3)
        while not np.linalg.norm(v) > 0:
            v = rng.standard_normal(3)
        axis = v
    if angle is None:
        angle = float(rng.uniform(0.0, 2.0 * math.pi))
    R = rotation_matrix(axis, angle)
    tri = w.data.reshape(w.T, w.C // 3, 3)
    return w.with_data((tri @ R.T).reshape(w.T, w.C).astype(w.data.dtype, copy=False))


def _channel_gain(w: Window, rng: np.random.Generator, low: float, high: float) -> Window:
    g = rng.uniform(low, high, size=w.C)
    return w.with_data((w.data * g).astype(w.data.dtype, copy=False))


def scale(w: Window, rng: np.random.Generator, *, low: float = 0.7, high: float = 0.9) -> Window:
    return _channel_gain(w, rng, low, high)


def magnify(w: Window, rng: np.random.Generator, *, low: float = 1.1, high: float = 1.3) -> Window:
    return _channel_gain(w, rng, low, high)


def invert(w: Window) -> Window:
    return w.with_data(-w.data)


def reverse(w: Window) -> Window:
    return w.with_data(w.data[::-1].copy())


# ──────────────────────────────────────────────────────────────────────────────
# Declarative specs
# ──────────────────────────────────────────────────────────────────────────────

MAX_DEPTH = 4

_PARAM_KEYS: Dict[str, Tuple[str, ...]] = {
    "identity": (),
    "noise": ("low", "high"),
    "rotate": ("axis", "angle"),
    "scale": ("low", "high"),
    "magnify": ("low", "high"),
    "invert": (),
    "reverse": (),
    "resample": tuple(f.name for f in dataclasses.fields(ResampleParams)),
    "compose": (),
}
KINDS: Tuple[str, ...] = tuple(_PARAM_KEYS)


@dataclass(frozen=True)
class AugmentSpec:
    kind: str
    params: Mapping[str, Any] = field(default_factory=dict)
    children: Tuple["AugmentSpec", ...] = ()

    def __post_init__(self) -> None:
        if self.kind not in _PARAM_KEYS:
            raise InvalidParamsError(f"unknown augmentation kind {self.kind!r} (expected one of {', '.join(KINDS)})")
        object.__setattr__(self, "params", dict(self.params))
        object.__setattr__(self, "children", tuple(self.children))
        unknown = set(self.params) - set(_PARAM_KEYS[self.kind])
        if unknown:
            raise InvalidParamsError(f"{self.kind}: unknown parameter(s) {', '.join(sorted(unknown))}")
        if self.kind == "compose":
            if len(self.children) < 2:
                raise InvalidParamsError("compose needs at least 2 children")
            if self.depth > MAX_DEPTH:
                raise InvalidParamsError(f"compose nesting depth {self.depth} exceeds {MAX_DEPTH}")
        elif self.children:
            raise InvalidParamsError(f"{self.kind} takes no children")
        if self.kind == "resample":
            ResampleParams.from_dict(self.params)
        if "low" in self.params and float(self.params["low"]) > float(self.params.get("high", self.params["low"])):
            raise InvalidParamsError(f"{self.kind}: low > high")

    @property
    def depth(self) -> int:
        return 1 + max((c.depth for c in self.children), default=0)

    @classmethod
    def of(cls, kind: str, **params: Any) -> "AugmentSpec":
        return cls(kind, params)

    @classmethod
    def compose(cls, *children: "AugmentSpec") -> "AugmentSpec":
        return cls("compose", {}, tuple(children))

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "AugmentSpec":
        if not isinstance(d, Mapping) or "kind" not in d:
            raise InvalidParamsError(f"augmentation spec needs a 'kind': {d!r}")
        extra = set(d) - {"kind", "params", "children"}
        if extra:
            raise InvalidParamsError(f"augmentation spec: unexpected field(s) {', '.join(sorted(extra))}")
        return cls(
            str(d["kind"]),
            dict(d.get("params") or {}),
            tuple(cls.from_dict(c) for c in d.get("children") or ()),
        )

    def to_dict(self) -> Dict[str, Any]:
        out: Dict[str, Any] = {"kind": self.kind}
        if self.params:
            out["params"] = dict(self.params)
        if self.children:
            out["children"] = [c.to_dict() for c in self.children]
        return out

    def describe(self) -> str:
        if self.kind == "compose":
            return "+".join(c.describe() for c in self.children)
        if self.params:
            return f"{self.kind}(" + ",".join(f"{k}={v}" for k, v in sorted(self.params.items())) + ")"
        return self.kind


IDENTITY = AugmentSpec("identity")


def apply(spec: AugmentSpec, w: Window, rng: np.random.Generator) -> Window:
    k, p = spec.kind, spec.params
    if k == "identity":
        return w
    if k == "compose":
        for child in spec.children:
            w = apply(child, w, rng)
        return w
    if k == "resample":
        return resample(w, ResampleParams.from_dict(p), rng)
    if k == "noise":
        return noise(w, rng, **p)
    if k == "rotate":
        return rotate(w, rng, **p)
    if k == "scale":
        return scale(w, rng, **p)
    if k == "magnify":
        return magnify(w, rng, **p)
    if k == "invert":
        return invert(w)
    if k == "reverse":
        return reverse(w)
    raise InvalidParamsError(f"unknown augmentation kind {k!r}")


# ──────────────────────────────────────────────────────────────────────────────
# Batch fan-out
# ──────────────────────────────────────────────────────────────────────────────

def augment_array(
    data: np.ndarray,
    spec: AugmentSpec,
    seed: int,
    *stream: int,
    indices: Optional[Iterable[int]] = None,
    workers: int = 1,
    sample_rate_hz: float = 50.0,
) -> np.ndarray:
    """
    Augment an n×T×C stack. Row r draws from make_rng(seed, *stream, indices[r]),
    so results do not depend on the worker count or on batch composition.
    """
    x = np.asarray(data)
    if x.ndim != 3:
        raise ShapeError(f"expected n×T×C windows, got shape {x.shape}")
    if spec.kind == "identity":
        return x.copy()
    idx = list(range(len(x))) if indices is None else [int(i) for i in indices]
    if len(idx) != len(x):
        raise ShapeError(f"{len(idx)} stream indices for {len(x)} windows")

    def one(r: int) -> np.ndarray:
        return apply(spec, Window(x[r], sample_rate_hz), make_rng(seed, *stream, idx[r])).data

    if workers > 1 and len(x) > 1:
        rows = Parallel(n_jobs=workers, prefer="threads")(delayed(one)(r) for r in range(len(x)))
    else:
        rows = [one(r) for r in range(len(x))]
    return np.stack(rows).astype(x.dtype, copy=False)


def augment_batch(
    windows: Sequence[Window],
    spec: AugmentSpec,
    seed: int,
    *stream: int,
    workers: int = 1,
) -> List[Window]:
    """Window-level variant of augment_array; stream id is the position in `windows`."""
    def one(r: int) -> Window:
        return apply(spec, windows[r], make_rng(seed, *stream, r))

    if workers > 1 and len(windows) > 1:
        return list(Parallel(n_jobs=workers, prefer="threads")(delayed(one)(r) for r in range(len(windows))))
    return [one(r) for r in range(len(windows))]


__all__ = [
    "Window", "ResampleParams", "AugmentSpec", "IDENTITY", "KINDS", "MAX_DEPTH",
    "resample_grid", "resample", "noise", "rotation_matrix", "rotate", "scale", "magnify",
    "invert", "reverse", "apply", "augment_array", "augment_batch",
]
