# src/senres/resample.py
from __future__ import annotations

"""
Resampling kernels: interpolation upsampling followed by strided,
randomly-offset downsampling back to the original length.

Sequences are (I,) or (I, C); time is always axis 0 and every channel of a
multichannel sequence is transformed with the same indices.

Indexing follows the usual 1-based description of the method where it is
user visible (downsample start s ∈ [1, s_max]); arrays are 0-based inside.
"""

from typing import Literal, Optional, Tuple

import numpy as np
from scipy.interpolate import CubicSpline

from .errors import InputTooShortError, InvalidParamsError

Kernel = Literal["linear", "lagrange", "cubic_spline"]
Mode = Literal["A", "B"]

KERNELS: Tuple[str, ...] = ("linear", "lagrange", "cubic_spline")
MODES: Tuple[str, ...] = ("A", "B")

# block size and in-block insertion points (0-based, midway between samples)
_BLOCKS = {"A": (4, (1.5,)), "B": (8, (1.5, 3.5, 5.5))}

# cubic through x[j-1..j+2] evaluated at j + 1/2
_LAGRANGE_MID = np.array([-1.0, 9.0, 9.0, -1.0]) / 16.0


def upsampled_length(I: int, M: int) -> int:
    return (M + 1) * (I - 1) + 1


def upsample_linear(seq: np.ndarray, M: int) -> np.ndarray:
    """Insert M equally spaced nodes between every pair of neighbours."""
    x = np.asarray(seq, dtype=np.float64)
    I = x.shape[0]
    if I < 2:
        raise InputTooShortError(f"linear upsampling needs at least 2 samples, got {I}")
    if M < 1:
        raise InvalidParamsError(f"M must be >= 1, got {M}")
    k = np.arange(upsampled_length(I, M))
    i0 = k // (M + 1)
    frac = (k % (M + 1)) / (M + 1)
    nxt = np.minimum(i0 + 1, I - 1)
    if x.ndim > 1:
        frac = frac.reshape((-1,) + (1,) * (x.ndim - 1))
    return x[i0] + frac * (x[nxt] - x[i0])


def downsample_bounds(L: int, I: int, N: int) -> Tuple[int, int]:
    """(stride, s_max) for taking I samples at stride N+1 from a length-L sequence."""
    if N < 0:
        raise InvalidParamsError(f"N must be >= 0, got {N}")
    if I < 1:
        raise InvalidParamsError(f"target length must be >= 1, got {I}")
    stride = N + 1
    return stride, L - (I - 1) * stride


def downsample(
    seq: np.ndarray,
    I: int,
    N: int,
    rng: Optional[np.random.Generator] = None,
    *,
    start: Optional[int] = None,
) -> np.ndarray:
    """
    Take I samples at stride N+1 starting at s (1-based).
    s is drawn uniformly from [1, L − (I−1)(N+1)] unless `start` forces it.
    """
    x = np.asarray(seq)
    L = x.shape[0]
    stride, s_max = downsample_bounds(L, I, N)
    if s_max < 1:
        raise InvalidParamsError(f"stride {stride} too large: {I} samples do not fit in length {L}")
    if start is None:
        if rng is None:
            raise InvalidParamsError("downsample needs an rng or an explicit start")
        s = int(rng.integers(1, s_max + 1))
    else:
        s = int(start)
        if not 1 <= s <= s_max:
            raise InvalidParamsError(f"start {s} outside [1, {s_max}]")
    lo = s - 1
    return x[lo:lo + (I - 1) * stride + 1:stride].copy()


def _stencil_order(bs: int, n_ins: int) -> np.ndarray:
    order = []
    for k in range(bs):
        order.append(k)
        if k % 2 == 1 and k // 2 < n_ins:
            order.append(bs + k // 2)
    return np.asarray(order)


def nonlinear_length(I: int, mode: Mode) -> int:
    bs, pts = _BLOCKS[mode]
    return I + len(pts) * (I // bs)


def upsample_nonlinear(seq: np.ndarray, kernel: Kernel, mode: Mode) -> np.ndarray:
    """
    Blockwise insertion on non-overlapping blocks (4 samples in mode A, 8 in mode B).
    Mode A inserts one point between block samples 2 and 3; mode B between 2–3, 4–5
    and 6–7. Trailing samples that do not fill a block are copied unchanged.

    lagrange:      cubic through the four samples around each insertion point
    cubic_spline:  natural cubic spline through the whole block
    """
    if mode not in _BLOCKS:
        raise InvalidParamsError(f"unknown interpolation mode {mode!r}")
    if kernel not in ("lagrange", "cubic_spline"):
        raise InvalidParamsError(f"unknown nonlinear kernel {kernel!r}")
    x = np.asarray(seq, dtype=np.float64)
    bs, pts = _BLOCKS[mode]
    I = x.shape[0]
    if I < bs:
        raise InputTooShortError(f"mode {mode} needs at least {bs} samples, got {I}")
    nb = I // bs
    blocks = x[: nb * bs].reshape((nb, bs) + x.shape[1:])
    if kernel == "lagrange":
        ins = np.stack(
            [np.tensordot(_LAGRANGE_MID, blocks[:, int(t) - 1:int(t) + 3], axes=([0], [1])) for t in pts],
            axis=1,
        )
    else:
        spline = CubicSpline(np.arange(bs, dtype=np.float64), blocks, axis=1, bc_type="natural")
        ins = spline(np.asarray(pts))
    merged = np.concatenate([blocks, ins], axis=1)[:, _stencil_order(bs, len(pts))]
    body = merged.reshape((nb * (bs + len(pts)),) + x.shape[1:])
    return np.concatenate([body, x[nb * bs:]], axis=0)


def random_crop(seq: np.ndarray, I: int, rng: np.random.Generator) -> np.ndarray:
    L = seq.shape[0]
    if L < I:
        raise InvalidParamsError(f"cannot crop {I} samples from length {L}")
    lo = int(rng.integers(0, L - I + 1))
    return seq[lo:lo + I].copy()


def resample_sequence(
    seq: np.ndarray,
    M: int,
    N: int,
    rng: np.random.Generator,
    *,
    kernel: Kernel = "linear",
    mode: Mode = "A",
) -> np.ndarray:
    """
    Full resampling of an (I,) or (I, C) sequence to the same length I.
    The linear kernel uses (M, N); the nonlinear kernels use the mode's insertion
    pattern and a random contiguous crop instead.
    """
    I = np.asarray(seq).shape[0]
    if kernel == "linear":
        return downsample(upsample_linear(seq, M), I, N, rng)
    return random_crop(upsample_nonlinear(seq, kernel, mode), I, rng)


__all__ = [
    "KERNELS", "MODES", "upsampled_length", "upsample_linear", "downsample_bounds", "downsample",
    "nonlinear_length", "upsample_nonlinear", "random_crop", "resample_sequence",
]
