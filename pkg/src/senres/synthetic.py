# src/senres/synthetic.py
from __future__ import annotations

"""Desk-scale stand-in for an activity dataset: one sinusoid frequency per class plus uniform noise."""

from typing import Optional, Sequence

import numpy as np

from .dataset import WindowSet
from .errors import InvalidParamsError
from .ids import make_rng


def class_frequencies(num_classes: int, *, low_hz: float = 1.0, high_hz: float = 5.0) -> np.ndarray:
    if num_classes < 1:
        raise InvalidParamsError(f"need at least one class, got {num_classes}")
    return np.linspace(low_hz, high_hz, num_classes) if num_classes > 1 else np.array([low_hz])


def synthetic_windowset(
    n_per_class: int = 600,
    T: int = 128,
    C: int = 6,
    num_classes: int = 3,
    seed: int = 0,
    *,
    noise: float = 0.1,
    sample_rate_hz: float = 50.0,
    frequencies: Optional[Sequence[float]] = None,
    subjects: int = 0,
) -> WindowSet:
    """
    Windows of class c carry sin(2π f_c t + φ) on every channel with a random
    per-channel phase φ and amplitude in [0.5, 1.5], plus uniform(−noise, noise).
    With subjects > 0, windows are assigned round-robin subject ids 1..subjects.
    """
    if n_per_class < 1 or T < 2 or C < 1:
        raise InvalidParamsError(f"invalid synthetic shape n={n_per_class} T={T} C={C}")
    freqs = np.asarray(frequencies if frequencies is not None else class_frequencies(num_classes), dtype=np.float64)
    if freqs.shape != (num_classes,):
        raise InvalidParamsError(f"{freqs.size} frequencies for {num_classes} classes")
    rng = make_rng(seed)
    n = n_per_class * num_classes
    labels = np.repeat(np.arange(num_classes), n_per_class)
    t = np.arange(T) / sample_rate_hz
    phase = rng.uniform(0.0, 2.0 * np.pi, size=(n, 1, C))
    amp = rng.uniform(0.5, 1.5, size=(n, 1, C))
    f = freqs[labels].reshape(n, 1, 1)
    data = amp * np.sin(2.0 * np.pi * f * t.reshape(1, T, 1) + phase)
    data += rng.uniform(-noise, noise, size=data.shape)
    subj = (np.arange(n) % subjects + 1) if subjects > 0 else None
    return WindowSet(
        data,
        labels,
        tuple(f"class_{c}" for c in range(num_classes)),
        subj,
        sample_rate_hz,
        {
            "dataset": "synthetic",
            "seed": seed,
            "n_per_class": n_per_class,
            "frequencies_hz": freqs.tolist(),
            "noise": noise,
        },
    )


__all__ = ["class_frequencies", "synthetic_windowset"]
