# tests/conftest.py
from __future__ import annotations

import numpy as np
import pytest

from senres.encoder import EncoderConfig
from senres.synthetic import synthetic_windowset


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(1234)


@pytest.fixture
def tiny_encoder() -> EncoderConfig:
    """One conv layer, one LSTM layer; fits a 16-step window."""
    return EncoderConfig(conv_layers=1, filters=3, kernel=3, lstm_layers=1, hidden=4, dropout=0.0)


@pytest.fixture
def small_windows():
    # 3 classes × 20 windows of 16 steps × 6 channels, 4 subjects
    return synthetic_windowset(n_per_class=20, T=16, C=6, num_classes=3, seed=7, subjects=4)
