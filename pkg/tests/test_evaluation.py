# tests/test_evaluation.py
from __future__ import annotations

import math

import numpy as np
import pytest

from senres.augment import AugmentSpec
from senres.dataset import WindowSet
from senres.encoder import init_encoder
from senres.errors import ConfigError
from senres.evaluation import (
    EvalConfig,
    batch_size_for,
    fine_tune,
    linear_evaluate,
    run_protocol,
    train_supervised,
)


def _cfg(tiny_encoder, **kw) -> EvalConfig:
    base = dict(label_fraction=0.5, batch_size=16, epochs=3, repetitions=2, seed=1, encoder=tiny_encoder)
    base.update(kw)
    return EvalConfig(**base)


def test_batch_size_rule():
    assert [batch_size_for(f) for f in (0.01, 0.05, 0.1, 0.5, 0.99)] == [50, 500, 500, 1000, 1000]


def test_eval_config_defaults_and_errors():
    assert EvalConfig().lr == 1e-2
    assert EvalConfig(protocol="finetune").lr == 5e-4
    assert EvalConfig(label_fraction=0.1).batch_size == 500
    with pytest.raises(ConfigError):
        EvalConfig(protocol="knn")
    with pytest.raises(ConfigError):
        EvalConfig(label_fraction=1.0)
    with pytest.raises(ConfigError):
        EvalConfig(repetitions=0)
    with pytest.raises(ConfigError):
        EvalConfig.from_dict({"protocol": "linear", "folds": 5})
    cfg = EvalConfig(protocol="supervised", label_fraction=0.2)
    assert EvalConfig.from_dict(cfg.to_dict()) == cfg


def test_repetitions_use_distinct_split_seeds():
    cfg = EvalConfig(repetitions=3)
    seeds = {cfg.split_spec(r).seed for r in range(3)}
    assert len(seeds) == 3
    assert cfg.split_spec(1).seed == EvalConfig(repetitions=5).split_spec(1).seed


def test_supervised_protocol(small_windows, tiny_encoder):
    m = run_protocol(small_windows, _cfg(tiny_encoder, protocol="supervised"))
    assert m.kind == "supervised"
    assert len(m.repetitions) == 2
    assert all(0.0 <= s <= 1.0 for s in m.scores)
    assert m.repetitions[0].split_seed != m.repetitions[1].split_seed
    assert m.repetitions[0].train_windows + m.repetitions[0].test_windows == len(small_windows)
    assert len(m.epoch_losses) == 3
    m.check()


def test_protocol_is_reproducible(small_windows, tiny_encoder):
    cfg = _cfg(tiny_encoder, protocol="supervised")
    a = run_protocol(small_windows, cfg)
    b = run_protocol(small_windows, cfg)
    c = run_protocol(small_windows, cfg.with_overrides(workers=2))
    assert a.scores == b.scores == c.scores


def test_linear_protocol_keeps_encoder_frozen(small_windows, tiny_encoder):
    enc = init_encoder(tiny_encoder, small_windows.C, seed=5)
    before = enc.digest()
    cfg = _cfg(tiny_encoder, lr=5e-2)
    res = linear_evaluate(enc, small_windows, cfg, repetition=0)
    assert enc.digest() == before
    assert res.params.subset("encoder.").digest() == before
    assert "classifier.weight" in res.params
    assert len(res.epoch_losses) == 3
    m = run_protocol(small_windows, cfg, encoder_params=enc, method="simclr")
    assert m.method == "simclr"
    assert m.inputs["encoder"] == before


def test_fine_tune_updates_encoder(small_windows, tiny_encoder):
    enc = init_encoder(tiny_encoder, small_windows.C, seed=5)
    before = enc.digest()
    res = fine_tune(enc, small_windows, _cfg(tiny_encoder, protocol="finetune", lr=1e-2))
    assert enc.digest() == before
    assert res.params.subset("encoder.").digest() != before
    assert 0.0 <= res.macro_f1 <= 1.0


def test_missing_encoder_is_a_config_error(small_windows, tiny_encoder):
    for protocol in ("linear", "finetune"):
        with pytest.raises(ConfigError):
            run_protocol(small_windows, _cfg(tiny_encoder, protocol=protocol))


def test_augmented_training_set_size(small_windows, tiny_encoder):
    cfg = _cfg(tiny_encoder, protocol="supervised", augment_times=4, epochs=1)
    res = train_supervised(small_windows, cfg, AugmentSpec("resample"))
    assert res.train_windows == 5 * len(small_windows)
    m = run_protocol(small_windows, cfg, aug=AugmentSpec("resample"))
    assert m.config["augmentation"] == {"kind": "resample"}
    assert m.repetitions[0].train_windows == 5 * (len(small_windows) - m.repetitions[0].test_windows)


def test_empty_class_is_a_config_error(tiny_encoder):
    ws = WindowSet(np.random.default_rng(0).normal(size=(6, 16, 6)), [0, 0, 0, 1, 1, 1], ("a", "b", "c"))
    with pytest.raises(ConfigError, match="c"):
        train_supervised(ws, _cfg(tiny_encoder, protocol="supervised"))


def test_zero_epochs_scores_the_initial_model(small_windows, tiny_encoder):
    m = run_protocol(small_windows, _cfg(tiny_encoder, protocol="supervised", epochs=0, repetitions=1))
    assert m.epoch_losses == []
    assert math.isfinite(m.scores[0])

