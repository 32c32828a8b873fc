# tests/test_encoder.py
from __future__ import annotations

import numpy as np
import pytest

from senres.encoder import (
    EncoderConfig,
    ModelParams,
    ProjectionConfig,
    classify,
    count_parameters,
    encode,
    init_classifier,
    init_encoder,
    init_projection,
    predict,
    project,
    represent,
    validate_encoder,
)
from senres.errors import ConfigError, FormatError, InvalidParamsError, ShapeError
from senres.ids import make_rng
from senres.tensor import Tensor, grad_check


def test_default_encoder_size():
    params = init_encoder(EncoderConfig(), 6, seed=0)
    assert count_parameters(params) == 294_016
    assert params["encoder.conv0.weight"].shape == (5, 6, 64)
    assert params["encoder.lstm1.w_h"].shape == (128, 512)


def test_projection_heads():
    assert ProjectionConfig.simclr().dims == (256, 128, 50)
    assert ProjectionConfig.moco().out_dim == 128
    head = init_projection(ProjectionConfig.moco(), 128, seed=0)
    assert count_parameters(head) == 128 * 256 + 256 + 256 * 128 + 128
    with pytest.raises(InvalidParamsError):
        ProjectionConfig(())


def test_encoder_config_checks():
    cfg = EncoderConfig()
    assert cfg.steps_after_conv(128) == 112
    with pytest.raises(ShapeError):
        cfg.check_window(16)
    with pytest.raises(InvalidParamsError):
        EncoderConfig(dropout=1.0)
    with pytest.raises(ConfigError):
        EncoderConfig.from_dict({"filters": 8, "layers": 2})
    assert EncoderConfig.from_dict(cfg.to_dict()) == cfg


def test_init_is_seeded():
    cfg = EncoderConfig(1, 3, 3, 1, 4, 0.0)
    a = init_encoder(cfg, 6, seed=1)
    assert a.digest() == init_encoder(cfg, 6, seed=1).digest()
    assert a.digest() != init_encoder(cfg, 6, seed=2).digest()
    np.testing.assert_array_equal(a["encoder.lstm0.bias"].numpy(), 0.0)


def test_encode_shapes(tiny_encoder, rng):
    params = init_encoder(tiny_encoder, 6, seed=0)
    x = rng.normal(size=(5, 16, 6))
    h = encode(x, params, tiny_encoder)
    assert h.shape == (5, tiny_encoder.hidden)
    np.testing.assert_array_equal(h.numpy(), encode(x, params, tiny_encoder).numpy())
    with pytest.raises(ShapeError):
        encode(rng.normal(size=(5, 2, 6)), params, tiny_encoder)
    with pytest.raises(ShapeError):
        encode(rng.normal(size=(16, 6)), params, tiny_encoder)


def test_training_dropout_needs_rng(rng):
    cfg = EncoderConfig(1, 3, 3, 2, 4, 0.5)
    params = init_encoder(cfg, 3, seed=0)
    x = rng.normal(size=(2, 8, 3))
    with pytest.raises(InvalidParamsError):
        encode(x, params, cfg, training=True)
    a = encode(x, params, cfg, training=True, rng=make_rng(0))
    b = encode(x, params, cfg, training=True, rng=make_rng(0))
    np.testing.assert_array_equal(a.numpy(), b.numpy())
    assert not np.allclose(a.numpy(), encode(x, params, cfg).numpy())


def test_encoder_gradient(tiny_encoder, rng):
    params = init_encoder(tiny_encoder, 3, seed=0)
    x = rng.normal(size=(2, 6, 3))
    base = params.arrays()

    def f(w):
        p = ModelParams({**{k: Tensor(v) for k, v in base.items()}, "encoder.lstm0.w_x": w})
        h = encode(x, p, tiny_encoder)
        return (h * h).sum()

    assert grad_check(f, base["encoder.lstm0.w_x"], max_entries=12) < 1e-4


def test_heads_and_prediction(tiny_encoder, rng):
    enc = init_encoder(tiny_encoder, 6, seed=0)
    head = init_projection(ProjectionConfig((8, 5)), tiny_encoder.hidden, seed=0)
    clf = init_classifier(tiny_encoder.hidden, 3, seed=0)
    params = enc.merged(clf)
    x = rng.normal(size=(7, 16, 6))
    h = encode(x, enc, tiny_encoder)
    assert project(h, head, ProjectionConfig((8, 5))).shape == (7, 5)
    logits = classify(h, params)
    assert logits.shape == (7, 3)
    np.testing.assert_array_equal(predict(x, params, tiny_encoder, batch_size=3), np.argmax(logits.numpy(), axis=1))
    np.testing.assert_allclose(represent(x, enc, tiny_encoder, batch_size=2), h.numpy())
    assert predict(x[:0], params, tiny_encoder).shape == (0,)
    with pytest.raises(ShapeError):
        classify(Tensor(np.ones((2, 9))), params)


def test_validate_encoder(tiny_encoder):
    params = init_encoder(tiny_encoder, 6, seed=0)
    validate_encoder(params, tiny_encoder, 6)
    with pytest.raises(FormatError):
        validate_encoder(params, tiny_encoder, 3)
    with pytest.raises(FormatError):
        validate_encoder(params, EncoderConfig(2, 3, 3, 1, 4, 0.0), 6)
    with pytest.raises(FormatError):
        validate_encoder(params.merged(ModelParams({"encoder.extra": Tensor([1.0])})), tiny_encoder, 6)


def test_model_params_collection(tiny_encoder, tmp_path):
    params = init_encoder(tiny_encoder, 6, seed=0)
    with pytest.raises(ShapeError):
        params["encoder.nope"]
    clone = params.copy()
    clone["encoder.conv0.bias"].data[:] = 1.0
    np.testing.assert_array_equal(params["encoder.conv0.bias"].numpy(), 0.0)
    with pytest.raises(ShapeError):
        params.merged(params)
    params.save(tmp_path / "enc.sprm")
    back = ModelParams.load(tmp_path / "enc.sprm")
    assert back.digest() == params.digest()
    assert list(back) == sorted(back)
    assert params.astype(np.float32)["encoder.conv0.weight"].dtype == np.float32
