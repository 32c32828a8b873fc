# tests/test_contrastive.py
from __future__ import annotations

import math
from collections import deque

import numpy as np
import pytest

from senres.augment import IDENTITY, AugmentSpec
from senres.contrastive import (
    PretrainConfig,
    Queue,
    info_nce,
    moco_keys,
    momentum_update,
    nt_xent,
    pretrain,
    queue_push,
)
from senres.encoder import ModelParams, ProjectionConfig, init_encoder, init_projection
from senres.errors import ConfigError, InvalidParamsError, InvalidStateError, ShapeError
from senres.tensor import Tape, Tensor


def _nt_xent_loops(Z: np.ndarray, tau: float) -> float:
    u = Z / np.linalg.norm(Z, axis=1, keepdims=True)
    n2 = len(Z)
    total = 0.0
    for i in range(n2):
        j = i ^ 1
        denom = sum(math.exp(u[i] @ u[k] / tau) for k in range(n2) if k != i)
        total += -math.log(math.exp(u[i] @ u[j] / tau) / denom)
    return total / n2


# ── NT-Xent ──────────────────────────────────────────────────────────────────

def test_nt_xent_worked_example():
    Z = Tensor([[1.0, 0.0], [1.0, 0.0], [0.0, 1.0], [0.0, 1.0]])
    assert nt_xent(Z, 1.0).item() == pytest.approx(math.log(1.0 + 2.0 / math.e), abs=1e-12)
    assert nt_xent(Z, 1.0).item() == pytest.approx(0.55144, abs=1e-5)


def test_nt_xent_matches_brute_force(rng):
    Z = rng.normal(size=(8, 5))
    for tau in (0.1, 0.5, 1.0):
        assert nt_xent(Tensor(Z), tau).item() == pytest.approx(_nt_xent_loops(Z, tau), rel=1e-10)


def test_nt_xent_invariances(rng):
    Z = rng.normal(size=(6, 4))
    base = nt_xent(Tensor(Z), 0.2).item()
    assert base >= 0
    pairs = [4, 5, 0, 1, 2, 3]
    assert nt_xent(Tensor(Z[pairs]), 0.2).item() == pytest.approx(base, abs=1e-10)
    scaled = Z * rng.uniform(0.1, 10.0, size=(6, 1))
    assert nt_xent(Tensor(scaled), 0.2).item() == pytest.approx(base, abs=1e-10)


def test_nt_xent_errors():
    with pytest.raises(ShapeError):
        nt_xent(Tensor(np.ones((3, 2))), 0.1)
    with pytest.raises(InvalidParamsError):
        nt_xent(Tensor(np.ones((2, 2))), 0.0)


# ── InfoNCE ──────────────────────────────────────────────────────────────────

@pytest.mark.parametrize("K", [1, 4, 16])
def test_info_nce_closed_form(K):
    q = Tensor([[1.0, 0.0]])
    bank = np.tile([0.0, 1.0], (K, 1))
    assert info_nce(q, q, bank, 1.0).item() == pytest.approx(math.log(math.e + K) - 1.0, abs=1e-12)


def test_info_nce_queue_permutation_and_empty(rng):
    q, k = Tensor(rng.normal(size=(3, 4))), Tensor(rng.normal(size=(3, 4)))
    queue = Queue(6, 4)
    queue.push(rng.normal(size=(5, 4)))
    perm = queue.snapshot()[[3, 0, 4, 1, 2]]
    assert info_nce(q, k, queue, 0.1).item() == pytest.approx(info_nce(q, k, perm, 0.1).item(), abs=1e-12)
    with pytest.raises(InvalidStateError):
        info_nce(q, k, Queue(6, 4), 0.1)
    with pytest.raises(ShapeError):
        info_nce(q, k, np.ones((2, 3)), 0.1)


def test_info_nce_never_reaches_keys_or_queue(rng):
    q = Tensor(rng.normal(size=(2, 3)), requires_grad=True)
    k = Tensor(rng.normal(size=(2, 3)), requires_grad=True)
    bank = Tensor(rng.normal(size=(4, 3)), requires_grad=True)
    with Tape() as tape:
        loss = info_nce(q, k, bank, 0.07)
    tape.backward(loss)
    assert np.count_nonzero(k.grad) == 0
    assert np.count_nonzero(bank.grad) == 0


# ── queue ────────────────────────────────────────────────────────────────────

def test_queue_ring_example():
    queue = Queue(4, 1)
    queue_push(queue, np.array([[1.0], [2.0], [3.0]]))
    queue_push(queue, np.array([[4.0], [5.0], [6.0]]))
    assert queue.buffer[:, 0].tolist() == [5.0, 6.0, 3.0, 4.0]
    assert queue.ordered()[:, 0].tolist() == [3.0, 4.0, 5.0, 6.0]
    assert len(queue) == 4 and queue.full


def test_queue_fifo_against_deque():
    rng = np.random.default_rng(0)
    for K in range(1, 9):
        queue = Queue(K, 1)
        ref: deque = deque(maxlen=K)
        counter = 0
        for _ in range(20):
            B = int(rng.integers(1, K + 1))
            keys = np.arange(counter, counter + B, dtype=float).reshape(B, 1)
            counter += B
            queue.push(keys)
            ref.extend(keys[:, 0].tolist())
            assert queue.ordered()[:, 0].tolist() == list(ref)
            assert len(queue) == len(ref)


def test_queue_errors():
    queue = Queue(2, 3)
    with pytest.raises(InvalidParamsError):
        queue.push(np.ones((3, 3)))
    with pytest.raises(ShapeError):
        queue.push(np.ones((1, 2)))
    with pytest.raises(InvalidParamsError):
        Queue(0, 3)


# ── momentum ─────────────────────────────────────────────────────────────────

def _p(v) -> ModelParams:
    return ModelParams.from_arrays({"w": np.asarray(v, dtype=float)})


def test_momentum_update_examples():
    xi = momentum_update(_p([1.0]), _p([0.0]), 0.999)
    assert xi["w"].numpy()[0] == pytest.approx(0.001)
    theta = _p([3.0, -2.0])
    copy = momentum_update(theta, _p([0.0, 0.0]), 0.0)
    np.testing.assert_array_equal(copy["w"].numpy(), theta["w"].numpy())


def test_momentum_contracts_geometrically(rng):
    theta = _p(rng.normal(size=5))
    xi = _p(rng.normal(size=5))
    gap = np.linalg.norm(xi["w"].numpy() - theta["w"].numpy())
    lo = np.minimum(xi["w"].numpy(), theta["w"].numpy())
    hi = np.maximum(xi["w"].numpy(), theta["w"].numpy())
    for _ in range(5):
        momentum_update(theta, xi, 0.9)
        new_gap = np.linalg.norm(xi["w"].numpy() - theta["w"].numpy())
        assert new_gap == pytest.approx(0.9 * gap, rel=1e-12)
        assert np.all((xi["w"].numpy() >= lo - 1e-15) & (xi["w"].numpy() <= hi + 1e-15))
        gap = new_gap


def test_momentum_errors():
    with pytest.raises(InvalidParamsError):
        momentum_update(_p([1.0]), _p([0.0]), 1.0)
    with pytest.raises(ShapeError):
        momentum_update(_p([1.0]), _p([0.0, 1.0]), 0.5)


# ── config ───────────────────────────────────────────────────────────────────

def test_pretrain_config_defaults():
    s = PretrainConfig()
    assert (s.temperature, s.batch_size, s.projection.dims) == (0.1, 2048, (256, 128, 50))
    m = PretrainConfig(framework="moco")
    assert (m.temperature, m.batch_size, m.projection.dims) == (0.07, 1024, (256, 128))
    assert (m.K, m.momentum, m.lr) == (8192, 0.999, 1e-3)
    assert s.branch1 == IDENTITY


def test_pretrain_config_errors():
    with pytest.raises(ConfigError):
        PretrainConfig(framework="byol")
    with pytest.raises(ConfigError):
        PretrainConfig(batch_size=1)
    with pytest.raises(ConfigError):
        PretrainConfig(framework="moco", batch_size=64, K=32)
    with pytest.raises(ConfigError):
        PretrainConfig(temperature=0.0)
    with pytest.raises(ConfigError):
        PretrainConfig.from_dict({"framework": "simclr", "queue": 3})


def test_pretrain_config_dict_round_trip():
    cfg = PretrainConfig(framework="moco", batch_size=8, K=32, branch1=AugmentSpec("noise"))
    back = PretrainConfig.from_dict(cfg.to_dict())
    assert back == cfg
    assert cfg.with_overrides(epochs=3, lr=None).epochs == 3


# ── training loop ────────────────────────────────────────────────────────────

def _cfg(tiny_encoder, **kw) -> PretrainConfig:
    base = dict(batch_size=8, epochs=2, lr=1e-2, K=16, encoder=tiny_encoder, seed=3,
                projection=ProjectionConfig((8, 6)))
    base.update(kw)
    return PretrainConfig(**base)


def test_zero_epochs_returns_initialisation(small_windows, tiny_encoder):
    res = pretrain(small_windows, _cfg(tiny_encoder, epochs=0))
    init = init_encoder(tiny_encoder, small_windows.C, 3)
    assert res.params.digest() == init.digest()
    assert res.manifest.epoch_losses == []


def test_simclr_pretrain_is_reproducible(small_windows, tiny_encoder):
    cfg = _cfg(tiny_encoder)
    a = pretrain(small_windows, cfg)
    b = pretrain(small_windows, cfg)
    assert a.params.digest() == b.params.digest()
    assert a.manifest.epoch_losses == b.manifest.epoch_losses
    assert len(a.manifest.epoch_losses) == 2
    assert all(math.isfinite(v) for v in a.manifest.epoch_losses)
    assert sorted(a.params) == sorted(k for k in a.params if k.startswith("encoder."))
    assert a.manifest.method == "simclr:identity|resample"
    c = pretrain(small_windows, cfg.with_overrides(workers=2))
    assert c.params.digest() == a.params.digest()


def test_simclr_drops_incomplete_batch(small_windows, tiny_encoder):
    res = pretrain(small_windows, _cfg(tiny_encoder, batch_size=7, epochs=1))
    assert any("dropped" in note for note in res.manifest.notes)


def test_moco_pretrain_runs(small_windows, tiny_encoder):
    res = pretrain(small_windows, _cfg(tiny_encoder, framework="moco", projection=None, epochs=2))
    assert len(res.manifest.epoch_losses) == 2
    assert all(math.isfinite(v) for v in res.manifest.epoch_losses)
    assert res.manifest.config["framework"]["framework"] == "moco"


def test_moco_keys_match_online_encoder_when_momentum_is_zero(small_windows, tiny_encoder):
    cfg = _cfg(tiny_encoder, framework="moco", momentum=0.0, K=8, projection=ProjectionConfig((8, 6)))
    theta = init_encoder(tiny_encoder, 6, 0).merged(init_projection(cfg.projection, tiny_encoder.hidden, 0))
    rng = np.random.default_rng(1)
    for name in theta:
        theta[name].data[...] += rng.normal(scale=0.1, size=theta[name].shape)
    xi = theta.copy(requires_grad=False)
    for name in xi:
        xi[name].data[...] = 0.0
    momentum_update(theta, xi, cfg.momentum)
    x = small_windows.data[:8].astype(np.float64)
    np.testing.assert_array_equal(moco_keys(x, xi, cfg).numpy(), moco_keys(x, theta, cfg).numpy())


def test_pretrain_rejects_short_windows(small_windows):
    from senres.encoder import EncoderConfig

    with pytest.raises(ShapeError):
        pretrain(small_windows, PretrainConfig(batch_size=8, encoder=EncoderConfig()))


def test_pretrain_writes_periodic_checkpoints(small_windows, tiny_encoder, tmp_path):
    cfg = _cfg(tiny_encoder, epochs=2, checkpoint_every=1, checkpoint_dir=str(tmp_path))
    res = pretrain(small_windows, cfg)
    assert (tmp_path / "epoch0001.sprm").is_file()
    assert (tmp_path / "epoch0002.sprm").is_file()
    assert len(res.manifest.artifacts) == 2


@pytest.mark.slow
def test_simclr_loss_decreases_over_ten_epochs(tiny_encoder):
    from senres.synthetic import synthetic_windowset

    ws = synthetic_windowset(n_per_class=16, T=16, C=6, num_classes=3, seed=0)
    falling = 0
    for seed in range(10):
        res = pretrain(ws, _cfg(tiny_encoder, epochs=10, seed=seed, batch_size=16))
        losses = res.manifest.epoch_losses
        falling += losses[-1] < losses[0]
    assert falling >= 7
