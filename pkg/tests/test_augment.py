# tests/test_augment.py
from __future__ import annotations

import math

import numpy as np
import pytest

from senres import augment as aug
from senres.augment import AugmentSpec, ResampleParams, Window
from senres.errors import InvalidChannelsError, InvalidParamsError, ShapeError
from senres.ids import make_rng


@pytest.fixture
def window(rng) -> Window:
    return Window(rng.normal(size=(32, 6)), 50.0, label=2)


def _norms(w: Window) -> np.ndarray:
    return np.linalg.norm(w.data.reshape(w.T, -1, 3), axis=2)


# ── Window ───────────────────────────────────────────────────────────────────

def test_window_validation():
    with pytest.raises(ShapeError):
        Window(np.zeros((1, 3)))
    with pytest.raises(ShapeError):
        Window(np.zeros(10))
    with pytest.raises(InvalidParamsError):
        Window(np.array([[0.0], [np.nan]]))


# ── individual transforms ────────────────────────────────────────────────────

def test_noise_bounded_and_deterministic(window):
    a = aug.noise(window, make_rng(3))
    b = aug.noise(window, make_rng(3))
    np.testing.assert_array_equal(a.data, b.data)
    assert np.abs(a.data - window.data).max() <= 0.1
    assert a.label == 2


def test_noise_mean_is_near_zero():
    w = Window(np.zeros((1000, 1000)))
    d = aug.noise(w, make_rng(0)).data
    assert abs(d.mean()) < 1e-3


def test_rotate_preserves_triad_norms(window):
    out = aug.rotate(window, make_rng(5))
    np.testing.assert_allclose(_norms(out), _norms(window), atol=1e-9)
    assert not np.allclose(out.data, window.data)


def test_rotate_canonical_and_identity():
    w = Window(np.tile([1.0, 0.0, 0.0, 1.0, 0.0, 0.0], (2, 1)))
    out = aug.rotate(w, make_rng(0), axis=(0, 0, 1), angle=math.pi / 2)
    np.testing.assert_allclose(out.data, np.tile([0.0, 1.0, 0.0, 0.0, 1.0, 0.0], (2, 1)), atol=1e-12)
    same = aug.rotate(w, make_rng(0), axis=(1, 1, 0), angle=0.0)
    np.testing.assert_allclose(same.data, w.data)


def test_rotate_needs_triads():
    with pytest.raises(InvalidChannelsError):
        aug.rotate(Window(np.ones((4, 4))), make_rng(0))
    with pytest.raises(InvalidParamsError):
        aug.rotation_matrix((0, 0, 0), 1.0)


@pytest.mark.parametrize("fn,lo,hi", [(aug.scale, 0.7, 0.9), (aug.magnify, 1.1, 1.3)])
def test_channel_gain_constant_ratio(fn, lo, hi, rng):
    data = rng.uniform(0.5, 2.0, size=(20, 6))
    data[:, 4] = 0.0
    out = fn(Window(data), make_rng(9)).data
    ratio = out[:, [0, 1, 2, 3, 5]] / data[:, [0, 1, 2, 3, 5]]
    np.testing.assert_allclose(ratio, np.broadcast_to(ratio[0], ratio.shape))
    assert np.all((ratio >= lo) & (ratio <= hi))
    np.testing.assert_array_equal(out[:, 4], 0.0)


def test_magnify_then_scale_is_not_identity(window):
    out = aug.scale(aug.magnify(window, make_rng(1)), make_rng(2))
    assert not np.allclose(out.data, window.data)


def test_invert_and_reverse(window):
    np.testing.assert_array_equal(aug.invert(Window(np.array([[-1.0], [2.0]]))).data, [[1.0], [-2.0]])
    np.testing.assert_array_equal(aug.invert(aug.invert(window)).data, window.data)
    np.testing.assert_array_equal(aug.reverse(aug.reverse(window)).data, window.data)
    np.testing.assert_array_equal(aug.reverse(window).data[0], window.data[-1])
    pal = Window(np.array([[1.0], [2.0], [1.0]]))
    np.testing.assert_array_equal(aug.reverse(pal).data, pal.data)


def test_resample_transform_keeps_shape_and_label(window):
    out = aug.resample(window, ResampleParams(M=2, N=1), make_rng(4))
    assert out.data.shape == window.data.shape
    assert out.label == 2
    lo, hi = window.data.min(axis=0), window.data.max(axis=0)
    assert np.all((out.data >= lo - 1e-12) & (out.data <= hi + 1e-12))


def test_resample_shares_draw_across_channels():
    t = np.arange(40.0)
    w = Window(np.stack([t, 2.0 * t, -t], axis=1))
    out = aug.resample(w, ResampleParams(draw_policy="random"), make_rng(8)).data
    np.testing.assert_allclose(out[:, 1], 2.0 * out[:, 0])
    np.testing.assert_allclose(out[:, 2], -out[:, 0])


# ── ResampleParams ───────────────────────────────────────────────────────────

def test_resample_params_validation():
    with pytest.raises(InvalidParamsError):
        ResampleParams(M=1, N=1)
    with pytest.raises(InvalidParamsError):
        ResampleParams(M=0)
    with pytest.raises(InvalidParamsError):
        ResampleParams(interpolation="sinc")
    with pytest.raises(InvalidParamsError):
        ResampleParams.from_dict({"M": 2, "speed": 3})
    assert ResampleParams.from_dict({}).draw_policy == "random"
    assert ResampleParams.from_dict({"M": 3, "N": 2}).draw_policy == "fixed"


def test_random_draw_policy_covers_grid():
    p = ResampleParams(draw_policy="random")
    rng = make_rng(0)
    seen = {p.draw(rng) for _ in range(500)}
    assert seen == set(aug.resample_grid(3))
    assert aug.resample_grid(2) == [(1, 0), (2, 0), (2, 1)]


# ── specs ────────────────────────────────────────────────────────────────────

def test_spec_validation():
    with pytest.raises(InvalidParamsError):
        AugmentSpec("wobble")
    with pytest.raises(InvalidParamsError):
        AugmentSpec.compose(AugmentSpec("invert"))
    with pytest.raises(InvalidParamsError):
        AugmentSpec.of("noise", sigma=1.0)
    with pytest.raises(InvalidParamsError):
        AugmentSpec.of("scale", low=0.9, high=0.7)
    with pytest.raises(InvalidParamsError):
        AugmentSpec("invert", {}, (AugmentSpec("reverse"),))
    with pytest.raises(InvalidParamsError):
        AugmentSpec.of("resample", M=1, N=1)


def test_spec_depth_limit():
    inv = AugmentSpec("invert")
    spec = AugmentSpec.compose(inv, inv)
    for _ in range(2):
        spec = AugmentSpec.compose(spec, inv)
    assert spec.depth == 4
    with pytest.raises(InvalidParamsError):
        AugmentSpec.compose(spec, inv)


def test_spec_dict_form():
    d = {"kind": "compose", "children": [
        {"kind": "resample", "params": {"M": 1, "N": 0}},
        {"kind": "rotate"},
    ]}
    spec = AugmentSpec.from_dict(d)
    assert spec.to_dict() == d
    assert spec.describe() == "resample(M=1,N=0)+rotate"
    with pytest.raises(InvalidParamsError):
        AugmentSpec.from_dict({"params": {}})
    with pytest.raises(InvalidParamsError):
        AugmentSpec.from_dict({"kind": "invert", "weight": 1})


def test_apply_compose_properties(window):
    inv, rev = AugmentSpec("invert"), AugmentSpec("reverse")
    rng = make_rng(0)
    np.testing.assert_array_equal(aug.apply(AugmentSpec.compose(inv, inv), window, rng).data, window.data)
    a = aug.apply(AugmentSpec.compose(rev, inv), window, rng).data
    b = aug.apply(AugmentSpec.compose(inv, rev), window, rng).data
    np.testing.assert_array_equal(a, b)
    assert aug.apply(aug.IDENTITY, window, rng) is window


def test_compose_resample_rotate_norms(window):
    res = AugmentSpec.of("resample", M=2, N=0)
    both = aug.apply(AugmentSpec.compose(res, AugmentSpec("rotate")), window, make_rng(6))
    alone = aug.apply(res, window, make_rng(6))
    np.testing.assert_allclose(_norms(both), _norms(alone), atol=1e-9)


# ── batch fan-out ────────────────────────────────────────────────────────────

def test_augment_array_is_deterministic_and_worker_independent(rng):
    x = rng.normal(size=(12, 16, 6))
    spec = AugmentSpec.compose(AugmentSpec("resample"), AugmentSpec("noise"))
    a = aug.augment_array(x, spec, 5, 1)
    b = aug.augment_array(x, spec, 5, 1, workers=3)
    np.testing.assert_array_equal(a, b)
    c = aug.augment_array(x, spec, 5, 2)
    assert not np.array_equal(a, c)
    assert a.shape == x.shape


def test_augment_array_rows_follow_indices(rng):
    x = rng.normal(size=(6, 16, 3))
    spec = AugmentSpec("noise")
    full = aug.augment_array(x, spec, 1, 0)
    part = aug.augment_array(x[[4, 1]], spec, 1, 0, indices=[4, 1])
    np.testing.assert_array_equal(part, full[[4, 1]])
    with pytest.raises(ShapeError):
        aug.augment_array(x, spec, 1, 0, indices=[0])


def test_augment_batch_matches_apply(window):
    out = aug.augment_batch([window, window], AugmentSpec("scale"), 2, 7)
    np.testing.assert_array_equal(out[1].data, aug.apply(AugmentSpec("scale"), window, make_rng(2, 7, 1)).data)
