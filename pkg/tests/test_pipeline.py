import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ssfusion import tensor as T
from ssfusion.metrics import mean_ssim
from ssfusion.pipeline import (FusionConfig, ImagePair, NumericalFailure, fuse, recolor,
                               rgb_to_gray, train_fusion)
from ssfusion.synthetic import make_pair, scene


class TestRgbToGray:
    def test_white_and_green(self):
        white = np.ones((1, 3, 2, 2), dtype=np.float32)
        assert np.allclose(rgb_to_gray(white), 1.0, atol=1e-6)
        green = np.zeros((1, 3, 2, 2), dtype=np.float32)
        green[:, 1] = 1
        assert np.allclose(rgb_to_gray(green), 0.587, atol=1e-7)

    def test_matches_float64_recomputation(self):
        rgb = np.random.default_rng(0).random((1, 3, 31, 17)).astype(np.float32)
        r, g, b = (rgb[0, k].astype(np.float64) for k in range(3))
        ref = 0.299 * r + 0.587 * g + 0.114 * b
        got = rgb_to_gray(rgb)
        assert got.shape == (1, 1, 31, 17)
        assert np.abs(got[0, 0] - ref).max() < 1e-6

    def test_wrong_channel_count(self):
        with pytest.raises(T.ShapeError):
            rgb_to_gray(np.zeros((1, 1, 4, 4)))


class TestRecolor:
    def test_identity_ratio(self):
        rgb = np.random.default_rng(1).random((1, 3, 16, 16)).astype(np.float32)
        gray = rgb_to_gray(rgb)
        out = recolor(gray, gray, rgb)
        mask = np.broadcast_to(gray >= 1e-3, rgb.shape)
        assert np.array_equal(out[mask], rgb[mask])

    def test_black_pixel_guard(self):
        rgb = np.zeros((1, 3, 2, 2), dtype=np.float32)
        gray = rgb_to_gray(rgb)
        out = recolor(np.full_like(gray, 0.5), gray, rgb)
        assert np.all(np.isfinite(out)) and np.all(out == 0)

    @settings(max_examples=50, deadline=None)
    @given(st.integers(0, 2 ** 31 - 1))
    def test_hue_preserved(self, seed):
        rng = np.random.default_rng(seed)
        rgb = rng.uniform(0.05, 1, (1, 3, 8, 8))
        gray = rgb_to_gray(rgb)
        fused = rng.uniform(0, 1, gray.shape)
        out = recolor(fused, gray, rgb)
        # independent recomputation of the unclamped product
        ratio = fused / gray
        unclamped = np.all(rgb * ratio <= 1, axis=1)[0]
        for a, b in [(0, 1), (1, 2), (0, 2)]:
            want = rgb[0, a] / rgb[0, b]
            got = out[0, a] / out[0, b]
            np.testing.assert_allclose(got[unclamped], want[unclamped], rtol=1e-5)


def test_pair_validation():
    with pytest.raises(T.ShapeError):
        ImagePair(nir=np.zeros((1, 1, 8, 8)), rgb=np.zeros((1, 3, 8, 9)))
    with pytest.raises(T.ShapeError):
        ImagePair(nir=np.zeros((1, 3, 8, 8)), rgb=np.zeros((1, 3, 8, 8)))
    p = ImagePair(nir=np.full((1, 1, 4, 4), 2.0), rgb=np.full((1, 3, 4, 4), -1.0))
    assert p.nir.max() == 1 and p.rgb.min() == 0


@pytest.mark.parametrize("kwargs", [dict(max_epoch=0), dict(lr=0), dict(recolor_epsilon=0)])
def test_config_validation(kwargs):
    with pytest.raises(ValueError):
        FusionConfig(**kwargs)


def test_training_is_bitwise_deterministic():
    pair = make_pair(48, 40, seed=2)
    cfg = FusionConfig(max_epoch=15, seed=7)
    net_a, trace_a = train_fusion(pair, cfg)
    net_b, trace_b = train_fusion(pair, cfg)
    assert trace_a == trace_b
    for (_, pa), (_, pb) in zip(net_a.layers(), net_b.layers()):
        assert np.array_equal(pa.value, pb.value)


@pytest.mark.parametrize("seed", range(3))
def test_descent_on_synthetic_pairs(seed):
    pair = make_pair(64, 64, seed=seed)
    _, trace = train_fusion(pair, FusionConfig(max_epoch=60))
    assert len(trace) == 60 and [t[0] for t in trace] == list(range(1, 61))
    assert trace[-1][1] < trace[0][1]


def test_fuse_contract():
    pair = make_pair(40, 56, seed=3)
    rep = fuse(pair, FusionConfig(max_epoch=10, stn_enabled=True))
    assert rep.gray_fusion.shape == (1, 1, 40, 56) and rep.rgb_fusion.shape == (1, 3, 40, 56)
    assert np.all(rep.gray_fusion > 0) and np.all(rep.gray_fusion < 1)
    assert rep.rgb_fusion.min() >= 0 and rep.rgb_fusion.max() <= 1
    assert len(rep.loss_trace) == 10 and rep.num_parameters == 1393 + 790
    assert rep.config["stn_enabled"] and rep.seconds > 0
    js = rep.to_json()
    assert js["loss_trace"][0]["epoch"] == 1


@pytest.mark.slow
def test_degenerate_pair_reproduces_rgb():
    gray = scene(96, 96, seed=4)
    rng = np.random.default_rng(4)
    tint = rng.uniform(0.6, 1.0, size=(1, 3, 1, 1))
    rgb = np.clip(gray * tint / (tint * np.array([0.299, 0.587, 0.114])[None, :, None, None]).sum(),
                  0, 1).astype(np.float32)
    pair = ImagePair(nir=rgb_to_gray(rgb), rgb=rgb)
    rep = fuse(pair, FusionConfig())
    for c in range(3):
        assert mean_ssim(rep.rgb_fusion[0, c], rgb[0, c]) > 0.95


def test_non_finite_loss_aborts(monkeypatch):
    import ssfusion.pipeline as pl

    real = pl.loss_terms
    calls = {"n": 0}

    def poisoned(*args, **kwargs):
        calls["n"] += 1
        total, s, e = real(*args, **kwargs)
        if calls["n"] == 3:
            total = T.scale(total, float("nan"))
        return total, s, e

    monkeypatch.setattr(pl, "loss_terms", poisoned)
    with pytest.raises(NumericalFailure) as info:
        train_fusion(make_pair(32, 32), FusionConfig(max_epoch=5))
    assert info.value.epoch == 3
    assert "conv1.kernel" in info.value.checkpoint
    assert all(np.all(np.isfinite(v)) for v in info.value.checkpoint.values())


@pytest.mark.parametrize("h,w", [(32, 32), (33, 61), (100, 37)])
def test_resolution_independence(h, w):
    rep = fuse(make_pair(h, w, seed=5), FusionConfig(max_epoch=3, unet_enabled=True))
    assert rep.rgb_fusion.shape == (1, 3, h, w)
    assert np.all(np.isfinite(rep.rgb_fusion))
