import numpy as np
import pytest

from cwct.decoder import decode, mtsm_expand, swin_block
from cwct.trend_encoder import classify
from cwct.weights import WeightStore

import reference as ref

P = "swhd.stage0.layer0"


def test_full_window_is_plain_attention(small_store, small_cfg, rng):
    x = rng.standard_normal((8, small_cfg.bank_dim)).astype(np.float32)
    np.testing.assert_allclose(swin_block(x, small_store, P, 4, 8, 0), ref.block(x, small_store, P, 4), atol=1e-5)


def test_group_independence(small_store, small_cfg, rng):
    x = rng.standard_normal((16, small_cfg.bank_dim)).astype(np.float32)
    y = x.copy()
    y[8:12] += 1.0
    a, b = swin_block(x, small_store, P, 4, 4, 0), swin_block(y, small_store, P, 4, 4, 0)
    keep = np.r_[0:8, 12:16]
    assert np.array_equal(a[keep], b[keep])


def test_shifted_rotation_oracle(small_store, small_cfg, rng):
    n, win = 16, 4
    x = rng.standard_normal((n, small_cfg.bank_dim)).astype(np.float32)
    shift = win // 2
    rolled = np.concatenate([x[shift:], x[:shift]])
    groups = [ref.block(rolled[i:i + win], small_store, P, 4) for i in range(0, n, win)]
    out = np.concatenate(groups)
    expect = np.concatenate([out[-shift:], out[:-shift]])
    np.testing.assert_allclose(swin_block(x, small_store, P, 4, win, shift), expect, atol=1e-5)


def test_expand_identical_tokens(small_store, small_cfg, rng):
    t = rng.standard_normal(small_cfg.bank_dim).astype(np.float32)
    out = mtsm_expand(np.tile(t, (4, 1)), small_store, "swhd.stage0.mtsm", small_cfg.mtsm_heads, 2)
    assert out.shape == (8, small_cfg.bank_dim)
    np.testing.assert_allclose(out, np.tile(out[0], (8, 1)), atol=1e-5)


def test_expand_matches_transcription(small_store, small_cfg, rng):
    x = rng.standard_normal((4, small_cfg.bank_dim)).astype(np.float32)
    out = mtsm_expand(x, small_store, "swhd.stage0.mtsm", small_cfg.mtsm_heads, 2)
    np.testing.assert_allclose(out, ref.slimming(x, small_store, "swhd.stage0.mtsm", 8), atol=1e-5)


def test_small_decode_shape(small_store, small_cfg, rng):
    trace = []
    out = decode(rng.standard_normal((4, small_cfg.bank_dim)).astype(np.float32), small_store, small_cfg, trace)
    assert trace == [4, 8, 16, 64]
    assert out.shape == (small_cfg.history_len, small_cfg.bank_dim)


def test_default_trace(default_store, default_cfg, rng):
    trace = []
    out = decode(rng.standard_normal((16, 1024)).astype(np.float32), default_store, default_cfg, trace)
    assert trace == [16, 32, 128, 512]
    assert out.shape == (512, 1024)


def test_zero_bank_zero_biases(small_store, small_cfg):
    out = decode(np.zeros((4, small_cfg.bank_dim), np.float32), small_store, small_cfg)
    assert np.all(np.isfinite(out))
    zero = WeightStore([("classifier.weight", np.zeros((small_cfg.bank_dim, 5), np.float32)),
                        ("classifier.bias", np.zeros(5, np.float32))])
    np.testing.assert_allclose(classify(out, zero), 0.2, atol=1e-7)
