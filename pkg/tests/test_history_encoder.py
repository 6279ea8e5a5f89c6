import numpy as np
import pytest

from cwct.history_encoder import (encode_window, encode_windows, global_bank_attention, mtsm_reduce,
                                  project_history, window_msa)

import reference as ref


def test_projection(small_store, small_cfg, rng):
    assert np.all(project_history(np.zeros(small_cfg.input_dim), small_store) == 0)
    x = rng.standard_normal((3, small_cfg.input_dim)).astype(np.float32)
    expect = x.astype(np.float64) @ np.asarray(small_store["cwhe.proj_hist"], np.float64).T
    np.testing.assert_allclose(project_history(x, small_store), expect, atol=1e-5)


def test_window_msa_matches_transcription(small_store, small_cfg, rng):
    x = rng.standard_normal((3, small_cfg.history_dim)).astype(np.float32)
    got = window_msa(x, small_store, "cwhe.stage0", small_cfg.msa_heads)
    np.testing.assert_allclose(got, ref.block(x, small_store, "cwhe.stage0", small_cfg.msa_heads), atol=1e-5)


def test_window_msa_single_token_and_symmetry(small_store, small_cfg, rng):
    one = rng.standard_normal((1, small_cfg.history_dim)).astype(np.float32)
    np.testing.assert_allclose(window_msa(one, small_store, "cwhe.stage0", 4),
                               ref.block(one, small_store, "cwhe.stage0", 4), atol=1e-5)
    same = np.repeat(one, 5, axis=0)
    out = window_msa(same, small_store, "cwhe.stage0", 4)
    assert np.all(out == out[0])


def test_mtsm_matches_transcription(small_store, small_cfg, rng):
    x = rng.standard_normal((16, 16)).astype(np.float32)
    got = mtsm_reduce(x, small_store, "cwhe.stage0.mtsm", small_cfg.mtsm_heads, 4)
    assert got.shape == (4, 32)
    np.testing.assert_allclose(got, ref.slimming(x, small_store, "cwhe.stage0.mtsm", 8), atol=1e-5)


def test_mtsm_identical_tokens(small_store, rng):
    t = rng.standard_normal(16).astype(np.float32)
    got = mtsm_reduce(np.tile(t, (16, 1)), small_store, "cwhe.stage0.mtsm", 8, 4)
    heads = [t.astype(np.float64) @ ref.w(small_store, f"cwhe.stage0.mtsm.head{i}.wh") for i in range(8)]
    expect = np.concatenate(heads) @ ref.w(small_store, "cwhe.stage0.mtsm.out.weight")
    np.testing.assert_allclose(got, np.tile(expect, (4, 1)), atol=1e-5)


def test_mtsm_permutation(small_store, rng):
    x = rng.standard_normal((16, 16)).astype(np.float32)
    perm = rng.permutation(16)
    a = mtsm_reduce(x, small_store, "cwhe.stage0.mtsm", 8, 4)
    b = mtsm_reduce(x[perm], small_store, "cwhe.stage0.mtsm", 8, 4)
    np.testing.assert_allclose(a, b, atol=1e-6)


def test_default_stage0_shape(default_store, default_cfg, rng):
    x = rng.standard_normal((32, 256)).astype(np.float32)
    assert mtsm_reduce(x, default_store, "cwhe.stage0.mtsm", 8, 4).shape == (8, 512)


def test_trace(default_store, default_cfg, rng):
    trace = []
    out = encode_window(rng.standard_normal((32, 256)).astype(np.float32), default_store, default_cfg, trace)
    assert trace == [(32, 256), (8, 512), (2, 1024), (1024,)]
    assert out.shape == (1024,)


def test_encode_window_permutation(small_store, small_cfg, rng):
    x = rng.standard_normal((small_cfg.window_size, small_cfg.history_dim)).astype(np.float32)
    a = encode_window(x, small_store, small_cfg)
    for _ in range(10):
        b = encode_window(x[rng.permutation(len(x))], small_store, small_cfg)
        assert np.max(np.abs(a - b)) < 1e-5


def test_zero_window(small_store, small_cfg):
    z = np.zeros((small_cfg.window_size, small_cfg.history_dim), np.float32)
    out = encode_window(z, small_store, small_cfg)
    assert np.all(np.isfinite(out))


def test_batched_encode_matches_single(small_store, small_cfg, rng):
    xs = rng.standard_normal((3, small_cfg.window_size, small_cfg.history_dim)).astype(np.float32)
    batch = encode_windows(xs, small_store, small_cfg)
    for i in range(3):
        np.testing.assert_allclose(batch[i], encode_window(xs[i], small_store, small_cfg), atol=1e-6)


def test_global_attention_equivariance(small_store, small_cfg, rng):
    bank = rng.standard_normal((small_cfg.num_windows, small_cfg.bank_dim)).astype(np.float32)
    perm = rng.permutation(small_cfg.num_windows)
    a = global_bank_attention(bank, small_store, small_cfg)
    b = global_bank_attention(bank[perm], small_store, small_cfg)
    # float32 summation order over permuted keys: 1e-6 scaled by magnitude
    np.testing.assert_allclose(a[perm], b, rtol=1e-6, atol=1e-6)
    assert a.shape == bank.shape


def test_global_attention_single_window(small_store, small_cfg, rng):
    row = rng.standard_normal((1, small_cfg.bank_dim)).astype(np.float32)
    expect = row.astype(np.float64)
    for layer in range(small_cfg.global_sa_layers):
        expect = ref.block(expect, small_store, f"cwhe.global{layer}", small_cfg.msa_heads)
    np.testing.assert_allclose(global_bank_attention(row, small_store, small_cfg), expect, atol=1e-5)


def test_default_bank_shape(default_store, default_cfg, rng):
    bank = rng.standard_normal((16, 1024)).astype(np.float32)
    assert global_bank_attention(bank, default_store, default_cfg).shape == (16, 1024)
