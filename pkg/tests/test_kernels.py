import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from cwct import _accel
from cwct.errors import ContractError
from cwct.kernels import (block_causal_mask, causal_mask, layer_normalize, linear, linear_t, masked_row_softmax,
                          matmul, mean_pool_rows, relu, sinusoidal_positions)

PATHS = [False, pytest.param(True, marks=pytest.mark.skipif(not _accel.HAVE_NUMBA, reason="numba missing"))]
finite = st.floats(-30, 30, allow_nan=False, width=32)


def test_matmul_examples():
    a = np.array([[1, 2], [3, 4]], dtype=np.float32)
    assert np.array_equal(matmul(a, np.eye(2, dtype=np.float32)), a)
    assert np.array_equal(matmul(np.zeros((2, 3)), np.ones((3, 4))), np.zeros((2, 4)))
    assert matmul([[1, 2]], [[3], [4]])[0, 0] == 11


def test_matmul_rejects_mismatch():
    with pytest.raises(ContractError):
        matmul(np.ones((2, 3)), np.ones((2, 3)))


def test_linear_forms_agree(rng):
    x = rng.standard_normal((5, 7)).astype(np.float32)
    w = rng.standard_normal((7, 3)).astype(np.float32)
    b = rng.standard_normal(3).astype(np.float32)
    np.testing.assert_allclose(linear(x, w, b), x @ w + b, rtol=1e-5, atol=1e-5)
    np.testing.assert_allclose(linear_t(x, np.ascontiguousarray(w.T), b), x @ w + b, rtol=1e-5, atol=1e-5)


@pytest.mark.parametrize("use_numba", PATHS)
def test_softmax_examples(use_numba):
    out = masked_row_softmax(np.zeros((1, 4)), use_numba=use_numba)
    np.testing.assert_allclose(out, 0.25, atol=1e-7)
    out = masked_row_softmax(np.array([[0.0, 10.0]]), use_numba=use_numba)
    e = math.exp(10)
    np.testing.assert_allclose(out[0], [1 / (1 + e), e / (1 + e)], rtol=1e-6, atol=1e-9)


@pytest.mark.parametrize("use_numba", PATHS)
def test_softmax_shift_invariance(use_numba, rng):
    x = rng.standard_normal((3, 6)).astype(np.float32)
    a = masked_row_softmax(x, use_numba=use_numba)
    b = masked_row_softmax(x - 3.0, use_numba=use_numba)
    np.testing.assert_allclose(a, b, atol=1e-6)


@pytest.mark.parametrize("use_numba", PATHS)
def test_softmax_mask_is_exact_zero(use_numba, rng):
    x = rng.standard_normal((2, 5, 5)).astype(np.float32)
    out = masked_row_softmax(x, causal_mask(5), scale=2.0, use_numba=use_numba)
    assert np.all(out[:, ~causal_mask(5)] == 0.0)
    np.testing.assert_allclose(out.sum(-1), 1.0, atol=1e-6)


def test_softmax_rejects_empty_row():
    mask = np.ones((2, 2), dtype=bool)
    mask[1] = False
    with pytest.raises(ContractError, match="row 1"):
        masked_row_softmax(np.zeros((2, 2)), mask)


@settings(max_examples=40, deadline=None)
@given(arrays(np.float32, st.tuples(st.integers(1, 4), st.integers(1, 9), st.integers(1, 9)), elements=finite))
def test_softmax_paths_agree(x):
    mask = np.tril(np.ones(x.shape[1:], dtype=bool))
    mask[:, 0] = True
    for m in (None, mask):
        a = masked_row_softmax(x, m, scale=1.7, use_numba=False)
        b = masked_row_softmax(x, m, scale=1.7, use_numba=_accel.HAVE_NUMBA)
        np.testing.assert_allclose(a, b, atol=1e-6)


@pytest.mark.parametrize("use_numba", PATHS)
def test_layer_norm_examples(use_numba):
    one, zero = np.ones(2, np.float32), np.zeros(2, np.float32)
    np.testing.assert_array_equal(layer_normalize(np.full((1, 2), 3.0), one, zero, use_numba=use_numba), 0.0)
    out = layer_normalize(np.array([[1.0, -1.0]]), one, zero, use_numba=use_numba)
    np.testing.assert_allclose(out[0], [1, -1], atol=1e-5)
    bias = np.array([0.5, -2.0], np.float32)
    out = layer_normalize(np.array([[4.0, 9.0]]), zero, bias, use_numba=use_numba)
    np.testing.assert_array_equal(out[0], bias)


@settings(max_examples=40, deadline=None)
@given(arrays(np.float32, st.tuples(st.integers(1, 5), st.integers(2, 12)), elements=finite))
def test_layer_norm_paths_agree(x):
    g = np.linspace(0.5, 1.5, x.shape[1]).astype(np.float32)
    b = np.linspace(-1, 1, x.shape[1]).astype(np.float32)
    a = layer_normalize(x, g, b, use_numba=False)
    c = layer_normalize(x, g, b, use_numba=_accel.HAVE_NUMBA)
    np.testing.assert_allclose(a, c, atol=1e-4)


def test_relu_examples():
    np.testing.assert_array_equal(relu(np.array([-1.0, 0.0, 2.0])), [0, 0, 2])
    np.testing.assert_array_equal(relu(np.zeros(3)), np.zeros(3))
    assert relu(np.array([3.5]))[0] == 3.5


def test_positions():
    table = sinusoidal_positions(4, 4)
    np.testing.assert_allclose(table[0], [0, 1, 0, 1])
    assert table[1, 0] == pytest.approx(math.sin(1.0), abs=1e-6)
    big = sinusoidal_positions(100, 64)
    assert np.all(np.abs(big) <= 1.0)
    with pytest.raises(ContractError):
        sinusoidal_positions(3, 5)


@pytest.mark.parametrize("use_numba", PATHS)
def test_mean_pool(use_numba, rng):
    row = np.array([[1.0, 2.0, 3.0]])
    np.testing.assert_array_equal(mean_pool_rows(row, use_numba=use_numba), row[0])
    np.testing.assert_array_equal(mean_pool_rows(np.array([[1.0, 3.0], [3.0, 1.0]]), use_numba=use_numba), [2, 2])
    x = rng.standard_normal((6, 4)).astype(np.float32)
    perm = rng.permutation(6)
    np.testing.assert_allclose(mean_pool_rows(x, use_numba=use_numba),
                               mean_pool_rows(x[perm], use_numba=use_numba), atol=1e-6)


def test_mean_pool_paths_agree(rng):
    x = rng.standard_normal((3, 7, 5)).astype(np.float32)
    np.testing.assert_array_equal(mean_pool_rows(x, use_numba=False), mean_pool_rows(x, use_numba=_accel.HAVE_NUMBA))


def test_masks():
    m = causal_mask(3)
    assert m.tolist() == [[True, False, False], [True, True, False], [True, True, True]]
    b = block_causal_mask(2, 2)
    assert b.shape == (4, 4)
    assert not b[2, 1] and b[3, 2] and not b[1, 2]
