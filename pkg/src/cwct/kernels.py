"""Dense float32 primitives shared by every network component.

Matrices are plain ``np.ndarray`` of dtype float32; masks are boolean arrays
where ``True`` means the key may be attended. The row-wise kernels
(softmax, layer norm, mean pool) have a numba implementation and a numpy
implementation with identical contracts; ``_accel.USE_NUMBA`` picks one.
Products go through BLAS via ``@``.
"""
import math

import numpy as np

from . import _accel
from ._accel import njit
from .errors import ContractError

F32 = np.float32


def as_matrix(x, name="matrix"):
    a = np.asarray(x, dtype=F32)
    if a.ndim != 2:
        raise ContractError(f"{name} must be 2-D, got shape {a.shape}")
    return a


def matmul(a, b):
    """Product of two float32 matrices (stacked leading axes allowed on ``a``)."""
    a = np.asarray(a, dtype=F32)
    b = np.asarray(b, dtype=F32)
    if a.ndim < 1 or b.ndim != 2:
        raise ContractError(f"matmul expects (..., k) @ (k, n), got {a.shape} @ {b.shape}")
    if a.shape[-1] != b.shape[0]:
        raise ContractError(f"matmul inner dimensions differ: {a.shape} @ {b.shape}")
    return a @ b


def linear(x, weight, bias=None):
    """``x @ weight + bias`` over the last axis, flattening leading axes into one GEMM."""
    lead = x.shape[:-1]
    y = matmul(x.reshape(-1, x.shape[-1]), weight)
    if bias is not None:
        y += bias
    return y.reshape(*lead, weight.shape[1])


def linear_t(x, weight_t, bias=None):
    """Like ``linear`` but takes the weight pre-transposed, ``(out, in)``.

    OpenBLAS runs the skinny ``x @ W_t.T`` products here noticeably faster
    than ``x @ W``.
    """
    lead = x.shape[:-1]
    flat = x.reshape(-1, x.shape[-1])
    if flat.shape[1] != weight_t.shape[1]:
        raise ContractError(f"linear inner dimensions differ: {x.shape} vs weight {weight_t.shape[::-1]}")
    y = flat @ weight_t.T
    if bias is not None:
        y += bias
    return y.reshape(*lead, weight_t.shape[0])


def relu(x):
    return np.maximum(x, F32(0))


def causal_mask(n):
    """Lower-triangular mask: query ``i`` sees keys ``0..i``."""
    return np.tril(np.ones((n, n), dtype=np.bool_))


def block_causal_mask(n_blocks, size):
    """Block-diagonal causal mask over ``n_blocks`` independent windows."""
    m = np.zeros((n_blocks * size, n_blocks * size), dtype=np.bool_)
    tri = causal_mask(size)
    for b in range(n_blocks):
        m[b * size:(b + 1) * size, b * size:(b + 1) * size] = tri
    return m


# -- softmax ---------------------------------------------------------------

@njit(cache=True)
def _softmax_rows_nb(x, mask, has_mask, inv_scale):
    # x: (B, n, m) float32, mask: (n, m) bool
    out = np.zeros_like(x)
    B, n, m = x.shape
    for b in range(B):
        for i in range(n):
            mx = -np.inf
            for j in range(m):
                if (not has_mask) or mask[i, j]:
                    v = x[b, i, j] * inv_scale
                    if v > mx:
                        mx = v
            s = 0.0
            for j in range(m):
                if (not has_mask) or mask[i, j]:
                    e = np.exp(x[b, i, j] * inv_scale - mx)
                    out[b, i, j] = e
                    s += e
            inv = 1.0 / s
            for j in range(m):
                out[b, i, j] = out[b, i, j] * inv
    return out


def _softmax_rows_np(x, mask, has_mask, inv_scale):
    z = x * inv_scale
    if has_mask:
        z = np.where(mask, z, F32(-np.inf))
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    s = e.sum(axis=-1, keepdims=True, dtype=np.float64)
    return (e / s).astype(F32)


def masked_row_softmax(logits, mask=None, scale=1.0, use_numba=None):
    """Row softmax of ``logits / scale``.

    Masked-out keys are left out of the normalizer and get exactly ``0.0``.
    ``logits`` may carry leading batch axes; ``mask`` covers the last two.
    """
    if not scale > 0:
        raise ContractError(f"scale must be positive, got {scale}")
    x = np.asarray(logits, dtype=F32)
    if x.ndim < 2:
        raise ContractError(f"logits must be at least 2-D, got shape {x.shape}")
    n, m = x.shape[-2:]
    if mask is None:
        has_mask = False
        mask_arr = np.ones((1, 1), dtype=np.bool_)
    else:
        mask_arr = np.asarray(mask, dtype=np.bool_)
        if mask_arr.shape != (n, m):
            raise ContractError(f"mask shape {mask_arr.shape} does not match logits {(n, m)}")
        if not mask_arr.any(axis=1).all():
            bad = int(np.flatnonzero(~mask_arr.any(axis=1))[0])
            raise ContractError(f"mask row {bad} allows no key")
        has_mask = True
    if use_numba is None:
        use_numba = _accel.USE_NUMBA
    flat = np.ascontiguousarray(x.reshape(-1, n, m))
    inv_scale = F32(1.0 / scale)
    if use_numba:
        out = _softmax_rows_nb(flat, mask_arr, has_mask, inv_scale)
    else:
        out = _softmax_rows_np(flat, mask_arr, has_mask, inv_scale)
    return out.reshape(x.shape)


# -- layer norm ------------------------------------------------------------

@njit(cache=True)
def _layer_norm_nb(x, gain, bias, eps):
    rows, cols = x.shape
    out = np.empty_like(x)
    for i in range(rows):
        mu = 0.0
        for j in range(cols):
            mu += x[i, j]
        mu /= cols
        var = 0.0
        for j in range(cols):
            d = x[i, j] - mu
            var += d * d
        var /= cols
        inv = 1.0 / math.sqrt(var + eps)
        for j in range(cols):
            out[i, j] = (x[i, j] - mu) * inv * gain[j] + bias[j]
    return out


def _layer_norm_np(x, gain, bias, eps):
    x64 = x.astype(np.float64)
    mu = x64.mean(axis=1, keepdims=True)
    d = x64 - mu
    var = (d * d).mean(axis=1, keepdims=True)
    return (d / np.sqrt(var + eps) * gain + bias).astype(F32)


def layer_normalize(x, gain, bias, epsilon=1e-5, use_numba=None):
    """Per-row standardization followed by ``gain * . + bias``."""
    x = np.asarray(x, dtype=F32)
    c = x.shape[-1]
    gain = np.asarray(gain, dtype=F32).reshape(-1)
    bias = np.asarray(bias, dtype=F32).reshape(-1)
    if gain.shape[0] != c or bias.shape[0] != c:
        raise ContractError(f"gain/bias length {gain.shape[0]}/{bias.shape[0]} != width {c}")
    if use_numba is None:
        use_numba = _accel.USE_NUMBA
    flat = np.ascontiguousarray(x.reshape(-1, c))
    fn = _layer_norm_nb if use_numba else _layer_norm_np
    return fn(flat, gain, bias, float(epsilon)).reshape(x.shape)


# -- pooling ---------------------------------------------------------------

@njit(cache=True)
def _mean_rows_nb(x):
    # x: (B, n, c); summation runs over rows in index order
    B, n, c = x.shape
    out = np.empty((B, c), dtype=np.float32)
    for b in range(B):
        for j in range(c):
            s = 0.0
            for i in range(n):
                s += x[b, i, j]
            out[b, j] = s / n
    return out


def _mean_rows_np(x):
    acc = np.zeros((x.shape[0], x.shape[2]), dtype=np.float64)
    for i in range(x.shape[1]):
        acc += x[:, i, :]
    return (acc / x.shape[1]).astype(F32)


def mean_pool_rows(x, use_numba=None):
    """Column-wise mean over the row axis; 2-D in gives a vector, 3-D a batch of vectors."""
    x = np.asarray(x, dtype=F32)
    if x.ndim not in (2, 3):
        raise ContractError(f"mean_pool_rows expects 2-D or 3-D input, got {x.shape}")
    if x.shape[-2] < 1:
        raise ContractError("mean_pool_rows needs at least one row")
    if use_numba is None:
        use_numba = _accel.USE_NUMBA
    batched = np.ascontiguousarray(x if x.ndim == 3 else x[None])
    out = _mean_rows_nb(batched) if use_numba else _mean_rows_np(batched)
    return out if x.ndim == 3 else out[0]


def sinusoidal_positions(length, dim):
    if dim % 2:
        raise ContractError(f"sinusoidal positions need an even width, got {dim}")
    pos = np.arange(length, dtype=np.float64)[:, None]
    freq = np.power(10000.0, np.arange(0, dim, 2, dtype=np.float64) / dim)
    table = np.empty((length, dim), dtype=np.float64)
    table[:, 0::2] = np.sin(pos / freq)
    table[:, 1::2] = np.cos(pos / freq)
    return table.astype(F32)
