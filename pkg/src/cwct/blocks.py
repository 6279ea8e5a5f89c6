"""Pre-norm attention / feed-forward sublayers and the multi-head token slimmer.

All functions accept tokens with optional leading batch axes, ``(..., n, c)``,
so a stack of history windows goes through one GEMM per projection.
"""
import math

import numpy as np

from .kernels import F32, layer_normalize, linear_t, masked_row_softmax, relu
from .errors import ContractError

LN_EPS = 1e-5


def transposed(store, name):
    """Contiguous ``(out, in)`` copy of a stored ``(in, out)`` weight, memoized on the store."""
    return store.derived((name, "T"), lambda: np.ascontiguousarray(store[name].T))


def dense(x, store, name):
    """``x @ W + b`` for the ``{name}.weight`` / ``{name}.bias`` pair."""
    return linear_t(x, transposed(store, f"{name}.weight"), store[f"{name}.bias"])


def _heads_concat(store, prefix, heads, kind):
    return np.concatenate([store[f"{prefix}.msa.head{i}.{kind}"] for i in range(heads)], axis=1)


def _qkv(store, prefix, heads):
    def build():
        return np.ascontiguousarray(np.concatenate(
            [_heads_concat(store, prefix, heads, k) for k in ("wq", "wk", "wv")], axis=1).T)
    return store.derived((prefix, "qkv", heads), build)


def _q_kv(store, prefix, heads):
    def build():
        q = np.ascontiguousarray(_heads_concat(store, prefix, heads, "wq").T)
        kv = np.ascontiguousarray(np.concatenate(
            [_heads_concat(store, prefix, heads, k) for k in ("wk", "wv")], axis=1).T)
        return q, kv
    return store.derived((prefix, "q_kv", heads), build)


def _split_heads(x, heads):
    *lead, n, c = x.shape
    return np.swapaxes(x.reshape(*lead, n, heads, c // heads), -2, -3)


def _merge_heads(x):
    *lead, h, n, dk = x.shape
    return np.swapaxes(x, -2, -3).reshape(*lead, n, h * dk)


def multi_head_attention(x, store, prefix, heads, mask=None, kv=None):
    """Scaled dot-product attention over ``heads`` heads followed by the output projection.

    ``x`` supplies queries (and keys/values when ``kv`` is None). Returns the
    projected head concatenation, without residual.
    """
    c = x.shape[-1]
    if c % heads:
        raise ContractError(f"width {c} not divisible by {heads} heads")
    dk = c // heads
    if kv is None:
        qkv = linear_t(x, _qkv(store, prefix, heads))
        q, k, v = qkv[..., :c], qkv[..., c:2 * c], qkv[..., 2 * c:]
    else:
        wq, wkv = _q_kv(store, prefix, heads)
        if kv.shape[-1] != wkv.shape[1]:
            raise ContractError(f"key/value width {kv.shape[-1]} != {wkv.shape[1]}")
        q = linear_t(x, wq)
        kvp = linear_t(kv, wkv)
        k, v = kvp[..., :c], kvp[..., c:]
    q, k, v = _split_heads(q, heads), _split_heads(k, heads), _split_heads(v, heads)
    weights = masked_row_softmax(q @ np.swapaxes(k, -1, -2), mask, scale=math.sqrt(dk))
    out = _merge_heads(weights @ v)
    return dense(out, store, f"{prefix}.msa.out")


def norm(x, store, name):
    return layer_normalize(x, store[f"{name}.gain"], store[f"{name}.bias"], LN_EPS)


def attention_sublayer(x, store, prefix, heads, mask=None, kv=None):
    """``x + MSA(LN(x))``; with ``kv`` the keys/values come from ``LN_kv(kv)``."""
    h = norm(x, store, f"{prefix}.ln1")
    kvn = None if kv is None else norm(kv, store, f"{prefix}.lnkv")
    return x + multi_head_attention(h, store, prefix, heads, mask, kvn)


def ffn_sublayer(x, store, prefix):
    h = norm(x, store, f"{prefix}.ln2")
    h = relu(dense(h, store, f"{prefix}.ffn.fc1"))
    return x + dense(h, store, f"{prefix}.ffn.fc2")


def transformer_block(x, store, prefix, heads, mask=None):
    return ffn_sublayer(attention_sublayer(x, store, prefix, heads, mask), store, prefix)


# -- multi-head token slimming ----------------------------------------------

def _wh(store, prefix, heads):
    return store.derived((prefix, "wh", heads), lambda: np.ascontiguousarray(
        np.concatenate([store[f"{prefix}.head{i}.wh"] for i in range(heads)], axis=1).T))


def slimming_weights(x, store, prefix, heads):
    """Per-head token features ``T`` and the row-stochastic mixing matrices ``A``.

    Returns ``(T, A)`` with shapes ``(..., heads, n, h)`` and
    ``(..., heads, n_out, n)`` where ``n_out`` is the row count of ``wr``.
    """
    T = _split_heads(linear_t(x, _wh(store, prefix, heads)), heads)
    U = relu(T @ store[f"{prefix}.wc"])
    scores = np.matmul(store[f"{prefix}.wr"], np.swapaxes(U, -1, -2))
    return T, masked_row_softmax(scores)


def token_slimming(x, store, prefix, heads):
    """Re-sample ``n`` tokens to ``wr.shape[0]`` tokens as convex mixes per head, then ``f'``."""
    T, A = slimming_weights(x, store, prefix, heads)
    out = _merge_heads(A @ T)
    return dense(out, store, f"{prefix}.out").astype(F32, copy=False)
