"""Current-window encoder: causal attention over the trend, cross-attention into the bank, classifier."""
import numpy as np

from .blocks import attention_sublayer, dense, transformer_block
from .errors import ContractError
from .history_encoder import encode_windows, global_bank_attention
from .kernels import F32, causal_mask, masked_row_softmax, sinusoidal_positions


def project_trend(x, store):
    w = store["cwe.proj_trend"]
    x = np.asarray(x, dtype=F32)
    if x.shape[-1] != w.shape[1]:
        raise ContractError(f"feature width {x.shape[-1]} != input_dim {w.shape[1]}")
    return x @ w.T


def add_positions(tokens):
    n, c = tokens.shape[-2:]
    return tokens + sinusoidal_positions(n, c)


def causal_self_attention(trend, store, cfg):
    mask = causal_mask(trend.shape[-2])
    for layer in range(cfg.trend_sa_layers):
        trend = transformer_block(trend, store, f"cwe.sa{layer}", cfg.msa_heads, mask)
    return trend


def cross_attend_bank(trend, bank, store, cfg):
    if bank.shape[-1] != trend.shape[-1]:
        raise ContractError(f"bank width {bank.shape[-1]} != trend width {trend.shape[-1]}")
    mask = causal_mask(trend.shape[-2])
    for k in range(cfg.trend_ca_modules):
        trend = attention_sublayer(trend, store, f"cwe.ca{k}.self", cfg.msa_heads, mask)
        trend = attention_sublayer(trend, store, f"cwe.ca{k}.cross", cfg.msa_heads, kv=bank)
    return trend


def classify(features, store):
    """Shared linear classifier + row softmax; used by both the trend and the decoder branch."""
    w = store["classifier.weight"]
    if features.shape[-1] != w.shape[0]:
        raise ContractError(f"classifier expects width {w.shape[0]}, got {features.shape[-1]}")
    logits = dense(features, store, "classifier")
    return masked_row_softmax(logits)


def trend_coarse(projected, bank, store, cfg):
    """Coarse per-frame probabilities for an ``(m_S, d_S)`` projected trend window.

    Leading batch axes on ``projected`` must be matched by ``bank``.
    """
    x = add_positions(np.asarray(projected, dtype=F32))
    x = causal_self_attention(x, store, cfg)
    x = cross_attend_bank(x, bank, store, cfg)
    return classify(x, store)


def build_shifted_banks(history, shift, store, cfg):
    """Bank for an ordered ``(m_L, d_L)`` history partitioned with window boundaries at ``shift + n*w``.

    Frames past the end wrap to the front. A ring engine whose cursor is ``p``
    sees exactly the partition with ``shift = -p mod w`` (rows rotated by whole
    windows).
    """
    w = cfg.window_size
    if not 0 <= shift < w:
        raise ContractError(f"shift must lie in [0, {w}), got {shift}")
    history = np.asarray(history, dtype=F32)
    if history.shape != (cfg.history_len, cfg.history_dim):
        raise ContractError(f"history must be ({cfg.history_len}, {cfg.history_dim}), got {history.shape}")
    windows = np.roll(history, -shift, axis=0).reshape(cfg.num_windows, w, cfg.history_dim)
    return global_bank_attention(encode_windows(windows, store, cfg), store, cfg)
