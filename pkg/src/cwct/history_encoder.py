"""Circular window history encoder: per-window attention + token slimming, then bank mixing.

Every function here is position-free, so an encoded window does not depend on
the order of its rows and the bank attention commutes with row permutations.
That is what lets the streaming engine drop frames into arbitrary ring slots.
"""
import numpy as np

from .blocks import token_slimming, transformer_block
from .errors import ContractError
from .kernels import F32, mean_pool_rows


def project_history(x, store):
    """``W_L x`` for one feature vector or a stack of them (rows)."""
    w = store["cwhe.proj_hist"]
    x = np.asarray(x, dtype=F32)
    if x.shape[-1] != w.shape[1]:
        raise ContractError(f"feature width {x.shape[-1]} != input_dim {w.shape[1]}")
    return x @ w.T


def window_msa(tokens, store, prefix, heads, mask=None):
    """One residual attention + feed-forward block over each window in ``tokens``."""
    if tokens.shape[-1] % heads:
        raise ContractError(f"width {tokens.shape[-1]} not divisible by {heads} heads")
    return transformer_block(tokens, store, prefix, heads, mask)


def mtsm_reduce(tokens, store, prefix, heads, reduction):
    n, c = tokens.shape[-2:]
    if n % reduction:
        raise ContractError(f"{n} tokens not divisible by reduction {reduction}")
    if (2 * c) % heads:
        raise ContractError(f"output width {2 * c} not divisible by {heads} heads")
    n_out = store[f"{prefix}.wr"].shape[0]
    if n_out != n // reduction:
        raise ContractError(f"{prefix}.wr produces {n_out} tokens, expected {n // reduction}")
    return token_slimming(tokens, store, prefix, heads)


def encode_windows(windows, store, cfg, trace=None):
    """Summaries for a stack of windows, shape ``(N, w, d_L) -> (N, d_L * 2**M)``.

    ``trace`` (a list) receives the per-window ``(tokens, channels)`` after each step.
    """
    x = np.asarray(windows, dtype=F32)
    if x.ndim == 2:
        x = x[None]
    if x.shape[1:] != (cfg.window_size, cfg.history_dim):
        raise ContractError(f"windows must be (N, {cfg.window_size}, {cfg.history_dim}), got {x.shape}")
    if trace is not None:
        trace.append(x.shape[1:])
    for s, r in enumerate(cfg.stage_reduction):
        x = window_msa(x, store, f"cwhe.stage{s}", cfg.msa_heads)
        x = mtsm_reduce(x, store, f"cwhe.stage{s}.mtsm", cfg.mtsm_heads, r)
        if trace is not None:
            trace.append(x.shape[1:])
    out = mean_pool_rows(x)
    if trace is not None:
        trace.append(out.shape[1:])
    return out


def encode_window(window, store, cfg, trace=None):
    return encode_windows(np.asarray(window, dtype=F32)[None], store, cfg, trace)[0]


def global_bank_attention(summaries, store, cfg):
    """Full, unmasked attention blocks over the window summaries (``(..., N_w, C)``)."""
    x = np.asarray(summaries, dtype=F32)
    if x.ndim < 2 or x.shape[-1] != cfg.bank_dim:
        raise ContractError(f"bank must be (N_w, {cfg.bank_dim}), got {x.shape}")
    for layer in range(cfg.global_sa_layers):
        x = transformer_block(x, store, f"cwhe.global{layer}", cfg.msa_heads)
    return x
