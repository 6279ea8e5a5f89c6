"""Shifted-window history decoder (training-time branch, forward only).

Upsamples the mixed bank back to one token per history frame so the shared
classifier and cascade can score the whole history.
"""
import numpy as np

from .blocks import token_slimming, transformer_block
from .errors import ContractError
from .kernels import F32


def swin_block(tokens, store, prefix, heads, window, shift):
    """Attention block restricted to groups of ``window`` tokens after a cyclic shift."""
    x = np.asarray(tokens, dtype=F32)
    n, c = x.shape
    if window < 1 or n % window:
        raise ContractError(f"window {window} does not divide {n} tokens")
    if not 0 <= shift < window:
        raise ContractError(f"shift {shift} outside [0, {window})")
    if shift:
        x = np.roll(x, -shift, axis=0)
    y = transformer_block(x.reshape(n // window, window, c), store, prefix, heads).reshape(n, c)
    if shift:
        y = np.roll(y, shift, axis=0)
    return y


def mtsm_expand(tokens, store, prefix, heads, expansion):
    n, c = tokens.shape
    n_out = store[f"{prefix}.wr"].shape[0]
    if n_out != n * expansion:
        raise ContractError(f"{prefix}.wr produces {n_out} tokens, expected {n * expansion}")
    if c % heads:
        raise ContractError(f"width {c} not divisible by {heads} heads")
    return token_slimming(tokens, store, prefix, heads)


def decode(bank, store, cfg, trace=None):
    """``(N_w, C)`` bank -> ``(m_L, C)`` tokens. ``trace`` collects the token count per stage."""
    x = np.asarray(bank, dtype=F32)
    if x.shape != (cfg.num_windows, cfg.bank_dim):
        raise ContractError(f"bank must be ({cfg.num_windows}, {cfg.bank_dim}), got {x.shape}")
    win = cfg.decoder_window_size
    if trace is not None:
        trace.append(x.shape[0])
    for s, n_layers in enumerate(cfg.decoder_swin_layers):
        for layer in range(n_layers):
            shift = (win // 2) if layer % 2 else 0
            x = swin_block(x, store, f"swhd.stage{s}.layer{layer}", cfg.msa_heads, win, shift)
        if s < len(cfg.decoder_expansion):
            x = mtsm_expand(x, store, f"swhd.stage{s}.mtsm", cfg.mtsm_heads, cfg.decoder_expansion[s])
            if trace is not None:
                trace.append(x.shape[0])
            x = swin_block(x, store, f"swhd.stage{s}.align", cfg.msa_heads, win, 0)
    return x
