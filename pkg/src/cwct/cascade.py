"""Cascade refinement in probability space, shared by the trend and history branches."""
import numpy as np

from .blocks import dense, transformer_block
from .errors import ContractError
from .kernels import F32, causal_mask, masked_row_softmax

PROB_FLOOR = np.float32(1e-8)


def simplex_renormalize(raw, unchanged=None):
    """Clamp at ``PROB_FLOOR`` and L1-normalize each row.

    Rows flagged in ``unchanged`` (residual exactly zero, already above the
    floor) are returned as-is so a zero residual is an exact identity.
    """
    out = np.maximum(raw, PROB_FLOOR)
    out = (out / out.sum(axis=-1, keepdims=True, dtype=np.float64)).astype(F32)
    if unchanged is not None:
        out = np.where(unchanged[..., None], raw, out)
    return out


def refine(coarse, store, cfg, mask=None):
    """Refined probabilities for ``(..., n, N_a)`` coarse rows under a causal mask."""
    p = np.asarray(coarse, dtype=F32)
    n, a = p.shape[-2:]
    if a != cfg.num_actions:
        raise ContractError(f"expected {cfg.num_actions} classes, got {a}")
    if mask is None:
        mask = causal_mask(n)
    elif np.asarray(mask).shape != (n, n):
        raise ContractError(f"mask shape {np.asarray(mask).shape} != {(n, n)}")
    for k in range(cfg.cascade_stages):
        h = p
        for layer in range(cfg.cascade_sa_layers):
            h = transformer_block(h, store, f"cascade.stage{k}.layer{layer}", cfg.cascade_heads, mask)
        residual = dense(h, store, f"cascade.stage{k}.head")
        raw = p + residual
        if cfg.cascade_renorm == "softmax":
            p = masked_row_softmax(raw)
        else:
            keep = ~(residual != 0).any(axis=-1) & (p >= PROB_FLOOR).all(axis=-1)
            p = simplex_renormalize(raw, keep)
    return p


def refine_history_windows(windows, store, cfg):
    """Refine each ``(w, N_a)`` history window on its own, with the trend path's weights."""
    x = np.asarray(windows, dtype=F32)
    if x.ndim != 3 or x.shape[1] != cfg.window_size:
        raise ContractError(f"expected (N_w, {cfg.window_size}, N_a) windows, got {x.shape}")
    return refine(x, store, cfg, causal_mask(cfg.window_size))
