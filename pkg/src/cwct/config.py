"""Model hyperparameters, validation and the ``key = value`` config file."""
from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, fields

from .errors import ConfigError


@dataclass(frozen=True)
class ModelConfig:
    # input_dim has no default: it is fixed by whatever feature extractor produced the stream
    input_dim: int
    history_len: int = 512
    trend_len: int = 32
    num_windows: int = 16
    history_dim: int = 256
    trend_dim: int = 1024
    num_stages: int = 2
    stage_reduction: tuple[int, ...] = (4, 4)
    msa_heads: int = 4
    mtsm_heads: int = 8
    global_sa_layers: int = 3
    trend_sa_layers: int = 2
    trend_ca_modules: int = 2
    cascade_sa_layers: int = 2
    cascade_stages: int = 1
    decoder_swin_layers: tuple[int, ...] = (4, 8, 4, 2)
    decoder_expansion: tuple[int, ...] = (2, 4, 4)
    decoder_window_size: int = 8
    num_actions: int = 21
    loss_weights: tuple[float, float, float] = (0.2, 0.7, 0.4)
    ffn_expansion: int = 4
    cascade_renorm: str = "l1"
    seed: int = 0

    def __post_init__(self):
        for name in ("stage_reduction", "decoder_swin_layers", "decoder_expansion", "loss_weights"):
            object.__setattr__(self, name, tuple(getattr(self, name)))

    @property
    def window_size(self) -> int:
        return self.history_len // self.num_windows

    @property
    def bank_dim(self) -> int:
        return self.history_dim * 2 ** self.num_stages

    @property
    def cascade_heads(self) -> int:
        n = self.num_actions
        return 2 if n >= 4 and n % 2 == 0 else 1

    def stage_shapes(self) -> list[tuple[int, int]]:
        """(tokens, channels) entering each encoder stage, plus the final pair."""
        n, c = self.window_size, self.history_dim
        out = [(n, c)]
        for r in self.stage_reduction:
            n, c = n // r, 2 * c
            out.append((n, c))
        return out

    def decoder_tokens(self) -> list[int]:
        n = self.num_windows
        out = [n]
        for k in self.decoder_expansion:
            n *= k
            out.append(n)
        return out

    def replace(self, **changes) -> "ModelConfig":
        return dataclasses.replace(self, **changes)


def default_config(input_dim: int, **overrides) -> ModelConfig:
    return ModelConfig(input_dim=input_dim, **overrides)


def validate(cfg: ModelConfig) -> list[str]:
    """Every violated invariant as a message; an empty list means the config is usable."""
    v = []
    ints = {f.name: getattr(cfg, f.name) for f in fields(cfg) if f.type in ("int",)}
    for name, val in ints.items():
        if name == "seed":
            if val < 0:
                v.append("seed must be unsigned")
        elif val < 1:
            v.append(f"{name} must be >= 1")
    if v:
        return v

    if cfg.history_len % cfg.num_windows:
        v.append(f"m_L mod N_w: {cfg.history_len} mod {cfg.num_windows} != 0")
    w = cfg.window_size
    if len(cfg.stage_reduction) != cfg.num_stages:
        v.append(f"stage_reduction has {len(cfg.stage_reduction)} entries, num_stages is {cfg.num_stages}")
    if any(r < 1 for r in cfg.stage_reduction):
        v.append("stage_reduction entries must be >= 1")
    else:
        prod = math.prod(cfg.stage_reduction)
        if w and prod > w:
            v.append(f"window exhausted before pooling: w={w} < reduction product {prod}")
        elif w and w % prod:
            v.append(f"stage_reduction product {prod} does not divide w={w}")

    if cfg.history_dim % cfg.msa_heads:
        v.append(f"d_L mod N_h: {cfg.history_dim} mod {cfg.msa_heads} != 0")
    for s in range(cfg.num_stages):
        c = cfg.history_dim * 2 ** s
        if c % cfg.msa_heads:
            v.append(f"stage {s} channel {c} not divisible by N_h={cfg.msa_heads}")
        if (2 * c) % cfg.mtsm_heads:
            v.append(f"stage {s} output channel {2 * c} not divisible by N_h'={cfg.mtsm_heads}")
        if c < 4:
            v.append(f"stage {s} channel {c} too small for a c/4 bottleneck")
    if cfg.bank_dim != cfg.trend_dim:
        v.append(f"encoder output width d_L*2^M={cfg.bank_dim} != d_S={cfg.trend_dim}")
    if cfg.trend_dim % cfg.msa_heads:
        v.append(f"d_S={cfg.trend_dim} not divisible by N_h={cfg.msa_heads}")
    if cfg.trend_dim % cfg.mtsm_heads:
        v.append(f"d_S={cfg.trend_dim} not divisible by N_h'={cfg.mtsm_heads}")
    if cfg.trend_dim % 2:
        v.append("d_S must be even for sinusoidal positions")

    if len(cfg.decoder_expansion) != cfg.num_stages + 1:
        v.append(f"decoder_expansion needs M+1={cfg.num_stages + 1} entries, got {len(cfg.decoder_expansion)}")
    if len(cfg.decoder_swin_layers) != len(cfg.decoder_expansion) + 1:
        v.append("decoder_swin_layers needs one more entry than decoder_expansion")
    if any(k < 1 for k in cfg.decoder_expansion):
        v.append("decoder_expansion entries must be >= 1")
    elif math.prod(cfg.decoder_expansion) * cfg.num_windows != cfg.history_len:
        v.append(
            f"decoder expansion product {math.prod(cfg.decoder_expansion)} x N_w {cfg.num_windows} != m_L {cfg.history_len}"
        )
    else:
        for n in cfg.decoder_tokens():
            if n % cfg.decoder_window_size:
                v.append(f"decoder_window_size {cfg.decoder_window_size} does not divide {n} tokens")
                break
    if any(n < 0 for n in cfg.decoder_swin_layers):
        v.append("decoder_swin_layers entries must be >= 0")

    if cfg.num_actions < 2:
        v.append("num_actions must be >= 2")
    if len(cfg.loss_weights) != 3 or any(not (x >= 0) for x in cfg.loss_weights):
        v.append("loss_weights must be three nonnegative reals")
    if cfg.cascade_renorm not in ("l1", "softmax"):
        v.append(f"cascade_renorm must be 'l1' or 'softmax', got {cfg.cascade_renorm!r}")
    return v


def check(cfg: ModelConfig) -> ModelConfig:
    problems = validate(cfg)
    if problems:
        raise ConfigError(problems)
    return cfg


# -- text format -----------------------------------------------------------

_TUPLES = {"stage_reduction": int, "decoder_swin_layers": int, "decoder_expansion": int, "loss_weights": float}


def _field_types():
    return {f.name: f.type for f in fields(ModelConfig)}


def parse_config(text: str) -> ModelConfig:
    """Parse ``key = value`` lines; ``#`` starts a comment, lists are comma separated."""
    types = _field_types()
    values = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, val = (s.strip() for s in line.split("=", 1))
        if key not in types:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in values:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        try:
            if key in _TUPLES:
                conv = _TUPLES[key]
                values[key] = tuple(conv(p) for p in val.replace("[", "").replace("]", "").split(",") if p.strip())
            elif types[key] == "int":
                values[key] = int(val)
            else:
                values[key] = val
        except ValueError:
            raise ConfigError(f"line {lineno}: bad value for {key!r}: {val!r}") from None
    if "input_dim" not in values:
        raise ConfigError("input_dim is required")
    return ModelConfig(**values)


def format_config(cfg: ModelConfig) -> str:
    lines = []
    for f in fields(cfg):
        val = getattr(cfg, f.name)
        if isinstance(val, tuple):
            val = ", ".join(repr(x) if isinstance(x, float) else str(x) for x in val)
        lines.append(f"{f.name} = {val}")
    return "\n".join(lines) + "\n"


def load_config(path) -> ModelConfig:
    with open(path, encoding="ascii") as fh:
        return parse_config(fh.read())
