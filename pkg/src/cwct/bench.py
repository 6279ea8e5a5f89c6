"""Circular vs sliding cost comparison: symbolic MAC counts plus measured wall time."""
from __future__ import annotations

import time
from dataclasses import asdict, dataclass, field
from fractions import Fraction

import numpy as np

from .config import ModelConfig, check
from .engine import SlidingEngine, StreamingEngine

BOUNDARY_TOLERANCE = 1e-5


# -- symbolic multiply-accumulate counts ------------------------------------

def attention_macs(n: int, c: int, m: int | None = None, kv_dim: int | None = None) -> int:
    """Projections, scores, weighted sum and output map for ``n`` queries over ``m`` keys."""
    m = n if m is None else m
    kv_dim = c if kv_dim is None else kv_dim
    return n * c * c + 2 * m * kv_dim * c + 2 * n * m * c + n * c * c


def ffn_macs(n: int, c: int, expansion: int) -> int:
    return 2 * n * c * expansion * c


def block_macs(n: int, c: int, expansion: int, m: int | None = None) -> int:
    return attention_macs(n, c, m) + ffn_macs(n, c, expansion)


def slimming_macs(n: int, c_in: int, c_out: int, heads: int, n_out: int) -> int:
    b = c_in // 4
    return (n * c_in * c_out  # T
            + n * c_out * b  # relu(T W_c), all heads
            + heads * n_out * b * n  # W_r scores
            + n_out * n * c_out  # A T
            + n_out * c_out * c_out)  # output map


def window_encode_macs(cfg: ModelConfig) -> int:
    """MACs to encode one window (attention blocks and token slimming per stage)."""
    n, c = cfg.window_size, cfg.history_dim
    total = 0
    for r in cfg.stage_reduction:
        total += block_macs(n, c, cfg.ffn_expansion)
        total += slimming_macs(n, c, 2 * c, cfg.mtsm_heads, n // r)
        n, c = n // r, 2 * c
    return total


def shared_step_macs(cfg: ModelConfig) -> int:
    """MACs per step outside the window encoder, identical for both update schemes."""
    d, C, S, m, a = cfg.input_dim, cfg.bank_dim, cfg.trend_dim, cfg.trend_len, cfg.num_actions
    total = d * cfg.history_dim + d * S  # one history and one trend projection
    total += cfg.global_sa_layers * block_macs(cfg.num_windows, C, cfg.ffn_expansion)
    total += cfg.trend_sa_layers * block_macs(m, S, cfg.ffn_expansion)
    total += cfg.trend_ca_modules * (attention_macs(m, S) + attention_macs(m, S, cfg.num_windows, C))
    total += m * S * a
    stage = cfg.cascade_sa_layers * block_macs(m, a, cfg.ffn_expansion) + m * a * a
    return total + cfg.cascade_stages * stage


def window_encoder_macs_per_step(cfg: ModelConfig, mode: str) -> int:
    per = window_encode_macs(cfg)
    if mode == "circular":
        return per
    if mode == "sliding":
        return cfg.num_windows * per
    raise ValueError(f"unknown mode {mode!r}")


def mac_ratio(cfg: ModelConfig) -> Fraction:
    return Fraction(window_encoder_macs_per_step(cfg, "sliding"), window_encoder_macs_per_step(cfg, "circular"))


# -- measured run -----------------------------------------------------------

@dataclass
class ModeStats:
    steps_per_sec: float
    mean_step_seconds: float
    window_encodes_per_step: float
    macs_per_step: int
    window_encoder_macs_per_step: int


@dataclass
class BenchReport:
    steps: int
    modes: dict[str, ModeStats] = field(default_factory=dict)
    boundary_steps: int = 0
    boundary_max_divergence: float = 0.0

    @property
    def window_encode_ratio(self) -> float:
        return self.modes["sliding"].window_encodes_per_step / self.modes["circular"].window_encodes_per_step

    @property
    def mac_ratio(self) -> Fraction:
        return Fraction(self.modes["sliding"].window_encoder_macs_per_step,
                        self.modes["circular"].window_encoder_macs_per_step)

    @property
    def wall_time_ratio(self) -> float:
        return self.modes["sliding"].mean_step_seconds / self.modes["circular"].mean_step_seconds

    @property
    def boundaries_agree(self) -> bool:
        return self.boundary_max_divergence <= BOUNDARY_TOLERANCE

    def to_dict(self) -> dict:
        out = asdict(self)
        out.update(window_encode_ratio=self.window_encode_ratio, mac_ratio=str(self.mac_ratio),
                   wall_time_ratio=self.wall_time_ratio)
        return out

    def format(self) -> str:
        lines = [f"steps: {self.steps}"]
        for name, m in self.modes.items():
            lines.append(
                f"{name:9s} {m.steps_per_sec:9.2f} steps/s  {1e3 * m.mean_step_seconds:9.2f} ms/step  "
                f"encodes/step {m.window_encodes_per_step:g}  MACs/step {m.macs_per_step:,}  "
                f"window-encoder MACs/step {m.window_encoder_macs_per_step:,}")
        lines.append(f"window-encoder MAC ratio sliding/circular: {self.mac_ratio}")
        lines.append(f"window-encode count ratio: {self.window_encode_ratio:g}")
        lines.append(f"wall-time ratio sliding/circular: {self.wall_time_ratio:.2f}")
        lines.append(f"boundary steps checked: {self.boundary_steps}, "
                     f"max divergence {self.boundary_max_divergence:.3e}")
        return "\n".join(lines)


def run_bench(cfg: ModelConfig, store, steps: int, seed: int = 0) -> BenchReport:
    """Drive both engines over the same synthetic stream.

    Both are first filled with one trend window of frames (untimed) so every
    timed step evicts a frame into the history.
    """
    check(cfg)
    if steps < 1:
        raise ValueError("steps must be positive")
    rng = np.random.default_rng(seed)
    frames = rng.standard_normal((cfg.trend_len + steps, cfg.input_dim)).astype(np.float32)
    circ, slide = StreamingEngine(cfg, store), SlidingEngine(cfg, store)
    for x in frames[:cfg.trend_len]:
        circ.step(x)
        slide.step(x)

    w = cfg.window_size
    spent = {"circular": 0.0, "sliding": 0.0}
    start = {"circular": circ.state.counters.window_encodes, "sliding": slide.state.counters.window_encodes}
    report = BenchReport(steps)
    for x in frames[cfg.trend_len:]:
        t0 = time.perf_counter()
        a = circ.step(x)
        t1 = time.perf_counter()
        b = slide.step(x)
        t2 = time.perf_counter()
        spent["circular"] += t1 - t0
        spent["sliding"] += t2 - t1
        if circ.state.cursor % w == 0:
            report.boundary_steps += 1
            diff = float(np.max(np.abs(a.probs.astype(np.float64) - b.probs)))
            report.boundary_max_divergence = max(report.boundary_max_divergence, diff)

    shared = shared_step_macs(cfg)
    for name, eng in (("circular", circ), ("sliding", slide)):
        enc = window_encoder_macs_per_step(cfg, name)
        report.modes[name] = ModeStats(
            steps_per_sec=steps / spent[name],
            mean_step_seconds=spent[name] / steps,
            window_encodes_per_step=(eng.state.counters.window_encodes - start[name]) / steps,
            macs_per_step=shared + enc,
            window_encoder_macs_per_step=enc,
        )
    return report
