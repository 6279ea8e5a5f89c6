"""Streaming inference with a circular history ring and a per-window summary cache.

Each step the oldest trend frame is evicted into ring slot ``cursor``; only the
window owning that slot is re-encoded. ``batch_forward`` recomputes every
window from the same slots and is the reference the cache must match.
"""
from __future__ import annotations

import copy
import io
from dataclasses import dataclass, field

import numpy as np

from .cascade import refine, refine_history_windows
from .config import ModelConfig, check
from .decoder import decode
from .errors import ContractError, FormatError
from .history_encoder import encode_windows, global_bank_attention, project_history
from .kernels import F32
from .trend_encoder import classify, project_trend, trend_coarse
from .weights import check_compatible, has_decoder, read_container, save_weights


@dataclass
class Counters:
    window_encodes: int = 0
    bank_attentions: int = 0
    steps: int = 0

    def copy(self) -> "Counters":
        return Counters(self.window_encodes, self.bank_attentions, self.steps)


@dataclass
class StepResult:
    probs: np.ndarray  # refined distribution for the newest frame
    coarse: np.ndarray  # classifier output for the newest frame
    counters: Counters


@dataclass
class RingState:
    slots: np.ndarray  # (m_L, d_L) projected history, ring-indexed
    summaries: np.ndarray  # (N_w, C) cached per-window encodings (before bank attention)
    dirty: np.ndarray  # (N_w,) bool
    trend_raw: list = field(default_factory=list)  # newest last, at most m_S raw features
    trend_proj: list = field(default_factory=list)  # projections of trend_raw
    cursor: int = 0
    counters: Counters = field(default_factory=Counters)

    @property
    def t(self) -> int:
        return self.counters.steps

    def copy(self) -> "RingState":
        return copy.deepcopy(self)


@dataclass
class BatchResult:
    coarse: np.ndarray  # (m_S, N_a)
    refined: np.ndarray  # (m_S, N_a)
    summaries: np.ndarray
    bank: np.ndarray
    window_encodes: int
    oas_coarse: np.ndarray | None = None  # (m_L, N_a), ring-slot order
    oas_refined: np.ndarray | None = None

    @property
    def probs(self) -> np.ndarray:
        return self.refined[-1]

    @property
    def coarse_last(self) -> np.ndarray:
        return self.coarse[-1]


def trend_window(proj, length):
    """Stack the queue into ``length`` rows, repeating the earliest frame in front while short."""
    if not proj:
        raise ContractError("trend queue is empty")
    rows = np.asarray(proj, dtype=F32)
    if len(rows) < length:
        pad = np.repeat(rows[:1], length - len(rows), axis=0)
        rows = np.concatenate([pad, rows], axis=0)
    return rows


def predict(projected_trend, summaries, store, cfg):
    """Shared downstream path: bank attention, trend encoder, cascade. Returns (coarse, refined, bank)."""
    bank = global_bank_attention(summaries, store, cfg)
    coarse = trend_coarse(projected_trend, bank, store, cfg)
    return coarse, refine(coarse, store, cfg), bank


class _Engine:
    def __init__(self, cfg: ModelConfig, store):
        self.cfg = check(cfg)
        check_compatible(cfg, store)
        self.store = store
        self.last_bank = None

    def _push_trend(self, state, x):
        x = np.asarray(x, dtype=F32).reshape(-1)
        if x.shape[0] != self.cfg.input_dim:
            raise ContractError(f"frame width {x.shape[0]} != input_dim {self.cfg.input_dim}")
        state.trend_raw.append(x.copy())
        state.trend_proj.append(project_trend(x, self.store))
        if len(state.trend_raw) > self.cfg.trend_len:
            state.trend_proj.pop(0)
            return state.trend_raw.pop(0)
        return None

    def _finish(self, state, summaries):
        coarse, refined, bank = predict(
            trend_window(state.trend_proj, self.cfg.trend_len), summaries, self.store, self.cfg)
        self.last_bank = bank
        state.counters.bank_attentions += 1
        state.counters.steps += 1
        return StepResult(refined[-1].copy(), coarse[-1].copy(), state.counters.copy())


class StreamingEngine(_Engine):
    """Circular-window engine: one window encode per step once the trend queue is full."""

    def __init__(self, cfg: ModelConfig, store):
        super().__init__(cfg, store)
        c = self.cfg
        self.state = RingState(
            slots=np.zeros((c.history_len, c.history_dim), dtype=F32),
            summaries=np.zeros((c.num_windows, c.bank_dim), dtype=F32),
            dirty=np.ones(c.num_windows, dtype=bool),
        )
        self._refresh_dirty()

    def _refresh_dirty(self):
        s, w = self.state, self.cfg.window_size
        idx = np.flatnonzero(s.dirty)
        if idx.size:
            windows = np.stack([s.slots[n * w:(n + 1) * w] for n in idx])
            s.summaries[idx] = encode_windows(windows, self.store, self.cfg)
            s.counters.window_encodes += idx.size
            s.dirty[idx] = False

    def step(self, x) -> StepResult:
        s, c = self.state, self.cfg
        evicted = self._push_trend(s, x)
        if evicted is not None:
            s.slots[s.cursor] = project_history(evicted, self.store)
            s.dirty[s.cursor // c.window_size] = True
            s.cursor = (s.cursor + 1) % c.history_len
        self._refresh_dirty()
        return self._finish(s, s.summaries)

    def run(self, frames):
        return [self.step(x) for x in frames]

    def snapshot(self) -> RingState:
        return self.state.copy()

    def bank(self) -> np.ndarray:
        return global_bank_attention(self.state.summaries, self.store, self.cfg)

    def corrupt_summary(self, window: int, delta: float = 1.0):
        """Debug hook: perturb one cached summary without marking it dirty."""
        if not 0 <= window < self.cfg.num_windows:
            raise ContractError(f"window {window} out of range")
        self.state.summaries[window] += F32(delta)

    def rotated(self, k: int) -> "StreamingEngine":
        """Copy whose ring slots are relabeled by ``k`` whole windows."""
        w = self.cfg.window_size
        other = copy.copy(self)
        st = self.state.copy()
        st.slots = np.roll(st.slots, k * w, axis=0)
        st.summaries = np.roll(st.summaries, k, axis=0)
        st.dirty = np.roll(st.dirty, k)
        st.cursor = (st.cursor + k * w) % self.cfg.history_len
        other.state = st
        return other


class SlidingEngine(_Engine):
    """Reference FIFO queue in temporal order; re-encodes every window at every step."""

    def __init__(self, cfg: ModelConfig, store):
        super().__init__(cfg, store)
        c = self.cfg
        self.history = np.zeros((c.history_len, c.history_dim), dtype=F32)
        self.state = RingState(
            slots=self.history,
            summaries=np.zeros((c.num_windows, c.bank_dim), dtype=F32),
            dirty=np.zeros(c.num_windows, dtype=bool),
        )

    def step(self, x) -> StepResult:
        s, c = self.state, self.cfg
        evicted = self._push_trend(s, x)
        if evicted is not None:
            self.history[:-1] = self.history[1:]
            self.history[-1] = project_history(evicted, self.store)
        windows = self.history.reshape(c.num_windows, c.window_size, c.history_dim)
        s.summaries = encode_windows(windows, self.store, c)
        s.counters.window_encodes += c.num_windows
        return self._finish(s, s.summaries)


def new_engine(cfg: ModelConfig, store) -> StreamingEngine:
    return StreamingEngine(cfg, store)


def sliding_baseline_step(engine: SlidingEngine, x) -> StepResult:
    return engine.step(x)


def batch_forward_many(states, store, cfg: ModelConfig) -> list[BatchResult]:
    """``batch_forward`` over several snapshots at once.

    Every snapshot is recomputed from its own slots and raw trend; stacking
    them only turns many skinny products into a few wide ones.
    """
    check(cfg)
    states = list(states)
    if not states:
        return []
    w, K = cfg.window_size, len(states)
    for st in states:
        if not st.trend_raw:
            raise ContractError("snapshot has an empty trend queue")
    slots = np.stack([np.asarray(st.slots, dtype=F32) for st in states])
    windows = slots.reshape(K * cfg.num_windows, w, cfg.history_dim)
    summaries = encode_windows(windows, store, cfg).reshape(K, cfg.num_windows, cfg.bank_dim)
    trends = np.stack([
        trend_window(list(project_trend(np.stack(st.trend_raw), store)), cfg.trend_len) for st in states
    ])
    coarse, refined, bank = predict(trends, summaries, store, cfg)
    return [BatchResult(coarse[i], refined[i], summaries[i], bank[i], cfg.num_windows) for i in range(K)]


def batch_forward(state: RingState, store, cfg: ModelConfig, oas: bool = False) -> BatchResult:
    """Recompute everything from a state snapshot, ignoring cached summaries and dirty flags.

    With ``oas`` the decoder branch also scores every history slot.
    """
    if oas and not has_decoder(store):
        raise ContractError("weights carry no decoder tensors; initialize with include_decoder=True")
    (result,) = batch_forward_many([state], store, cfg)
    if oas:
        w = cfg.window_size
        oas_coarse = classify(decode(result.bank, store, cfg), store)
        result.oas_coarse = oas_coarse
        result.oas_refined = refine_history_windows(
            oas_coarse.reshape(cfg.num_windows, w, cfg.num_actions), store, cfg
        ).reshape(cfg.history_len, cfg.num_actions)
    return result


# -- snapshot dump ---------------------------------------------------------

def dump_state(state: RingState, sink) -> None:
    """Write a snapshot using the weight container with reserved ``state.*`` names."""
    trend = np.stack(state.trend_raw) if state.trend_raw else np.zeros((0, 0), dtype=F32)
    c = state.counters
    tensors = {
        "state.slots": state.slots,
        "state.trend": trend,
        "state.cursor": np.array(state.cursor, dtype=F32),
        "state.summaries": state.summaries,
        "state.dirty": state.dirty.astype(F32),
        "state.counters": np.array([c.window_encodes, c.bank_attentions, c.steps], dtype=F32),
    }
    save_weights(tensors, sink)


def load_state(source, store) -> RingState:
    if isinstance(source, (bytes, bytearray)):
        data = bytes(source)
    elif isinstance(source, io.IOBase):
        data = source.read()
    else:
        with open(source, "rb") as fh:
            data = fh.read()
    t = dict(read_container(data))
    for name in ("state.slots", "state.trend", "state.cursor"):
        if name not in t:
            raise FormatError(f"snapshot lacks {name}", None, name)
    trend_raw = [np.array(r, dtype=F32) for r in t["state.trend"]]
    counters = Counters(*(int(v) for v in t.get("state.counters", np.zeros(3))))
    slots = np.array(t["state.slots"], dtype=F32)
    summaries = t.get("state.summaries")
    dirty = t.get("state.dirty")
    return RingState(
        slots=slots,
        summaries=np.array(summaries, dtype=F32) if summaries is not None else None,
        dirty=np.asarray(dirty) != 0 if dirty is not None else None,
        trend_raw=trend_raw,
        trend_proj=[project_trend(x, store) for x in trend_raw],
        cursor=int(t["state.cursor"]),
        counters=counters,
    )
