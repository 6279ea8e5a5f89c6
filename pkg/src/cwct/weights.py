"""Named parameter tensors: layout, seeded initialization and the CWCT container.

Linear weights are stored ``(in, out)`` and applied as ``x @ W``. The two
input projections ``cwhe.proj_hist`` and ``cwe.proj_trend`` keep the
``(out, in)`` layout of ``e = W x``.

Container layout (little-endian)::

    b"CWCT" | u32 version=1 | u32 count
    count x ( u16 name_len | name (ASCII) | u8 rank | rank x u32 dim | f32 payload )
"""
from __future__ import annotations

import io
import os
import struct
import zlib
from collections.abc import Iterator

import numpy as np

from .config import ModelConfig, check
from .errors import ContractError, FormatError

MAGIC = b"CWCT"
VERSION = 1


class WeightStore:
    """Ordered, read-only mapping from tensor name to float32 array."""

    def __init__(self, tensors=None):
        self._t: dict[str, np.ndarray] = {}
        self._derived: dict = {}
        for name, arr in (tensors.items() if isinstance(tensors, dict) else (tensors or ())):
            if name in self._t:
                raise ContractError(f"duplicate tensor name {name!r}")
            a = np.array(arr, dtype="<f4", copy=True)
            a.flags.writeable = False
            self._t[name] = a

    def __getitem__(self, name: str) -> np.ndarray:
        try:
            return self._t[name]
        except KeyError:
            raise KeyError(f"no tensor named {name!r}") from None

    def __contains__(self, name) -> bool:
        return name in self._t

    def __len__(self) -> int:
        return len(self._t)

    def __iter__(self) -> Iterator[str]:
        return iter(self._t)

    def items(self):
        return self._t.items()

    def names(self) -> list[str]:
        return list(self._t)

    def derived(self, key, build):
        """Memoize a tensor computed from this store (fused projections and such)."""
        try:
            return self._derived[key]
        except KeyError:
            val = self._derived[key] = build()
            return val

    def replace(self, **updates) -> "WeightStore":
        """Copy with some tensors swapped; keyword names use ``__`` for ``.``."""
        return self.with_tensors({k.replace("__", "."): v for k, v in updates.items()})

    def with_tensors(self, updates: dict) -> "WeightStore":
        missing = [k for k in updates if k not in self._t]
        if missing:
            raise KeyError(f"unknown tensors {missing}")
        return WeightStore([(k, updates.get(k, v)) for k, v in self._t.items()])

    def to_bytes(self) -> bytes:
        buf = io.BytesIO()
        save_weights(self, buf)
        return buf.getvalue()

    def __eq__(self, other) -> bool:
        if not isinstance(other, WeightStore):
            return NotImplemented
        return self.to_bytes() == other.to_bytes()

    __hash__ = None

    def __repr__(self) -> str:
        n = sum(a.size for a in self._t.values())
        return f"WeightStore({len(self)} tensors, {n} parameters)"


# -- parameter layout ------------------------------------------------------

def _attention(prefix, c, heads, cross=False, kv_dim=None):
    dk = c // heads
    out = [(f"{prefix}.ln1.gain", (c,)), (f"{prefix}.ln1.bias", (c,))]
    if cross:
        kv = kv_dim or c
        out += [(f"{prefix}.lnkv.gain", (kv,)), (f"{prefix}.lnkv.bias", (kv,))]
    for i in range(heads):
        out += [
            (f"{prefix}.msa.head{i}.wq", (c, dk)),
            (f"{prefix}.msa.head{i}.wk", ((kv_dim or c) if cross else c, dk)),
            (f"{prefix}.msa.head{i}.wv", ((kv_dim or c) if cross else c, dk)),
        ]
    out += [(f"{prefix}.msa.out.weight", (c, c)), (f"{prefix}.msa.out.bias", (c,))]
    return out


def _ffn(prefix, c, expansion):
    h = c * expansion
    return [
        (f"{prefix}.ln2.gain", (c,)), (f"{prefix}.ln2.bias", (c,)),
        (f"{prefix}.ffn.fc1.weight", (c, h)), (f"{prefix}.ffn.fc1.bias", (h,)),
        (f"{prefix}.ffn.fc2.weight", (h, c)), (f"{prefix}.ffn.fc2.bias", (c,)),
    ]


def _block(prefix, c, heads, expansion):
    return _attention(prefix, c, heads) + _ffn(prefix, c, expansion)


def _mtsm(prefix, c_in, c_out, heads, n_out):
    h = c_out // heads
    b = c_in // 4
    out = [(f"{prefix}.head{i}.wh", (c_in, h)) for i in range(heads)]
    out += [
        (f"{prefix}.wc", (h, b)),
        (f"{prefix}.wr", (n_out, b)),
        (f"{prefix}.out.weight", (c_out, c_out)),
        (f"{prefix}.out.bias", (c_out,)),
    ]
    return out


def parameter_shapes(cfg: ModelConfig, include_decoder: bool = True) -> list[tuple[str, tuple]]:
    """Canonical (name, shape) list for every tensor the model reads."""
    e = cfg.ffn_expansion
    p = [("cwhe.proj_hist", (cfg.history_dim, cfg.input_dim))]
    shapes = cfg.stage_shapes()
    for s, r in enumerate(cfg.stage_reduction):
        n, c = shapes[s]
        p += _block(f"cwhe.stage{s}", c, cfg.msa_heads, e)
        p += _mtsm(f"cwhe.stage{s}.mtsm", c, 2 * c, cfg.mtsm_heads, n // r)
    C = cfg.bank_dim
    for layer in range(cfg.global_sa_layers):
        p += _block(f"cwhe.global{layer}", C, cfg.msa_heads, e)

    dS = cfg.trend_dim
    p.append(("cwe.proj_trend", (dS, cfg.input_dim)))
    for layer in range(cfg.trend_sa_layers):
        p += _block(f"cwe.sa{layer}", dS, cfg.msa_heads, e)
    for k in range(cfg.trend_ca_modules):
        p += _attention(f"cwe.ca{k}.self", dS, cfg.msa_heads)
        p += _attention(f"cwe.ca{k}.cross", dS, cfg.msa_heads, cross=True, kv_dim=C)
    p += [("classifier.weight", (dS, cfg.num_actions)), ("classifier.bias", (cfg.num_actions,))]

    A = cfg.num_actions
    for k in range(cfg.cascade_stages):
        for layer in range(cfg.cascade_sa_layers):
            p += _block(f"cascade.stage{k}.layer{layer}", A, cfg.cascade_heads, e)
        p += [(f"cascade.stage{k}.head.weight", (A, A)), (f"cascade.stage{k}.head.bias", (A,))]

    if include_decoder:
        tokens = cfg.decoder_tokens()
        for s, n_layers in enumerate(cfg.decoder_swin_layers):
            for layer in range(n_layers):
                p += _block(f"swhd.stage{s}.layer{layer}", C, cfg.msa_heads, e)
            if s < len(cfg.decoder_expansion):
                p += _mtsm(f"swhd.stage{s}.mtsm", C, C, cfg.mtsm_heads, tokens[s + 1])
                p += _block(f"swhd.stage{s}.align", C, cfg.msa_heads, e)
    return p


def _tensor_rng(seed: int, name: str) -> np.random.Generator:
    # per-tensor streams: adding or dropping tensors never shifts the others
    return np.random.default_rng([seed, zlib.crc32(name.encode("ascii"))])


def init_weights(cfg: ModelConfig, seed: int | None = None, include_decoder: bool = True) -> WeightStore:
    """Glorot-uniform weights, zero biases, unit layer-norm gains."""
    check(cfg)
    seed = cfg.seed if seed is None else seed
    if seed < 0:
        raise ContractError("seed must be unsigned")
    tensors = []
    for name, shape in parameter_shapes(cfg, include_decoder):
        if name.endswith(".gain"):
            arr = np.ones(shape, dtype=np.float32)
        elif len(shape) == 1:
            arr = np.zeros(shape, dtype=np.float32)
        else:
            fan_in, fan_out = shape
            limit = np.sqrt(6.0 / (fan_in + fan_out))
            arr = _tensor_rng(seed, name).uniform(-limit, limit, size=shape).astype(np.float32)
        tensors.append((name, arr))
    return WeightStore(tensors)


def compatibility_errors(cfg: ModelConfig, store: WeightStore, require_decoder: bool = False) -> list[str]:
    problems = []
    if cfg.bank_dim != cfg.trend_dim:
        problems.append(f"bank width {cfg.bank_dim} cannot be cross-attended by trend width {cfg.trend_dim}")
    for name, shape in parameter_shapes(cfg, include_decoder=True):
        is_decoder = name.startswith("swhd.")
        if name not in store:
            if not is_decoder or require_decoder:
                problems.append(f"missing tensor {name}")
            continue
        if store[name].shape != tuple(shape):
            problems.append(f"tensor {name} has shape {store[name].shape}, expected {tuple(shape)}")
    return problems


def check_compatible(cfg: ModelConfig, store: WeightStore, require_decoder: bool = False):
    problems = compatibility_errors(cfg, store, require_decoder)
    if problems:
        raise ContractError("; ".join(problems[:5]) + (f" (+{len(problems) - 5} more)" if len(problems) > 5 else ""))


def has_decoder(store: WeightStore) -> bool:
    return any(n.startswith("swhd.") for n in store)


# -- container -------------------------------------------------------------

def save_weights(store, sink) -> None:
    """Write ``store`` (a WeightStore or ``{name: array}``) to a path or binary file object."""
    if isinstance(sink, (str, os.PathLike)):
        with open(sink, "wb") as fh:
            save_weights(store, fh)
        return
    items = list(store.items())
    sink.write(MAGIC + struct.pack("<II", VERSION, len(items)))
    for name, arr in items:
        raw = name.encode("ascii")
        if len(raw) > 0xFFFF:
            raise ContractError(f"tensor name too long: {name[:40]}...")
        a = np.asarray(arr, dtype="<f4", order="C")
        if a.ndim > 255:
            raise ContractError(f"tensor {name} has rank {a.ndim} > 255")
        sink.write(struct.pack("<H", len(raw)) + raw + struct.pack("<B", a.ndim))
        sink.write(struct.pack(f"<{a.ndim}I", *a.shape))
        sink.write(a.tobytes())


def load_weights(source) -> WeightStore:
    if isinstance(source, (str, os.PathLike)):
        with open(source, "rb") as fh:
            data = fh.read()
    elif isinstance(source, (bytes, bytearray, memoryview)):
        data = bytes(source)
    else:
        data = source.read()
    return WeightStore(_parse(data))


def read_container(data: bytes) -> list[tuple[str, np.ndarray]]:
    """Parse a CWCT container into (name, array) pairs without building a store."""
    return _parse(data)


def _parse(data: bytes) -> list[tuple[str, np.ndarray]]:
    size = len(data)
    off = 0

    def take(n, field, tensor=None):
        nonlocal off
        if off + n > size:
            label = f"{field} of tensor {tensor!r}" if tensor else field
            raise FormatError(f"truncated data: need {n} bytes, {size - off} left", off, label)
        chunk = data[off:off + n]
        off += n
        return chunk

    magic = take(4, "magic")
    if magic != MAGIC:
        raise FormatError(f"bad magic {magic!r}", 0, "magic")
    (version,) = struct.unpack("<I", take(4, "version"))
    if version != VERSION:
        raise FormatError(f"unsupported version {version}", 4, "version")
    (count,) = struct.unpack("<I", take(4, "count"))
    out = []
    seen = set()
    for idx in range(count):
        start = off
        (nlen,) = struct.unpack("<H", take(2, "name_len", f"#{idx}"))
        raw = take(nlen, "name", f"#{idx}")
        try:
            name = raw.decode("ascii")
        except UnicodeDecodeError:
            raise FormatError(f"tensor #{idx} name is not ASCII", start + 2, "name") from None
        if name in seen:
            raise FormatError(f"duplicate tensor {name!r}", start, "name")
        seen.add(name)
        (rank,) = struct.unpack("<B", take(1, "rank", name))
        dims = struct.unpack(f"<{rank}I", take(4 * rank, "dims", name))
        n = 1
        for d in dims:
            n *= d
        if 4 * n > size - off:
            raise FormatError(
                f"shape overflow: tensor {name!r} declares {dims} ({4 * n} bytes), {size - off} left",
                off, f"payload of tensor {name!r}",
            )
        arr = np.frombuffer(take(4 * n, "payload", name), dtype="<f4").reshape(dims)
        out.append((name, arr))
    if off != size:
        raise FormatError(f"{size - off} trailing bytes after {count} tensors", off, "end")
    return out
