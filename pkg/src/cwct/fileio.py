"""Feature stream files and the CSV formats used by the command line.

Feature file (little-endian): ``b"FEAT" | u32 version=1 | u32 T | u32 d | T*d f32``.
"""
import csv
import os
import struct

import numpy as np

from .errors import FormatError

FEAT_MAGIC = b"FEAT"
FEAT_VERSION = 1
_HEADER = struct.Struct("<4sIII")


def write_features(path, features) -> None:
    a = np.ascontiguousarray(features, dtype="<f4")
    if a.ndim != 2:
        raise ValueError(f"features must be (T, d), got {a.shape}")
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(FEAT_MAGIC, FEAT_VERSION, a.shape[0], a.shape[1]))
        fh.write(a.tobytes())


def features_to_bytes(features) -> bytes:
    a = np.ascontiguousarray(features, dtype="<f4")
    return _HEADER.pack(FEAT_MAGIC, FEAT_VERSION, a.shape[0], a.shape[1]) + a.tobytes()


def parse_features(data: bytes) -> np.ndarray:
    if len(data) < _HEADER.size:
        fields = ["magic", "version", "T", "d"]
        bad = fields[min(len(data) // 4, 3)]
        raise FormatError(f"truncated header ({len(data)} bytes)", len(data), bad)
    magic, version, T, d = _HEADER.unpack_from(data)
    if magic != FEAT_MAGIC:
        raise FormatError(f"bad magic {magic!r}", 0, "magic")
    if version != FEAT_VERSION:
        raise FormatError(f"unsupported version {version}", 4, "version")
    need = 4 * T * d
    have = len(data) - _HEADER.size
    if have != need:
        kind = "truncated payload" if have < need else "trailing bytes after payload"
        raise FormatError(f"{kind}: header declares {T}x{d} ({need} bytes), found {have}",
                          _HEADER.size + min(have, need), "payload")
    return np.frombuffer(data, dtype="<f4", offset=_HEADER.size).reshape(T, d).astype(np.float32)


def read_features(path) -> np.ndarray:
    with open(path, "rb") as fh:
        return parse_features(fh.read())


def write_predictions(path, probs) -> None:
    """One row per frame: index then the probabilities with 9 significant digits."""
    with open(path, "w", newline="") as fh:
        for i, row in enumerate(np.asarray(probs)):
            fh.write(",".join([str(i)] + [f"{float(p):.9g}" for p in row]) + "\n")


def _rows(path):
    with open(path, newline="") as fh:
        yield from enumerate(csv.reader(fh), 1)


def read_predictions(path) -> np.ndarray:
    rows = []
    offset = 0
    for lineno, rec in _rows(path):
        if not rec:
            continue
        try:
            idx = int(rec[0])
            vals = [float(v) for v in rec[1:]]
        except ValueError:
            raise FormatError(f"{os.fspath(path)} line {lineno}: non-numeric entry", offset, "probability") from None
        if idx != len(rows):
            raise FormatError(f"{os.fspath(path)} line {lineno}: frame index {idx}, expected {len(rows)}",
                              offset, "frame_index")
        if rows and len(vals) != len(rows[0]):
            raise FormatError(f"{os.fspath(path)} line {lineno}: {len(vals)} classes, expected {len(rows[0])}",
                              offset, "probability")
        rows.append(vals)
        offset += len(",".join(rec)) + 1
    return np.asarray(rows, dtype=np.float64)


def write_labels(path, labels) -> None:
    with open(path, "w", newline="") as fh:
        for i, k in enumerate(labels):
            fh.write(f"{i},{int(k)}\n")


def read_labels(path) -> np.ndarray:
    out = []
    offset = 0
    for lineno, rec in _rows(path):
        if not rec:
            continue
        if len(rec) != 2:
            raise FormatError(f"{os.fspath(path)} line {lineno}: expected frame_index,class_index", offset, "row")
        try:
            idx, k = int(rec[0]), int(rec[1])
        except ValueError:
            raise FormatError(f"{os.fspath(path)} line {lineno}: non-integer entry", offset, "class_index") from None
        if idx != len(out):
            raise FormatError(f"{os.fspath(path)} line {lineno}: frame index {idx}, expected {len(out)}",
                              offset, "frame_index")
        out.append(k)
        offset += len(",".join(rec)) + 1
    return np.asarray(out, dtype=np.int64)
