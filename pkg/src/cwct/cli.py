"""``cwct`` command line: init, stream, verify, bench, eval."""
from __future__ import annotations

import argparse
import sys
import warnings

import numpy as np

from .bench import run_bench
from .config import ModelConfig, check, default_config, load_config
from .engine import StreamingEngine, batch_forward_many
from .errors import ConfigError, ContractError, FormatError
from .fileio import read_features, read_labels, read_predictions, write_predictions
from .metrics import evaluate
from .weights import check_compatible, init_weights, load_weights, save_weights

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_DIMENSION, EXIT_DATA = 0, 1, 2, 3, 4
VERIFY_CHUNK = 16


class DimensionError(ContractError):
    pass


def _say(*parts):
    print(*parts, flush=True)


def resolve_config(path, store) -> ModelConfig:
    """Config from ``path``, or defaults sized from the weight file when no path is given."""
    if path:
        cfg = load_config(path)
    else:
        if "cwhe.proj_hist" not in store or "classifier.bias" not in store:
            raise ConfigError("weight file lacks the tensors needed to infer a config; pass --config")
        cfg = default_config(int(store["cwhe.proj_hist"].shape[1]),
                             num_actions=int(store["classifier.bias"].shape[0]))
    check(cfg)
    try:
        check_compatible(cfg, store)
    except ContractError as exc:
        raise DimensionError(f"weights do not match config: {exc}") from None
    return cfg


def _load_frames(args, cfg, rng):
    if args.features:
        frames = read_features(args.features)
        if frames.shape[1] != cfg.input_dim:
            raise DimensionError(f"feature width {frames.shape[1]} != input_dim {cfg.input_dim}")
        return frames
    if args.random is None:
        raise ContractError("one of --features or --random is required")
    return rng.standard_normal((args.random, cfg.input_dim)).astype(np.float32)


def cmd_init(args) -> int:
    cfg = check(load_config(args.config))
    seed = cfg.seed if args.seed is None else args.seed
    store = init_weights(cfg, seed=seed, include_decoder=not args.no_decoder)
    save_weights(store, args.out)
    _say(f"wrote {len(store)} tensors to {args.out}")
    return EXIT_OK


def cmd_stream(args) -> int:
    store = load_weights(args.weights)
    cfg = resolve_config(args.config, store)
    frames = read_features(args.features)
    if frames.shape[1] != cfg.input_dim:
        raise DimensionError(f"feature width {frames.shape[1]} != input_dim {cfg.input_dim}")
    engine = StreamingEngine(cfg, store)
    probs = np.stack([engine.step(x).probs for x in frames]) if len(frames) else np.zeros((0, cfg.num_actions))
    write_predictions(args.out, probs)
    _say(f"wrote {len(probs)} rows to {args.out}")
    return EXIT_OK


def verify_stream(cfg, store, frames, tolerance, corrupt_window=None, corrupt_at=None):
    """Compare streaming outputs and cached summaries against batch recomputation at every step.

    Returns a dict with the worst output divergence, its step, the windows
    whose cached summary disagreed with recomputation, and the number of
    window encodes each step performed.
    """
    engine = StreamingEngine(cfg, store)
    if corrupt_window is not None and corrupt_at is None:
        corrupt_at = min(cfg.trend_len, len(frames) - 1)
    worst, worst_step, worst_summary = 0.0, -1, 0.0
    faulty: dict[int, int] = {}
    encodes: list[int] = []
    pending = []

    def flush():
        nonlocal worst, worst_step, worst_summary
        results = batch_forward_many([snap for _, snap, _ in pending], store, cfg)
        for (t, snap, probs), ref in zip(pending, results):
            diff = float(np.max(np.abs(probs.astype(np.float64) - ref.probs)))
            if diff > worst or worst_step < 0:
                worst, worst_step = diff, t
            per_window = np.max(np.abs(snap.summaries.astype(np.float64) - ref.summaries), axis=1)
            worst_summary = max(worst_summary, float(per_window.max()))
            for n in np.flatnonzero(per_window > tolerance):
                faulty.setdefault(int(n), t)
        pending.clear()

    for t, x in enumerate(frames):
        before = engine.state.counters.window_encodes
        probs = engine.step(x).probs
        encodes.append(engine.state.counters.window_encodes - before)
        if t == corrupt_at:
            engine.corrupt_summary(corrupt_window)
        pending.append((t, engine.snapshot(), probs))
        if len(pending) == VERIFY_CHUNK:
            flush()
    if pending:
        flush()
    ok = worst <= tolerance and worst_summary <= tolerance
    return {"ok": ok, "steps": len(frames), "max_divergence": worst, "worst_step": worst_step,
            "max_summary_divergence": worst_summary, "faulty_windows": faulty, "encodes_per_step": encodes}


def cmd_verify(args) -> int:
    store = load_weights(args.weights)
    cfg = resolve_config(args.config, store)
    frames = _load_frames(args, cfg, np.random.default_rng(args.seed))
    if len(frames) == 0:
        raise FormatError("feature stream has no frames", 12, "T")
    rep = verify_stream(cfg, store, frames, args.tolerance, args.corrupt_window)
    _say(f"steps: {rep['steps']}")
    _say(f"max |streaming - batch|: {rep['max_divergence']:.3e} (step {rep['worst_step']})")
    _say(f"max cached-summary divergence: {rep['max_summary_divergence']:.3e}")
    for n, t in sorted(rep["faulty_windows"].items()):
        _say(f"cached summary of window {n} disagrees with recomputation (first seen at step {t})")
    _say(f"{'PASS' if rep['ok'] else 'FAIL'} at tolerance {args.tolerance:g}")
    return EXIT_OK if rep["ok"] else EXIT_FAIL


def cmd_bench(args) -> int:
    store = load_weights(args.weights)
    cfg = resolve_config(args.config, store)
    report = run_bench(cfg, store, args.steps, args.seed or 0)
    _say(report.format())
    if not report.boundaries_agree:
        _say("FAIL: circular and sliding predictions disagree at a window boundary")
        return EXIT_FAIL
    return EXIT_OK


def cmd_eval(args) -> int:
    probs = read_predictions(args.predictions)
    labels = read_labels(args.labels)
    if len(probs) != len(labels):
        raise FormatError(f"{len(probs)} prediction rows but {len(labels)} labels", None, "frame_index")
    if labels.size and (labels.min() < 0 or labels.max() >= probs.shape[1]):
        raise FormatError(f"label outside [0, {probs.shape[1]})", None, "class_index")
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        try:
            res = evaluate(probs, labels)
        except ContractError as exc:
            raise FormatError(str(exc), None, "class_index") from None
    for w in caught:
        print(f"warning: {w.message}", file=sys.stderr)
    _say(f"mAP: {res['mAP']:.4f}")
    _say(f"mcAP: {res['mcAP']:.4f}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="cwct", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("init", help="write seeded random weights for a config")
    s.add_argument("--config", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--seed", type=int)
    s.add_argument("--no-decoder", action="store_true", help="omit the training-only decoder tensors")
    s.set_defaults(func=cmd_init)

    s = sub.add_parser("stream", help="per-frame predictions for a feature file")
    s.add_argument("--weights", required=True)
    s.add_argument("--features", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--config")
    s.set_defaults(func=cmd_stream)

    s = sub.add_parser("verify", help="check streaming against batch recomputation at every step")
    s.add_argument("--weights", required=True)
    src = s.add_mutually_exclusive_group(required=True)
    src.add_argument("--features")
    src.add_argument("--random", type=int, metavar="T", help="use T random frames")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--tolerance", type=float, default=1e-5)
    s.add_argument("--config")
    s.add_argument("--corrupt-window", type=int, metavar="N", help=argparse.SUPPRESS)
    s.set_defaults(func=cmd_verify)

    s = sub.add_parser("bench", help="compare circular and sliding updating")
    s.add_argument("--weights", required=True)
    s.add_argument("--steps", type=int, default=64)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--config")
    s.set_defaults(func=cmd_bench)

    s = sub.add_parser("eval", help="mAP and mcAP of a prediction CSV")
    s.add_argument("--predictions", required=True)
    s.add_argument("--labels", required=True)
    s.set_defaults(func=cmd_eval)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        for v in exc.violations:
            print(f"config error: {v}", file=sys.stderr)
        return EXIT_CONFIG
    except DimensionError as exc:
        print(f"dimension error: {exc}", file=sys.stderr)
        return EXIT_DIMENSION
    except (FormatError, ContractError, OSError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
