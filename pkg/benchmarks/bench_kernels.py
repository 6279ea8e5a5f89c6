"""Time the numba and pure-numpy paths of the row kernels on model-sized shapes.

    python benchmarks/bench_kernels.py [--repeat N]

Both paths are compiled/warmed before timing; outputs are compared as well.
"""
import argparse
import timeit

import numpy as np

from cwct import _accel
from cwct.kernels import causal_mask, layer_normalize, masked_row_softmax, mean_pool_rows

CASES = {
    "softmax 128x32x32 causal": lambda rng: (
        masked_row_softmax, (rng.standard_normal((128, 32, 32)).astype(np.float32), causal_mask(32), 8.0)),
    "softmax 16x16 global": lambda rng: (
        masked_row_softmax, (rng.standard_normal((4, 16, 16)).astype(np.float32), None, 16.0)),
    "layernorm 32x1024": lambda rng: (
        layer_normalize, (rng.standard_normal((32, 1024)).astype(np.float32),
                          np.ones(1024, np.float32), np.zeros(1024, np.float32))),
    "layernorm 512x256": lambda rng: (
        layer_normalize, (rng.standard_normal((512, 256)).astype(np.float32),
                          np.ones(256, np.float32), np.zeros(256, np.float32))),
    "mean pool 16x2x1024": lambda rng: (mean_pool_rows, (rng.standard_normal((16, 2, 1024)).astype(np.float32),)),
}


def run(repeat: int) -> list[tuple[str, float, float, float]]:
    rng = np.random.default_rng(0)
    rows = []
    for name, make in CASES.items():
        fn, args = make(rng)
        ref = fn(*args, use_numba=False)
        fast = fn(*args, use_numba=True)
        err = float(np.max(np.abs(ref - fast)))
        t_np = min(timeit.repeat(lambda: fn(*args, use_numba=False), number=repeat, repeat=3)) / repeat
        t_nb = min(timeit.repeat(lambda: fn(*args, use_numba=True), number=repeat, repeat=3)) / repeat
        rows.append((name, t_np, t_nb, err))
    return rows


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=200)
    args = parser.parse_args()
    if not _accel.HAVE_NUMBA:
        raise SystemExit("numba is not installed; only the numpy path is available")
    print(f"{'kernel':28s} {'numpy us':>10s} {'numba us':>10s} {'speedup':>8s} {'max diff':>10s}")
    for name, t_np, t_nb, err in run(args.repeat):
        print(f"{name:28s} {1e6 * t_np:10.1f} {1e6 * t_nb:10.1f} {t_np / t_nb:8.2f} {err:10.1e}")


if __name__ == "__main__":
    main()
