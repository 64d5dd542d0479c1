"""Micro-benchmark of the numba kernels against the pure-numpy fallback.

Run with `python -m dfreg.bench`. Times the hot kernels (convolution
forward/backward, pooling, binning) at desk-training sizes and prints a
table with per-call medians and the numba speedup. The first numba call
per kernel is excluded as JIT warmup.
"""

import argparse
import sys
import time

import numpy as np

from .rng import make_rng


def _median_time(fn, repeat: int) -> float:
    times = []
    for _ in range(repeat):
        start = time.perf_counter()
        fn()
        times.append(time.perf_counter() - start)
    times.sort()
    return times[len(times) // 2]


def _cases(rng):
    x = rng.uniform(-1.0, 1.0, (64, 16, 14, 14))
    w = rng.uniform(-1.0, 1.0, (32, 16, 3, 3))
    b = rng.uniform(-1.0, 1.0, 32)
    dy = rng.uniform(-1.0, 1.0, (64, 32, 14, 14))
    pool_x = rng.uniform(-1.0, 1.0, (64, 32, 14, 14))
    weights = rng.uniform(-1.2, 1.2, 100_000)
    d_rho = rng.uniform(-1.0, 1.0, 80)
    return [
        ("conv2d_forward", lambda ops: ops.conv2d_forward(x, w, b, 1, 1)),
        ("conv2d_backward", lambda ops: ops.conv2d_backward(x, w, dy, 1, 1)),
        ("maxpool2_forward", lambda ops: ops.maxpool2_forward(pool_x)),
        ("hard_bin_counts", lambda ops: ops.hard_bin_counts(weights, -1.0, 1.0, 80)),
        ("soft_bin_counts", lambda ops: ops.soft_bin_counts(weights, -1.0, 1.0, 80)),
        ("soft_bin_grad", lambda ops: ops.soft_bin_grad(weights, -1.0, 1.0, 80,
                                                        d_rho, weights.size)),
    ]


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="dfreg.bench", description="compare kernel backends")
    parser.add_argument("--repeat", type=int, default=5,
                        help="timed repetitions per kernel (median reported)")
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args(argv)

    from .kernels import numpy_ops
    backends = [("numpy", numpy_ops)]
    try:
        from .kernels import numba_ops
        backends.append(("numba", numba_ops))
    except ImportError as exc:
        print(f"numba backend unavailable ({exc}); timing numpy only",
              file=sys.stderr)

    rng = make_rng(args.seed, 99)
    cases = _cases(rng)
    results = {}
    for backend_name, ops in backends:
        for case_name, fn in cases:
            fn(ops)  # warmup (includes numba JIT compilation)
            results[(backend_name, case_name)] = _median_time(
                lambda: fn(ops), args.repeat)

    name_w = max(len(name) for name, _ in cases)
    have_numba = len(backends) == 2
    header = f"{'kernel'.ljust(name_w)}  numpy_ms"
    if have_numba:
        header += "  numba_ms  speedup"
    print(header)
    for case_name, _ in cases:
        t_np = results[("numpy", case_name)] * 1e3
        line = f"{case_name.ljust(name_w)}  {t_np:8.3f}"
        if have_numba:
            t_nb = results[("numba", case_name)] * 1e3
            line += f"  {t_nb:8.3f}  {t_np / t_nb:7.2f}x"
        print(line)
    return 0


if __name__ == "__main__":
    sys.exit(main())
