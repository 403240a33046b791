"""Compare the compiled metric kernels against the pure-Python fallback.

Usage:
    python3 benchmarks/bench_kernels.py [--n 200000] [--seed 0] [--str-len 24]

Times interval IoU, box IoU, and Levenshtein distance on identical random
workloads for both backends, verifies they agree exactly, and prints a
table with per-call times and the speedup factor.
"""

from __future__ import annotations

import argparse
import string
import time

import numpy as np

from mskd import _kernels_py
from mskd.kernels import BACKEND

try:
    from mskd import _fastkern
except ImportError:
    _fastkern = None


def time_calls(fn, args_list) -> float:
    t0 = time.perf_counter()
    for args in args_list:
        fn(*args)
    return time.perf_counter() - t0


def make_workloads(n: int, seed: int, str_len: int):
    rng = np.random.default_rng(seed)
    intervals = []
    boxes = []
    for _ in range(n):
        a0, a1 = sorted(rng.uniform(0, 1, 2))
        b0, b1 = sorted(rng.uniform(0, 1, 2))
        intervals.append((a0, a1, b0, b1))
        ax = sorted(rng.uniform(0, 1, 2))
        ay = sorted(rng.uniform(0, 1, 2))
        bx = sorted(rng.uniform(0, 1, 2))
        by = sorted(rng.uniform(0, 1, 2))
        boxes.append((ax[0], ay[0], ax[1], ay[1], bx[0], by[0], bx[1], by[1]))
    alphabet = list(string.ascii_lowercase + " ")
    # string workload is quadratic per call; keep it smaller
    n_str = max(1, n // 20)
    strings = [
        (
            "".join(rng.choice(alphabet, size=int(rng.integers(1, str_len + 1)))),
            "".join(rng.choice(alphabet, size=int(rng.integers(1, str_len + 1)))),
        )
        for _ in range(n_str)
    ]
    return intervals, boxes, strings


def check_agreement(intervals, boxes, strings) -> None:
    for args in intervals[:2000]:
        assert _fastkern.interval_iou(*args) == _kernels_py.interval_iou(*args)
    for args in boxes[:2000]:
        assert _fastkern.box_iou(*args) == _kernels_py.box_iou(*args)
    for args in strings[:500]:
        assert _fastkern.levenshtein(*args) == _kernels_py.levenshtein(*args)


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--n", type=int, default=200_000, help="IoU calls per backend")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--str-len", type=int, default=24, help="max string length")
    args = parser.parse_args()

    print(f"active backend: {BACKEND}")
    if _fastkern is None:
        print("compiled extension not available; nothing to compare")
        return 1

    intervals, boxes, strings = make_workloads(args.n, args.seed, args.str_len)
    check_agreement(intervals, boxes, strings)
    print("agreement check passed (exact equality on sampled workloads)\n")

    rows = []
    for name, workload, n_calls in (
        ("interval_iou", intervals, args.n),
        ("box_iou", boxes, args.n),
        ("levenshtein", strings, len(strings)),
    ):
        t_c = time_calls(getattr(_fastkern, name), workload)
        t_p = time_calls(getattr(_kernels_py, name), workload)
        rows.append((name, n_calls, t_c, t_p, t_p / t_c))

    header = f"{'kernel':<14}{'calls':>9}{'compiled':>12}{'python':>12}{'speedup':>9}"
    print(header)
    print("-" * len(header))
    for name, n_calls, t_c, t_p, speedup in rows:
        print(f"{name:<14}{n_calls:>9}{t_c:>10.3f}s{t_p:>10.3f}s{speedup:>8.1f}x")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
