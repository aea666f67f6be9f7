"""Compare the compiled and numpy stepping kernels on the built-in models.

    python3 benchmarks/bench_kernels.py [--paths 64] [--repeat 3]

Both backends run the same increments; the script also checks that their
outputs agree bitwise.
"""
import argparse
import time

import numpy as np

from truncem import _backend
from truncem.brownian import BrownianDriver
from truncem.engine import simulate_batch
from truncem.grid import build_grid
from truncem.model import builtin_multi_delay, builtin_vq2
from truncem.truncation import cubic_policy

CASES = [
    ("vq2", builtin_vq2, 2.0 ** -13),
    ("mul64", lambda: builtin_multi_delay(64), 2.0 ** -12),
    ("mul512", lambda: builtin_multi_delay(512), 2.0 ** -12),
]


def best_of(fn, repeat):
    best = float("inf")
    out = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--paths", type=int, default=64)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()

    pol = cubic_policy()
    print(f"backends available: {', '.join(_backend.AVAILABLE)}")
    print(f"{'model':8} {'steps':>7} {'backend':>8} {'seconds':>9} {'Msteps/s':>9} {'speedup':>8}")
    for name, factory, delta in CASES:
        m = factory()
        g = build_grid(2.0, m.delays, delta)
        inc = BrownianDriver(0, delta, g.M_T).block(range(args.paths))
        timings, outs = {}, {}
        for be in reversed(_backend.AVAILABLE):
            timings[be], outs[be] = best_of(lambda: simulate_batch(m, g, inc, pol, backend=be), args.repeat)
        base = timings["python"]
        for be, t in timings.items():
            rate = args.paths * g.M_T / t / 1e6
            print(f"{name:8} {g.M_T:7d} {be:>8} {t:9.4f} {rate:9.2f} {base / t:7.1f}x")
        if len(outs) == 2:
            same = np.array_equal(outs["python"][0], outs["cython"][0], equal_nan=True)
            print(f"{'':8} bitwise equal: {same}")


if __name__ == "__main__":
    main()
