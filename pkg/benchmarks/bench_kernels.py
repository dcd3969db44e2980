"""Throughput of the compiled and numpy simulation backends.

    python3 benchmarks/bench_kernels.py --shots 200000 --d 2
"""

import argparse
import time

import numpy as np

from optomo import covopt, simkit
from optomo.kernels import available_backends, get_backend
from optomo.opalg import make_rng
from optomo.tester import random_channel


def time_backend(name, spec, R, repeats):
    prep = simkit.prepare(spec, R)
    be = get_backend(name)
    blocks = [simkit._draw(spec, b)[:3] for b in range(spec.n_blocks)]
    best = np.inf
    for _ in range(repeats):
        t0 = time.perf_counter()
        for zg, zh, u in blocks:
            be.simulate_block(zg, zh, u, prep.R, prep.M, prep.w, prep.K, prep.obs)
        best = min(best, time.perf_counter() - t0)
    return best


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--shots", type=int, default=200_000)
    p.add_argument("--d", type=int, default=2)
    p.add_argument("--repeats", type=int, default=3)
    args = p.parse_args()

    des = covopt.optimize_class("qo", args.d)
    D = args.d * args.d
    obs = [np.eye(D), np.diag(np.linspace(-1, 1, D))]
    spec = simkit.SchemeSpec.from_design(des, args.shots, 0, obs)
    R = random_channel(args.d, make_rng(0))
    times = {name: time_backend(name, spec, R, args.repeats) for name in available_backends()}
    print(f"d={args.d} shots={args.shots}")
    for name, t in times.items():
        print(f"{name:>7}: {t:8.3f} s  {1e6 * t / args.shots:7.2f} us/shot")
    if len(times) > 1:
        print(f"speedup: {times['numpy'] / times['cython']:.2f}x")


if __name__ == "__main__":
    main()
