"""Compare the compiled shot kernels against the numpy fallback.

Times the per-block reduction kernel alone and the full ``run_shots`` call
(which also includes random-number generation and block merging).

Usage: python3 benchmarks/bench_kernels.py [--shots 100000 1000000] [--repeat 5]
"""

import argparse
import timeit

import numpy as np

from cvcz.cluster import ClusterSpec
from cvcz.gaussian_core import vacuum
from cvcz.montecarlo import ShotConfig, _kernels_py, kernels, run_shots, trajectory_model
from cvcz.protocol import INPUT_MODES


def bench(n_shots, repeat, backend):
    cfg = ShotConfig(n_shots, 1, vacuum(INPUT_MODES), ClusterSpec((10 ** -0.5,) * 4), gains=(0.75,))
    model = trajectory_model(cfg)
    z = np.random.default_rng(0).standard_normal((min(n_shots, cfg.block_size), 24))
    weights, bias = model.fused()
    gains = np.array(cfg.gains)
    kernel = min(
        timeit.repeat(lambda: backend.shot_statistics(z, weights, bias, gains), number=1, repeat=repeat)
    )
    full = min(timeit.repeat(lambda: run_shots(cfg, backend), number=1, repeat=repeat))
    return kernel, full


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--shots", type=int, nargs="+", default=[10_000, 100_000, 1_000_000])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()

    backends = [_kernels_py] if kernels is _kernels_py else [kernels, _kernels_py]
    if len(backends) == 1:
        print("compiled kernels unavailable; timing the numpy fallback only")
    print(f"{'shots':>10} {'backend':>8} {'stats/block [ms]':>22} {'run_shots [s]':>14}")
    for n in args.shots:
        for b in backends:
            k, f = bench(n, args.repeat, b)
            print(f"{n:>10} {b.NAME:>8} {1e3 * k:>22.3f} {f:>14.4f}")


if __name__ == "__main__":
    main()
