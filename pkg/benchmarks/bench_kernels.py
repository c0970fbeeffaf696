"""Compare the numba and numpy kernels.

    python benchmarks/bench_kernels.py [--repeat N]

Each kernel is run once to warm the JIT, then timed over N repeats; results
are checked for equality before timings are printed.
"""
import argparse
import time

import numpy as np

from hensym import kernels


def timed(fn, args, repeat):
    fn(*args)
    best = float("inf")
    for _ in range(repeat):
        t = time.perf_counter()
        out = fn(*args)
        best = min(best, time.perf_counter() - t)
    return best, out


def network(n, m, seed=0):
    rng = np.random.default_rng(seed)
    supply = rng.integers(1, 50, n)
    demand = rng.integers(1, 50, m)
    arc_bin = np.arange(n * m, dtype=np.int64).reshape(n, m)
    return supply, demand, arc_bin, np.arange(1 << (n * m), dtype=np.int64)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    cases = [
        ("feasible_patterns 3x3", kernels.feasible_patterns_numba, kernels.feasible_patterns_numpy, network(3, 3)),
        ("feasible_patterns 4x4", kernels.feasible_patterns_numba, kernels.feasible_patterns_numpy, network(4, 4)),
        ("count_one_hot 4x4", kernels.count_one_hot_numba, kernels.count_one_hot_numpy, (4, 4)),
        ("count_one_hot 4x5", kernels.count_one_hot_numba, kernels.count_one_hot_numpy, (4, 5)),
        ("permute_bits 2^16", kernels.permute_bits_numba, kernels.permute_bits_numpy,
         (np.arange(1 << 16, dtype=np.int64), np.random.default_rng(1).permutation(16))),
    ]
    print(f"{'kernel':26s} {'numba s':>10s} {'numpy s':>10s} {'speedup':>8s}")
    for name, nb, npy, data in cases:
        t_nb, a = timed(nb, data, args.repeat)
        t_np, b = timed(npy, data, args.repeat)
        assert np.array_equal(np.asarray(a), np.asarray(b)), name
        print(f"{name:26s} {t_nb:10.5f} {t_np:10.5f} {t_np / t_nb:8.1f}")


if __name__ == "__main__":
    main()
