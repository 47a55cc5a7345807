"""Benchmark the numba kernels against the pure-numpy fallbacks.

Usage: python benchmarks/bench_kernels.py [--repeats N]

Checks that both backends agree numerically, then times the three hot
paths at realistic sizes: local SGD training (one client-round), the
Jacobi eigensolver at trajectory-PCA size, and the silhouette score.
"""

import argparse
import time

import numpy as np

from fedshadow import _kernels_jit, _kernels_np


def timeit(fn, repeats):
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def make_train_inputs(seed=0):
    rng = np.random.default_rng(seed)
    n, d, h, c = 80, 32, 32, 10
    x = rng.random((n, d))
    labels = rng.integers(0, c, n)
    order = np.stack([rng.permutation(n) for _ in range(2)]).astype(np.int64)
    params = (
        rng.normal(0, 0.1, (h, d)), np.zeros(h),
        rng.normal(0, 0.1, (c, h)), np.zeros(c),
    )
    return params, x, labels, order


def bench_sgd(repeats):
    (w1, b1, w2, b2), x, labels, order = make_train_inputs()

    outs = {}
    for name, mod in (("numba", _kernels_jit), ("numpy", _kernels_np)):
        p = [a.copy() for a in (w1, b1, w2, b2)]
        mod.sgd_train(*p, x, labels, order, 32, 0.05)  # warm-up/compile
        outs[name] = p

        def run(mod=mod):
            q = [a.copy() for a in (w1, b1, w2, b2)]
            mod.sgd_train(*q, x, labels, order, 32, 0.05)

        print(f"  sgd_train[{name}]: {timeit(run, repeats) * 1e3:8.3f} ms")
    err = max(np.abs(a - b).max() for a, b in zip(outs["numba"], outs["numpy"]))
    print(f"  backends agree to {err:.2e}")
    assert err < 1e-9


def bench_jacobi(repeats, n=300):
    rng = np.random.default_rng(1)
    a = rng.normal(size=(n, n))
    a = (a + a.T) / 2

    results = {}
    for name, mod in (("numba", _kernels_jit), ("numpy", _kernels_np)):
        mod.jacobi_eigh(np.eye(4), 1e-12, 100)  # warm-up/compile
        results[name] = mod.jacobi_eigh(a, 1e-12, 100)
        print(f"  jacobi_eigh[{name}] {n}x{n}: "
              f"{timeit(lambda mod=mod: mod.jacobi_eigh(a, 1e-12, 100), repeats):8.3f} s")
    va, vb = np.sort(results["numba"][0]), np.sort(results["numpy"][0])
    err = np.abs(va - vb).max()
    print(f"  eigenvalues agree to {err:.2e}")
    assert err < 1e-8


def bench_silhouette(repeats):
    rng = np.random.default_rng(2)
    points = rng.normal(size=(200, 3))
    flags = rng.random(200) < 0.4

    vals = {}
    for name, mod in (("numba", _kernels_jit), ("numpy", _kernels_np)):
        vals[name] = mod.silhouette_two(points, flags)  # warm-up/compile

        def run(mod=mod):
            mod.silhouette_two(points, flags)

        print(f"  silhouette_two[{name}] n=200: {timeit(run, repeats) * 1e3:8.3f} ms")
    err = abs(vals["numba"] - vals["numpy"])
    print(f"  backends agree to {err:.2e}")
    assert err < 1e-10


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--repeats", type=int, default=5)
    args = parser.parse_args()

    print("sgd_train (80 samples, 2 epochs, batch 32)")
    bench_sgd(args.repeats)
    print("jacobi_eigh (trajectory-PCA size)")
    bench_jacobi(max(1, args.repeats // 2))
    print("silhouette_two")
    bench_silhouette(args.repeats)


if __name__ == "__main__":
    main()
