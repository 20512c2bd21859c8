"""Compare the compiled kernels against the pure numpy fallback.

Run:  python3 benchmarks/bench_kernels.py
"""

import time

import numpy as np

import rwass._kernels_py as pure
from rwass._backend import COMPILED, kernels
from rwass.fields import ScalarGrid, add_noise, neighbor_matrix, sweep_order, synth_hills
from rwass.regions import GroundParams, _BG_CODE, _pack_side, build_region_aware


def timeit(fn, repeat=5):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def bench_sweep(dims=(192, 192)):
    grid = add_noise(synth_hills(dims, seed=7, n_hills=6), 0.05, seed=8)
    nbr = neighbor_matrix(grid)
    order = sweep_order(grid, "max")
    pos = np.empty(grid.size, dtype=np.int64)
    pos[order] = np.arange(grid.size)
    t_pure = timeit(lambda: pure.sweep(nbr, order, pos))
    t_fast = timeit(lambda: kernels.sweep(nbr, order, pos))
    a = pure.sweep(nbr, order, pos)
    b = kernels.sweep(nbr, order, pos)
    assert all(np.array_equal(x, y) for x, y in zip(a, b))
    return t_pure, t_fast


def bench_cost_matrix(dims=(64, 64)):
    ga = add_noise(synth_hills(dims, seed=3, n_hills=8), 0.1, seed=4)
    gb = add_noise(synth_hills(dims, seed=5, n_hills=8), 0.1, seed=6)
    A = build_region_aware(ga, simplify_ratio=0.01, lam=0.1)
    B = build_region_aware(gb, simplify_ratio=0.01, lam=0.1)
    params = GroundParams(lam=0.1)
    sa = _pack_side(A.regions)
    sb = _pack_side(B.regions)
    args = (
        sa[0], sa[1], sa[2], sa[3], sa[5], sa[6], sa[7],
        sb[0], sb[1], sb[2], sb[3], sb[5], sb[6], sb[7],
        params.q, _BG_CODE[params.background],
    )
    t_pure = timeit(lambda: pure.cost_matrix(*args), repeat=3)
    t_fast = timeit(lambda: kernels.cost_matrix(*args), repeat=3)
    mp = pure.cost_matrix(*args)
    mf = kernels.cost_matrix(*args)
    gap = np.max(np.abs(mp - mf) / np.maximum(np.abs(mp), 1e-300))
    assert gap < 1e-12, gap
    return t_pure, t_fast, mp.shape


def main():
    print(f"active backend: {'compiled' if COMPILED else 'pure (build the extension first)'}")
    tp, tf = bench_sweep()
    print(f"sweep 192x192:        pure {tp * 1e3:8.1f} ms   fast {tf * 1e3:8.1f} ms   x{tp / tf:.1f}")
    tp, tf, shape = bench_cost_matrix()
    print(f"cost matrix {shape}: pure {tp * 1e3:8.1f} ms   fast {tf * 1e3:8.1f} ms   x{tp / tf:.1f}")


if __name__ == "__main__":
    main()
