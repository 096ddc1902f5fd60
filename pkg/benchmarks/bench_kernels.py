"""Time every hot kernel under numba and under the pure-numpy fallback.

    python benchmarks/bench_kernels.py [--repeat 20] [--rows 40 --cols 24]

The numba column is only filled when numba imports and
``TILEMP_DISABLE_NUMBA`` is unset.  Compilation happens once, before timing.
"""
import argparse
import time

import numpy as np

from tilemp import _accel
from tilemp.floorplan import LayoutSpec, build_grid


def cases(g, rng):
    n = g.n
    cost = rng.integers(0, 2, size=n).astype(np.int8)
    allowed = rng.random(n) < 0.85
    sources = np.zeros(n, dtype=np.bool_)
    sources[rng.choice(np.flatnonzero(allowed), size=4, replace=False)] = True
    cost[sources] = 0
    h = _accel.NUMPY_KERNELS["zero_one_bfs"](g.indptr, g.indices, cost, allowed, sources)
    mask = rng.random(n) < 0.6
    avail = g.is_data.copy()
    seed = int(np.flatnonzero(avail)[0])
    ports = np.arange(50, dtype=np.int64)
    L = rng.integers(0, 20, size=ports.size).astype(np.int64)
    return {
        "bfs_all_pairs": lambda f: f(g.indptr, g.indices, n),
        "zero_one_bfs": lambda f: f(g.indptr, g.indices, cost, allowed, sources),
        "tight_hops": lambda f: f(g.indptr, g.indices, cost, allowed, sources, h),
        "components": lambda f: f(g.indptr, g.indices, mask),
        "grow_cluster": lambda f: f(g.dist, avail, seed, 60),
        "nearest_avail": lambda f: f(g.dist[seed], avail),
        "schedule_ports": lambda f: f(np.zeros(ports.size, dtype=np.int64), np.ones(ports.size, dtype=np.bool_),
                                      np.int64(11), np.int64(11), L, np.int64(0), 30, False),
    }


def best_of(call, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        call()
        times.append(time.perf_counter() - t0)
    return min(times)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--rows", type=int, default=40)
    ap.add_argument("--cols", type=int, default=24)
    ap.add_argument("--repeat", type=int, default=20)
    args = ap.parse_args(argv)
    g = build_grid(LayoutSpec(args.rows, args.cols, 0.5, num_ports=50))
    table = cases(g, np.random.default_rng(0))
    print(f"grid {args.rows}x{args.cols} ({g.n} tiles), backend {_accel.backend()}, best of {args.repeat}")
    print(f"{'kernel':<16}{'numpy (ms)':>12}{'numba (ms)':>12}{'speedup':>10}")
    for name, run in table.items():
        slow = best_of(lambda: run(_accel.NUMPY_KERNELS[name]), args.repeat)
        if _accel.HAS_NUMBA:
            fast_fn = _accel.ACTIVE_KERNELS[name]
            run(fast_fn)  # compile
            fast = best_of(lambda: run(fast_fn), args.repeat)
            print(f"{name:<16}{slow * 1e3:>12.3f}{fast * 1e3:>12.3f}{slow / fast:>9.1f}x")
        else:
            print(f"{name:<16}{slow * 1e3:>12.3f}{'-':>12}{'-':>10}")


if __name__ == "__main__":
    main()
