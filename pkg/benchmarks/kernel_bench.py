"""Times the hot kernels under both backends: numba JIT vs plain Python/numpy.

Run from the repository root:

    python benchmarks/kernel_bench.py

The JIT path is what the environment uses by default; GRIDRES_NUMBA=0
selects the interpreted path everywhere.  Both produce identical numbers,
so this script only reports timing.
"""

from __future__ import annotations

import sys
import time
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from gridres import kernels  # noqa: E402
from gridres.kernels import (  # noqa: E402
    _inv_distance_sum,
    _largest_cluster_sizes,
    csr_adjacency,
    edge_arrays,
)

if not kernels.NUMBA_ENABLED:
    print("numba backend unavailable or disabled; nothing to compare")
    sys.exit(0)

from numba import njit  # noqa: E402

jit_clusters = njit(cache=True)(_largest_cluster_sizes)
jit_inv = njit(cache=True)(_inv_distance_sum)


def lattice(n):
    edges = []
    for r in range(n):
        for c in range(n):
            i = r * n + c
            if c + 1 < n:
                edges.append((i, i + 1))
            if r + 1 < n:
                edges.append((i, i + n))
    return n * n, edges


def timeit(fn, *args, repeats=5):
    best = np.inf
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def main():
    rng = np.random.default_rng(0)
    n_nodes, edges = lattice(20)
    eu, ev = edge_arrays(n_nodes, [(u, v) for u, v in edges])
    mask = np.ascontiguousarray(rng.random((500, len(eu))) < 0.5)

    jit_clusters(eu, ev, n_nodes, mask)  # compile outside the timer
    t_jit = timeit(jit_clusters, eu, ev, n_nodes, mask)
    t_py = timeit(_largest_cluster_sizes, eu, ev, n_nodes, mask, repeats=1)
    check = np.array_equal(
        jit_clusters(eu, ev, n_nodes, mask), _largest_cluster_sizes(eu, ev, n_nodes, mask)
    )
    print(f"percolation clusters (500 trials, 20x20 lattice)")
    print(f"  numba {t_jit * 1e3:9.2f} ms   numpy {t_py * 1e3:9.2f} ms   "
          f"speedup {t_py / t_jit:6.1f}x   identical={check}")

    indptr, indices = csr_adjacency(n_nodes, edges)
    jit_inv(indptr, indices, n_nodes, -1)
    t_jit = timeit(jit_inv, indptr, indices, n_nodes, -1)
    t_py = timeit(_inv_distance_sum, indptr, indices, n_nodes, -1, repeats=1)
    check = jit_inv(indptr, indices, n_nodes, -1) == _inv_distance_sum(indptr, indices, n_nodes, -1)
    print(f"all-pairs inverse distances (400 nodes)")
    print(f"  numba {t_jit * 1e3:9.2f} ms   numpy {t_py * 1e3:9.2f} ms   "
          f"speedup {t_py / t_jit:6.1f}x   identical={check}")


if __name__ == "__main__":
    main()
