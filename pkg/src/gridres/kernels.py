"""Hot numeric kernels with optional numba acceleration.

The two inner loops that dominate runtime are bond-percolation cluster
sampling (union-find over thousands of Monte-Carlo realizations) and
all-pairs BFS used by the efficiency/centrality metrics.  Both are written
as plain array-loop functions so the same code runs either JIT-compiled by
numba or as-is under the interpreter.

Backend selection: set ``GRIDRES_NUMBA=0`` in the environment to force the
pure-Python/numpy path (useful for debugging and for the benchmark in
``benchmarks/kernel_bench.py``).  Both paths are numerically identical.
"""

from __future__ import annotations

import os

import numpy as np

NUMBA_ENABLED = os.environ.get("GRIDRES_NUMBA", "1").lower() not in ("0", "false", "no")

if NUMBA_ENABLED:
    try:
        from numba import njit
    except ImportError:  # pragma: no cover
        NUMBA_ENABLED = False


def _largest_cluster_sizes(edges_u, edges_v, n_nodes, mask):
    """Largest-cluster size per Monte-Carlo trial.

    ``mask[t, e]`` says whether edge ``e`` is retained in trial ``t``.
    Union-find with path halving and union by size; O(E alpha(N)) per trial.
    """
    n_trials = mask.shape[0]
    n_edges = edges_u.shape[0]
    out = np.empty(n_trials, np.int64)
    parent = np.empty(n_nodes, np.int64)
    size = np.empty(n_nodes, np.int64)
    for t in range(n_trials):
        for i in range(n_nodes):
            parent[i] = i
            size[i] = 1
        best = 1 if n_nodes > 0 else 0
        for e in range(n_edges):
            if not mask[t, e]:
                continue
            ru = edges_u[e]
            while parent[ru] != ru:
                parent[ru] = parent[parent[ru]]
                ru = parent[ru]
            rv = edges_v[e]
            while parent[rv] != rv:
                parent[rv] = parent[parent[rv]]
                rv = parent[rv]
            if ru != rv:
                if size[ru] < size[rv]:
                    ru, rv = rv, ru
                parent[rv] = ru
                size[ru] += size[rv]
                if size[ru] > best:
                    best = size[ru]
        out[t] = best
    return out


def _inv_distance_sum(indptr, indices, n_nodes, skip):
    """Sum of 1/d(s, v) over ordered node pairs, by BFS from every source.

    ``skip`` excludes one node entirely (-1 keeps all).  Unreachable pairs
    contribute zero (1/inf convention).
    """
    total = 0.0
    dist = np.empty(n_nodes, np.int64)
    queue = np.empty(n_nodes, np.int64)
    for s in range(n_nodes):
        if s == skip:
            continue
        for i in range(n_nodes):
            dist[i] = -1
        dist[s] = 0
        head = 0
        tail = 0
        queue[tail] = s
        tail += 1
        while head < tail:
            u = queue[head]
            head += 1
            d = dist[u] + 1
            for k in range(indptr[u], indptr[u + 1]):
                v = indices[k]
                if v == skip or dist[v] >= 0:
                    continue
                dist[v] = d
                queue[tail] = v
                tail += 1
                total += 1.0 / d
    return total


if NUMBA_ENABLED:
    largest_cluster_sizes = njit(cache=True)(_largest_cluster_sizes)
    inv_distance_sum = njit(cache=True)(_inv_distance_sum)
else:
    largest_cluster_sizes = _largest_cluster_sizes
    inv_distance_sum = _inv_distance_sum


def _removal_inv_distance_sums(indptr, indices, n_nodes):
    """Inverse-distance sum of the graph with node m removed, for every m."""
    out = np.empty(n_nodes, np.float64)
    for m in range(n_nodes):
        out[m] = inv_distance_sum(indptr, indices, n_nodes, m)
    return out


if NUMBA_ENABLED:
    removal_inv_distance_sums = njit(cache=True)(_removal_inv_distance_sums)
else:
    removal_inv_distance_sums = _removal_inv_distance_sums


def edge_arrays(n_nodes: int, edges) -> tuple[np.ndarray, np.ndarray]:
    """Edge list -> two contiguous int64 endpoint arrays (0-based indices)."""
    if len(edges) == 0:
        empty = np.empty(0, np.int64)
        return empty, empty.copy()
    arr = np.asarray(edges, dtype=np.int64)
    return np.ascontiguousarray(arr[:, 0]), np.ascontiguousarray(arr[:, 1])


def csr_adjacency(n_nodes: int, edges) -> tuple[np.ndarray, np.ndarray]:
    """Undirected edge list (0-based index pairs) -> CSR (indptr, indices)."""
    deg = np.zeros(n_nodes, np.int64)
    for u, v in edges:
        deg[u] += 1
        deg[v] += 1
    indptr = np.zeros(n_nodes + 1, np.int64)
    np.cumsum(deg, out=indptr[1:])
    indices = np.empty(indptr[-1], np.int64)
    fill = indptr[:-1].copy()
    for u, v in edges:
        indices[fill[u]] = v
        fill[u] += 1
        indices[fill[v]] = u
        fill[v] += 1
    return indptr, indices
