"""Bond-percolation strength, susceptibility, and threshold estimation.

Strength:        P_inf(p) = (1/(N T)) * sum_i S_i(p)
Susceptibility:  chi(p) = ((1/(N^2 T)) * sum_i S_i(p)^2 - P_inf^2) / P_inf
Threshold:       p_m = argmax_p chi(p) over a probability grid

S_i(p) is the largest cluster size in realization i when each edge is kept
independently with probability p.  All realizations for one seed reuse the
same uniform draws, so the strength curve is exactly monotone in p (common
random numbers) and results are reproducible regardless of call order.
"""

from __future__ import annotations

import numpy as np

from .feeder import Subgraph
from .kernels import edge_arrays, largest_cluster_sizes
from .metrics import MetricDomainError

# Defaults used when the caller does not pin the grid or sample count.
DEFAULT_P_GRID = tuple(np.round(np.arange(0.0, 1.0 + 1e-12, 0.02), 10))
DEFAULT_TRIALS = 200


def _uniform_draws(sub: Subgraph, trials: int, seed) -> tuple[int, np.ndarray, np.ndarray, np.ndarray]:
    n = len(sub.nodes)
    if n == 0:
        raise MetricDomainError("percolation on an empty graph is undefined")
    if trials < 1:
        raise MetricDomainError("need at least one Monte-Carlo realization")
    eu, ev = edge_arrays(n, sub.edge_index_pairs)
    u = np.random.default_rng(seed).random((trials, len(eu)))
    return n, eu, ev, u


def cluster_size_samples(sub: Subgraph, p: float, trials: int, seed) -> np.ndarray:
    """Largest-cluster sizes of ``trials`` independent bond-retention draws."""
    if not 0.0 <= p <= 1.0:
        raise MetricDomainError(f"retention probability must lie in [0, 1], got {p}")
    n, eu, ev, u = _uniform_draws(sub, trials, seed)
    return largest_cluster_sizes(eu, ev, n, np.ascontiguousarray(u < p))


def percolation_strength(sub: Subgraph, p: float, trials: int = DEFAULT_TRIALS, seed=0) -> float:
    sizes = cluster_size_samples(sub, p, trials, seed)
    return float(sizes.mean() / len(sub.nodes))


def susceptibility(sub: Subgraph, p: float, trials: int = DEFAULT_TRIALS, seed=0) -> float:
    sizes = cluster_size_samples(sub, p, trials, seed)
    return _chi(sizes, len(sub.nodes))


def _chi(sizes: np.ndarray, n: int) -> float:
    p_inf = sizes.mean() / n
    second = float((sizes.astype(np.float64) ** 2).mean()) / n**2
    return (second - p_inf**2) / p_inf


def percolation_threshold(
    sub: Subgraph, p_grid=DEFAULT_P_GRID, trials: int = DEFAULT_TRIALS, seed=0
) -> float:
    """Grid argmax of susceptibility; ties resolve to the smallest p."""
    grid = [float(p) for p in p_grid]
    if not grid or any(b <= a for a, b in zip(grid, grid[1:])):
        raise MetricDomainError("p_grid must be a non-empty increasing sequence")
    if grid[0] < 0.0 or grid[-1] > 1.0:
        raise MetricDomainError("p_grid values must lie in [0, 1]")
    n, eu, ev, u = _uniform_draws(sub, trials, seed)
    best_p = grid[0]
    best_chi = -np.inf
    for p in grid:
        sizes = largest_cluster_sizes(eu, ev, n, np.ascontiguousarray(u < p))
        chi = _chi(sizes, n)
        if chi > best_chi:
            best_chi = chi
            best_p = p
    return best_p
