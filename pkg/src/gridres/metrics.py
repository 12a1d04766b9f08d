"""Resilience parameters and the weighted composite score.

Five parameters are computed per network configuration:

* path variability        PV = 0.1*N_ip + 0.4*N_ic + 0.5*N_cc
* critical loads served   N_cls = P_cl / P_tcl
* average rating of service
* percolation threshold   (see percolation.py)
* high-centrality node count

Raw parameters are min-max normalized and folded into a single score by a
weight vector, derived either from an AHP pairwise-comparison matrix or the
built-in default.  A composite score compares several configurations:
R_c = R_max + (1 - R_max) * sum(w_a * R_a) over the non-maximal ones.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .feeder import GridNetwork, Subgraph
from .kernels import inv_distance_sum, removal_inv_distance_sums


class MetricDomainError(ValueError):
    """Input outside a metric's mathematical domain."""


class AhpConsistencyError(MetricDomainError):
    """Pairwise comparison matrix fails the consistency-ratio check."""


# Weights of the three supply-scenario categories in path variability.
ISOLATED_PATH_WEIGHT = 0.1
ISOLATED_COMBINATION_WEIGHT = 0.4
CONNECTED_COMBINATION_WEIGHT = 0.5

# Random consistency index by matrix order (Saaty).
_RANDOM_INDEX = {1: 0.0, 2: 0.0, 3: 0.58, 4: 0.90, 5: 1.12, 6: 1.24, 7: 1.32, 8: 1.41, 9: 1.45, 10: 1.49}

CONSISTENCY_LIMIT = 0.1

METRIC_NAMES = ("pv_cl", "n_cls", "a_ros", "p_m", "n_hc")


@dataclass(frozen=True)
class PathCounts:
    n_ip: int = 0  # isolated paths: one source, no alternative
    n_ic: int = 0  # isolated combinations: all critical loads fed by separate islands
    n_cc: int = 0  # connected combinations: all fed inside one multi-source component

    def __post_init__(self):
        if min(self.n_ip, self.n_ic, self.n_cc) < 0:
            raise MetricDomainError("path counts must be non-negative")


@dataclass(frozen=True)
class MetricVector:
    """The five resilience parameters on their raw scales."""

    pv_cl: float
    n_cls: float
    a_ros: float
    p_m: float
    n_hc: float

    def __post_init__(self):
        if not 0.0 <= self.n_cls <= 1.0:
            raise MetricDomainError(f"n_cls must lie in [0, 1], got {self.n_cls}")
        if not 0.0 <= self.p_m <= 1.0:
            raise MetricDomainError(f"p_m must lie in [0, 1], got {self.p_m}")
        if self.pv_cl < 0 or self.n_hc < 0:
            raise MetricDomainError("pv_cl and n_hc must be non-negative")

    def as_array(self) -> np.ndarray:
        return np.array([self.pv_cl, self.n_cls, self.a_ros, self.p_m, self.n_hc])


@dataclass(frozen=True)
class AhpWeights:
    w: tuple[float, ...]
    consistency_ratio: float = 0.0

    def __post_init__(self):
        if any(x <= 0 for x in self.w):
            raise MetricDomainError("all weights must be positive")
        if abs(sum(self.w) - 1.0) > 1e-9:
            raise MetricDomainError("weights must sum to 1")
        if self.consistency_ratio < 0:
            raise MetricDomainError("consistency ratio must be non-negative")


# Used when no pairwise matrix is supplied; prioritizes critical-load service.
DEFAULT_WEIGHTS = AhpWeights((0.2, 0.3, 0.15, 0.2, 0.15))


def _sources_in(sub: Subgraph, net: GridNetwork, active_der_nodes=None, substation_first=True):
    """Supply points present in the subgraph: (node id, rating) pairs.

    active_der_nodes limits which DER units count as sources (None = all).
    Ordering is substation first by default, DER units first otherwise.
    """
    present = set(sub.nodes)
    if active_der_nodes is None:
        active = [d for d in net.ders]
    else:
        wanted = set(active_der_nodes)
        active = [d for d in net.ders if d.node in wanted]
    ders = [(d.node, d.rating) for d in active if d.node in present]
    subs = [(net.source_node, net.source_rating)] if net.source_node in present else []
    return subs + ders if substation_first else ders + subs


def classify_paths(sub: Subgraph, net: GridNetwork, active_der_nodes=None) -> PathCounts:
    """Categorize how critical loads are supplied in the subgraph.

    All critical loads covered inside one component holding at least two
    sources -> one connected combination.  All covered but spread over
    separate components -> one isolated combination.  Otherwise every
    critical load sharing a component with exactly one source counts as an
    isolated path; unreachable loads contribute nothing.
    """
    criticals = [nid for nid in net.critical_nodes]
    if not criticals:
        return PathCounts()
    sources = _sources_in(sub, net, active_der_nodes)
    source_nodes = {nid for nid, _ in sources}
    comps = sub.components()
    comp_of = {}
    for ci, comp in enumerate(comps):
        for nid in comp:
            comp_of[nid] = ci
    src_count = [len(comp & source_nodes) for comp in comps]

    covered = [cl for cl in criticals if cl in comp_of and src_count[comp_of[cl]] >= 1]
    all_covered = len(covered) == len(criticals)
    if all_covered:
        comp_ids = {comp_of[cl] for cl in criticals}
        if len(comp_ids) == 1:
            ci = comp_ids.pop()
            if src_count[ci] >= 2:
                return PathCounts(n_cc=1)
            return PathCounts(n_ip=len(criticals))
        return PathCounts(n_ic=1)
    n_ip = sum(1 for cl in covered if src_count[comp_of[cl]] == 1)
    return PathCounts(n_ip=n_ip)


def path_variability(pc: PathCounts) -> float:
    """PV = 0.1*N_ip + 0.4*N_ic + 0.5*N_cc (linear in the counts)."""
    return (
        ISOLATED_PATH_WEIGHT * pc.n_ip
        + ISOLATED_COMBINATION_WEIGHT * pc.n_ic
        + CONNECTED_COMBINATION_WEIGHT * pc.n_cc
    )


def cls_ratio(p_cl: float, p_tcl: float) -> float:
    """Fraction of critical demand served, clamped to [0, 1]."""
    if p_tcl <= 0:
        raise MetricDomainError(f"total critical demand must be positive, got {p_tcl}")
    return min(1.0, max(0.0, p_cl / p_tcl))


def rating_of_service(paths) -> float:
    """Sum over supply paths of (R_source - R_cl) / R_source.

    Each path is a (source_rating, critical_rating) pair; an overloaded
    path (critical rating above the source rating) contributes negatively.
    """
    total = 0.0
    for r_source, r_cl in paths:
        if r_source <= 0:
            raise MetricDomainError(f"source rating must be positive, got {r_source}")
        total += (r_source - r_cl) / r_source
    return total


def average_ros(n_cl: int, n_tcl: int, ros: float, n_pc: int) -> float:
    """(served/total critical loads) * (rating of service / path count)."""
    if n_tcl <= 0:
        raise MetricDomainError("total critical load count must be positive")
    if n_pc <= 0:
        raise MetricDomainError("path count must be positive")
    return (n_cl / n_tcl) * (ros / n_pc)


def enumerate_supply_paths(
    sub: Subgraph, net: GridNetwork, active_der_nodes=None, substation_first=True
):
    """One (source_rating, reachable-critical-demand) pair per supply point
    that can reach at least one critical load.  Feeds rating_of_service."""
    criticals = set(net.critical_nodes)
    paths = []
    for node, rating in _sources_in(sub, net, active_der_nodes, substation_first):
        reach = sub.reachable_from(node)
        served = criticals & reach
        if served:
            paths.append((rating, sum(net.node_by_id[cl].demand for cl in served)))
    return paths


def network_efficiency(sub: Subgraph) -> float:
    """E = (1/(N(N-1))) * sum over ordered pairs of 1/d_ij, 1/inf = 0."""
    n = len(sub.nodes)
    if n < 2:
        raise MetricDomainError(f"network efficiency needs at least 2 nodes, got {n}")
    indptr, indices = sub.csr
    return inv_distance_sum(indptr, indices, n, -1) / (n * (n - 1))


def information_centrality(sub: Subgraph, node_id: int) -> float:
    """Relative efficiency drop when the node is removed:
    C_m = (E[G] - E[G - m]) / E[G].  Negative values are legal (removing a
    peripheral node can raise the mean inverse distance)."""
    n = len(sub.nodes)
    if n < 3:
        raise MetricDomainError("information centrality needs at least 3 nodes")
    if node_id not in sub.index_of:
        raise MetricDomainError(f"node {node_id} not in subgraph")
    base = network_efficiency(sub)
    if base == 0.0:
        raise MetricDomainError("network efficiency is zero; centrality undefined")
    indptr, indices = sub.csr
    m = sub.index_of[node_id]
    reduced = inv_distance_sum(indptr, indices, n, m) / ((n - 1) * (n - 2))
    return (base - reduced) / base


def high_centrality_count(sub: Subgraph, std_factor: float = 1.0) -> int:
    """Nodes whose information centrality exceeds mean + std_factor * std.

    Degenerate graphs (fewer than 3 nodes, or zero efficiency, where the
    centrality is undefined) count zero high-centrality nodes.
    """
    n = len(sub.nodes)
    if n < 3:
        return 0
    indptr, indices = sub.csr
    base_sum = inv_distance_sum(indptr, indices, n, -1)
    if base_sum == 0.0:
        return 0
    base = base_sum / (n * (n - 1))
    reduced = removal_inv_distance_sums(indptr, indices, n) / ((n - 1) * (n - 2))
    cent = (base - reduced) / base
    threshold = cent.mean() + std_factor * cent.std()
    return int(np.sum(cent > threshold))


def ahp_weights(pairwise) -> AhpWeights:
    """Principal-eigenvector weights of a positive reciprocal matrix.

    CI = (lambda_max - n) / (n - 1), CR = CI / RI(n); matrices with
    CR > 0.1 are rejected as inconsistent.
    """
    a = np.asarray(pairwise, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise MetricDomainError("pairwise matrix must be square")
    n = a.shape[0]
    if n < 1 or n > max(_RANDOM_INDEX):
        raise MetricDomainError(f"matrix order must be in [1, {max(_RANDOM_INDEX)}]")
    if np.any(a <= 0):
        raise MetricDomainError("pairwise entries must be positive")
    if not np.allclose(np.diag(a), 1.0, atol=1e-9):
        raise MetricDomainError("diagonal entries must equal 1")
    if not np.allclose(a * a.T, 1.0, rtol=1e-6):
        raise MetricDomainError("matrix must be reciprocal: a_ji = 1/a_ij")

    eigvals, eigvecs = np.linalg.eig(a)
    k = int(np.argmax(eigvals.real))
    lam = float(eigvals[k].real)
    vec = np.abs(eigvecs[:, k].real)
    w = vec / vec.sum()
    ci = (lam - n) / (n - 1) if n > 1 else 0.0
    ci = max(ci, 0.0)
    ri = _RANDOM_INDEX[n]
    cr = 0.0 if ri == 0.0 else ci / ri
    if cr > CONSISTENCY_LIMIT:
        raise AhpConsistencyError(f"consistency ratio {cr:.4f} exceeds {CONSISTENCY_LIMIT}")
    return AhpWeights(tuple(w), cr)


def load_pairwise_matrix(text: str) -> np.ndarray:
    """Parse a pairwise matrix file: one row per line, entries separated by
    whitespace, fractions like 1/3 allowed."""
    rows = []
    for raw in text.splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        rows.append([float(Fraction(tok)) for tok in line.split()])
    if not rows:
        raise MetricDomainError("empty pairwise matrix file")
    width = len(rows[0])
    if any(len(r) != width for r in rows) or len(rows) != width:
        raise MetricDomainError("pairwise matrix must be square")
    return np.array(rows, dtype=float)


def normalize_metrics(raws) -> list[np.ndarray]:
    """Component-wise min-max scaling across a collection of metric vectors.

    A component with no spread (max == min) maps to the neutral value 0.5.
    """
    mat = np.array([r.as_array() if isinstance(r, MetricVector) else np.asarray(r, float) for r in raws])
    if mat.size == 0:
        raise MetricDomainError("need at least one metric vector")
    lo = mat.min(axis=0)
    hi = mat.max(axis=0)
    span = hi - lo
    out = np.full_like(mat, 0.5)
    nz = span > 0
    out[:, nz] = (mat[:, nz] - lo[nz]) / span[nz]
    return [row for row in out]


def resilience_score(normalized, weights: AhpWeights = DEFAULT_WEIGHTS) -> float:
    """Weighted sum of normalized parameters; lands in [0, 1]."""
    vec = np.asarray(normalized, dtype=float)
    if vec.shape != (len(weights.w),):
        raise MetricDomainError(f"expected a {len(weights.w)}-vector, got shape {vec.shape}")
    return float(vec @ np.asarray(weights.w))


def composite_score(scores, weights=None) -> float:
    """R_c = R_max + (1 - R_max) * sum(w_a * R_a) over non-maximal configs.

    weights defaults to equal shares summing to 1 over the non-maximal
    configurations; a single configuration reduces to its own score.
    """
    scores = [float(s) for s in scores]
    if not scores:
        raise MetricDomainError("composite score needs at least one configuration")
    k = int(np.argmax(scores))
    r_max = scores[k]
    others = scores[:k] + scores[k + 1 :]
    if not others:
        return r_max
    if weights is None:
        weights = [1.0 / len(others)] * len(others)
    weights = [float(w) for w in weights]
    if len(weights) != len(others):
        raise MetricDomainError("one weight per non-maximal configuration required")
    if sum(weights) > 1.0 + 1e-9:
        raise MetricDomainError("configuration weights must sum to at most 1")
    return r_max + (1.0 - r_max) * sum(w * r for w, r in zip(weights, others))


def dg_feasible(net: GridNetwork, dispatch, served_kva: float = 0.0) -> bool:
    """Check DER dispatch box limits and the capacity proxy.

    dispatch maps a DER node to its (P, Q) setpoint; only dispatched units
    count as active.  Feasible when every setpoint respects its unit's
    limits and the served load does not exceed the source rating plus the
    active DER ratings.
    """
    by_node = {d.node: d for d in net.ders}
    capacity = net.source_rating
    for node, (p, q) in dispatch.items():
        unit = by_node.get(node)
        if unit is None:
            raise MetricDomainError(f"dispatch references unknown DER node {node}")
        if not (unit.p_min <= p <= unit.p_max and unit.q_min <= q <= unit.q_max):
            return False
        capacity += unit.rating
    return served_kva <= capacity
