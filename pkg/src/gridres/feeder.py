"""Distribution feeder model: topology, switches, DERs, and file ingestion.

Feeder file format (line oriented, ``#`` starts a comment):

    node <id> <source|load|junction> <demand_kVA> [critical]
    branch <id> <from> <to> [switch <idx|fixed> <nc|no>]
    der <node> <rating_kVA> <pmin> <pmax> <qmin> <qmax>
    source_rating <kVA>

A ``switch <idx>`` clause with an integer index in [0, 9] marks a remotely
controllable device driven by the 10-bit switch action; ``switch fixed``
marks a switch device frozen in its normal (nc/no) state.

Scenario file format:

    name <string>
    disable_node <id>
    disable_branch <id>
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .kernels import csr_adjacency

SCENARIO_NAMES = ("flood", "wildfire", "hurricane", "short_circuit", "custom")


class FeederError(ValueError):
    """Invalid feeder or scenario data; carries a line number when known."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


@dataclass(frozen=True)
class NodeRecord:
    id: int
    kind: str  # source | load | junction
    demand: float  # kVA, 0 for junctions
    is_critical: bool = False


@dataclass(frozen=True)
class BranchRecord:
    id: int
    from_node: int
    to_node: int
    has_switch: bool = False
    switch_index: int | None = None  # in [0, 9] for controllable devices
    normally_closed: bool = True


@dataclass(frozen=True)
class DerRecord:
    node: int
    rating: float  # kVA
    p_min: float
    p_max: float
    q_min: float
    q_max: float


@dataclass(frozen=True)
class GridNetwork:
    nodes: tuple[NodeRecord, ...]
    branches: tuple[BranchRecord, ...]
    ders: tuple[DerRecord, ...]
    source_rating: float

    @cached_property
    def node_by_id(self) -> dict[int, NodeRecord]:
        return {n.id: n for n in self.nodes}

    @cached_property
    def branch_by_id(self) -> dict[int, BranchRecord]:
        return {b.id: b for b in self.branches}

    @cached_property
    def source_node(self) -> int:
        return next(n.id for n in self.nodes if n.kind == "source")

    @cached_property
    def critical_nodes(self) -> tuple[int, ...]:
        return tuple(n.id for n in self.nodes if n.is_critical)

    @cached_property
    def switch_branches(self) -> dict[int, int]:
        """switch_index -> branch id for the controllable devices."""
        return {b.switch_index: b.id for b in self.branches if b.switch_index is not None}

    @cached_property
    def normal_switch_state(self) -> tuple[int, ...]:
        """10-bit vector of the normal (reset) positions of switches 0..9."""
        bits = [0] * 10
        for b in self.branches:
            if b.switch_index is not None:
                bits[b.switch_index] = 1 if b.normally_closed else 0
        return tuple(bits)

    @property
    def total_demand(self) -> float:
        return sum(n.demand for n in self.nodes)

    @property
    def total_critical_demand(self) -> float:
        return sum(n.demand for n in self.nodes if n.is_critical)

    @property
    def load_count(self) -> int:
        return sum(1 for n in self.nodes if n.kind == "load")


@dataclass(frozen=True)
class Scenario:
    """A calamity footprint: grid elements knocked out while it is active."""

    name: str
    disabled_nodes: frozenset[int] = field(default_factory=frozenset)
    disabled_branches: frozenset[int] = field(default_factory=frozenset)
    description: str = ""

    def validate(self, net: GridNetwork) -> None:
        for nid in self.disabled_nodes:
            if nid not in net.node_by_id:
                raise FeederError(f"scenario {self.name!r} disables unknown node {nid}")
        for bid in self.disabled_branches:
            if bid not in net.branch_by_id:
                raise FeederError(f"scenario {self.name!r} disables unknown branch {bid}")


EMPTY_SCENARIO = Scenario(name="custom")


@dataclass(frozen=True)
class Subgraph:
    """Immutable view of the energized network: surviving nodes and closed,
    undamaged branches.  Node ids keep their feeder labels; index-based
    accessors are provided for the numeric kernels."""

    nodes: tuple[int, ...]
    edges: tuple[tuple[int, int, int], ...]  # (branch_id, from, to)

    @cached_property
    def index_of(self) -> dict[int, int]:
        return {nid: i for i, nid in enumerate(self.nodes)}

    @cached_property
    def edge_index_pairs(self) -> tuple[tuple[int, int], ...]:
        idx = self.index_of
        return tuple((idx[u], idx[v]) for _, u, v in self.edges)

    @cached_property
    def csr(self) -> tuple[np.ndarray, np.ndarray]:
        return csr_adjacency(len(self.nodes), self.edge_index_pairs)

    @cached_property
    def branch_ids(self) -> frozenset[int]:
        return frozenset(bid for bid, _, _ in self.edges)

    @cached_property
    def _component_sets(self) -> tuple[frozenset[int], ...]:
        indptr, indices = self.csr
        n = len(self.nodes)
        seen = np.zeros(n, dtype=bool)
        comps = []
        for s in range(n):
            if seen[s]:
                continue
            stack = [s]
            seen[s] = True
            comp = {self.nodes[s]}
            while stack:
                u = stack.pop()
                for k in range(indptr[u], indptr[u + 1]):
                    v = indices[k]
                    if not seen[v]:
                        seen[v] = True
                        comp.add(self.nodes[v])
                        stack.append(v)
            comps.append(frozenset(comp))
        return tuple(comps)

    def components(self) -> list[set[int]]:
        """Connected components as sets of node ids."""
        return [set(c) for c in self._component_sets]

    def reachable_from(self, node_id: int) -> frozenset[int]:
        """Node ids reachable from ``node_id`` (including itself)."""
        if node_id not in self.index_of:
            return frozenset()
        for comp in self._component_sets:
            if node_id in comp:
                return comp
        return frozenset((node_id,))

    def is_connected(self) -> bool:
        return len(self.nodes) <= 1 or len(self._component_sets) == 1


def _tokens(text: str):
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if line:
            yield lineno, line.split()


def _to_float(tok: str, lineno: int, what: str) -> float:
    try:
        return float(tok)
    except ValueError:
        raise FeederError(f"{what}: not a number: {tok!r}", lineno) from None


def _to_int(tok: str, lineno: int, what: str) -> int:
    try:
        return int(tok)
    except ValueError:
        raise FeederError(f"{what}: not an integer: {tok!r}", lineno) from None


def parse_feeder(text: str) -> GridNetwork:
    """Parse and validate a feeder description.

    Raises FeederError (with line number where applicable) on syntax errors,
    duplicate node ids, dangling branch endpoints, switch-index collisions,
    a missing or duplicated source node, or a feeder that is disconnected
    in its normal switch configuration.
    """
    nodes: list[NodeRecord] = []
    branches: list[BranchRecord] = []
    ders: list[DerRecord] = []
    source_rating: float | None = None
    node_ids: set[int] = set()
    branch_ids: set[int] = set()
    switch_indices: set[int] = set()
    branch_lines: dict[int, int] = {}
    der_lines: dict[int, int] = {}

    for lineno, toks in _tokens(text):
        kw = toks[0]
        if kw == "node":
            if len(toks) not in (4, 5):
                raise FeederError("node needs: node <id> <kind> <demand> [critical]", lineno)
            nid = _to_int(toks[1], lineno, "node id")
            kind = toks[2]
            if kind not in ("source", "load", "junction"):
                raise FeederError(f"unknown node kind {kind!r}", lineno)
            demand = _to_float(toks[3], lineno, "demand")
            if demand < 0:
                raise FeederError(f"negative demand for node {nid}", lineno)
            critical = False
            if len(toks) == 5:
                if toks[4] != "critical":
                    raise FeederError(f"unexpected token {toks[4]!r}", lineno)
                critical = True
            if nid in node_ids:
                raise FeederError(f"duplicate node id {nid}", lineno)
            node_ids.add(nid)
            nodes.append(NodeRecord(nid, kind, demand, critical))
        elif kw == "branch":
            if len(toks) not in (4, 7):
                raise FeederError(
                    "branch needs: branch <id> <from> <to> [switch <idx|fixed> <nc|no>]", lineno
                )
            bid = _to_int(toks[1], lineno, "branch id")
            u = _to_int(toks[2], lineno, "from node")
            v = _to_int(toks[3], lineno, "to node")
            if bid in branch_ids:
                raise FeederError(f"duplicate branch id {bid}", lineno)
            branch_ids.add(bid)
            if u == v:
                raise FeederError(f"branch {bid} is a self-loop at node {u}", lineno)
            has_switch = False
            switch_index: int | None = None
            normally_closed = True
            if len(toks) == 7:
                if toks[4] != "switch":
                    raise FeederError(f"unexpected token {toks[4]!r}", lineno)
                has_switch = True
                if toks[5] != "fixed":
                    switch_index = _to_int(toks[5], lineno, "switch index")
                    if not 0 <= switch_index <= 9:
                        raise FeederError(f"switch index {switch_index} outside [0, 9]", lineno)
                    if switch_index in switch_indices:
                        raise FeederError(f"switch index {switch_index} already assigned", lineno)
                    switch_indices.add(switch_index)
                if toks[6] == "nc":
                    normally_closed = True
                elif toks[6] == "no":
                    normally_closed = False
                else:
                    raise FeederError(f"switch state must be nc or no, got {toks[6]!r}", lineno)
            branch_lines[bid] = lineno
            branches.append(BranchRecord(bid, u, v, has_switch, switch_index, normally_closed))
        elif kw == "der":
            if len(toks) != 7:
                raise FeederError("der needs: der <node> <rating> <pmin> <pmax> <qmin> <qmax>", lineno)
            dnode = _to_int(toks[1], lineno, "der node")
            rating = _to_float(toks[2], lineno, "rating")
            pmin, pmax, qmin, qmax = (_to_float(t, lineno, "der limit") for t in toks[3:7])
            if rating <= 0:
                raise FeederError(f"der rating must be positive, got {rating}", lineno)
            if pmin > pmax or qmin > qmax:
                raise FeederError("der limits must satisfy pmin <= pmax and qmin <= qmax", lineno)
            der_lines[dnode] = lineno
            ders.append(DerRecord(dnode, rating, pmin, pmax, qmin, qmax))
        elif kw == "source_rating":
            if len(toks) != 2:
                raise FeederError("source_rating needs one value", lineno)
            source_rating = _to_float(toks[1], lineno, "source rating")
        else:
            raise FeederError(f"unknown directive {kw!r}", lineno)

    sources = [n for n in nodes if n.kind == "source"]
    if len(sources) != 1:
        raise FeederError(f"feeder must declare exactly one source node, found {len(sources)}")
    if source_rating is None:
        raise FeederError("missing source_rating directive")
    for b in branches:
        for end in (b.from_node, b.to_node):
            if end not in node_ids:
                raise FeederError(
                    f"branch {b.id} references unknown node {end}", branch_lines[b.id]
                )
    for d in ders:
        if d.node not in node_ids:
            raise FeederError(f"der references unknown node {d.node}", der_lines[d.node])

    net = GridNetwork(tuple(nodes), tuple(branches), tuple(ders), source_rating)
    if net.total_critical_demand > net.source_rating:
        raise FeederError(
            f"critical demand {net.total_critical_demand} exceeds source rating {net.source_rating}"
        )
    normal = effective_topology(net, net.normal_switch_state, EMPTY_SCENARIO)
    if not normal.is_connected():
        raise FeederError("feeder is disconnected in its normal switch configuration")
    return net


def serialize_feeder(net: GridNetwork) -> str:
    """Inverse of parse_feeder: parse(serialize(net)) reproduces net."""
    lines = []
    for n in net.nodes:
        crit = " critical" if n.is_critical else ""
        lines.append(f"node {n.id} {n.kind} {n.demand!r}{crit}")
    for b in net.branches:
        sw = ""
        if b.has_switch:
            idx = "fixed" if b.switch_index is None else str(b.switch_index)
            sw = f" switch {idx} {'nc' if b.normally_closed else 'no'}"
        lines.append(f"branch {b.id} {b.from_node} {b.to_node}{sw}")
    for d in net.ders:
        lines.append(f"der {d.node} {d.rating!r} {d.p_min!r} {d.p_max!r} {d.q_min!r} {d.q_max!r}")
    lines.append(f"source_rating {net.source_rating!r}")
    return "\n".join(lines) + "\n"


def parse_scenario(text: str, net: GridNetwork | None = None) -> Scenario:
    """Parse a scenario file; validates element references when net is given."""
    name = "custom"
    description = ""
    disabled_nodes: set[int] = set()
    disabled_branches: set[int] = set()
    for lineno, toks in _tokens(text):
        kw = toks[0]
        if kw == "name":
            if len(toks) < 2:
                raise FeederError("name needs a value", lineno)
            name = toks[1]
            if name not in SCENARIO_NAMES:
                raise FeederError(
                    f"scenario name must be one of {', '.join(SCENARIO_NAMES)}", lineno
                )
        elif kw == "description":
            description = " ".join(toks[1:])
        elif kw == "disable_node":
            disabled_nodes.add(_to_int(toks[1], lineno, "node id"))
        elif kw == "disable_branch":
            disabled_branches.add(_to_int(toks[1], lineno, "branch id"))
        else:
            raise FeederError(f"unknown directive {kw!r}", lineno)
    scenario = Scenario(name, frozenset(disabled_nodes), frozenset(disabled_branches), description)
    if net is not None:
        scenario.validate(net)
    return scenario


def effective_topology(
    net: GridNetwork, switches, scenario: Scenario = EMPTY_SCENARIO
) -> Subgraph:
    """Energized subgraph under a 10-bit switch vector and a scenario.

    A branch survives when it is not scenario-disabled, both endpoints
    survive, and it is closed: controllable devices follow their switch
    bit, fixed devices their normal state, plain branches are always
    closed.  Closing an extra switch can only add edges (monotone).
    """
    switches = tuple(int(s) for s in switches)
    if len(switches) != 10 or any(s not in (0, 1) for s in switches):
        raise ValueError("switch vector must contain exactly 10 bits")
    alive_nodes = tuple(n.id for n in net.nodes if n.id not in scenario.disabled_nodes)
    alive = set(alive_nodes)
    edges = []
    for b in net.branches:
        if b.id in scenario.disabled_branches:
            continue
        if b.from_node not in alive or b.to_node not in alive:
            continue
        if b.switch_index is not None:
            closed = switches[b.switch_index] == 1
        elif b.has_switch:
            closed = b.normally_closed
        else:
            closed = True
        if closed:
            edges.append((b.id, b.from_node, b.to_node))
    return Subgraph(alive_nodes, tuple(edges))
