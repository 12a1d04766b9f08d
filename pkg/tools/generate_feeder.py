"""Builds the bundled feeder and scenario files.

Layout: a trunk of 8 junctions fed from source node 150, with 8 laterals.
Published aggregates are preserved exactly: 85 load nodes summing to
3855.26 kVA, critical loads 48 (258.20) and 76 (303.69), DER units at
49 / 21 / 105 / 56 rated 350.35 kVA each, source rating 5000 kVA, and 12
switch devices (6 normally closed, 6 normally open ties) of which 10 are
remotely controllable.

Run from the repository root:  python tools/generate_feeder.py
"""

from __future__ import annotations

import sys
from pathlib import Path

import numpy as np

ROOT = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(ROOT / "src"))

from gridres.feeder import parse_feeder, parse_scenario  # noqa: E402

DATA = ROOT / "src" / "gridres" / "data"

SOURCE = 150
SOURCE_RATING = 5000.0
TOTAL_DEMAND_CENTS = 385_526  # 3855.26 kVA
CRITICALS = {48: 258.20, 76: 303.69}
DER_ORDER = (49, 21, 105, 56)  # activation priority used by the environment
DER_RATING = 350.35

TRUNK = list(range(1, 9))
LATERALS = {
    1: list(range(9, 23)),
    2: list(range(23, 37)),
    3: list(range(37, 51)),
    4: list(range(51, 65)),
    5: list(range(65, 79)),
    6: list(range(79, 93)),
    7: list(range(93, 107)),
    8: list(range(107, 123)),
}
# feed branches of these laterals carry the normally closed sectionalizers
NC_SWITCH_LATERALS = (1, 3, 4, 5, 6, 7)  # switch indices 0..5 in this order
# tie switches: (from, to, switch index or None for the two fixed devices)
TIES = (
    (22, 36, 6),
    (50, 64, 7),
    (78, 92, 8),
    (106, 122, 9),
    (36, 50, None),
    (92, 106, None),
)
JUNCTIONS_PER_LATERAL = {1: 4, 2: 4, 3: 4, 4: 4, 5: 4, 6: 3, 7: 3, 8: 3}


def build():
    rng = np.random.default_rng(20240801)
    special = set(CRITICALS) | set(DER_ORDER)

    junctions = set(TRUNK)
    for k, nodes in LATERALS.items():
        eligible = [n for n in nodes if n not in special]
        junctions.update(eligible[: JUNCTIONS_PER_LATERAL[k]])

    all_nodes = [SOURCE] + TRUNK + [n for nodes in LATERALS.values() for n in nodes]
    load_nodes = [n for n in all_nodes if n != SOURCE and n not in junctions]
    plain_loads = [n for n in load_nodes if n not in CRITICALS]
    assert len(load_nodes) == 85, len(load_nodes)

    remaining = TOTAL_DEMAND_CENTS - sum(round(d * 100) for d in CRITICALS.values())
    raw = rng.uniform(25.0, 55.0, len(plain_loads))
    demands_c = np.round(raw / raw.sum() * remaining).astype(int)
    residual = remaining - int(demands_c.sum())
    step = 1 if residual > 0 else -1
    for i in range(abs(residual)):
        demands_c[i % len(demands_c)] += step
    assert int(demands_c.sum()) == remaining and demands_c.min() > 0
    demand = dict(zip(plain_loads, (int(c) for c in demands_c)))

    lines = ["# Bundled switch-reconfigurable distribution feeder", f"node {SOURCE} source 0"]
    for n in sorted(set(all_nodes) - {SOURCE}):
        if n in junctions:
            lines.append(f"node {n} junction 0")
        elif n in CRITICALS:
            lines.append(f"node {n} load {CRITICALS[n]:.2f} critical")
        else:
            lines.append(f"node {n} load {demand[n] / 100:.2f}")

    branches = []  # (from, to, switch_clause)
    branches.append((SOURCE, 1, ""))
    for a, b in zip(TRUNK[:-1], TRUNK[1:]):
        branches.append((a, b, ""))
    for k, nodes in LATERALS.items():
        feed_clause = ""
        if k in NC_SWITCH_LATERALS:
            feed_clause = f" switch {NC_SWITCH_LATERALS.index(k)} nc"
        branches.append((k, nodes[0], feed_clause))
        for a, b in zip(nodes[:-1], nodes[1:]):
            branches.append((a, b, ""))
    for u, v, idx in TIES:
        clause = f" switch {'fixed' if idx is None else idx} no"
        branches.append((u, v, clause))

    branch_id_of = {}
    for i, (u, v, clause) in enumerate(branches, start=1):
        branch_id_of[(u, v)] = i
        lines.append(f"branch {i} {u} {v}{clause}")

    for node in DER_ORDER:
        lines.append(f"der {node} {DER_RATING} 0 {DER_RATING} -100 100")
    lines.append(f"source_rating {SOURCE_RATING}")
    feeder_text = "\n".join(lines) + "\n"

    # The severe scenarios split the trunk into islands and knock out the
    # high-priority DER units, so full critical-load coverage needs the
    # deepest configurations; the short circuit is recoverable by
    # reconfiguration alone.
    scenarios = {
        "flood": [
            "name flood",
            "description trunk washout isolates two regions; unit 49 flooded",
            f"disable_branch {branch_id_of[(2, 3)]}",
            f"disable_branch {branch_id_of[(4, 5)]}",
            "disable_node 49",
        ],
        "wildfire": [
            "name wildfire",
            "description burn zone across the upper trunk and one DER site",
            f"disable_branch {branch_id_of[(2, 3)]}",
            f"disable_branch {branch_id_of[(3, 37)]}",
            "disable_node 105",
        ],
        "hurricane": [
            "name hurricane",
            "description widest footprint: trunk splits plus lateral damage",
            f"disable_branch {branch_id_of[(2, 3)]}",
            f"disable_branch {branch_id_of[(4, 5)]}",
            f"disable_branch {branch_id_of[(5, 65)]}",
            "disable_node 49",
            "disable_node 33",
        ],
        "short_circuit": [
            "name short_circuit",
            "description fault on the segment directly upstream of critical load 76",
            f"disable_branch {branch_id_of[(75, 76)]}",
        ],
    }

    DATA.mkdir(parents=True, exist_ok=True)
    (DATA / "default_feeder.txt").write_text(feeder_text, encoding="utf-8")
    net = parse_feeder(feeder_text)
    assert net.load_count == 85
    assert abs(net.total_demand - 3855.26) < 1e-9, net.total_demand
    assert abs(net.total_critical_demand - 561.89) < 1e-9
    assert abs(sum(d.rating for d in net.ders) - 1401.4) < 1e-9
    assert len([b for b in net.branches if b.has_switch]) == 12
    assert len(net.switch_branches) == 10

    scen_dir = DATA / "scenarios"
    scen_dir.mkdir(exist_ok=True)
    for name, body in scenarios.items():
        text = "\n".join(body) + "\n"
        (scen_dir / f"{name}.txt").write_text(text, encoding="utf-8")
        parse_scenario(text, net)

    print(f"nodes={len(net.nodes)} branches={len(net.branches)} loads={net.load_count}")
    print(f"total demand={net.total_demand:.2f} critical={net.total_critical_demand:.2f}")


if __name__ == "__main__":
    build()
