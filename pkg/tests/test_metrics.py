"""Resilience parameters: service metrics, efficiency/centrality, AHP, scores."""

from itertools import combinations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gridres.feeder import Subgraph, effective_topology, parse_feeder
from gridres.metrics import (
    DEFAULT_WEIGHTS,
    AhpConsistencyError,
    AhpWeights,
    MetricDomainError,
    MetricVector,
    PathCounts,
    ahp_weights,
    average_ros,
    classify_paths,
    cls_ratio,
    composite_score,
    dg_feasible,
    enumerate_supply_paths,
    high_centrality_count,
    information_centrality,
    load_pairwise_matrix,
    network_efficiency,
    normalize_metrics,
    path_variability,
    rating_of_service,
    resilience_score,
)


def complete_graph(n):
    edges = tuple((i, u, v) for i, (u, v) in enumerate(combinations(range(n), 2)))
    return Subgraph(tuple(range(n)), edges)


def star4():
    return Subgraph((0, 1, 2, 3), ((1, 0, 1), (2, 0, 2), (3, 0, 3)))


# One source and one DER behind a normally closed sectionalizer; opening
# switch 0 splits the feeder into two islands, one per critical load.
SPLITTABLE = """
node 150 source 0
node 1 load 50 critical
node 2 junction 0
node 3 load 60 critical
node 4 load 10
branch 1 150 1
branch 2 1 2
branch 3 2 3 switch 0 nc
branch 4 3 4
der 4 200 0 200 -10 10
source_rating 400
"""


class TestClassifyPaths:
    def test_single_source_single_route(self):
        net = parse_feeder(
            "node 150 source 0\nnode 2 load 5 critical\nbranch 1 150 2\nsource_rating 10\n"
        )
        sub = effective_topology(net, (0,) * 10)
        assert classify_paths(sub, net) == PathCounts(n_ip=1)

    def test_two_islands_each_fed_is_isolated_combination(self):
        net = parse_feeder(SPLITTABLE)
        sub = effective_topology(net, (0,) * 10)  # open the sectionalizer
        # oracle: comp A = {150,1,2} covers CL 1; comp B = {3,4} has the DER
        comps = sub.components()
        assert len(comps) == 2
        assert classify_paths(sub, net) == PathCounts(n_ic=1)

    def test_multi_source_single_component_is_connected_combination(self):
        net = parse_feeder(SPLITTABLE)
        sub = effective_topology(net, (1,) * 10)
        assert sub.is_connected()
        assert classify_paths(sub, net) == PathCounts(n_cc=1)

    def test_single_source_covering_all_counts_isolated_paths(self):
        net = parse_feeder(SPLITTABLE)
        sub = effective_topology(net, (1,) * 10)
        # with no active DERs the single substation feeds both criticals
        assert classify_paths(sub, net, active_der_nodes=()) == PathCounts(n_ip=2)

    def test_uncovered_critical_contributes_nothing(self):
        net = parse_feeder(SPLITTABLE)
        sub = effective_topology(net, (0,) * 10)
        # island B loses its source when the DER is inactive
        assert classify_paths(sub, net, active_der_nodes=()) == PathCounts(n_ip=1)

    def test_no_critical_loads(self):
        net = parse_feeder("node 150 source 0\nnode 2 load 5\nbranch 1 150 2\nsource_rating 10\n")
        sub = effective_topology(net, (0,) * 10)
        assert classify_paths(sub, net) == PathCounts()


class TestPathVariability:
    @pytest.mark.parametrize(
        "counts, expected",
        [((0, 0, 0), 0.0), ((1, 0, 0), 0.1), ((2, 1, 3), 2.1), ((0, 1, 0), 0.4), ((0, 0, 1), 0.5)],
    )
    def test_values(self, counts, expected):
        assert path_variability(PathCounts(*counts)) == pytest.approx(expected, abs=1e-12)

    @given(
        a=st.tuples(*(st.integers(0, 50),) * 3),
        b=st.tuples(*(st.integers(0, 50),) * 3),
    )
    def test_linearity(self, a, b):
        combined = PathCounts(*(x + y for x, y in zip(a, b)))
        assert path_variability(combined) == pytest.approx(
            path_variability(PathCounts(*a)) + path_variability(PathCounts(*b)), abs=1e-12
        )

    def test_negative_counts_rejected(self):
        with pytest.raises(MetricDomainError):
            PathCounts(-1, 0, 0)


class TestServiceRatios:
    def test_cls_ratio_values(self):
        assert cls_ratio(561.89, 561.89) == 1.0
        assert cls_ratio(258.20, 561.89) == pytest.approx(258.20 / 561.89, abs=1e-12)
        assert cls_ratio(258.20, 561.89) == pytest.approx(0.45952, abs=1e-5)
        assert cls_ratio(0.0, 561.89) == 0.0

    def test_cls_ratio_clamps_and_rejects(self):
        assert cls_ratio(700.0, 561.89) == 1.0
        with pytest.raises(MetricDomainError):
            cls_ratio(1.0, 0.0)

    def test_rating_of_service_values(self):
        assert rating_of_service([(5000.0, 561.89)]) == pytest.approx(
            (5000 - 561.89) / 5000, abs=1e-12
        )
        assert rating_of_service([(350.35, 303.69)]) == pytest.approx(
            (350.35 - 303.69) / 350.35, abs=1e-12
        )
        assert rating_of_service([]) == 0.0
        assert rating_of_service([(5000.0, 561.89)]) == pytest.approx(0.88762, abs=1e-5)
        assert rating_of_service([(350.35, 303.69)]) == pytest.approx(0.13318, abs=1e-5)

    def test_rating_of_service_rejects_bad_rating(self):
        with pytest.raises(MetricDomainError):
            rating_of_service([(0.0, 1.0)])

    def test_average_ros_values(self):
        assert average_ros(2, 2, 0.88762, 1) == pytest.approx(0.88762, abs=1e-12)
        assert average_ros(0, 2, 123.0, 1) == 0.0
        assert average_ros(1, 2, 1.0, 2) == pytest.approx(0.25, abs=1e-12)

    def test_average_ros_domain(self):
        with pytest.raises(MetricDomainError):
            average_ros(1, 0, 1.0, 1)
        with pytest.raises(MetricDomainError):
            average_ros(1, 2, 1.0, 0)

    def test_enumerate_supply_paths_orders_sources(self):
        net = parse_feeder(SPLITTABLE)
        sub = effective_topology(net, (1,) * 10)
        sub_first = enumerate_supply_paths(sub, net, substation_first=True)
        der_first = enumerate_supply_paths(sub, net, substation_first=False)
        assert sub_first[0][0] == 400.0 and der_first[0][0] == 200.0
        assert sorted(sub_first) == sorted(der_first)


class TestEfficiencyAndCentrality:
    def test_path_graph(self):
        sub = Subgraph((1, 2, 3), ((1, 1, 2), (2, 2, 3)))
        assert network_efficiency(sub) == pytest.approx(5.0 / 6.0, abs=1e-12)

    def test_star(self):
        assert network_efficiency(star4()) == pytest.approx(0.75, abs=1e-12)

    @pytest.mark.parametrize("n", [3, 4, 5, 6])
    def test_complete_graph_is_one(self, n):
        assert network_efficiency(complete_graph(n)) == pytest.approx(1.0, abs=1e-12)

    def test_needs_two_nodes(self):
        with pytest.raises(MetricDomainError):
            network_efficiency(Subgraph((1,), ()))

    def test_bounds_on_random_graphs(self):
        rng = np.random.default_rng(5)
        for _ in range(20):
            n = int(rng.integers(2, 12))
            edges = []
            for i, (u, v) in enumerate(combinations(range(n), 2)):
                if rng.random() < 0.4:
                    edges.append((i, u, v))
            e = network_efficiency(Subgraph(tuple(range(n)), tuple(edges)))
            assert 0.0 <= e <= 1.0
            assert (e == 1.0) == (len(edges) == n * (n - 1) // 2)

    def test_centrality_star_center(self):
        assert information_centrality(star4(), 0) == pytest.approx(1.0, abs=1e-12)

    def test_centrality_star_leaf_negative(self):
        assert information_centrality(star4(), 1) == pytest.approx(-1.0 / 9.0, abs=1e-12)

    def test_centrality_complete(self):
        assert information_centrality(complete_graph(4), 2) == pytest.approx(0.0, abs=1e-12)

    def test_centrality_domain(self):
        with pytest.raises(MetricDomainError):
            information_centrality(Subgraph((0, 1), ((0, 0, 1),)), 0)
        with pytest.raises(MetricDomainError):
            information_centrality(star4(), 99)
        with pytest.raises(MetricDomainError):
            information_centrality(Subgraph((0, 1, 2), ()), 0)  # zero efficiency

    def test_high_centrality_star(self):
        # centralities (1, -1/9, -1/9, -1/9): mean 1/6, std 0.48113
        assert high_centrality_count(star4()) == 1

    @pytest.mark.parametrize("n", [3, 4, 5, 6, 7, 8])
    def test_high_centrality_complete_symmetric(self, n):
        assert high_centrality_count(complete_graph(n)) == 0

    def test_high_centrality_degenerate(self):
        assert high_centrality_count(Subgraph((0, 1), ((0, 0, 1),))) == 0
        assert high_centrality_count(Subgraph((0, 1, 2), ())) == 0


class TestAhp:
    def test_all_ones_matrix(self):
        w = ahp_weights(np.ones((5, 5)))
        assert np.allclose(w.w, 0.2, atol=1e-12)
        assert w.consistency_ratio == pytest.approx(0.0, abs=1e-12)

    def test_two_by_two(self):
        w = ahp_weights([[1.0, 3.0], [1.0 / 3.0, 1.0]])
        assert w.w == pytest.approx((0.75, 0.25), abs=1e-9)
        assert w.consistency_ratio == pytest.approx(0.0, abs=1e-9)

    def test_consistent_matrix_recovers_weights(self):
        target = np.array([0.4, 0.3, 0.1, 0.1, 0.1])
        matrix = target[:, None] / target[None, :]
        w = ahp_weights(matrix)
        assert np.max(np.abs(np.asarray(w.w) - target)) < 1e-9
        assert w.consistency_ratio <= 1e-9

    def test_inconsistent_matrix_rejected(self):
        # circular preferences: a beats b beats c beats a, strongly
        matrix = np.array([[1, 9, 1 / 9.0], [1 / 9.0, 1, 9], [9, 1 / 9.0, 1]])
        with pytest.raises(AhpConsistencyError):
            ahp_weights(matrix)

    @pytest.mark.parametrize(
        "matrix, fragment",
        [
            (np.ones((2, 3)), "square"),
            (-np.ones((3, 3)), "positive"),
            (np.array([[1.0, 2.0], [2.0, 1.0]]), "reciprocal"),
            (np.array([[2.0, 1.0], [1.0, 2.0]]), "diagonal"),
        ],
    )
    def test_validation(self, matrix, fragment):
        with pytest.raises(MetricDomainError, match=fragment):
            ahp_weights(matrix)

    def test_load_pairwise_matrix_with_fractions(self):
        text = "1 3\n1/3 1\n"
        m = load_pairwise_matrix(text)
        assert m[1, 0] == pytest.approx(1.0 / 3.0, abs=1e-15)
        with pytest.raises(MetricDomainError):
            load_pairwise_matrix("1 2 3\n1 2\n")


class TestNormalizationAndScores:
    def test_single_vector_degenerates_to_half(self):
        out = normalize_metrics([MetricVector(1.0, 0.5, 2.0, 0.3, 4)])
        assert np.allclose(out[0], 0.5)

    def test_two_vectors_hit_bounds(self):
        out = normalize_metrics([(0, 0, 0, 0, 0), (1, 1, 1, 1, 1)])
        assert np.allclose(out[0], 0.0) and np.allclose(out[1], 1.0)

    def test_three_values_interpolate(self):
        out = normalize_metrics([(1,) * 5, (2,) * 5, (3,) * 5])
        assert np.allclose([o[0] for o in out], [0.0, 0.5, 1.0])

    def test_mixed_degenerate_component(self):
        out = normalize_metrics([(1, 7, 0, 0, 0), (3, 7, 1, 1, 1)])
        assert out[0][1] == 0.5 and out[1][1] == 0.5
        assert out[0][0] == 0.0 and out[1][0] == 1.0

    def test_resilience_score_bounds(self):
        assert resilience_score(np.ones(5), DEFAULT_WEIGHTS) == pytest.approx(1.0)
        assert resilience_score(np.zeros(5), DEFAULT_WEIGHTS) == pytest.approx(0.0)

    def test_resilience_score_dot(self):
        w = AhpWeights((0.2, 0.3, 0.15, 0.2, 0.15))
        assert resilience_score((1, 0, 0, 0, 0), w) == pytest.approx(0.2, abs=1e-12)

    @given(st.lists(st.floats(0, 1), min_size=5, max_size=5))
    def test_resilience_score_in_unit_interval(self, vec):
        assert 0.0 <= resilience_score(vec, DEFAULT_WEIGHTS) <= 1.0 + 1e-12

    def test_composite_single(self):
        assert composite_score([0.7]) == pytest.approx(0.7)

    def test_composite_two_configs(self):
        assert composite_score([0.8, 0.6], weights=[1.0]) == pytest.approx(0.92, abs=1e-12)

    def test_composite_all_ones(self):
        assert composite_score([1.0, 1.0, 1.0]) == pytest.approx(1.0)

    @given(st.lists(st.floats(0, 1), min_size=1, max_size=8))
    @settings(max_examples=200)
    def test_composite_dominates_max(self, scores):
        assert composite_score(scores) >= max(scores) - 1e-12
        assert composite_score(scores) <= 1.0 + 1e-12

    def test_composite_weight_validation(self):
        with pytest.raises(MetricDomainError):
            composite_score([0.5, 0.5], weights=[0.7, 0.7])
        with pytest.raises(MetricDomainError):
            composite_score([])

    def test_metric_vector_invariants(self):
        with pytest.raises(MetricDomainError):
            MetricVector(0.1, 1.5, 0.0, 0.5, 1)
        with pytest.raises(MetricDomainError):
            MetricVector(-0.1, 0.5, 0.0, 0.5, 1)

    def test_weights_invariants(self):
        with pytest.raises(MetricDomainError):
            AhpWeights((0.5, 0.5, 0.5, 0.5, 0.5))
        with pytest.raises(MetricDomainError):
            AhpWeights((0.2, -0.2, 0.5, 0.3, 0.2))


class TestDgFeasible:
    def test_dispatch_at_limits_is_feasible(self, toy_net):
        assert dg_feasible(toy_net, {5: (400.0, 50.0)}, served_kva=100.0)
        assert dg_feasible(toy_net, {5: (0.0, -50.0)}, served_kva=100.0)

    def test_dispatch_above_limit(self, toy_net):
        assert not dg_feasible(toy_net, {5: (400.0 + 1e-9, 0.0)}, served_kva=0.0)
        assert not dg_feasible(toy_net, {5: (100.0, 51.0)}, served_kva=0.0)

    def test_capacity_proxy(self):
        net = parse_feeder(
            "node 150 source 0\nnode 2 load 5\nbranch 1 150 2\nsource_rating 5000\n"
        )
        assert dg_feasible(net, {}, served_kva=5000.0)
        assert not dg_feasible(net, {}, served_kva=5000.01)

    def test_unknown_unit_rejected(self, toy_net):
        with pytest.raises(MetricDomainError):
            dg_feasible(toy_net, {99: (0.0, 0.0)}, served_kva=0.0)
