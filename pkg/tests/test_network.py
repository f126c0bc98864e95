import math

import networkx as nx
import pytest

from ergmsearch.network import (AttributeColumn, Network, NetworkError,
                                diagnostics, geodesic_distribution, metadata)

from conftest import random_network


def complete_graph(n: int) -> Network:
    return Network(n, False, [(i, j) for i in range(n)
                              for j in range(i + 1, n)])


def to_nx(net: Network):
    g = nx.DiGraph() if net.directed else nx.Graph()
    g.add_nodes_from(range(net.node_count))
    g.add_edges_from(net.edges)
    return g


class TestConstruction:
    def test_rejects_self_loop(self):
        with pytest.raises(NetworkError):
            Network(3, False, [(1, 1)])

    def test_rejects_out_of_range(self):
        with pytest.raises(NetworkError):
            Network(3, False, [(0, 5)])

    def test_canonical_undirected_storage(self):
        net = Network(4, False, [(2, 1), (1, 2), (3, 0)])
        assert net.edges == frozenset({(1, 2), (0, 3)})

    def test_attribute_length_checked(self):
        with pytest.raises(NetworkError):
            Network(3, False, [], {"x": AttributeColumn("numeric", (1.0, 2.0))})

    def test_attribute_kind_validation(self):
        with pytest.raises(NetworkError):
            AttributeColumn("numeric", (1.0, math.inf))
        with pytest.raises(NetworkError):
            AttributeColumn("categorical", (None, None))

    def test_immutable(self):
        net = Network(3, False, [(0, 1)])
        with pytest.raises(AttributeError):
            net.directed = True


class TestToggle:
    def test_adds_edge(self):
        net = Network(4, False, [(0, 1)])
        assert net.toggle(2, 3).edge_count == 2
        assert net.edge_count == 1  # original untouched

    def test_involution(self):
        net = Network(4, False, [(0, 1), (1, 2)])
        assert net.toggle(0, 3).toggle(0, 3) == net

    def test_canonical_order(self):
        net = Network(4, False, [])
        assert net.toggle(2, 1) == net.toggle(1, 2)

    def test_rejects_self_loop(self):
        with pytest.raises(NetworkError):
            Network(3, False, []).toggle(1, 1)

    def test_involution_property(self):
        for seed in range(100):
            net = random_network(seed, n=6, directed=seed % 2 == 0,
                                 with_attrs=False)
            i, j = (0, 1) if seed % 3 else (2, 5)
            assert net.toggle(i, j).toggle(i, j) == net


class TestDiagnostics:
    def test_complete_graph(self):
        d = diagnostics(complete_graph(4))
        assert d.density == 1.0
        assert d.clustering == 1.0
        assert d.degree.min == d.degree.max == 3

    def test_empty_directed(self):
        d = diagnostics(Network(5, True, []))
        assert d.density == 0.0
        assert d.reciprocity == 0.0
        assert d.reciprocity_zero_edges
        assert d.edge_count == 0

    def test_reciprocity(self):
        net = Network(3, True, [(0, 1), (1, 0), (1, 2)])
        d = diagnostics(net)
        assert d.reciprocity == pytest.approx(2 / 3)
        assert not d.reciprocity_zero_edges

    def test_density_matches_recomputation(self):
        for seed in range(50):
            net = random_network(seed, n=7, directed=seed % 2 == 0,
                                 with_attrs=False)
            d = diagnostics(net)
            assert d.density == pytest.approx(net.edge_count / net.dyad_count)
            assert 0.0 <= d.density <= 1.0
            assert 0.0 <= d.clustering <= 1.0

    def test_clustering_matches_networkx_transitivity(self):
        for seed in range(30):
            net = random_network(seed, n=9, with_attrs=False)
            expected = nx.transitivity(to_nx(net))
            assert diagnostics(net).clustering == pytest.approx(expected)

    def test_directed_clustering_uses_skeleton(self):
        for seed in range(20):
            net = random_network(seed, n=8, directed=True, with_attrs=False)
            skeleton = nx.Graph()
            skeleton.add_nodes_from(range(net.node_count))
            skeleton.add_edges_from((min(i, j), max(i, j))
                                    for i, j in net.edges)
            assert diagnostics(net).clustering == pytest.approx(
                nx.transitivity(skeleton))


class TestMetadata:
    def test_lists_attributes(self):
        net = random_network(0, n=5)
        meta = metadata(net)
        assert not meta.directed
        names = [a.name for a in meta.attributes]
        assert names == ["club", "score"]
        kinds = {a.name: a.kind for a in meta.attributes}
        assert kinds == {"club": "categorical", "score": "numeric"}
        assert all(a.complete for a in meta.attributes)


class TestGeodesics:
    def test_path_graph(self):
        net = Network(3, False, [(0, 1), (1, 2)])
        dist = geodesic_distribution(net)
        assert dist.by_distance == {1: 2, 2: 1}
        assert dist.unreachable == 0

    def test_empty_graph(self):
        dist = geodesic_distribution(Network(3, False, []))
        assert dist.by_distance == {}
        assert dist.unreachable == 3

    def test_matches_bfs_oracle(self):
        for seed in range(25):
            net = random_network(seed, n=8, directed=seed % 2 == 0,
                                 p=0.25, with_attrs=False)
            lengths = dict(nx.all_pairs_shortest_path_length(to_nx(net)))
            expected = {}
            reached = 0
            for src in range(8):
                for dst, d in lengths[src].items():
                    if dst == src or (not net.directed and dst < src):
                        continue
                    expected[d] = expected.get(d, 0) + 1
                    reached += 1
            dist = geodesic_distribution(net)
            assert dist.by_distance == expected
            assert dist.unreachable == net.dyad_count - reached

    def test_total_equals_dyad_count(self):
        for seed in range(100):
            net = random_network(seed, n=7, directed=seed % 3 == 0,
                                 p=0.2, with_attrs=False)
            assert geodesic_distribution(net).total() == net.dyad_count
