import networkx as nx
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from holant.graph import (
    Graph,
    Pinning,
    complete_graph,
    config_to_mask,
    connected_graphs,
    format_edge_list,
    gen_graph,
    incident_edges,
    mask_to_config,
    parse_edge_list,
    path_graph,
    random_graph,
    remove_edges,
)


K3 = Graph(3, [(0, 1), (1, 2), (0, 2)])


def test_incident_edges_examples():
    assert incident_edges(K3, 1) == (0, 1)
    assert incident_edges(path_graph(3), 0) == (0,)
    assert incident_edges(Graph(3, [(0, 1)]), 2) == ()
    with pytest.raises(IndexError):
        incident_edges(path_graph(3), 5)


def test_remove_edges_examples():
    g, mapping = remove_edges(K3, [0])
    assert g.edges == ((1, 2), (0, 2))
    assert mapping == {1: 0, 2: 1}
    assert remove_edges(K3, [])[0] == K3
    bare, _ = remove_edges(path_graph(3), [0, 1])
    assert bare.n == 3 and bare.m == 0


def test_generators():
    p4 = gen_graph("path_4")
    assert p4.n == 4 and p4.edges == ((0, 1), (1, 2), (2, 3))
    assert set(gen_graph("complete_3").edges) == set(K3.edges)
    assert gen_graph("random:n=20,delta=3", seed=7) == gen_graph("random:n=20,delta=3", seed=7)
    with pytest.raises(ValueError):
        gen_graph("hypercube_3")


def test_graph_rejects_bad_edges():
    with pytest.raises(ValueError):
        Graph(2, [(0, 0)])
    with pytest.raises(ValueError):
        Graph(2, [(0, 1), (1, 0)])
    with pytest.raises(ValueError):
        Graph(2, [(0, 2)])


def test_connected_graph_counts():
    # connected graphs on 2..5 vertices: 1, 2, 6, 21
    assert len(connected_graphs(5)) == 30
    assert all(nx.is_connected(nx.Graph(list(g.edges))) for g in connected_graphs(5))


def test_edge_list_round_trip():
    g = complete_graph(4)
    lams = [0.5, 1.0, 2.0, 1.0, 3.0, 1.0]
    g2, lams2 = parse_edge_list(format_edge_list(g, lams))
    assert g2 == g and lams2 == lams
    g3, lams3 = parse_edge_list("# comment\n3 2\n0 1\n1 2 2.5\n")
    assert g3.edges == ((0, 1), (1, 2)) and lams3 == [1.0, 2.5]
    with pytest.raises(ValueError):
        parse_edge_list("3 2\n0 1\n")


def test_pinning_and_masks():
    pin = Pinning({0: 1, 2: 0})
    assert pin.domain == frozenset({0, 2})
    assert pin.occupied() == [0]
    assert pin.extend(1, 1).occupied() == [0, 1]
    assert config_to_mask(mask_to_config(0b1011, 5)) == 0b1011


@settings(max_examples=200, deadline=None)
@given(st.integers(2, 30), st.integers(1, 5), st.integers(0, 2**32))
def test_incidence_invariants(n, delta, seed):
    g = random_graph(n, delta, seed)
    total = 0
    for v in range(n):
        inc = incident_edges(g, v)
        assert list(inc) == sorted(set(inc))
        total += len(inc)
    assert total == 2 * g.m


def test_random_graph_degree_cap_many_seeds():
    for seed in range(1000):
        g = random_graph(12, 3, seed)
        assert g.max_degree <= 3


@settings(max_examples=100, deadline=None)
@given(st.integers(2, 15), st.integers(1, 4), st.integers(0, 2**20), st.data())
def test_remove_then_readd(n, delta, seed, data):
    g = random_graph(n, delta, seed)
    drop = data.draw(st.sets(st.integers(0, max(g.m - 1, 0)), max_size=g.m)) if g.m else set()
    h, _ = remove_edges(g, drop)
    back = Graph(n, list(h.edges) + [g.edges[e] for e in sorted(drop)])
    assert back.n == g.n
    assert set(back.edges) == set(g.edges)
