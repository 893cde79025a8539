import networkx as nx
import numpy as np
import pytest

from ccmst.corollary import contains_cycle, double_cover, is_bipartite, st_connected, verify_cut
from ccmst.graph import GraphInputError, build_graph, gen_gnp, oracle_components


def cycle(k, n=None):
    return build_graph(n or k, [(i, (i + 1) % k) for i in range(k)])


def to_nx(g):
    h = nx.Graph()
    h.add_nodes_from(range(g.n))
    h.add_edges_from(g.edges.tolist())
    return h


def test_path_examples():
    g = build_graph(3, [(0, 1), (1, 2)])
    assert st_connected(g, 0, 2)
    assert not contains_cycle(g)
    assert is_bipartite(g)


def test_cycle_parity():
    assert not is_bipartite(cycle(5))
    assert is_bipartite(cycle(6))
    assert contains_cycle(cycle(5))


def test_double_cover_shape():
    dc = double_cover(cycle(5))
    assert dc.n == 10 and dc.m == 10
    assert oracle_components(dc).num_components == 1
    assert oracle_components(double_cover(cycle(6))).num_components == 2


def test_verify_cut():
    g = build_graph(6, [(0, 1), (1, 2), (3, 4)])
    assert verify_cut(g, {0, 1, 2})
    assert verify_cut(g, {5})
    assert not verify_cut(g, {0, 1})


def test_invalid_inputs():
    g = cycle(4)
    with pytest.raises(GraphInputError):
        st_connected(g, 0, 4)
    for cut in (set(), {0, 1, 2, 3}, {7}):
        with pytest.raises(GraphInputError):
            verify_cut(g, cut)


@pytest.mark.parametrize("seed", range(30))
def test_against_networkx(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(3, 80))
    g = gen_gnp(n, float(rng.choice([0.5, 1.0, 2.0, 4.0])) / n, seed)
    h = to_nx(g)
    s, t = int(rng.integers(n)), int(rng.integers(n))
    assert st_connected(g, s, t).value == nx.has_path(h, s, t)
    assert is_bipartite(g).value == nx.is_bipartite(h)
    assert contains_cycle(g).value == (len(nx.cycle_basis(h)) > 0)
    cut = set(np.flatnonzero(rng.random(n) < 0.5).tolist()) or {0}
    if len(cut) == n:
        cut.discard(n - 1)
    assert verify_cut(g, cut).value == (nx.cut_size(h, cut) == 0)


def test_rounds_reported():
    v = is_bipartite(cycle(8))
    assert v.rounds == v.rt.metrics().rounds_charged > 0
