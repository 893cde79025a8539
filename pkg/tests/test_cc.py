import numpy as np
import pytest

from ccmst.cc import cc_batch, connected_components
from ccmst.graph import Graph, gen_gnp, gen_planted, oracle_components
from ccmst.placement import PipelineParams, Placement
from ccmst.runtime import AuxiliaryClique


def copies_placement(n: int, K: int, params: PipelineParams) -> Placement:
    rt = params.runtime(n)
    aux = AuxiliaryClique(rt, K)
    m = params.samples(n)
    k = np.arange(K)
    return Placement(clq=aux, n=n, K=K, host=np.arange(K * n, dtype=np.int64),
                     coord_a=k % n, coord_b=(n - 1 - k) % n,
                     bosses=(k[:, None] * m + np.arange(m)[None, :]) % n, exclusive=False)


@pytest.mark.parametrize("seed", range(8))
def test_matches_oracle_gnp(seed):
    g = gen_gnp(300, 1.5 / 300, seed)
    res = connected_components(g, PipelineParams(seed=seed))
    assert res.partition == oracle_components(g)


@pytest.mark.parametrize("sizes", [[100, 100], [1] * 10 + [190], [3] * 60 + [20]])
def test_matches_oracle_planted(sizes):
    g = gen_planted(sum(sizes), sizes, 4, p_extra=0.1)
    assert connected_components(g).partition == oracle_components(g)


def test_forest_spans_components():
    g = gen_gnp(200, 0.02, 3)
    p = connected_components(g).partition
    es = g.edge_set()
    assert all(tuple(e) in es for e in p.forest.tolist())
    assert len(p.forest) == g.n - p.num_components


def test_identical_copies():
    n, K = 64, 4
    params = PipelineParams(seed=2)
    g = gen_gnp(n, 2.0 / n, 9)
    pl = copies_placement(n, K, params)
    off = np.repeat(np.arange(K) * n, g.m)
    eu, ev = np.tile(g.edges[:, 0], K) + off, np.tile(g.edges[:, 1], K) + off
    res = cc_batch(pl, eu, ev, params, np.random.default_rng(0), params.gp_rows_parallel)
    truth = oracle_components(g).labels
    for i in range(K):
        assert np.array_equal(res.labels[i * n:(i + 1) * n] - i * n, truth)


def test_empty_instances():
    n, K = 32, 3
    params = PipelineParams()
    pl = copies_placement(n, K, params)
    empty = np.empty(0, dtype=np.int64)
    res = cc_batch(pl, empty, empty, params, np.random.default_rng(0), params.gp_rows)
    assert np.array_equal(res.labels, np.arange(n * K))


def test_single_node_and_empty_graph():
    assert connected_components(Graph(1, np.empty((0, 2), dtype=np.int64))).partition.num_components == 1
    g = Graph(50, np.empty((0, 2), dtype=np.int64))
    assert connected_components(g).partition.num_components == 50


def test_rounds_do_not_depend_on_graph():
    a = connected_components(gen_gnp(256, 0.0, 0)).rounds
    b = connected_components(gen_gnp(256, 0.5, 0)).rounds
    c = connected_components(gen_gnp(1024, 2 / 1024, 0)).rounds
    assert a == b == c
