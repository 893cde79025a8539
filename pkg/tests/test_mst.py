import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ccmst.graph import (GraphInputError, WeightedGraph, build_graph, build_weighted_graph, gen_gnp,
                         gen_path, gen_random_tree, gen_weights, oracle_components, oracle_mst)
from ccmst.local import components
from ccmst.mst import (ProxyCapExceeded, RootedForest, assign_proxies, distribute_neighbor_tables,
                       edge_ranks, extract_mst, filter_light, kkt_probability, kkt_sample,
                       kruskal_local, msf_pipeline, mst, parallel_cc, threshold_instances)
from ccmst.placement import PipelineParams
from ccmst.runtime import AuxiliaryClique, Runtime


def complete(n: int, seed: int) -> WeightedGraph:
    u, v = np.triu_indices(n, k=1)
    return gen_weights(build_graph(n, np.stack([u, v], axis=1)), seed)


def oracle_labels(inst) -> np.ndarray:
    n = inst.n
    return np.concatenate([components(n, *inst.edges_of(i).T) + i * n for i in range(inst.m)])


# --- sampling -----------------------------------------------------------------

def test_kkt_keeps_everything_for_tiny_n():
    g = complete(9, 1)
    assert kkt_probability(9) == 1.0
    g1, keep = kkt_sample(g, 0)
    assert g1 == g and keep.all()


def test_kkt_empty():
    g = gen_weights(gen_gnp(50, 0, 0), 0)
    assert kkt_sample(g, 3)[0].m == 0


def test_kkt_size_tracks_expectation():
    n = 1024
    g = complete(n, 0)
    q = kkt_probability(n)
    expected = q * g.m / n ** 1.5
    ratios = [kkt_sample(g, s)[1].sum() / n ** 1.5 for s in range(100)]
    assert abs(np.mean(ratios) / expected - 1) < 0.005
    assert max(abs(r / expected - 1) for r in ratios) < 0.02


# --- F-light filtering ---------------------------------------------------------

def test_filter_light_triangle():
    g = build_weighted_graph(3, [(0, 1, 1), (1, 2, 2), (0, 2, 3)])
    g2 = filter_light(g, np.array([[0, 1], [1, 2]]))
    assert g2.edge_set() == {(0, 1), (1, 2)}


def test_filter_with_own_mst_returns_it():
    g = gen_weights(gen_gnp(80, 0.2, 1), 2)
    f = oracle_mst(g)
    g2 = filter_light(g, f)
    assert np.array_equal(g2.edges, f)
    assert np.array_equal(oracle_mst(g2), oracle_mst(g))


@pytest.mark.parametrize("seed", range(100))
def test_filter_preserves_mst(seed):
    rng = np.random.default_rng(seed)
    g = gen_weights(gen_gnp(256, float(rng.choice([2 / 256, 0.05, 0.2])), seed), seed + 1)
    g1, _ = kkt_sample(g, seed)
    f = oracle_mst(g1)
    g2 = filter_light(g, f, g1)
    assert np.array_equal(oracle_mst(g2), oracle_mst(g))


def test_filter_rejects_non_spanning_forest():
    g = gen_weights(gen_path(10, 0), 0)
    with pytest.raises(GraphInputError):
        filter_light(g, g.edges[:3], g)
    absent = next((a, b) for a in range(10) for b in range(a + 1, 10) if (a, b) not in g.edge_set())
    with pytest.raises(GraphInputError):
        filter_light(g, np.array([absent]))


@settings(max_examples=80, deadline=None)
@given(st.integers(2, 60), st.integers(0, 2**31))
def test_path_max_matches_bruteforce(n, seed):
    t = gen_weights(gen_random_tree(n, seed), seed)
    rf = RootedForest.build(n, t.edges[:, 0], t.edges[:, 1], t.weights)
    rng = np.random.default_rng(seed)
    a, b = rng.integers(0, n, 20), rng.integers(0, n, 20)
    mx, same = rf.path_max(a, b)
    adj = {v: [] for v in range(n)}
    for (x, y), w in zip(t.edges.tolist(), t.weights.tolist()):
        adj[x].append((y, w))
        adj[y].append((x, w))
    for i in range(20):
        best = {int(a[i]): -1}
        stack = [int(a[i])]
        while stack:
            x = stack.pop()
            for y, w in adj[x]:
                if y not in best:
                    best[y] = max(best[x], w)
                    stack.append(y)
        assert same[i]
        assert mx[i] == best[int(b[i])]


def test_rooted_forest_rejects_cycle():
    with pytest.raises(GraphInputError):
        RootedForest.build(3, np.array([0, 1, 2]), np.array([1, 2, 0]), np.array([1, 2, 3]))


# --- nested instances and proxies -------------------------------------------

def test_threshold_instances_two_groups():
    edges = np.array([[0, 1], [1, 2], [2, 3], [3, 4], [4, 5], [0, 5]])
    rank = np.array([5, 0, 4, 1, 3, 2])
    inst = threshold_instances(6, edges, rank, 2)
    assert {tuple(e) for e in inst.edges_of(0).tolist()} == {(1, 2), (3, 4), (0, 5)}
    assert len(inst.edges_of(1)) == 6


def test_threshold_instances_degenerate_groups():
    g = gen_weights(gen_gnp(20, 0.2, 0), 0)
    inst = threshold_instances(20, g.edges, edge_ranks(g), g.m + 5)
    sizes = [int(inst.mask(i).sum()) for i in range(inst.m)]
    assert all(0 <= b - a <= 1 for a, b in zip(sizes, sizes[1:]))


@settings(max_examples=50, deadline=None)
@given(st.integers(2, 40), st.floats(0.0, 1.0), st.integers(1, 12), st.integers(0, 2**31))
def test_nested_monotone(n, p, m, seed):
    g = gen_weights(gen_gnp(n, p, seed), seed)
    inst = threshold_instances(n, g.edges, edge_ranks(g), m)
    for i in range(1, m):
        assert (inst.mask(i - 1) <= inst.mask(i)).all()
    assert inst.mask(m - 1).all()
    r = edge_ranks(g)
    for i in range(m):
        inside, outside = r[inst.mask(i)], r[~inst.mask(i)]
        if len(inside) and len(outside):
            assert inside.max() < outside.min()


def test_proxies_low_degree():
    n, m = 64, 8
    pm = assign_proxies(np.full(n, m), m, slots=6)
    assert (pm.count == 1).all() and (pm.span == m).all()
    assert pm.instances_of(5) == [(i, 5) for i in range(m)]


def test_proxies_hub():
    n, m = 64, 8
    deg = np.ones(n, dtype=np.int64)
    deg[0] = n - 1
    pm = assign_proxies(deg, m, slots=6)
    assert pm.count[0] == math.ceil((n - 1) / m)
    assert pm.span[0] == 2
    covered = sorted(i for k in range(pm.count[0]) for i, _ in pm.instances_of(int(pm.start[0]) + k))
    assert covered == list(range(m))


def test_proxy_cap():
    with pytest.raises(ProxyCapExceeded):
        assign_proxies(np.full(16, 64), 4, slots=2)


@settings(max_examples=60, deadline=None)
@given(st.integers(4, 200), st.integers(0, 2**31))
def test_every_instance_node_has_one_proxy(n, seed):
    m = max(1, math.isqrt(n))
    deg = np.random.default_rng(seed).integers(0, n, n)
    pm = assign_proxies(deg, m, slots=n)
    hosts = pm.host_of()
    assert len(hosts) == m * n
    seen = {}
    for k in range(pm.total):
        for i, j in pm.instances_of(k):
            assert (i, j) not in seen
            seen[(i, j)] = k
            assert hosts[i * n + j] == pm.vid(k)
    assert len(seen) == m * n


def test_tables_single_proxy():
    n, m = 64, 8
    g = gen_weights(gen_path(n, 0), 0)
    inst = threshold_instances(n, g.edges, edge_ranks(g), m)
    pm = assign_proxies(np.bincount(g.edges.ravel(), minlength=n), m, slots=6)
    tables = distribute_neighbor_tables(AuxiliaryClique(Runtime(n, capacity_floor=256), 7), inst, pm, True)
    for j in range(n):
        assert sorted(nb for nb, _ in tables[int(pm.start[j])]) == sorted(g.graph.neighbors(j).tolist())


def test_tables_three_proxies():
    n, m = 64, 8
    hub = [(0, v) for v in range(1, 3 * m + 1)]
    g = gen_weights(build_graph(n, hub), 1)
    inst = threshold_instances(n, g.edges, edge_ranks(g), m)
    pm = assign_proxies(np.bincount(g.edges.ravel(), minlength=n), m, slots=6)
    assert pm.count[0] == 3
    tables = distribute_neighbor_tables(AuxiliaryClique(Runtime(n, capacity_floor=256), 7), inst, pm, True)
    for k in range(3):
        assert sorted(nb for nb, _ in tables[int(pm.start[0]) + k]) == list(range(1, 3 * m + 1))


# --- parallel components and extraction ------------------------------------------

def _parallel(g: WeightedGraph, params: PipelineParams):
    n, m = g.n, params.samples(g.n)
    inst = threshold_instances(n, g.edges, edge_ranks(g), m)
    pm = assign_proxies(np.bincount(g.edges.ravel(), minlength=n), m, params.proxy_slots)
    aux = AuxiliaryClique(params.runtime(n), 1 + params.proxy_slots)
    return inst, parallel_cc(inst, pm, aux, params, np.random.default_rng(params.seed))


def test_parallel_empty_instances():
    g = gen_weights(gen_gnp(64, 0, 0), 0)
    inst, pcc = _parallel(g, PipelineParams())
    for i in range(inst.m):
        assert np.array_equal(pcc.instance_labels(i), np.arange(64))


@pytest.mark.parametrize("seed", range(5))
def test_parallel_path_segments(seed):
    g = gen_weights(gen_path(144, seed), seed)
    inst, pcc = _parallel(g, PipelineParams(seed=seed))
    for i in range(inst.m):
        truth = oracle_components(build_graph(144, inst.edges_of(i).tolist())).labels
        assert np.array_equal(pcc.instance_labels(i), truth)


@pytest.mark.parametrize("seed", range(5))
def test_parallel_random_instances(seed):
    g = gen_weights(gen_gnp(256, 0.03, seed), seed)
    inst, pcc = _parallel(g, PipelineParams(seed=seed))
    assert np.array_equal(pcc.labels, oracle_labels(inst))


def test_extract_single_group_is_kruskal():
    g = gen_weights(gen_gnp(40, 0.3, 5), 5)
    inst = threshold_instances(40, g.edges, edge_ranks(g), 1)
    assert np.array_equal(extract_mst(inst, oracle_labels(inst)), oracle_mst(g))


def test_extract_path_keeps_all_edges():
    g = gen_weights(gen_path(50, 3), 3)
    inst = threshold_instances(50, g.edges, edge_ranks(g), 7)
    assert np.array_equal(extract_mst(inst, oracle_labels(inst)), g.edges)


@pytest.mark.parametrize("seed", range(100))
def test_extract_matches_oracle(seed):
    g = gen_weights(gen_gnp(512, float([2 / 512, 0.01, 0.05][seed % 3]), seed), seed)
    inst = threshold_instances(512, g.edges, edge_ranks(g), 22)
    assert np.array_equal(extract_mst(inst, oracle_labels(inst)), oracle_mst(g))


@pytest.mark.parametrize("seed", range(4))
def test_msf_pipeline_matches_kruskal(seed):
    g = gen_weights(gen_gnp(256, 0.05, seed), seed)
    r = edge_ranks(g)
    params = PipelineParams(seed=seed)
    run = msf_pipeline(params.runtime(256), 256, g.edges, r, params, np.random.default_rng(seed))
    assert np.array_equal(run.edges, kruskal_local(256, g.edges, r))


# --- end to end -------------------------------------------------------------------

def test_mst_tree_input():
    g = gen_weights(gen_random_tree(100, 4), 4)
    res = mst(g)
    assert np.array_equal(res.edges, g.edges)
    assert res.weight == int(g.weights.sum())


def test_mst_k4():
    g = build_weighted_graph(4, [(0, 1, 1), (0, 2, 2), (0, 3, 3), (1, 2, 4), (1, 3, 5), (2, 3, 6)])
    assert np.array_equal(mst(g).edges, oracle_mst(g))


def test_mst_with_ties_follows_edge_order():
    g = gen_gnp(128, 0.1, 2)
    w = WeightedGraph(g.n, g.edges.copy(), weights=np.random.default_rng(0).integers(1, 5, g.m))
    assert not w.distinct_weights()
    assert np.array_equal(mst(w).edges, oracle_mst(w))


def test_mst_disconnected_and_rounds_constant():
    rounds = set()
    for n, p in ((128, 0.01), (256, 0.3), (512, 2 / 512)):
        g = gen_weights(gen_gnp(n, p, n), n)
        res = mst(g, PipelineParams(seed=1))
        assert np.array_equal(res.edges, oracle_mst(g))
        rounds.add(res.rounds)
        assert res.rt.violations == 0
    assert len(rounds) == 1


def test_mst_report_fields():
    g = gen_weights(gen_gnp(64, 0.2, 0), 0)
    d = mst(g).to_dict()
    assert set(d) == {"mst_weight", "edge_count", "rounds", "max_load", "phase_rounds"}
    assert d["edge_count"] == len(oracle_mst(g))
