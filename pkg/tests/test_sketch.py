import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ccmst.cc import GPBudgetExceeded, gp_reduce
from ccmst.claims import SketchCase, check_sketch_cases
from ccmst.graph import Partition, build_graph, gen_gnp, gen_path, oracle_components
from ccmst.placement import PipelineParams
from ccmst.runtime import PreconditionError
from ccmst.size_reduce import reduce_components_sparse
from ccmst.sketch import (L0Sketch, SketchSpec, build_node_sketch, component_sketch, edge_token,
                          merge, sample_outgoing, token_edge)

SPEC = SketchSpec(16, rows=6, seed=11)


def test_token_round_trip():
    assert token_edge(edge_token(9, 3, 16), 16) == (3, 9)


def test_isolated_node_is_zero():
    assert build_node_sketch(4, [], SPEC).is_zero()


@settings(max_examples=100, deadline=None)
@given(st.dictionaries(st.integers(0, 255), st.integers(-5, 5), max_size=12),
       st.dictionaries(st.integers(0, 255), st.integers(-5, 5), max_size=12))
def test_linearity(x, y):
    def sk(vec):
        toks = np.array(list(vec), dtype=np.int64)
        return L0Sketch.from_incidences(toks, np.array([vec[t] for t in vec], dtype=np.int64), SPEC)
    both = {t: x.get(t, 0) + y.get(t, 0) for t in set(x) | set(y)}
    assert merge(sk(x), sk(y)) == sk(both)


def test_merge_identity_and_commutativity():
    a = build_node_sketch(2, [3, 7], SPEC)
    b = build_node_sketch(5, [1, 2, 9], SPEC)
    z = L0Sketch.zero(SPEC)
    assert merge(a, z) == a
    assert merge(a, b) == merge(b, a)


def test_merge_mismatch():
    other = SketchSpec(16, rows=6, seed=12)
    with pytest.raises(ValueError):
        merge(build_node_sketch(0, [1], SPEC), build_node_sketch(0, [1], other))


def test_whole_component_cancels():
    g = gen_gnp(16, 0.3, 2)
    for comp in oracle_components(g).components():
        cs = component_sketch(comp, g.adjacency, SPEC)
        assert cs.is_zero()
        assert sample_outgoing(cs) is None


def test_single_outgoing_edge():
    g = build_graph(16, [(0, 1), (1, 2), (2, 0), (2, 9), (9, 10)])
    for seed in range(50):
        spec = SketchSpec(16, rows=4, seed=seed)
        assert sample_outgoing(component_sketch([0, 1, 2], g.adjacency, spec)) == (2, 9)


def test_degree_three_decode_rate():
    nbrs = [1, 5, 9]
    hits = 0
    trials = 10_000
    for seed in range(trials):
        sk = build_node_sketch(0, nbrs, SketchSpec(16, rows=1, seed=seed))
        e = sk.sample_outgoing()
        if e is not None:
            assert e in {(0, 1), (0, 5), (0, 9)}
            hits += 1
    assert hits / trials >= 1 / 16


def test_random_subsets_sound():
    rng = np.random.default_rng(5)
    cases = []
    for _ in range(500):
        g = gen_gnp(8, float(rng.random()), int(rng.integers(1 << 30)))
        sub = np.flatnonzero(rng.random(8) < 0.5)
        cases.append(SketchCase(8, g.edges, sub if len(sub) else np.array([0])))
    good, bad = check_sketch_cases(cases, seed=3)
    assert good == len(cases) and not bad


def test_sketch_words_count_nonzero_cells():
    sk = build_node_sketch(0, [1, 2], SPEC)
    cells = int(np.count_nonzero(sk.cells.reshape(-1, 4).any(axis=1)))
    assert sk.words(64) == cells * SPEC.cell_words(64)


def test_gp_complete_partition_unchanged():
    g = gen_gnp(60, 0.05, 1)
    truth = oracle_components(g)
    out, stats = gp_reduce(g, truth)
    assert out == truth
    assert sum(stats.merges) == 0


def test_gp_after_size_reduce_two_blocks():
    a = gen_path(30, 1).edges
    b = gen_path(30, 2).edges + 30
    g = build_graph(60, np.concatenate([a, b]).tolist())
    for seed in range(5):
        p = reduce_components_sparse(g, seed).partition
        out, _ = gp_reduce(g, p, seed=seed)
        assert out == oracle_components(g)
        assert oracle_components(build_graph(60, out.forest.tolist())) == out


def test_gp_rejects_unflagged_growable():
    g = gen_path(20, 0)
    with pytest.raises(PreconditionError, match="not flagged"):
        gp_reduce(g, Partition(np.arange(20), frozenset()))


def test_gp_rejects_too_many_active():
    g = gen_path(64, 0)
    singles = Partition(np.arange(64), frozenset(range(64)))
    with pytest.raises(PreconditionError, match="active components"):
        gp_reduce(g, singles, params=PipelineParams(gp_active_factor=0.5))


def test_gp_budget_exhausted():
    g = gen_path(256, 0)
    singles = Partition(np.arange(256), frozenset(range(256)))
    params = PipelineParams(gp_budget=1, gp_active_factor=100.0)
    with pytest.raises(GPBudgetExceeded) as e:
        gp_reduce(g, singles, params=params)
    assert e.value.budget == 1 and e.value.remaining > 0
