"""Component-count reduction for graphs of doubly-logarithmic degree.

``m`` bosses each receive one random edge sample and compute its spanning
forest. Random leaders anchor the merge: for every node a boss reports the
distance rank to the nearest leader in the node's sample component (or 0 if
there is none) together with the component size, the sample id and the next
node on the path. Every node adopts the hint of its lexicographically
largest report as parent and sends that edge to the coordinator.
"""
from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import shortest_path

from .graph import Graph, Partition, SpanningForest, active_labels, build_graph, oracle_components
from .local import components, group_max, group_min
from .placement import InvariantViolation, PipelineParams, Placement, loglog, single_placement
from .runtime import PreconditionError, Runtime, bits_for, field_words


@dataclass(frozen=True, order=True)
class BossReply:
    rank: int
    comp_size: int
    sample_id: int
    parent_hint: int

    def words(self, n: int, m: int, width: int) -> int:
        return reply_words(n, m, width)


def reply_words(n: int, m: int, width: int) -> int:
    return field_words([bits_for(n), bits_for(n), bits_for(max(m - 1, 0)), bits_for(n - 1)], width)


def degree_cap(n: int, slack: int = 2) -> int:
    return math.ceil(loglog(n)) + slack


@dataclass
class SampleSet:
    m: int
    p: float
    edges: list[np.ndarray]

    def counts(self) -> list[int]:
        return [len(e) for e in self.edges]


def sample_edges(g: Graph, m: int, p: float, seed: int) -> SampleSet:
    """Each edge joins each of the ``m`` samples independently with probability ``p``."""
    rng = np.random.default_rng(seed)
    pick = rng.random((g.m, m)) < p
    return SampleSet(m, p, [g.edges[pick[:, k]] for k in range(m)])


def boss_forest(n: int, sample: np.ndarray) -> SpanningForest:
    """BFS spanning forest of a sample."""
    return SpanningForest.from_edges(n, oracle_components(build_graph(n, sample)).forest)


def boss_reply(forest: SpanningForest, leaders: Iterable[int], j: int, i: int) -> BossReply:
    """The report boss ``i`` sends to node ``j`` about its sample component."""
    n = forest.n
    adj: dict[int, list[int]] = {}
    for a, b in forest.edges().tolist():
        adj.setdefault(a, []).append(b)
        adj.setdefault(b, []).append(a)
    comp = {j}
    q = deque([j])
    while q:
        x = q.popleft()
        for y in adj.get(x, []):
            if y not in comp:
                comp.add(y)
                q.append(y)
    lead = sorted(comp & set(leaders))
    sources = lead if lead else [min(comp)]
    dist = {x: 0 for x in sources}
    q = deque(sources)
    while q:
        x = q.popleft()
        for y in adj.get(x, []):
            if y not in dist:
                dist[y] = dist[x] + 1
                q.append(y)
    if dist[j] == 0:
        hint = j
    else:
        hint = min(y for y in adj[j] if dist[y] == dist[j] - 1)
    rank = n - dist[j] if lead else 0
    return BossReply(rank, len(comp), i, hint)


def select_parent(replies: Sequence[BossReply], self_id: int) -> int:
    """Hint of the lexicographically largest reply; a node without replies is its own parent."""
    if not replies:
        return self_id
    return max(replies).parent_hint


@dataclass
class BatchSizeReduce:
    labels: np.ndarray
    parent: np.ndarray
    forest: np.ndarray
    leaders: np.ndarray
    alpha: np.ndarray
    boss_received: np.ndarray
    samples: list[np.ndarray] = field(default_factory=list, repr=False)


def _sample_bfs(N: int, fu: np.ndarray, fv: np.ndarray, sources: np.ndarray) -> np.ndarray:
    """Hop distance from the nearest source (sources at 0)."""
    su = np.concatenate([fu, np.full(len(sources), N)])
    sv = np.concatenate([fv, sources])
    g = coo_matrix((np.ones(len(su)), (su, sv)), shape=(N + 1, N + 1)).tocsr()
    d = shortest_path(g, directed=False, unweighted=True, indices=N)
    return d[:N].astype(np.int64) - 1


def reduce_components_batch(pl: Placement, eu: np.ndarray, ev: np.ndarray,
                            params: PipelineParams, rng: np.random.Generator,
                            keep_samples: bool = False) -> BatchSizeReduce:
    n, N, K = pl.n, pl.N, pl.K
    clq = pl.clq
    m = pl.bosses.shape[1]
    p = params.sample_p(n)
    width = pl.rt.W

    if params.check and len(eu):
        deg = np.bincount(np.concatenate([eu, ev]), minlength=N)
        if deg.max() > degree_cap(n):
            raise PreconditionError(f"max degree {deg.max()} exceeds {degree_cap(n)}")

    # each edge is sent by its higher-id endpoint, once per sample it joins
    hi = np.maximum(eu, ev)
    pick = rng.random((len(eu), m)) < p
    e_idx, k_idx = np.nonzero(pick)
    inst_e = hi[e_idx] // n
    boss_v = pl.bosses[inst_e, k_idx]
    clq.lenzen_route(pl.host[hi[e_idx]], boss_v, width=1)
    boss_received = np.zeros((K, m), dtype=np.int64)
    np.add.at(boss_received, (inst_e, k_idx), 1)

    leaders = rng.random(N) < params.leader_p(n)
    lead_idx = np.flatnonzero(leaders)
    ls = np.repeat(lead_idx, m)
    lb = pl.bosses[ls // n, np.tile(np.arange(m), len(lead_idx))]
    if pl.exclusive:
        clq.direct(pl.host[ls], lb)
    else:
        clq.lenzen_route(pl.host[ls], lb)

    best = np.full(N, -1, dtype=np.int64)
    lead64 = leaders.astype(np.int64)
    # a node outside every sample edge is its own component of size 1
    lone = np.where(leaders, n, 0) * (n + 1) + 1
    kept = []
    for k in range(m):
        sel = e_idx[k_idx == k]
        su, sv = eu[sel], ev[sel]
        if keep_samples:
            kept.append(np.stack([su, sv], axis=1))
        t = np.unique(np.concatenate([su, sv]))
        prev = best[t]
        np.maximum(best, (lone * m + k) * n + np.arange(N) % n, out=best)
        if len(t) == 0:
            continue
        T = len(t)
        lu, lv = np.searchsorted(t, su), np.searchsorted(t, sv)
        lab = components(T, lu, lv)
        size = np.bincount(lab, minlength=T)[lab]
        has_leader = group_max(lab, lead64[t], T, empty=0)[lab] > 0
        sources = np.flatnonzero(leaders[t] | (~has_leader & (lab == np.arange(T))))
        # the boss's forest is the multi-source BFS forest of its sample, so
        # forest distances are sample distances and parents are the
        # smallest-id neighbours one level closer
        dist = _sample_bfs(T, lu, lv, sources)
        fu = np.concatenate([lu, lv])
        fv = np.concatenate([lv, lu])
        toward = dist[fv] == dist[fu] - 1
        hint = group_min(fu[toward], fv[toward], T, empty=T)
        hint = t[np.where(dist == 0, np.arange(T), hint)]
        rank = np.where(has_leader, n - dist, 0)
        key = ((rank * (n + 1) + size) * m + k) * n + (hint % n)
        best[t] = np.maximum(prev, key)

    # replies: every boss answers every node of its instance
    inst = np.arange(N) // n
    rw = reply_words(n, m, width)
    rs = pl.bosses[np.repeat(inst, m), np.tile(np.arange(m), N)]
    clq.lenzen_route(rs, np.repeat(pl.host, m), width=rw)

    parent = inst * n + best % n
    alpha = best // (n * m * (n + 1)) > 0
    movers = np.flatnonzero(parent != np.arange(N))
    pl.to_coordinators(movers, pl.coord_b)
    labels = components(N, movers, parent[movers])
    fa = np.minimum(movers, parent[movers])
    fb = np.maximum(movers, parent[movers])
    order = np.lexsort((fb, fa))
    forest = np.stack([fa[order], fb[order]], axis=1)
    if params.check:
        ncomp = int(np.count_nonzero(labels == np.arange(N)))
        if len(movers) != N - ncomp:
            raise InvariantViolation("parent pointers contain a cycle")
        lead_comp = group_max(labels, leaders.astype(np.int64), N, empty=0)[labels] > 0
        miss = np.flatnonzero(alpha & ~lead_comp)
        if len(miss):
            raise InvariantViolation(f"node {miss[0]} met a leader in a sample but its component has none")
    return BatchSizeReduce(labels, parent, forest, leaders, alpha, boss_received, kept)


@dataclass
class SizeReduceResult:
    partition: Partition
    leaders: np.ndarray
    alpha: np.ndarray
    parent: np.ndarray
    boss_received: np.ndarray
    samples: list[np.ndarray]

    @property
    def active_components(self) -> int:
        return len(self.partition.active)


def reduce_components_sparse(g: Graph, seed: int, rt: Runtime | None = None,
                             params: PipelineParams | None = None,
                             keep_samples: bool = False) -> SizeReduceResult:
    params = params or PipelineParams()
    rt = rt or params.runtime(g.n)
    pl = single_placement(rt, g.n, params.samples(g.n))
    with rt.phase("size_reduce"):
        res = reduce_components_batch(pl, g.edges[:, 0], g.edges[:, 1], params,
                                      np.random.default_rng(seed), keep_samples)
    part = Partition(res.labels, active_labels(res.labels, g.edges), res.forest)
    return SizeReduceResult(part, res.leaders, res.alpha, res.parent, res.boss_received[0], res.samples)


@dataclass(frozen=True)
class NodeClasses:
    alpha: int
    beta: int
    gamma: int


def classify_nodes(g: Graph, alpha: np.ndarray, s_small: int) -> NodeClasses:
    """Split nodes into: met a leader in some sample / in a small component / the rest."""
    truth = oracle_components(g)
    small = truth.sizes()[truth.labels] <= s_small
    a = int(np.count_nonzero(alpha))
    b = int(np.count_nonzero(small & ~alpha))
    return NodeClasses(a, b, g.n - a - b)
