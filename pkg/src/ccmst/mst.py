"""Minimum spanning forest via sampling, threshold instances and parallel CC.

The input is first thinned by random edge sampling; the forest of the
sample filters the input down to its light edges, and the same pipeline
then runs on forest plus light edges. The pipeline itself sorts the edges,
cuts them into ``m`` consecutive weight groups, solves connectivity for all
``m`` prefixes at once on proxy nodes, and lets one node per group pick the
group edges that join different components of the previous prefix.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import minimum_spanning_tree, shortest_path

from .cc import BatchCC, cc_batch
from .graph import GraphInputError, UnionFind, WeightedGraph, kruskal_order
from .local import components
from .placement import PipelineParams, Placement
from .runtime import AuxiliaryClique, Runtime, SimulationError, bits_for, field_words


class KKTCapExceeded(SimulationError):
    pass


class ProxyCapExceeded(SimulationError):
    pass


def edge_ranks(g: WeightedGraph) -> np.ndarray:
    """Rank of every edge under the (weight, edge id) order."""
    r = np.empty(g.m, dtype=np.int64)
    r[kruskal_order(g)] = np.arange(g.m)
    return r


def kkt_probability(n: int, c: float = 4.0) -> float:
    return min(1.0, c / math.sqrt(max(n, 1)))


def kkt_sample(g: WeightedGraph, seed: int, params: PipelineParams | None = None,
               rt: Runtime | None = None) -> tuple[WeightedGraph, np.ndarray]:
    """Keep each edge independently with probability ``min(1, c/sqrt(n))``.

    The coins come from one shared random word broadcast by node 0, so both
    endpoints of an edge agree on it without further messages.
    """
    params = params or PipelineParams()
    if rt is not None:
        rt.broadcast([0])
    q = kkt_probability(g.n, params.kkt_c)
    keep = np.random.default_rng(seed).random(g.m) < q
    cap = params.kkt_cap * g.n ** 1.5
    if keep.sum() > cap:
        raise KKTCapExceeded(f"sample kept {keep.sum()} edges > {cap:.0f}")
    return g.subgraph(keep), keep


# --- forest path maxima ----------------------------------------------------

@dataclass
class RootedForest:
    root: np.ndarray
    depth: np.ndarray
    up: list[np.ndarray]
    upmax: list[np.ndarray]

    @classmethod
    def build(cls, n: int, fu: np.ndarray, fv: np.ndarray, fw: np.ndarray) -> "RootedForest":
        """Root every tree at its smallest node; ``fw`` are the edge weights."""
        fu = np.asarray(fu, dtype=np.int64)
        fv = np.asarray(fv, dtype=np.int64)
        lab = components(n, fu, fv)
        roots = np.flatnonzero(lab == np.arange(n))
        if len(fu) != n - len(roots):
            raise GraphInputError("forest edges contain a cycle")
        su = np.concatenate([fu, np.full(len(roots), n)])
        sv = np.concatenate([fv, roots])
        g = coo_matrix((np.ones(len(su)), (su, sv)), shape=(n + 1, n + 1)).tocsr()
        dist, pred = shortest_path(g, directed=False, unweighted=True, indices=n,
                                   return_predecessors=True)
        depth = dist[:n].astype(np.int64) - 1
        pred = pred[:n].astype(np.int64)
        nodes = np.arange(n)
        parent = np.where(pred == n, nodes, pred)
        pw = np.full(n, -1, dtype=np.int64)
        if len(fu):
            wkey = np.minimum(fu, fv) * n + np.maximum(fu, fv)
            order = np.argsort(wkey)
            q = np.minimum(nodes, parent) * n + np.maximum(nodes, parent)
            has = parent != nodes
            pw[has] = np.asarray(fw, dtype=np.int64)[order][np.searchsorted(wkey[order], q[has])]
        up, upmax = [parent], [pw]
        for _ in range(max(1, int(n).bit_length())):
            a, w = up[-1], upmax[-1]
            up.append(a[a])
            upmax.append(np.maximum(w, w[a]))
        return cls(lab, depth, up, upmax)

    def path_max(self, a: np.ndarray, b: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Largest edge weight on the ``a``-``b`` forest path and a same-tree flag."""
        a = np.asarray(a, dtype=np.int64).copy()
        b = np.asarray(b, dtype=np.int64).copy()
        same = self.root[a] == self.root[b]
        best = np.full(len(a), -1, dtype=np.int64)
        swap = self.depth[a] < self.depth[b]
        a[swap], b[swap] = b[swap], a[swap].copy()
        diff = self.depth[a] - self.depth[b]
        for k in range(len(self.up) - 1, -1, -1):
            j = ((diff >> k) & 1).astype(bool)
            best = np.where(j, np.maximum(best, self.upmax[k][a]), best)
            a = np.where(j, self.up[k][a], a)
        for k in range(len(self.up) - 1, -1, -1):
            ua, ub = self.up[k][a], self.up[k][b]
            j = ua != ub
            best = np.where(j, np.maximum(best, np.maximum(self.upmax[k][a], self.upmax[k][b])), best)
            a = np.where(j, ua, a)
            b = np.where(j, ub, b)
        last = a != b
        best = np.where(last, np.maximum(best, np.maximum(self.upmax[0][a], self.upmax[0][b])), best)
        return best, same


def light_mask(n: int, eu, ev, er, fu, fv, fr) -> np.ndarray:
    """Edges lighter than the heaviest forest edge between their endpoints, or joining two trees."""
    rf = RootedForest.build(n, np.asarray(fu), np.asarray(fv), np.asarray(fr))
    mx, same = rf.path_max(eu, ev)
    return ~same | (np.asarray(er) < mx)


def filter_light(g: WeightedGraph, f: np.ndarray, g1: WeightedGraph | None = None) -> WeightedGraph:
    """Forest ``f`` plus the edges of ``g`` that are light with respect to it."""
    f = np.asarray(f, dtype=np.int64).reshape(-1, 2)
    ranks = edge_ranks(g)
    keys = g.edges[:, 0] * g.n + g.edges[:, 1]
    fk = np.minimum(f[:, 0], f[:, 1]) * g.n + np.maximum(f[:, 0], f[:, 1])
    pos = np.searchsorted(keys, fk)
    if len(fk) and (pos.max() >= len(keys) or not np.array_equal(keys[pos], fk)):
        raise GraphInputError("forest edge not in graph")
    if g1 is not None:
        lab_f = components(g.n, f[:, 0], f[:, 1])
        lab_g1 = components(g.n, g1.edges[:, 0], g1.edges[:, 1])
        if not np.array_equal(lab_f, lab_g1) or len(f) != g.n - np.count_nonzero(lab_f == np.arange(g.n)):
            raise GraphInputError("forest does not span the sampled graph")
    keep = light_mask(g.n, g.edges[:, 0], g.edges[:, 1], ranks, f[:, 0], f[:, 1], ranks[pos])
    keep[pos] = True
    return g.subgraph(keep)


# --- nested threshold instances ------------------------------------------

@dataclass
class NestedInstances:
    n: int
    m: int
    edges: np.ndarray
    rank: np.ndarray
    first: np.ndarray
    group_size: int

    def mask(self, i: int) -> np.ndarray:
        return self.first <= i

    def edges_of(self, i: int) -> np.ndarray:
        return self.edges[self.mask(i)]

    def batch(self) -> tuple[np.ndarray, np.ndarray]:
        """Logical endpoints of every instance edge (edge ``e`` appears in instances ``first[e]..m-1``)."""
        cnt = self.m - self.first
        rep = np.repeat(np.arange(len(self.first)), cnt)
        offs = np.repeat(np.cumsum(cnt) - cnt, cnt)
        inst = self.first[rep] + (np.arange(len(rep)) - offs)
        return inst * self.n + self.edges[rep, 0], inst * self.n + self.edges[rep, 1]


def threshold_instances(n: int, edges: np.ndarray, rank: np.ndarray, m: int) -> NestedInstances:
    """Groups of ``ceil(|E|/m)`` consecutive ranks; instance ``i`` holds groups ``0..i``."""
    edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
    rank = np.asarray(rank, dtype=np.int64)
    local = np.empty(len(rank), dtype=np.int64)
    local[np.argsort(rank, kind="stable")] = np.arange(len(rank))
    gs = max(1, -(-len(rank) // m))
    return NestedInstances(n, m, edges, local, local // gs, gs)


# --- proxies -------------------------------------------------------------

@dataclass
class ProxyMap:
    n: int
    m: int
    slots: int
    degree: np.ndarray
    count: np.ndarray
    span: np.ndarray
    start: np.ndarray

    @property
    def total(self) -> int:
        return int(self.count.sum())

    def proxy_index(self, inst, node) -> np.ndarray:
        node = np.asarray(node, dtype=np.int64)
        return self.start[node] + np.asarray(inst, dtype=np.int64) // self.span[node]

    def vid(self, proxy) -> np.ndarray:
        """Auxiliary clique id of a proxy: physical host ``k // slots``, slot ``1 + k % slots``."""
        proxy = np.asarray(proxy, dtype=np.int64)
        return (1 + proxy % self.slots) * self.n + proxy // self.slots

    def host_of(self) -> np.ndarray:
        inst = np.repeat(np.arange(self.m), self.n)
        node = np.tile(np.arange(self.n), self.m)
        return self.vid(self.proxy_index(inst, node))

    def instances_of(self, proxy: int) -> list[tuple[int, int]]:
        j = int(np.searchsorted(self.start, proxy, side="right") - 1)
        r = proxy - int(self.start[j])
        lo = r * int(self.span[j])
        return [(i, j) for i in range(lo, min(self.m, lo + int(self.span[j])))]


def assign_proxies(degrees, m: int, slots: int = 4) -> ProxyMap:
    """``ceil(d/m)`` proxies per node in ascending node order, each covering ``min(m, ceil(n/d))`` instances."""
    d = np.asarray(degrees, dtype=np.int64)
    n = len(d)
    count = np.maximum(1, -(-d // m))
    span = np.where(d > 0, np.minimum(m, -(-n // np.maximum(d, 1))), m)
    start = np.cumsum(count) - count
    pm = ProxyMap(n, m, slots, d, count, span, start)
    if pm.total > slots * n:
        raise ProxyCapExceeded(f"{pm.total} proxies exceed the cap {slots * n}")
    return pm


def distribute_neighbor_tables(aux: AuxiliaryClique, inst: NestedInstances, pm: ProxyMap,
                               materialize: bool = False) -> dict[int, list[tuple[int, int]]] | None:
    """Give every proxy of ``u`` the full table of ``(neighbour, first instance)`` pairs of ``u``.

    Stage 1 hands disjoint chunks of ``m`` entries to distinct proxies;
    stage 2 lets the proxies of a node exchange their chunks.
    """
    n, m = inst.n, inst.m
    e = inst.edges
    src = np.concatenate([e[:, 0], e[:, 1]])
    nbr = np.concatenate([e[:, 1], e[:, 0]])
    first = np.concatenate([inst.first, inst.first])
    order = np.lexsort((nbr, src))
    src, nbr, first = src[order], nbr[order], first[order]
    deg = np.bincount(src, minlength=n)
    offs = np.cumsum(deg) - deg
    pos = np.arange(len(src)) - offs[src]
    chunk = pos // m
    proxy = pm.start[src] + chunk
    aux.lenzen_route(src, pm.vid(proxy))
    csize = np.bincount(proxy, minlength=pm.total)
    owner = np.repeat(np.arange(n), pm.count)
    vsent = np.zeros(aux.size, dtype=np.int64)
    vrecv = np.zeros(aux.size, dtype=np.int64)
    pv = pm.vid(np.arange(pm.total))
    vsent[pv] = csize * (pm.count[owner] - 1)
    vrecv[pv] = pm.degree[owner] - csize
    aux.route_loads(vsent, vrecv)
    if not materialize:
        return None
    tables: dict[int, list[tuple[int, int]]] = {}
    for j in range(n):
        rows = list(zip(nbr[offs[j]:offs[j] + deg[j]].tolist(), first[offs[j]:offs[j] + deg[j]].tolist()))
        for r in range(int(pm.count[j])):
            tables[int(pm.start[j]) + r] = rows
    return tables


def proxy_placement(aux: AuxiliaryClique, pm: ProxyMap) -> Placement:
    n, m = pm.n, pm.m
    k = np.arange(m)
    bosses = (k[:, None] * m + k[None, :]) % n
    return Placement(clq=aux, n=n, K=m, host=pm.host_of(),
                     coord_a=k.astype(np.int64), coord_b=(n - 1 - k).astype(np.int64),
                     bosses=bosses.astype(np.int64), exclusive=False)


@dataclass
class ParallelCC:
    labels: np.ndarray
    forest: np.ndarray
    batch: BatchCC
    placement: Placement

    def instance_labels(self, i: int) -> np.ndarray:
        n = self.placement.n
        return self.labels[i * n:(i + 1) * n] - i * n


def parallel_cc(inst: NestedInstances, pm: ProxyMap, aux: AuxiliaryClique,
                params: PipelineParams, rng: np.random.Generator) -> ParallelCC:
    """Components of all ``m`` prefixes at once, then results back to the original nodes."""
    pl = proxy_placement(aux, pm)
    eu, ev = inst.batch()
    res = cc_batch(pl, eu, ev, params, rng, params.gp_rows_parallel)
    with aux.rt.phase("proxy"):
        # every coordinator tells each original node its parent in that instance
        ln = np.arange(pl.N)
        aux.rt.lenzen_route(pl.coord_a[ln // pl.n], ln % pl.n)
    return ParallelCC(res.labels, res.forest, res, pl)


def extract_mst(inst: NestedInstances, labels: np.ndarray, rt: Runtime | None = None) -> np.ndarray:
    """Group-local Kruskal: group ``k`` edges joining different prefix-``k-1`` components.

    ``labels`` holds the logical-node labels of all ``m`` instances. Node
    ``k`` handles group ``k``. Returns the selected edges as sorted rows.
    """
    n, m = inst.n, inst.m
    e, first, rank = inst.edges, inst.first, inst.rank
    if rt is not None:
        k = np.arange(1, m)
        rt.lenzen_route(np.repeat(k - 1, n), np.repeat(k, n))
        width = field_words([2 * bits_for(n - 1), bits_for(max(inst.group_size - 1, 0))], rt.W)
        rt.lenzen_route(np.minimum(e[:, 0], e[:, 1]), first, width=width)
    prev = np.where(first > 0, first - 1, 0)
    own = np.arange(n)
    lu = np.where(first > 0, labels[prev * n + e[:, 0]] - prev * n, own[e[:, 0]])
    lv = np.where(first > 0, labels[prev * n + e[:, 1]] - prev * n, own[e[:, 1]])
    cu, cv = first * n + lu, first * n + lv
    ok = cu != cv
    idx = np.flatnonzero(ok)
    idx = idx[np.argsort(rank[idx], kind="stable")]
    a, b = np.minimum(cu[idx], cv[idx]), np.maximum(cu[idx], cv[idx])
    _, keep = np.unique(a * (m * n) + b, return_index=True)
    idx, a, b = idx[keep], a[keep], b[keep]
    chosen = np.empty(0, dtype=np.int64)
    if len(idx):
        size = m * n
        w = (rank[idx] + 1).astype(np.float64)
        t = minimum_spanning_tree(coo_matrix((w, (a, b)), shape=(size, size)).tocsr()).tocoo()
        ta, tb = np.minimum(t.row, t.col), np.maximum(t.row, t.col)
        key = a * size + b
        order = np.argsort(key)
        chosen = idx[order][np.searchsorted(key[order], ta.astype(np.int64) * size + tb)]
    if rt is not None:
        rt.lenzen_route(np.concatenate([first[chosen], first[chosen]]),
                        np.concatenate([e[chosen, 0], e[chosen, 1]]))
    out = e[chosen]
    out = np.stack([np.minimum(out[:, 0], out[:, 1]), np.maximum(out[:, 0], out[:, 1])], axis=1)
    return out[np.lexsort((out[:, 1], out[:, 0]))]


@dataclass
class PipelineRun:
    edges: np.ndarray
    instances: NestedInstances
    proxies: ProxyMap
    cc: ParallelCC


def msf_pipeline(rt: Runtime, n: int, edges: np.ndarray, rank: np.ndarray,
                 params: PipelineParams, rng: np.random.Generator) -> PipelineRun:
    """Minimum spanning forest of ``(edges, rank)`` on the ``n``-node clique."""
    m = params.samples(n)
    lo = np.minimum(edges[:, 0], edges[:, 1]) if len(edges) else np.empty(0, dtype=np.int64)
    with rt.phase("proxy"):
        rt.sort(np.bincount(lo, minlength=n))
        inst = threshold_instances(n, edges, rank, m)
        deg = np.bincount(edges.ravel(), minlength=n) if len(edges) else np.zeros(n, dtype=np.int64)
        rt.broadcast(np.arange(n))
        pm = assign_proxies(deg, m, params.proxy_slots)
        aux = AuxiliaryClique(rt, 1 + params.proxy_slots)
        distribute_neighbor_tables(aux, inst, pm)
    pcc = parallel_cc(inst, pm, aux, params, rng)
    with rt.phase("extract"):
        out = extract_mst(inst, pcc.labels, rt)
    return PipelineRun(out, inst, pm, pcc)


@dataclass
class MSTResult:
    edges: np.ndarray
    weight: int
    rt: Runtime
    g1_edges: int
    g2_edges: int
    runs: list[PipelineRun] = field(default_factory=list, repr=False)

    @property
    def rounds(self) -> int:
        return self.rt.rounds

    def to_dict(self) -> dict:
        tr = self.rt.metrics()
        return {
            "mst_weight": self.weight,
            "edge_count": int(len(self.edges)),
            "rounds": tr.rounds_charged,
            "max_load": tr.max_node_round_load,
            "phase_rounds": {k: v["rounds"] for k, v in sorted(tr.per_phase.items())},
        }


def mst(g: WeightedGraph, params: PipelineParams | None = None, rt: Runtime | None = None) -> MSTResult:
    """Minimum spanning forest of ``g`` (ties in weight broken by edge id)."""
    params = params or PipelineParams()
    n = g.n
    rt = rt or params.runtime(n)
    rng = np.random.default_rng(params.seed)
    ranks = edge_ranks(g)
    lo = g.edges[:, 0]
    with rt.phase("kkt"):
        rt.sort(np.bincount(lo, minlength=n))
        _, keep1 = kkt_sample(g, int(rng.integers(1 << 62)), params, rt)
    idx1 = np.flatnonzero(keep1)
    run1 = msf_pipeline(rt, n, g.edges[idx1], ranks[idx1], params, rng)
    f = run1.edges
    with rt.phase("kkt"):
        # the forest is gathered at node 0, rooted, and every node learns all parent pointers
        rt.lenzen_route(f[:, 0], np.zeros(len(f), dtype=np.int64))
        rt.lenzen_route(np.zeros(n, dtype=np.int64), np.arange(n))
        rt.broadcast(np.arange(n))
        keys = g.edges[:, 0] * n + g.edges[:, 1]
        fpos = np.searchsorted(keys, f[:, 0] * n + f[:, 1])
        keep2 = light_mask(n, g.edges[:, 0], g.edges[:, 1], ranks, f[:, 0], f[:, 1], ranks[fpos])
        keep2[fpos] = True
        cap = params.kkt_cap * n ** 1.5
        if keep2.sum() > cap:
            raise KKTCapExceeded(f"light edges {keep2.sum()} > {cap:.0f}")
    idx2 = np.flatnonzero(keep2)
    run2 = msf_pipeline(rt, n, g.edges[idx2], ranks[idx2], params, rng)
    out = run2.edges
    weight = g.weight_of(out) if len(out) else 0
    return MSTResult(out, weight, rt, len(idx1), len(idx2), [run1, run2])


def kruskal_local(n: int, edges: np.ndarray, rank: np.ndarray) -> np.ndarray:
    """Plain sequential Kruskal over ranked edges (used by tests as a reference)."""
    uf = UnionFind(n)
    out = [tuple(edges[i]) for i in np.argsort(rank) if uf.union(int(edges[i, 0]), int(edges[i, 1]))]
    return np.asarray(sorted(out), dtype=np.int64).reshape(-1, 2)
