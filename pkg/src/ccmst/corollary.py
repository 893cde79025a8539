"""Verification problems that reduce to one or two connectivity runs."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .cc import cc_batch, connected_components
from .graph import Graph, GraphInputError, build_graph
from .placement import PipelineParams, single_placement
from .runtime import AuxiliaryClique, Runtime


@dataclass
class Verdict:
    value: bool
    rt: Runtime

    def __bool__(self) -> bool:
        return self.value

    @property
    def rounds(self) -> int:
        return self.rt.rounds


def _setup(g: Graph, params: PipelineParams | None, rt: Runtime | None) -> tuple[PipelineParams, Runtime]:
    params = params or PipelineParams()
    return params, rt or params.runtime(g.n)


def st_connected(g: Graph, s: int, t: int, params: PipelineParams | None = None,
                 rt: Runtime | None = None) -> Verdict:
    """Whether ``s`` and ``t`` lie in the same component."""
    for x in (s, t):
        if not 0 <= x < g.n:
            raise GraphInputError(f"node {x} not in 0..{g.n - 1}")
    params, rt = _setup(g, params, rt)
    res = connected_components(g, params, rt)
    with rt.phase("verify"):
        # node 0 holds the partition and tells s and t their labels
        rt.lenzen_route([0, 0], [s, t])
    lab = res.partition.labels
    return Verdict(bool(lab[s] == lab[t]), rt)


def double_cover(g: Graph) -> Graph:
    """Nodes ``v`` and ``v + n``; edge ``{u, v}`` becomes ``{u, v+n}`` and ``{u+n, v}``."""
    n = g.n
    u, v = g.edges[:, 0], g.edges[:, 1]
    e = np.concatenate([np.stack([u, v + n], axis=1), np.stack([v, u + n], axis=1)])
    return build_graph(2 * n, e)


def is_bipartite(g: Graph, params: PipelineParams | None = None,
                 rt: Runtime | None = None) -> Verdict:
    """Bipartite iff the double cover has exactly twice as many components as ``g``.

    The double cover runs on ``2n`` virtual nodes, two per clique node.
    """
    params, rt = _setup(g, params, rt)
    base = connected_components(g, params, rt).partition.num_components
    dc = double_cover(g)
    aux = AuxiliaryClique(rt, 2)
    pl = single_placement(aux, dc.n, params.samples(dc.n))
    labels = cc_batch(pl, dc.edges[:, 0], dc.edges[:, 1], params,
                      np.random.default_rng(params.seed + 1), params.gp_rows).labels
    cover = int(np.count_nonzero(labels == np.arange(dc.n)))
    return Verdict(cover == 2 * base, rt)


def verify_cut(g: Graph, cut, params: PipelineParams | None = None,
               rt: Runtime | None = None) -> Verdict:
    """Whether no edge leaves the node set ``cut``."""
    members = np.zeros(g.n, dtype=bool)
    cut = np.asarray(sorted(set(int(x) for x in cut)), dtype=np.int64)
    if len(cut) == 0 or len(cut) == g.n:
        raise GraphInputError("cut must be a nonempty proper subset of the nodes")
    if cut.min() < 0 or cut.max() >= g.n:
        raise GraphInputError("cut names a node outside the graph")
    members[cut] = True
    params, rt = _setup(g, params, rt)
    with rt.phase("verify"):
        u, v = g.edges[:, 0], g.edges[:, 1]
        # membership bits across every edge, then one flag per node to node 0
        rt.direct(np.concatenate([u, v]), np.concatenate([v, u]))
        rt.direct(np.arange(g.n), np.zeros(g.n, dtype=np.int64))
    crossing = members[u] != members[v]
    return Verdict(not bool(crossing.any()), rt)


def contains_cycle(g: Graph, params: PipelineParams | None = None,
                   rt: Runtime | None = None) -> Verdict:
    """Whether some component has at least as many edges as nodes."""
    params, rt = _setup(g, params, rt)
    p = connected_components(g, params, rt).partition
    with rt.phase("verify"):
        # every node reports (label, edges it owns as lower endpoint) to node 0
        rt.lenzen_route(np.arange(g.n), np.zeros(g.n, dtype=np.int64), width=2)
    lab = p.labels
    edges = np.bincount(lab[g.edges[:, 0]], minlength=g.n)
    nodes = np.bincount(lab, minlength=g.n)
    return Verdict(bool((edges[nodes > 0] >= nodes[nodes > 0]).any()), rt)
