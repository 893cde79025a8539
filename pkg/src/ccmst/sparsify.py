"""Degree reduction: split a graph into few awake components and a low-degree rest.

Each node reports one edge towards its highest-(degree, id) neighbour, the
coordinator forms components, then each node reports one edge into the
highest-degree neighbouring component (ties to the larger component id).
Components whose maximum member degree reaches ``s`` are awake; edges with
both ends awake form ``G_A`` and the rest ``G_B``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

import numpy as np

from .graph import Graph, Partition
from .local import components, group_max, spanning_forest
from .placement import InvariantViolation, PipelineParams, Placement, single_placement
from .runtime import Runtime


def stage1_select(v: int, neighbor_degrees: Mapping[int, int]) -> tuple[int, int] | None:
    """Edge ``(u, v)`` to the neighbour maximising ``(d(u), u)``; ``None`` when isolated."""
    if not neighbor_degrees:
        return None
    u = max(neighbor_degrees, key=lambda w: (neighbor_degrees[w], w))
    return (u, v)


def stage2_select(v: int, own_component: int,
                  neighbor_info: Mapping[int, tuple[int, int]]) -> tuple[int, int] | None:
    """Edge into the neighbouring component with the largest ``(d(C), id)``.

    ``neighbor_info`` maps each neighbour to ``(component id, component degree)``.
    Within the chosen component the largest neighbour id is used.
    """
    outside = {u: info for u, info in neighbor_info.items() if info[0] != own_component}
    if not outside:
        return None
    u = max(outside, key=lambda w: (outside[w][1], outside[w][0], w))
    return (u, v)


@dataclass
class BatchSparsify:
    s: int
    labels: np.ndarray
    comp_degree: np.ndarray
    awake: np.ndarray
    in_a: np.ndarray
    forest: np.ndarray
    awake_counts: np.ndarray
    max_degree_b: np.ndarray
    min_awake_size: np.ndarray


def reduce_degree_batch(pl: Placement, eu: np.ndarray, ev: np.ndarray, s: int,
                        check: bool = True) -> BatchSparsify:
    """Run the two selection stages on every instance of the batch at once.

    ``eu``/``ev`` are logical endpoints; coordinators are ``pl.coord_a``.
    """
    N, n, K = pl.N, pl.n, pl.K
    clq = pl.clq
    src = np.concatenate([eu, ev])
    dst = np.concatenate([ev, eu])
    deg = np.bincount(src, minlength=N).astype(np.int64)
    has = np.flatnonzero(deg > 0)

    # step 2: degrees to neighbours
    pl.neighbor_exchange(src, dst)

    # stage 1: edge to the (degree, id)-largest neighbour
    best = group_max(src, deg[dst] * N + dst, N)
    e1u, e1v = has, best[has] % N
    pl.to_coordinators(has, pl.coord_a)
    labels = components(N, e1u, e1v)
    comp_deg = group_max(labels, deg, N, empty=0)[labels]
    pl.from_coordinators(np.arange(N), pl.coord_a)
    pl.neighbor_exchange(src, dst)

    # stage 2: edge into the heaviest neighbouring component
    cross = labels[src] != labels[dst]
    cs, cd = src[cross], dst[cross]
    key = (comp_deg[cd] * N + labels[cd]) * N + cd
    best2 = group_max(cs, key, N)
    senders = np.flatnonzero(best2 >= 0)
    e2u, e2v = senders, best2[senders] % N
    pl.to_coordinators(senders, pl.coord_a)
    au = np.concatenate([e1u, e2u])
    av = np.concatenate([e1v, e2v])
    labels = components(N, au, av)
    comp_deg = group_max(labels, deg, N, empty=0)[labels]
    pl.from_coordinators(np.arange(N), pl.coord_a)
    pl.neighbor_exchange(src, dst)

    awake = comp_deg >= s
    in_a = awake[eu] & awake[ev]
    forest = spanning_forest(N, au, av)
    forest = forest[awake[forest[:, 0]]]

    inst = np.arange(N) // n
    is_rep = labels == np.arange(N)
    awake_counts = np.bincount(inst[is_rep & awake], minlength=K)
    bu, bv = eu[~in_a], ev[~in_a]
    deg_b = np.bincount(np.concatenate([bu, bv]), minlength=N)
    max_deg_b = group_max(inst, deg_b, K, empty=0)
    sizes = np.bincount(labels, minlength=N)
    big = np.full(K, max(n, s) + 1, dtype=np.int64)
    reps = np.flatnonzero(is_rep & awake)
    if len(reps):
        np.minimum.at(big, inst[reps], sizes[reps])
    out = BatchSparsify(s, labels, comp_deg, awake, in_a, forest, awake_counts, max_deg_b, big)
    if check:
        check_fact2(out, n)
    return out


def check_fact2(res: BatchSparsify, n: int) -> None:
    s = res.s
    bad = np.flatnonzero(res.awake_counts * s > n)
    if len(bad):
        raise InvariantViolation(f"instance {bad[0]}: {res.awake_counts[bad[0]]} awake components > n/s")
    bad = np.flatnonzero(res.max_degree_b >= s)
    if len(bad):
        raise InvariantViolation(f"instance {bad[0]}: G_B has degree {res.max_degree_b[bad[0]]} >= s={s}")
    bad = np.flatnonzero(res.min_awake_size <= s)
    if len(bad):
        raise InvariantViolation(f"instance {bad[0]}: awake component of size {res.min_awake_size[bad[0]]} <= s")


@dataclass
class SparsifyResult:
    g_a: Graph
    c_a: Partition
    g_b: Graph
    s: int
    labels: np.ndarray
    comp_degree: np.ndarray
    awake: np.ndarray
    in_a: np.ndarray

    @property
    def awake_components(self) -> int:
        return len(self.c_a.active)


def reduce_degree(g: Graph, s: int, rt: Runtime | None = None,
                  params: PipelineParams | None = None) -> SparsifyResult:
    """Degree reduction on a single graph with node 0 as coordinator."""
    if s < 1:
        raise ValueError("s must be at least 1")
    params = params or PipelineParams()
    rt = rt or params.runtime(g.n)
    pl = single_placement(rt, g.n, params.samples(g.n))
    with rt.phase("sparsify"):
        res = reduce_degree_batch(pl, g.edges[:, 0], g.edges[:, 1], s, check=params.check)
    return _single_result(g, res)


def _single_result(g: Graph, res: BatchSparsify) -> SparsifyResult:
    n = g.n
    ca_labels = np.where(res.awake, res.labels, np.arange(n))
    active = frozenset(np.unique(res.labels[res.awake]).tolist())
    c_a = Partition(ca_labels, active, res.forest)
    return SparsifyResult(
        g_a=g.subgraph(res.in_a), c_a=c_a, g_b=g.subgraph(~res.in_a), s=res.s,
        labels=res.labels, comp_degree=res.comp_degree, awake=res.awake, in_a=res.in_a,
    )
