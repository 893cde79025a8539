"""Finishing a partition with sketches, and the full connected-components pipeline.

:func:`gp_reduce_batch` is a Boruvka loop over linear sketches with a fixed
budget of sub-rounds. In every sub-round the coordinator tells each node its
component label, every node of a still-unresolved component sketches its
incident edges with fresh seeds, the clique sums the sketches per component
(keyed aggregation), the cells are decoded and the smallest verified
boundary edge per component goes to the coordinator, which merges. A
component whose summed sketch is zero has no boundary edge and is retired.
The budget is charged in full whether or not work remains, so the cost of
an invocation depends only on the parameters.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .graph import Graph, Partition, active_labels
from .local import components, spanning_forest
from .placement import PipelineParams, Placement, loglog, single_placement
from .runtime import PreconditionError, Runtime, SimulationError
from .sketch import SketchSpec, decode_cells, incidence_cells, mix64, reduce_cells
from .size_reduce import reduce_components_batch
from .sparsify import reduce_degree_batch


class GPBudgetExceeded(SimulationError):
    def __init__(self, remaining: int, budget: int):
        self.remaining, self.budget = remaining, budget
        super().__init__(f"{remaining} components still unresolved after {budget} sub-rounds")


@dataclass
class GPStats:
    initial_active: np.ndarray
    candidates: np.ndarray
    used: np.ndarray
    merges: list[int] = field(default_factory=list)


def _owner(keys: np.ndarray, salt: int, size: int) -> np.ndarray:
    h = mix64(keys.astype(np.uint64) ^ np.uint64(salt & 0xFFFFFFFFFFFFFFFF))
    return (h % np.uint64(size)).astype(np.int64)


def gp_reduce_batch(pl: Placement, eu: np.ndarray, ev: np.ndarray, labels: np.ndarray,
                    candidate: np.ndarray, forest: np.ndarray, coords: np.ndarray,
                    params: PipelineParams, rows: int, rng: np.random.Generator
                    ) -> tuple[np.ndarray, np.ndarray, GPStats]:
    """Complete the partition ``labels`` of the batch graph ``(eu, ev)``.

    ``candidate`` flags (by representative) the components that may still
    be growable; flagging an ungrowable one only costs a sub-round, missing a
    growable one breaks the contract. Returns final labels, forest and stats.
    """
    N, n, K = pl.N, pl.n, pl.K
    clq = pl.clq
    W = pl.rt.W
    labels = labels.astype(np.int64).copy()
    pending = np.zeros(N, dtype=bool)
    pending[np.asarray(candidate, dtype=np.int64)] = True
    pending &= labels == np.arange(N)

    inst_of_lab = np.arange(N) // n
    true_active = np.zeros(K, dtype=np.int64)
    act = np.fromiter(active_labels(labels, np.stack([eu, ev], axis=1)), dtype=np.int64)
    if len(act):
        np.add.at(true_active, inst_of_lab[act], 1)
        missed = act[~pending[act]]
        if len(missed):
            raise PreconditionError(f"component {missed[0]} is growable but not flagged")
    limit = params.gp_active_factor * n / loglog(n)
    if params.check and true_active.max(initial=0) > limit:
        i = int(np.argmax(true_active))
        raise PreconditionError(f"instance {i} starts with {true_active[i]} active components > {limit:.0f}")
    stats = GPStats(true_active, np.bincount(inst_of_lab[pending], minlength=K), np.zeros(K, dtype=np.int64))

    # one shared random word from node 0 seeds every sub-round's hashes
    clq.broadcast([0])
    base = int(rng.integers(1 << 62))
    lo, hi = np.minimum(eu, ev), np.maximum(eu, ev)
    tok_e = (lo % n) * n + hi % n
    forests = [np.asarray(forest, dtype=np.int64).reshape(-1, 2)]

    for t in range(params.gp_budget):
        spec = SketchSpec(n, rows, seed=base + t, word=W)
        L = spec.levels
        RL = rows * L
        cw = spec.cell_words(W)
        pl.labels_from_coordinators(coords)
        stats.used[np.unique(inst_of_lab[np.flatnonzero(pending)])] += 1
        busy = pending[labels]
        e = np.flatnonzero(busy[lo] | busy[hi])
        lv = spec.levels_of(tok_e[e]) if len(e) else np.empty((rows, 0), dtype=np.int64)
        rl = (np.arange(rows)[:, None] * L + lv).ravel()
        # node-level sketches: one nonzero cell per distinct (row, level) at a node
        ends = []
        for side in (lo, hi):
            x = side[e]
            keep = np.tile(busy[x], rows)
            ends.append(np.tile(x, rows)[keep] * RL + rl[keep])
        node_keys = np.unique(np.concatenate(ends))
        node = node_keys // RL
        comp_keys = labels[node] * RL + node_keys % RL
        sent = np.bincount(pl.host[node], minlength=clq.size) * cw
        clq.aggregate(sent, comp_keys, _owner(comp_keys, base + t, clq.size), result_width=cw)
        # edges inside a component cancel, so the sums only see boundary edges
        bnd = e[labels[lo[e]] != labels[hi[e]]]
        parts_l, parts_t, parts_s = [], [], []
        for side, sgn in ((lo, 1), (hi, -1)):
            x = side[bnd]
            k = busy[x]
            parts_l.append(labels[x[k]])
            parts_t.append(tok_e[bnd[k]])
            parts_s.append(np.full(int(k.sum()), sgn))
        keys, vals = incidence_cells(np.concatenate(parts_l), np.concatenate(parts_t),
                                     np.concatenate(parts_s), spec)
        cand, _ = decode_cells(vals, spec)
        lab = keys // RL
        # second aggregation: per component the smallest verified token and a nonzero flag
        ukeys = np.unique(comp_keys)
        own = _owner(ukeys, base + t, clq.size)
        clq.aggregate(np.bincount(own, minlength=clq.size), ukeys // RL,
                      coords[inst_of_lab[ukeys // RL]], result_width=1)
        nonzero = np.zeros(N, dtype=bool)
        nonzero[lab] = True
        best = np.full(N, n * n, dtype=np.int64)
        ok = cand >= 0
        np.minimum.at(best, lab[ok], cand[ok])

        retired = pending & ~nonzero
        pending &= ~retired
        has = np.flatnonzero(pending & (best < n * n))
        if len(has) == 0:
            stats.merges.append(0)
            continue
        base_l = inst_of_lab[has] * n
        a = base_l + best[has] // n
        b = base_l + best[has] % n
        la, lb = labels[a], labels[b]
        good = (la != lb) & ((la == has) | (lb == has))
        a, b, la, lb = a[good], b[good], la[good], lb[good]
        stats.merges.append(int(len(a)))
        if len(a) == 0:
            continue
        tree = spanning_forest(N, la, lb)
        key = np.minimum(la, lb) * N + np.maximum(la, lb)
        uk, first = np.unique(key, return_index=True)
        pick = first[np.searchsorted(uk, tree[:, 0] * N + tree[:, 1])]
        forests.append(np.stack([np.minimum(a[pick], b[pick]), np.maximum(a[pick], b[pick])], axis=1))
        root = components(N, la, lb)
        touched = np.unique(np.concatenate([la, lb]))
        labels = root[labels]
        # a merged component keeps being sketched until its sketch comes back zero
        keep = pending.copy()
        keep[touched] = False
        keep[root[touched]] = True
        pending = keep

    left = int(np.count_nonzero(pending))
    if left:
        raise GPBudgetExceeded(left, params.gp_budget)
    out_forest = np.concatenate(forests)
    order = np.lexsort((out_forest[:, 1], out_forest[:, 0]))
    return labels, out_forest[order], stats


def gp_reduce(g: Graph, p: Partition, rt: Runtime | None = None,
              params: PipelineParams | None = None, seed: int = 0,
              rows: int | None = None) -> tuple[Partition, GPStats]:
    """Complete ``p`` (whose active flags must be right for ``g``) into the components of ``g``."""
    params = params or PipelineParams()
    rt = rt or params.runtime(g.n)
    if p.n != g.n:
        raise PreconditionError("partition and graph cover different node sets")
    pl = single_placement(rt, g.n, params.samples(g.n))
    forest = p.forest if p.forest is not None else np.empty((0, 2), dtype=np.int64)
    cand = np.fromiter(p.active, dtype=np.int64)
    with rt.phase("gp"):
        labels, f, stats = gp_reduce_batch(pl, g.edges[:, 0], g.edges[:, 1], p.labels, cand, forest,
                                           pl.coord_a, params, rows or params.gp_rows,
                                           np.random.default_rng(seed))
    return Partition(labels, frozenset(), f), stats


@dataclass
class BatchCC:
    labels: np.ndarray
    forest: np.ndarray
    sparsify: object
    size_reduce: object
    gp1: GPStats
    gp2: GPStats


def cc_batch(pl: Placement, eu: np.ndarray, ev: np.ndarray, params: PipelineParams,
             rng: np.random.Generator, rows: int, keep_samples: bool = False) -> BatchCC:
    """Sparsify, finish ``G_A``, shrink ``G_B``, finish it, then merge both forests."""
    N = pl.N
    rt = pl.rt
    s = params.sparsify_s(pl.n)
    with rt.phase("sparsify"):
        sp = reduce_degree_batch(pl, eu, ev, s, check=params.check)
    ea = sp.in_a
    with rt.phase("gp"):
        init = np.where(sp.awake, sp.labels, np.arange(N))
        cand = np.flatnonzero(sp.awake & (sp.labels == np.arange(N)))
        l1, f1, st1 = gp_reduce_batch(pl, eu[ea], ev[ea], init, cand, sp.forest, pl.coord_a,
                                      params, rows, rng)
    bu, bv = eu[~ea], ev[~ea]
    with rt.phase("size_reduce"):
        sr = reduce_components_batch(pl, bu, bv, params, rng, keep_samples)
    with rt.phase("gp"):
        cand = np.flatnonzero(sr.labels == np.arange(N))
        l2, f2, st2 = gp_reduce_batch(pl, bu, bv, sr.labels, cand, sr.forest, pl.coord_b,
                                      params, rows, rng)
    with rt.phase("merge"):
        # the second coordinator ships its forest to the first one
        inst = f2[:, 0] // pl.n
        pl.clq.lenzen_route(pl.coord_b[inst], pl.coord_a[inst])
        both = np.concatenate([f1, f2])
        labels = components(N, both[:, 0], both[:, 1])
        forest = spanning_forest(N, both[:, 0], both[:, 1])
    return BatchCC(labels, forest, sp, sr, st1, st2)


@dataclass
class CCResult:
    partition: Partition
    batch: BatchCC
    rt: Runtime

    @property
    def rounds(self) -> int:
        return self.rt.rounds


def connected_components(g: Graph, params: PipelineParams | None = None,
                         rt: Runtime | None = None, keep_samples: bool = False) -> CCResult:
    """Components of ``g`` on an ``n``-node clique; the partition ends at node 0."""
    params = params or PipelineParams()
    rt = rt or params.runtime(g.n)
    pl = single_placement(rt, g.n, params.samples(g.n))
    rng = np.random.default_rng(params.seed)
    res = cc_batch(pl, g.edges[:, 0], g.edges[:, 1], params, rng, params.gp_rows, keep_samples)
    return CCResult(Partition(res.labels, frozenset(), res.forest), res, rt)
