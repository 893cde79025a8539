"""Graph and partition data model, sequential oracles and generators.

Everything here is sequential, host-side code: it is what the simulated
algorithms are checked against, so it deliberately avoids the vectorised
helpers used inside the simulation.
"""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np


class GraphInputError(ValueError):
    """Raised for malformed graph input (bad endpoints, self-loops, bad files)."""


def _frozen(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


def _normalize_edges(n: int, edges) -> np.ndarray:
    arr = np.asarray(edges, dtype=np.int64)
    if arr.size == 0:
        return np.empty((0, 2), dtype=np.int64)
    arr = arr.reshape(-1, 2)
    if arr.min() < 0 or arr.max() >= n:
        bad = arr[(arr < 0).any(axis=1) | (arr >= n).any(axis=1)][0]
        raise GraphInputError(f"edge ({bad[0]}, {bad[1]}) has an endpoint outside [0, {n})")
    if (arr[:, 0] == arr[:, 1]).any():
        v = int(arr[arr[:, 0] == arr[:, 1]][0, 0])
        raise GraphInputError(f"self-loop at node {v}")
    lo = np.minimum(arr[:, 0], arr[:, 1])
    hi = np.maximum(arr[:, 0], arr[:, 1])
    keys = np.unique(lo * n + hi)
    return np.stack([keys // n, keys % n], axis=1)


@dataclass(frozen=True, eq=False)
class Graph:
    """Undirected simple graph on nodes ``0..n-1``.

    ``edges`` holds each undirected edge once as ``(u, v)`` with ``u < v``,
    sorted lexicographically.
    """

    n: int
    edges: np.ndarray
    _csr: tuple = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        _frozen(self.edges)
        u, v = self.edges[:, 0], self.edges[:, 1]
        src = np.concatenate([u, v])
        dst = np.concatenate([v, u])
        order = np.lexsort((dst, src))
        indptr = np.zeros(self.n + 1, dtype=np.int64)
        np.cumsum(np.bincount(src, minlength=self.n), out=indptr[1:])
        object.__setattr__(self, "_csr", (_frozen(indptr), _frozen(dst[order])))

    @property
    def m(self) -> int:
        return len(self.edges)

    @property
    def indptr(self) -> np.ndarray:
        return self._csr[0]

    @property
    def indices(self) -> np.ndarray:
        return self._csr[1]

    def neighbors(self, v: int) -> np.ndarray:
        ip, ix = self._csr
        return ix[ip[v]:ip[v + 1]]

    def degree(self) -> np.ndarray:
        return np.diff(self._csr[0])

    @property
    def adjacency(self) -> dict[int, list[int]]:
        return {v: self.neighbors(v).tolist() for v in range(self.n)}

    def edge_set(self) -> set[tuple[int, int]]:
        return {(int(a), int(b)) for a, b in self.edges}

    def subgraph(self, mask: np.ndarray) -> "Graph":
        """Graph on the same node set keeping the edges selected by ``mask``."""
        return Graph(self.n, self.edges[mask].copy())

    def __eq__(self, other):
        return isinstance(other, Graph) and self.n == other.n and np.array_equal(self.edges, other.edges)

    def __hash__(self):
        return hash((self.n, self.edges.tobytes()))


@dataclass(frozen=True, eq=False)
class WeightedGraph(Graph):
    """Graph with one non-negative integer weight per edge (aligned with ``edges``)."""

    weights: np.ndarray = None

    def __post_init__(self):
        super().__post_init__()
        if self.weights is None or len(self.weights) != len(self.edges):
            raise GraphInputError("weights must align with edges")
        if len(self.weights) and np.asarray(self.weights).min() < 0:
            raise GraphInputError("weights must be non-negative")
        _frozen(self.weights)

    @property
    def graph(self) -> Graph:
        return Graph(self.n, self.edges.copy())

    def distinct_weights(self) -> bool:
        return len(np.unique(self.weights)) == len(self.weights)

    def subgraph(self, mask: np.ndarray) -> "WeightedGraph":
        return WeightedGraph(self.n, self.edges[mask].copy(), weights=self.weights[mask].copy())

    def weight_of(self, edges: np.ndarray) -> int:
        """Total weight of the given ``(u, v)`` edges (each must be in the graph)."""
        if len(edges) == 0:
            return 0
        keys = self.edges[:, 0] * self.n + self.edges[:, 1]
        e = np.asarray(edges, dtype=np.int64)
        q = np.minimum(e[:, 0], e[:, 1]) * self.n + np.maximum(e[:, 0], e[:, 1])
        pos = np.searchsorted(keys, q)
        if (pos >= len(keys)).any() or not np.array_equal(keys[np.minimum(pos, len(keys) - 1)], q):
            raise GraphInputError("edge not present in graph")
        return int(self.weights[pos].sum())

    def __eq__(self, other):
        return (isinstance(other, WeightedGraph) and super().__eq__(other)
                and np.array_equal(self.weights, other.weights))

    def __hash__(self):
        return hash((self.n, self.edges.tobytes(), np.asarray(self.weights).tobytes()))


def build_graph(n: int, edges: Iterable[tuple[int, int]]) -> Graph:
    if n < 0:
        raise GraphInputError("node count must be non-negative")
    return Graph(int(n), _normalize_edges(n, list(edges)))


def build_weighted_graph(n: int, edges: Iterable[tuple[int, int, int]]) -> WeightedGraph:
    rows = [tuple(e) for e in edges]
    if not rows:
        return WeightedGraph(int(n), np.empty((0, 2), dtype=np.int64), weights=np.empty(0, dtype=np.int64))
    arr = np.asarray(rows, dtype=np.int64)
    norm = _normalize_edges(n, arr[:, :2])
    if len(norm) != len(arr):
        raise GraphInputError("duplicate edge in weighted input")
    lo = np.minimum(arr[:, 0], arr[:, 1])
    hi = np.maximum(arr[:, 0], arr[:, 1])
    order = np.argsort(lo * n + hi, kind="stable")
    return WeightedGraph(int(n), norm, weights=arr[order, 2].copy())


class UnionFind:
    """Plain union-find with path halving; the smaller root wins ties."""

    def __init__(self, n: int):
        self.parent = list(range(n))
        self.size = [1] * n

    def find(self, a: int) -> int:
        p = self.parent
        while p[a] != a:
            p[a] = p[p[a]]
            a = p[a]
        return a

    def union(self, a: int, b: int) -> bool:
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return False
        if self.size[ra] < self.size[rb] or (self.size[ra] == self.size[rb] and rb < ra):
            ra, rb = rb, ra
        self.parent[rb] = ra
        self.size[ra] += self.size[rb]
        return True


@dataclass(frozen=True)
class SpanningForest:
    """Parent pointers; roots carry ``-1``."""

    parent: tuple[int, ...]

    @classmethod
    def from_edges(cls, n: int, edges) -> "SpanningForest":
        adj: list[list[int]] = [[] for _ in range(n)]
        for a, b in np.asarray(edges, dtype=np.int64).reshape(-1, 2):
            adj[a].append(int(b))
            adj[b].append(int(a))
        parent = [-2] * n
        for r in range(n):
            if parent[r] != -2:
                continue
            parent[r] = -1
            stack = [r]
            while stack:
                x = stack.pop()
                for y in adj[x]:
                    if parent[y] == -2:
                        parent[y] = x
                        stack.append(y)
                    elif y != parent[x]:
                        raise GraphInputError("edge set contains a cycle")
        return cls(tuple(parent))

    @property
    def n(self) -> int:
        return len(self.parent)

    def edges(self) -> np.ndarray:
        e = [(min(v, p), max(v, p)) for v, p in enumerate(self.parent) if p >= 0]
        return np.asarray(sorted(e), dtype=np.int64).reshape(-1, 2)


@dataclass(frozen=True, eq=False)
class Partition:
    """Component label per node (canonically the minimum member id).

    ``active`` holds the labels of components that still have an edge to
    another component in the reference graph they were checked against.
    ``forest`` optionally carries one spanning tree per component as
    ``(u, v)`` rows with ``u < v``.
    """

    labels: np.ndarray
    active: frozenset = frozenset()
    forest: np.ndarray | None = None

    def __post_init__(self):
        _frozen(self.labels)
        if self.forest is not None:
            _frozen(self.forest)

    @property
    def n(self) -> int:
        return len(self.labels)

    @property
    def num_components(self) -> int:
        return int(np.count_nonzero(self.labels == np.arange(self.n)))

    def components(self) -> list[list[int]]:
        groups: dict[int, list[int]] = {}
        for v, c in enumerate(self.labels.tolist()):
            groups.setdefault(c, []).append(v)
        return [groups[c] for c in sorted(groups)]

    def label_sets(self) -> frozenset:
        return frozenset(frozenset(c) for c in self.components())

    def sizes(self) -> np.ndarray:
        return np.bincount(self.labels, minlength=self.n)

    def same_components(self, other: "Partition") -> bool:
        return np.array_equal(self.labels, other.labels)

    def __eq__(self, other):
        return isinstance(other, Partition) and self.same_components(other)

    def __hash__(self):
        return hash(self.labels.tobytes())


def canonical_labels(raw: np.ndarray) -> np.ndarray:
    """Relabel so each component is named by its minimum node id."""
    raw = np.asarray(raw, dtype=np.int64)
    n = len(raw)
    if n == 0:
        return raw.copy()
    _, inv = np.unique(raw, return_inverse=True)
    mins = np.full(inv.max() + 1, n, dtype=np.int64)
    np.minimum.at(mins, inv, np.arange(n))
    return mins[inv]


def active_labels(labels: np.ndarray, edges: np.ndarray) -> frozenset:
    """Labels of components with at least one reference edge leaving them."""
    if len(edges) == 0:
        return frozenset()
    lu, lv = labels[edges[:, 0]], labels[edges[:, 1]]
    cross = lu != lv
    return frozenset(np.unique(np.concatenate([lu[cross], lv[cross]])).tolist())


def complete_partition(n: int, edges, reference: Graph | None = None) -> Partition:
    """Exact components of ``(V, edges)`` with a union-find spanning forest.

    Active flags are computed against ``reference`` when given; without one
    every component is flagged inactive.
    """
    e = _normalize_edges(n, edges) if len(edges) else np.empty((0, 2), dtype=np.int64)
    uf = UnionFind(n)
    kept = [(int(a), int(b)) for a, b in e if uf.union(int(a), int(b))]
    labels = canonical_labels(np.array([uf.find(v) for v in range(n)], dtype=np.int64))
    forest = np.asarray(kept, dtype=np.int64).reshape(-1, 2)
    active = active_labels(labels, reference.edges) if reference is not None else frozenset()
    return Partition(labels, active, forest)


def oracle_components(g: Graph) -> Partition:
    """Sequential BFS components with a BFS spanning forest."""
    n = g.n
    ip, ix = g.indptr.tolist(), g.indices.tolist()
    labels = [-1] * n
    forest: list[tuple[int, int]] = []
    for r in range(n):
        if labels[r] >= 0:
            continue
        labels[r] = r
        q = deque([r])
        while q:
            x = q.popleft()
            for y in ix[ip[x]:ip[x + 1]]:
                if labels[y] < 0:
                    labels[y] = r
                    forest.append((min(x, y), max(x, y)))
                    q.append(y)
    return Partition(np.asarray(labels, dtype=np.int64), frozenset(),
                     np.asarray(sorted(forest), dtype=np.int64).reshape(-1, 2))


def kruskal_order(g: WeightedGraph) -> np.ndarray:
    """Edge indices by (weight, edge id) ascending; the id breaks weight ties."""
    keys = g.edges[:, 0] * g.n + g.edges[:, 1]
    return np.lexsort((keys, g.weights))


def oracle_mst(g: WeightedGraph) -> np.ndarray:
    """Kruskal minimum spanning forest as sorted ``(u, v)`` rows.

    Ties in weight are broken by edge id, so the result is the unique MSF of
    the tie-broken order.
    """
    uf = UnionFind(g.n)
    need = g.n - oracle_components(g.graph).num_components if g.m > 4 * g.n else g.n - 1
    out: list[tuple[int, int]] = []
    edges = g.edges.tolist()
    for i in kruskal_order(g).tolist():
        a, b = edges[i]
        if uf.union(a, b):
            out.append((a, b))
            if len(out) == need:
                break
    return np.asarray(sorted(out), dtype=np.int64).reshape(-1, 2)


def merge_cc_solutions(p1: Partition, p2: Partition) -> Partition:
    """Components of the union of two CC solutions, via their forests."""
    if p1.n != p2.n:
        raise GraphInputError(f"partitions cover {p1.n} and {p2.n} nodes")
    if p1.forest is None or p2.forest is None:
        raise GraphInputError("merging CC solutions requires both spanning forests")
    both = np.concatenate([p1.forest, p2.forest])
    uf = UnionFind(p1.n)
    kept = [(int(a), int(b)) for a, b in both if uf.union(int(a), int(b))]
    labels = canonical_labels(np.array([uf.find(v) for v in range(p1.n)], dtype=np.int64))
    return Partition(labels, frozenset(), np.asarray(sorted(kept), dtype=np.int64).reshape(-1, 2))


# --- almost-partition of a tree -------------------------------------------

def _tree_adj(nodes: Sequence[int], edges) -> dict[int, list[int]]:
    adj = {v: [] for v in nodes}
    for a, b in edges:
        adj[a].append(b)
        adj[b].append(a)
    for v in adj:
        adj[v].sort()
    return adj


def _rooted(adj: dict[int, list[int]], root: int) -> tuple[dict[int, int | None], list[int]]:
    parent: dict[int, int | None] = {root: None}
    order = [root]
    for x in order:
        for y in adj[x]:
            if y not in parent:
                parent[y] = x
                order.append(y)
    return parent, order


def _subtree_sizes(parent, order) -> dict[int, int]:
    size = {v: 1 for v in order}
    for v in reversed(order):
        p = parent[v]
        if p is not None:
            size[p] += size[v]
    return size


def _split(adj: dict[int, list[int]], s: int) -> list[set[int]]:
    nodes = sorted(adj)
    total = len(nodes)
    if total <= 3 * s:
        return [set(nodes)]
    parent, order = _rooted(adj, nodes[0])
    size = _subtree_sizes(parent, order)
    # a cut edge leaving both sides with at least s nodes
    for v in order[1:]:
        if s <= size[v] <= total - s:
            below = set()
            stack = [v]
            while stack:
                x = stack.pop()
                below.add(x)
                stack.extend(y for y in adj[x] if y != parent[x] and y not in below)
            above = set(nodes) - below
            sub_b = {x: [y for y in adj[x] if y in below] for x in below}
            sub_a = {x: [y for y in adj[x] if y in above] for x in above}
            return _split(sub_a, s) + _split(sub_b, s)
    # no balanced cut: walk towards the heaviest child until all children are light
    r = nodes[0]
    while True:
        kids = [c for c in adj[r] if parent[c] == r]
        heavy = max(kids, key=lambda c: (size[c], -c)) if kids else None
        if heavy is None or size[heavy] < s:
            break
        r = heavy
    parent, order = _rooted(adj, r)
    size = _subtree_sizes(parent, order)
    kids = sorted((c for c in adj[r]), key=lambda c: (-size[c], c))
    batches: list[list[int]] = []
    cur: list[int] = []
    acc = 0
    for c in kids:
        cur.append(c)
        acc += size[c]
        if acc >= s - 1:
            batches.append(cur)
            cur, acc = [], 0
    if cur:
        batches[-1].extend(cur)
    parts = []
    for batch in batches:
        part = {r}
        for c in batch:
            stack = [c]
            while stack:
                x = stack.pop()
                part.add(x)
                stack.extend(y for y in adj[x] if parent.get(y) == x)
        parts.append(part)
    return parts


def almost_partition_tree(tree_edges, s: int, nodes: Sequence[int] | None = None) -> list[set[int]]:
    """Cover a tree by connected parts of size in ``[s, 3s]``.

    Each part shares at most one node with the union of the others. Follows
    the constructive induction: split along a cut edge leaving at least ``s``
    nodes on both sides when one exists; otherwise root the tree where every
    child subtree has fewer than ``s`` nodes, group child subtrees into
    batches of ``s-1 .. 3s-1`` nodes and add the root to every batch.
    """
    edges = [(int(a), int(b)) for a, b in np.asarray(tree_edges, dtype=np.int64).reshape(-1, 2)]
    if nodes is None:
        nodes = sorted({x for e in edges for x in e}) if edges else [0]
    nodes = list(nodes)
    if len(edges) != len(nodes) - 1:
        raise GraphInputError("input is not a tree")
    if len(nodes) < s:
        raise GraphInputError(f"tree has {len(nodes)} nodes, fewer than s={s}")
    adj = _tree_adj(nodes, edges)
    parent, order = _rooted(adj, nodes[0])
    if len(order) != len(nodes):
        raise GraphInputError("input is not connected")
    return _split(adj, s)


# --- generators ------------------------------------------------------------

def gen_gnp(n: int, p: float, seed: int) -> Graph:
    rng = np.random.default_rng(seed)
    if p <= 0 or n < 2:
        return Graph(n, np.empty((0, 2), dtype=np.int64))
    u, v = np.triu_indices(n, k=1)
    keep = rng.random(len(u)) < p
    return Graph(n, np.stack([u[keep], v[keep]], axis=1).astype(np.int64))


def _random_tree(nodes: np.ndarray, rng: np.random.Generator) -> list[tuple[int, int]]:
    out = []
    for i in range(1, len(nodes)):
        j = int(rng.integers(i))
        out.append((int(nodes[i]), int(nodes[j])))
    return out


def gen_planted(n: int, sizes: Sequence[int], seed: int, p_extra: float = 0.0) -> Graph:
    """Disjoint random connected blocks of the given sizes on shuffled ids."""
    if sum(sizes) != n:
        raise GraphInputError(f"component sizes sum to {sum(sizes)}, not n={n}")
    rng = np.random.default_rng(seed)
    perm = rng.permutation(n)
    edges: list[tuple[int, int]] = []
    start = 0
    for k in sizes:
        block = perm[start:start + k]
        start += k
        edges += _random_tree(block, rng)
        if p_extra > 0 and k > 2:
            a, b = np.triu_indices(k, k=1)
            keep = rng.random(len(a)) < p_extra
            edges += [(int(block[x]), int(block[y])) for x, y in zip(a[keep], b[keep])]
    return build_graph(n, edges)


def gen_path(n: int, seed: int) -> Graph:
    """Hamiltonian path through a random node order."""
    order = np.random.default_rng(seed).permutation(n)
    return build_graph(n, list(zip(order[:-1].tolist(), order[1:].tolist())))


def gen_random_tree(n: int, seed: int) -> Graph:
    rng = np.random.default_rng(seed)
    return build_graph(n, _random_tree(rng.permutation(n), rng))


def gen_weights(g: Graph, seed: int) -> WeightedGraph:
    """Distinct weights: a random permutation of the ranks ``1..m``."""
    rng = np.random.default_rng(seed)
    w = rng.permutation(g.m).astype(np.int64) + 1
    return WeightedGraph(g.n, g.edges.copy(), weights=w)


# --- text format -------------------------------------------------------------

def parse_graph(text: str) -> Graph | WeightedGraph:
    """Parse ``n m`` then ``m`` lines of ``u v [w]`` (0-based ids)."""
    lines = [ln.split() for ln in text.splitlines() if ln.strip() and not ln.lstrip().startswith("#")]
    if not lines or len(lines[0]) != 2:
        raise GraphInputError("first line must be 'n m'")
    try:
        n, m = int(lines[0][0]), int(lines[0][1])
        rows = [[int(x) for x in ln] for ln in lines[1:]]
    except ValueError as exc:
        raise GraphInputError(f"non-integer token: {exc}") from None
    if len(rows) != m:
        raise GraphInputError(f"header announces {m} edges, found {len(rows)}")
    widths = {len(r) for r in rows}
    if widths - {2, 3} or len(widths) > 1:
        raise GraphInputError("edge lines must all be 'u v' or all 'u v w'")
    if widths == {3}:
        return build_weighted_graph(n, rows)
    g = build_graph(n, rows)
    if g.m != m:
        raise GraphInputError("duplicate edges in input")
    return g


def read_graph(path) -> Graph | WeightedGraph:
    try:
        with open(path) as fh:
            return parse_graph(fh.read())
    except OSError as exc:
        raise GraphInputError(f"cannot read {path}: {exc.strerror}") from None


def format_graph(g: Graph) -> str:
    out = [f"{g.n} {g.m}"]
    if isinstance(g, WeightedGraph):
        out += [f"{a} {b} {w}" for (a, b), w in zip(g.edges.tolist(), g.weights.tolist())]
    else:
        out += [f"{a} {b}" for a, b in g.edges.tolist()]
    return "\n".join(out) + "\n"
