"""Node-local computations on received edge sets.

These run inside a single clique node between rounds (coordinators, bosses,
designated extraction nodes), where computation is free; scipy does the
graph work.
"""
from __future__ import annotations

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components, minimum_spanning_tree


def _sym(N: int, eu: np.ndarray, ev: np.ndarray):
    data = np.ones(len(eu), dtype=np.float64)
    return coo_matrix((data, (eu, ev)), shape=(N, N)).tocsr()


def components(N: int, eu, ev) -> np.ndarray:
    """Component labels named by the minimum member id."""
    eu = np.asarray(eu, dtype=np.int64)
    ev = np.asarray(ev, dtype=np.int64)
    if len(eu) == 0:
        return np.arange(N, dtype=np.int64)
    _, raw = connected_components(_sym(N, eu, ev), directed=False)
    mins = np.full(raw.max() + 1, N, dtype=np.int64)
    np.minimum.at(mins, raw, np.arange(N, dtype=np.int64))
    return mins[raw]


def spanning_forest(N: int, eu, ev) -> np.ndarray:
    """A spanning forest of the edge set as ``(u, v)`` rows with ``u < v``."""
    eu = np.asarray(eu, dtype=np.int64)
    ev = np.asarray(ev, dtype=np.int64)
    if len(eu) == 0:
        return np.empty((0, 2), dtype=np.int64)
    lo, hi = np.minimum(eu, ev), np.maximum(eu, ev)
    t = minimum_spanning_tree(_sym(N, lo, hi)).tocoo()
    a, b = np.minimum(t.row, t.col), np.maximum(t.row, t.col)
    order = np.lexsort((b, a))
    return np.stack([a[order], b[order]], axis=1).astype(np.int64)


def group_max(keys: np.ndarray, values: np.ndarray, size: int, empty: int = -1) -> np.ndarray:
    out = np.full(size, empty, dtype=np.int64)
    if len(keys):
        np.maximum.at(out, keys, values)
    return out


def group_min(keys: np.ndarray, values: np.ndarray, size: int, empty: int) -> np.ndarray:
    out = np.full(size, empty, dtype=np.int64)
    if len(keys):
        np.minimum.at(out, keys, values)
    return out
