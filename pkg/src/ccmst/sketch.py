"""Linear sketches of signed incident-edge vectors.

Edge ``{u, v}`` with ``u < v`` is the token ``u * n + v``; it enters the
sketch of ``u`` with sign ``+1`` and that of ``v`` with ``-1``, so summing
the sketches of a node set cancels every edge inside the set. Each row
hashes a token to one level (level ``l`` with probability ``2^-(l+1)``, the
last level absorbing the tail); a cell stores the signed count, the signed
token sum and two fingerprints. Counts and sums live in ``Z_Q`` for a prime
``Q > n^2`` and fingerprints in ``Z_P`` for a prime ``P`` that fits a word,
which keeps every field of a cell bounded no matter how many vectors are
added.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable

import numpy as np

from .runtime import bits_for, field_words

_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_GOLD = np.uint64(0x9E3779B97F4A7C15)


def mix64(x) -> np.ndarray:
    """splitmix64 finaliser, elementwise on uint64."""
    z = np.asarray(x, dtype=np.uint64) + _GOLD
    z = (z ^ (z >> np.uint64(30))) * _M1
    z = (z ^ (z >> np.uint64(27))) * _M2
    return z ^ (z >> np.uint64(31))


def _is_prime(p: int) -> bool:
    if p < 2:
        return False
    for q in (2, 3, 5, 7, 11, 13):
        if p % q == 0:
            return p == q
    r = math.isqrt(p)
    f = 17
    while f <= r:
        if p % f == 0:
            return False
        f += 2
    return True


@lru_cache(maxsize=None)
def prime_below(limit: int) -> int:
    p = limit - 1
    while not _is_prime(p):
        p -= 1
    return p


@lru_cache(maxsize=None)
def prime_above(limit: int) -> int:
    p = limit + 1
    while not _is_prime(p):
        p += 1
    return p


@dataclass(frozen=True)
class SketchSpec:
    """Shape and hash seeds shared by every sketch that may be merged."""

    n: int
    rows: int
    seed: int
    levels: int = 0
    word: int = 32

    def __post_init__(self):
        if self.levels <= 0:
            object.__setattr__(self, "levels", max(1, math.ceil(2 * math.log2(max(self.n, 2)))))

    @property
    def Q(self) -> int:
        return prime_above(self.n * self.n)

    @property
    def P(self) -> int:
        return prime_below(1 << min(31, self.word))

    def cell_words(self, width: int | None = None) -> int:
        bq, bp = bits_for(self.Q - 1), bits_for(self.P - 1)
        return field_words([bq, bq, bp, bp], width or self.word)

    def _keys(self) -> np.ndarray:
        base = mix64(np.array([self.seed], dtype=np.uint64))[0]
        return mix64(base + np.arange(self.rows + 2, dtype=np.uint64))

    def levels_of(self, tokens) -> np.ndarray:
        """Level per (row, token), shape ``(rows, len(tokens))``."""
        t = np.asarray(tokens, dtype=np.uint64)
        keys = self._keys()[: self.rows]
        h = mix64(t[None, :] ^ keys[:, None]) >> np.uint64(32)
        # leading zeros of a 32-bit value via its binary exponent
        _, e = np.frexp(h.astype(np.float64))
        lz = np.where(h == 0, 32, 32 - e)
        return np.minimum(lz, self.levels - 1).astype(np.int64)

    def fingerprints(self, tokens) -> tuple[np.ndarray, np.ndarray]:
        t = np.asarray(tokens, dtype=np.uint64)
        k = self._keys()
        P = np.uint64(self.P)
        f1 = (mix64(t ^ k[self.rows]) % P).astype(np.int64)
        f2 = (mix64(t ^ k[self.rows + 1]) % P).astype(np.int64)
        return f1, f2


def edge_token(u: int, v: int, n: int) -> int:
    a, b = (u, v) if u < v else (v, u)
    return a * n + b


def token_edge(token: int, n: int) -> tuple[int, int]:
    return token // n, token % n


def incidence_cells(owner: np.ndarray, tokens: np.ndarray, signs: np.ndarray,
                    spec: SketchSpec) -> tuple[np.ndarray, np.ndarray]:
    """Nonzero cells of many sketches at once.

    Incidence ``j`` adds token ``tokens[j]`` with ``signs[j]`` to the sketch
    of ``owner[j]``. Returns sorted cell keys ``(owner * rows + row) * levels
    + level`` and the matching ``(k, 4)`` cell values.
    """
    owner = np.asarray(owner, dtype=np.int64)
    tokens = np.asarray(tokens, dtype=np.int64)
    signs = np.asarray(signs, dtype=np.int64)
    R, L, Q, P = spec.rows, spec.levels, spec.Q, spec.P
    if len(tokens) == 0:
        return np.empty(0, dtype=np.int64), np.empty((0, 4), dtype=np.int64)
    lv = spec.levels_of(tokens)
    f1, f2 = spec.fingerprints(tokens)
    vals = np.stack([signs % Q, (signs * tokens) % Q, (signs * f1) % P, (signs * f2) % P], axis=1)
    keys = ((owner[None, :] * R + np.arange(R)[:, None]) * L + lv).ravel()
    vals = np.broadcast_to(vals, (R,) + vals.shape).reshape(-1, 4)
    return reduce_cells(keys, vals, spec)


def reduce_cells(keys: np.ndarray, vals: np.ndarray, spec: SketchSpec) -> tuple[np.ndarray, np.ndarray]:
    """Sum cells sharing a key; drops cells that become zero."""
    if len(keys) == 0:
        return keys.astype(np.int64), vals.reshape(0, 4).astype(np.int64)
    order = np.argsort(keys, kind="stable")
    k = keys[order]
    starts = np.flatnonzero(np.r_[True, k[1:] != k[:-1]])
    sums = np.add.reduceat(vals[order], starts, axis=0)
    sums[:, :2] %= spec.Q
    sums[:, 2:] %= spec.P
    nz = sums.any(axis=1)
    return k[starts][nz], sums[nz]


def decode_cells(vals: np.ndarray, spec: SketchSpec) -> tuple[np.ndarray, np.ndarray]:
    """Token and sign per cell that holds exactly one verified survivor, else ``-1``/0."""
    Q, n = spec.Q, spec.n
    cnt, ids = vals[:, 0], vals[:, 1]
    sign = np.where(cnt == 1, 1, np.where(cnt == Q - 1, -1, 0))
    tok = np.where(sign == 1, ids, (Q - ids) % Q)
    ok = (sign != 0) & (tok < n * n)
    ok &= (tok // n) < (tok % n)
    tok = np.where(ok, tok, 0)
    f1, f2 = spec.fingerprints(tok)
    P = spec.P
    ok &= vals[:, 2] == (sign * f1) % P
    ok &= vals[:, 3] == (sign * f2) % P
    return np.where(ok, tok, -1), np.where(ok, sign, 0)


@dataclass(eq=False)
class L0Sketch:
    """Dense sketch: ``cells[row, level] = (count, id_sum, fp1, fp2)``."""

    spec: SketchSpec
    cells: np.ndarray

    @classmethod
    def zero(cls, spec: SketchSpec) -> "L0Sketch":
        return cls(spec, np.zeros((spec.rows, spec.levels, 4), dtype=np.int64))

    @classmethod
    def from_incidences(cls, tokens, signs, spec: SketchSpec) -> "L0Sketch":
        sk = cls.zero(spec)
        keys, vals = incidence_cells(np.zeros(len(tokens), dtype=np.int64), tokens, signs, spec)
        flat = sk.cells.reshape(-1, 4)
        flat[keys] = vals
        return sk

    def merge(self, other: "L0Sketch") -> "L0Sketch":
        if self.spec != other.spec:
            raise ValueError("cannot merge sketches with different shapes or seeds")
        out = self.cells + other.cells
        out[..., :2] %= self.spec.Q
        out[..., 2:] %= self.spec.P
        return L0Sketch(self.spec, out)

    __add__ = merge

    def is_zero(self) -> bool:
        return not self.cells.any()

    def __eq__(self, other):
        return isinstance(other, L0Sketch) and self.spec == other.spec and np.array_equal(self.cells, other.cells)

    def candidates(self) -> list[tuple[int, int]]:
        tok, _ = decode_cells(self.cells.reshape(-1, 4), self.spec)
        return sorted({token_edge(int(t), self.spec.n) for t in tok if t >= 0})

    def sample_outgoing(self) -> tuple[int, int] | None:
        """A boundary edge of the summed node set, or ``None``."""
        c = self.candidates()
        return c[0] if c else None

    def words(self, width: int | None = None) -> int:
        return int(np.count_nonzero(self.cells.reshape(-1, 4).any(axis=1))) * self.spec.cell_words(width)


def build_node_sketch(v: int, neighbors: Iterable[int], spec: SketchSpec) -> L0Sketch:
    nb = np.fromiter(neighbors, dtype=np.int64)
    lo, hi = np.minimum(nb, v), np.maximum(nb, v)
    return L0Sketch.from_incidences(lo * spec.n + hi, np.where(v < nb, 1, -1), spec)


def merge(a: L0Sketch, b: L0Sketch) -> L0Sketch:
    return a.merge(b)


def component_sketch(nodes: Iterable[int], adjacency, spec: SketchSpec) -> L0Sketch:
    out = L0Sketch.zero(spec)
    for v in nodes:
        out = out.merge(build_node_sketch(v, adjacency[v], spec))
    return out


def sample_outgoing(cs: L0Sketch) -> tuple[int, int] | None:
    return cs.sample_outgoing()
