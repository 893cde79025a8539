"""Pipeline parameters and the mapping of logical nodes onto clique nodes.

Every algorithm works on a batch of ``K`` instances over the same ``n`` node
ids. Logical node ``i * n + v`` is node ``v`` of instance ``i``; since no
edge joins two instances, the batch is a single graph on ``K * n`` logical
nodes whose components never cross instance boundaries. A
:class:`Placement` says which clique node (physical or auxiliary) simulates
each logical node and which nodes act as coordinators and bosses.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, fields, replace

import numpy as np

from .runtime import AuxiliaryClique, Runtime


def loglog(n: int) -> float:
    """``max(2, log2 log2 n)``; keeps the doubly-logarithmic parameters sane for small n."""
    if n <= 4:
        return 2.0
    return max(2.0, math.log2(math.log2(n)))


class InvariantViolation(AssertionError):
    """A deterministic claim the algorithms guarantee failed on a run."""


@dataclass(frozen=True)
class PipelineParams:
    seed: int = 0
    word_factor: int = 4
    c_l: int = 4
    c_route: int = 2
    capacity_floor: int = 256
    kkt_c: float = 4.0
    kkt_cap: float = 8.0
    proxy_slots: int = 6
    gp_budget: int = 32
    gp_rows: int = 8
    gp_rows_parallel: int = 2
    gp_active_factor: float = 4.0
    s_sparsify: int | None = None
    s_small: int | None = None
    m: int | None = None
    p_sample: float | None = None
    p_leader: float | None = None
    check: bool = True

    def sparsify_s(self, n: int) -> int:
        if self.s_sparsify is not None:
            return self.s_sparsify
        return max(2, math.floor(loglog(n)))

    def small_s(self, n: int) -> int:
        if self.s_small is not None:
            return self.s_small
        return max(1, math.floor(math.sqrt(math.log2(max(n, 2)))))

    def samples(self, n: int) -> int:
        return self.m if self.m is not None else max(1, math.isqrt(n))

    def sample_p(self, n: int) -> float:
        return self.p_sample if self.p_sample is not None else 1.0 / loglog(n)

    def leader_p(self, n: int) -> float:
        return self.p_leader if self.p_leader is not None else 1.0 / loglog(n)

    def runtime(self, n: int) -> Runtime:
        return Runtime(n, word_factor=self.word_factor, c_l=self.c_l, c_route=self.c_route,
                       capacity_floor=self.capacity_floor)

    def with_overrides(self, **kv) -> "PipelineParams":
        """Apply string or typed overrides such as those given on the command line."""
        types = {f.name: f.type for f in fields(self)}
        out = {}
        for k, v in kv.items():
            if k not in types:
                raise KeyError(f"unknown parameter {k!r}")
            if isinstance(v, str):
                t = types[k]
                if v.lower() == "none":
                    v = None
                elif "bool" in t:
                    v = v.lower() in ("1", "true", "yes")
                elif "float" in t:
                    v = float(v)
                else:
                    v = int(v)
            out[k] = v
        return replace(self, **out)


@dataclass
class Placement:
    clq: Runtime | AuxiliaryClique
    n: int
    K: int
    host: np.ndarray
    coord_a: np.ndarray
    coord_b: np.ndarray
    bosses: np.ndarray
    exclusive: bool
    _plans: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def N(self) -> int:
        return self.K * self.n

    @property
    def rt(self) -> Runtime:
        return self.clq.rt

    def instance(self, lnode):
        return np.asarray(lnode, dtype=np.int64) // self.n

    def neighbor_exchange(self, src_l, dst_l, width: int = 1) -> None:
        """Each logical node sends ``width`` words to some of its neighbours.

        With one logical node per clique node the pairs are distinct, so this
        is a direct round; otherwise several logical pairs may share a clique
        pair and the batch goes through the router.
        """
        hs, hd = self.host[src_l], self.host[dst_l]
        if self.exclusive:
            self.clq.direct(hs, hd, width=width)
        else:
            self.clq.lenzen_route(hs, hd, width=width)

    def to_coordinators(self, src_l, coords: np.ndarray, width=1) -> None:
        src_l = np.asarray(src_l, dtype=np.int64)
        self.clq.lenzen_route(self.host[src_l], coords[self.instance(src_l)], width=width)

    def from_coordinators(self, dst_l, coords: np.ndarray, width=1) -> None:
        dst_l = np.asarray(dst_l, dtype=np.int64)
        self.clq.lenzen_route(coords[self.instance(dst_l)], self.host[dst_l], width=width)

    def labels_from_coordinators(self, coords: np.ndarray, width: int = 1) -> None:
        """Every logical node gets ``width`` words from its instance's coordinator."""
        key = (coords.tobytes(), width)
        plan = self._plans.get(key)
        if plan is None:
            inst = np.arange(self.N) // self.n
            plan = self._plans[key] = self.clq.plan_route(coords[inst], self.host, width)
        self.clq.apply_route(plan)


def single_placement(rt: Runtime | AuxiliaryClique, n: int, m: int) -> Placement:
    """One instance; logical node ``v`` is clique node ``v``."""
    if n > rt.size:
        raise ValueError(f"{n} logical nodes do not fit on {rt.size} clique nodes")
    return Placement(
        clq=rt, n=n, K=1,
        host=np.arange(n, dtype=np.int64),
        coord_a=np.array([0], dtype=np.int64),
        coord_b=np.array([n - 1], dtype=np.int64),
        bosses=np.arange(m, dtype=np.int64).reshape(1, m) % n,
        exclusive=True,
    )
