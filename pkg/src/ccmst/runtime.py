"""Round engine for the congested clique with bandwidth accounting.

Two interfaces share one ledger:

* a message-level one (:meth:`Runtime.run_direct_round`, :class:`NodeProgram`)
  that moves explicit :class:`Message` objects, used for small examples and
  the auxiliary-node replay;
* a batch one (:meth:`Runtime.direct`, :meth:`Runtime.lenzen_route`,
  :meth:`Runtime.aggregate`) taking numpy arrays of sources, destinations and
  word widths, used by the algorithms so that large instances stay fast.

Both validate the model's contracts before anything is delivered: at most
one word per ordered pair per direct round, words no wider than ``W`` bits,
and per-node routing loads within ``c_L * n`` words.
"""
from __future__ import annotations

import json
import math
from contextlib import contextmanager
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Protocol, Sequence

import numpy as np

WORD_FACTOR = 4
C_L = 4
C_ROUTE = 2


class SimulationError(RuntimeError):
    """Base class for hard simulation failures."""


class BandwidthViolation(SimulationError):
    """A primitive was asked to move more than the model allows."""


class PairCapacityError(BandwidthViolation):
    def __init__(self, round_no: int, src: int, dst: int):
        self.round_no, self.src, self.dst = round_no, src, dst
        super().__init__(f"round {round_no}: more than one word from {src} to {dst}")


class WordWidthError(BandwidthViolation):
    def __init__(self, round_no: int, src: int, dst: int, bits: int, width: int):
        self.round_no, self.src, self.dst, self.bits = round_no, src, dst, bits
        super().__init__(f"round {round_no}: word {src}->{dst} needs {bits} bits, W={width}")


class RoutingOverload(BandwidthViolation):
    def __init__(self, kind: str, node: int, count: int, cap: int):
        self.kind, self.node, self.count, self.cap = kind, node, count, cap
        super().__init__(f"{kind} overload({node}): {count} words > cap {cap}")


class PreconditionError(SimulationError):
    """A caller broke a documented contract (not a bandwidth matter)."""


def word_bits(n: int, word_factor: int = WORD_FACTOR) -> int:
    return word_factor * max(1, math.ceil(math.log2(max(n, 2))))


def bits_for(max_value: int) -> int:
    """Bits needed to hold integers in ``[0, max_value]``."""
    return max(1, int(max_value).bit_length())


def field_words(bits: Sequence[int], width: int) -> int:
    """Words needed to carry the given fields.

    Fields are packed greedily without splitting; a field wider than a word
    takes ``ceil(b / width)`` words of its own.
    """
    words, used = 0, width
    for b in bits:
        if b > width:
            words += -(-b // width)
            used = width
            continue
        if used + b > width:
            words += 1
            used = 0
        used += b
    return words


def pack_fields(values: Sequence[int], bits: Sequence[int], width: int) -> list[int]:
    """Pack non-negative fields into ``width``-bit words (inverse: :func:`unpack_fields`)."""
    words: list[int] = []
    cur: int | None = None
    used = 0
    mask = (1 << width) - 1
    for v, b in zip(values, bits):
        if v < 0 or v >= 1 << b:
            raise ValueError(f"value {v} does not fit in {b} bits")
        if b > width:
            if cur is not None:
                words.append(cur)
                cur = None
            words.extend((v >> (k * width)) & mask for k in range(-(-b // width)))
            continue
        if cur is None or used + b > width:
            if cur is not None:
                words.append(cur)
            cur, used = 0, 0
        cur |= v << used
        used += b
    if cur is not None:
        words.append(cur)
    return words


def unpack_fields(words: Sequence[int], bits: Sequence[int], width: int) -> list[int]:
    out: list[int] = []
    idx, used = -1, width
    for b in bits:
        if b > width:
            k = -(-b // width)
            out.append(sum(words[idx + 1 + j] << (j * width) for j in range(k)))
            idx += k
            used = width
            continue
        if used + b > width:
            idx += 1
            used = 0
        out.append((words[idx] >> used) & ((1 << b) - 1))
        used += b
    return out


@dataclass(frozen=True)
class Word:
    payload: int

    def bits(self) -> int:
        return max(1, self.payload.bit_length())


@dataclass(frozen=True)
class Message:
    src: int
    dst: int
    body: Word


class NodeProgram(Protocol):
    """Per-node state machine: sees only its own inbox, returns its outbox."""

    def step(self, inbox: list[Message]) -> list[Message]: ...


@dataclass(frozen=True)
class Invocation:
    kind: str
    phase: str
    rounds: int
    words: int
    max_sent: int
    max_received: int
    max_pair: int


@dataclass(frozen=True)
class RoundTrace:
    rounds_charged: int
    total_words: int
    total_bits: int
    max_node_round_load: int
    sent: tuple[int, ...]
    received: tuple[int, ...]
    per_phase: Mapping[str, Mapping[str, int]]
    invocations: tuple[Invocation, ...] = field(repr=False, default=())

    def to_dict(self) -> dict:
        return {
            "rounds": self.rounds_charged,
            "total_words": self.total_words,
            "total_bits": self.total_bits,
            "max_node_round_load": self.max_node_round_load,
            "per_phase": {k: dict(v) for k, v in sorted(self.per_phase.items())},
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    def max_pair_words(self) -> int:
        """Largest number of words any ordered pair carried in one direct round."""
        return max((i.max_pair for i in self.invocations if i.kind == "direct"), default=0)


@dataclass(frozen=True)
class RoutePlan:
    """Loads of one routed batch: per sender and receiver, then per physical host."""

    sent: np.ndarray
    received: np.ndarray
    phys_sent: np.ndarray
    phys_received: np.ndarray


def _result_loads(key, owner, result_width: int, size: int) -> np.ndarray:
    key = np.asarray(key, dtype=np.int64)
    owner = np.asarray(owner, dtype=np.int64)
    if len(key) == 0:
        return np.zeros(size, dtype=np.int64)
    _, first = np.unique(key, return_index=True)
    return np.bincount(owner[first], minlength=size).astype(np.int64) * result_width


def _counts(nodes: np.ndarray, weights, size: int) -> np.ndarray:
    if len(nodes) == 0:
        return np.zeros(size, dtype=np.int64)
    if weights is None or np.ndim(weights) == 0:
        c = np.bincount(nodes, minlength=size)
        return c if weights is None else c * int(weights)
    return np.bincount(nodes, weights=weights, minlength=size).astype(np.int64)


class Runtime:
    """Single-owner synchronous engine over ``n`` clique nodes."""

    def __init__(self, n: int, word_factor: int = WORD_FACTOR, c_l: int = C_L,
                 c_route: int = C_ROUTE, capacity_floor: int = 0):
        if n < 1:
            raise ValueError("a clique needs at least one node")
        self.n = n
        self.W = word_bits(n, word_factor)
        self.c_l = c_l
        self.c_route = c_route
        self.capacity = max(c_l * n, capacity_floor)
        self.rounds = 0
        self.words = 0
        self.max_round_load = 0
        self.sent = np.zeros(n, dtype=np.int64)
        self.received = np.zeros(n, dtype=np.int64)
        self.per_phase: dict[str, dict[str, int]] = {}
        self.log: list[Invocation] = []
        self.violations = 0
        self._phases: list[str] = []

    @property
    def size(self) -> int:
        return self.n

    @property
    def rt(self) -> "Runtime":
        return self

    # -- bookkeeping ---------------------------------------------------------

    @contextmanager
    def phase(self, name: str):
        self._phases.append(name)
        try:
            yield self
        finally:
            self._phases.pop()

    @property
    def current_phase(self) -> str:
        return self._phases[-1] if self._phases else "other"

    def _record(self, kind: str, rounds: int, sent: np.ndarray, received: np.ndarray,
                max_pair: int = 0) -> None:
        words = int(sent.sum())
        ms, mr = int(sent.max(initial=0)), int(received.max(initial=0))
        self.rounds += rounds
        self.words += words
        self.sent += sent
        self.received += received
        if rounds:
            self.max_round_load = max(self.max_round_load, -(-max(ms, mr) // rounds))
        ph = self.per_phase.setdefault(self.current_phase, {"rounds": 0, "words": 0})
        ph["rounds"] += rounds
        ph["words"] += words
        self.log.append(Invocation(kind, self.current_phase, rounds, words, ms, mr, max_pair))

    def _fail(self, exc: BandwidthViolation):
        self.violations += 1
        raise exc

    def metrics(self) -> RoundTrace:
        return RoundTrace(
            rounds_charged=self.rounds,
            total_words=self.words,
            total_bits=self.words * self.W,
            max_node_round_load=self.max_round_load,
            sent=tuple(self.sent.tolist()),
            received=tuple(self.received.tolist()),
            per_phase={k: dict(v) for k, v in self.per_phase.items()},
            invocations=tuple(self.log),
        )

    # -- checks ----------------------------------------------------------------

    def check_payload(self, payload, src=None, dst=None) -> None:
        """Every word value must fit in ``W`` bits."""
        p = np.asarray(payload)
        if p.size == 0:
            return
        bad = (p < 0) | (p >= (1 << self.W))
        if bad.any():
            i = int(np.flatnonzero(bad.reshape(len(p), -1).any(axis=1))[0]) if p.ndim else 0
            v = int(p.reshape(len(p), -1)[i].max()) if p.ndim else int(p)
            s = int(src[i]) if src is not None else -1
            d = int(dst[i]) if dst is not None else -1
            self._fail(WordWidthError(self.rounds + 1, s, d, max(1, v.bit_length()), self.W))

    def _check_loads(self, sent: np.ndarray, received: np.ndarray, cap: int | None = None) -> None:
        cap = self.capacity if cap is None else cap
        if len(sent) and sent.max() > cap:
            v = int(np.argmax(sent))
            self._fail(RoutingOverload("source", v, int(sent[v]), cap))
        if len(received) and received.max() > cap:
            v = int(np.argmax(received))
            self._fail(RoutingOverload("destination", v, int(received[v]), cap))

    # -- batch primitives ------------------------------------------------------

    def direct(self, src, dst, width: int = 1, payload=None) -> None:
        """One batch of direct messages of ``width`` words each (``width`` rounds).

        Every ordered pair may appear at most once; self-messages are free.
        """
        src = np.asarray(src, dtype=np.int64)
        dst = np.asarray(dst, dtype=np.int64)
        if payload is not None:
            self.check_payload(payload, src, dst)
        keep = src != dst
        s, d = src[keep], dst[keep]
        max_pair = 0
        if len(s):
            keys = s * self.n + d
            uniq, cnt = np.unique(keys, return_counts=True)
            max_pair = int(cnt.max())
            if max_pair > 1:
                k = int(uniq[np.argmax(cnt)])
                self._fail(PairCapacityError(self.rounds + 1, k // self.n, k % self.n))
        self._record("direct", width, _counts(s, None, self.n) * width,
                     _counts(d, None, self.n) * width, max_pair=min(max_pair, 1))

    def broadcast(self, srcs, width: int = 1, payload=None) -> None:
        """Each node in ``srcs`` sends the same ``width`` words to every other node."""
        srcs = np.unique(np.asarray(srcs, dtype=np.int64))
        if payload is not None:
            self.check_payload(payload)
        sent = np.zeros(self.n, dtype=np.int64)
        sent[srcs] = (self.n - 1) * width
        received = np.full(self.n, len(srcs) * width, dtype=np.int64)
        received[srcs] -= width
        self._record("direct", width, sent, received, max_pair=1 if len(srcs) and self.n > 1 else 0)

    def lenzen_route(self, src, dst, width=1, payload=None) -> None:
        """Deliver a batch within the per-node load cap; charges ``C_ROUTE`` rounds."""
        src = np.asarray(src, dtype=np.int64)
        dst = np.asarray(dst, dtype=np.int64)
        if payload is not None:
            self.check_payload(payload, src, dst)
        self.apply_route(self.plan_route(src, dst, width))

    def plan_route(self, src, dst, width=1) -> RoutePlan:
        """Per-node loads of a routed batch, for batches that repeat verbatim."""
        src = np.asarray(src, dtype=np.int64)
        dst = np.asarray(dst, dtype=np.int64)
        keep = src != dst
        w = width if np.ndim(width) == 0 else np.asarray(width, dtype=np.int64)[keep]
        sent = _counts(src[keep], w, self.n)
        received = _counts(dst[keep], w, self.n)
        return RoutePlan(sent, received, sent, received)

    def apply_route(self, plan: RoutePlan) -> None:
        self._check_loads(plan.sent, plan.received)
        self._record("route", self.c_route, plan.sent, plan.received)

    def route_loads(self, sent, received) -> None:
        """Route a batch described only by its per-node word loads."""
        sent = np.asarray(sent, dtype=np.int64)
        received = np.asarray(received, dtype=np.int64)
        self._check_loads(sent, received)
        self._record("route", self.c_route, sent, received)

    def aggregate(self, sent, key, owner, result_width: int = 1) -> None:
        """Keyed sum: items sharing a key are combined and delivered to the key's owner.

        ``sent`` holds the words each node contributes; ``key``/``owner``
        list the keys (distinct or not) and the node that receives each
        key's combined value. Realised by sorting the items by key across the
        clique and combining runs, so it costs two routing invocations.
        Checks that every source holds at most ``cap`` words, that the batch
        fits the clique (``n * cap`` words) and that no owner receives more
        than ``cap`` words of combined results.
        """
        sent = np.asarray(sent, dtype=np.int64)
        received = _result_loads(key, owner, result_width, self.n)
        self._check_sorted(sent, received, self.capacity, self.n)
        self._record("aggregate", 2 * self.c_route, sent, received)

    def sort(self, sent) -> None:
        """Globally sort items held by the nodes; every item learns its rank."""
        sent = np.asarray(sent, dtype=np.int64)
        self._check_sorted(sent, sent, self.capacity, self.n)
        self._record("sort", 2 * self.c_route, sent, sent)

    def _check_sorted(self, sent, received, cap, size) -> None:
        if len(sent) and sent.max() > cap:
            v = int(np.argmax(sent))
            self._fail(RoutingOverload("source", v, int(sent[v]), cap))
        total = int(sent.sum())
        if total > size * cap:
            self._fail(RoutingOverload("total", -1, total, size * cap))
        if len(received) and received.max() > cap:
            v = int(np.argmax(received))
            self._fail(RoutingOverload("result", v, int(received[v]), cap))

    # -- message-level interface -------------------------------------------------

    def run_direct_round(self, outboxes: Mapping[int, Iterable[Message]]) -> dict[int, list[Message]]:
        """Deliver one direct round of explicit messages."""
        inbox: dict[int, list[Message]] = {v: [] for v in range(self.n)}
        seen: set[tuple[int, int]] = set()
        sent = np.zeros(self.n, dtype=np.int64)
        received = np.zeros(self.n, dtype=np.int64)
        batch: list[Message] = []
        for v in sorted(outboxes):
            for msg in outboxes[v]:
                if msg.src != v or not (0 <= msg.dst < self.n):
                    raise PreconditionError(f"bad message {msg} in outbox of {v}")
                if msg.body.payload < 0 or msg.body.bits() > self.W:
                    self._fail(WordWidthError(self.rounds + 1, msg.src, msg.dst, msg.body.bits(), self.W))
                if msg.src != msg.dst:
                    if (msg.src, msg.dst) in seen:
                        self._fail(PairCapacityError(self.rounds + 1, msg.src, msg.dst))
                    seen.add((msg.src, msg.dst))
                    sent[msg.src] += 1
                    received[msg.dst] += 1
                batch.append(msg)
        for msg in batch:
            inbox[msg.dst].append(msg)
        self._record("direct", 1, sent, received, max_pair=1 if seen else 0)
        return inbox

    def route_messages(self, batch: Sequence[Message]) -> dict[int, list[Message]]:
        """Routed delivery of explicit messages; nothing is delivered if a load check fails."""
        for msg in batch:
            if not (0 <= msg.src < self.n and 0 <= msg.dst < self.n):
                raise PreconditionError(f"bad message {msg}")
            if msg.body.payload < 0 or msg.body.bits() > self.W:
                self._fail(WordWidthError(self.rounds + 1, msg.src, msg.dst, msg.body.bits(), self.W))
        src = np.fromiter((m.src for m in batch), dtype=np.int64, count=len(batch))
        dst = np.fromiter((m.dst for m in batch), dtype=np.int64, count=len(batch))
        self.lenzen_route(src, dst)
        inbox: dict[int, list[Message]] = {v: [] for v in range(self.n)}
        for msg in batch:
            inbox[msg.dst].append(msg)
        return inbox

    def run_program(self, programs: Sequence[NodeProgram], rounds: int) -> list[list[Message]]:
        """Run node programs for ``rounds`` rounds; returns the final inboxes."""
        inbox: list[list[Message]] = [[] for _ in range(self.n)]
        for _ in range(rounds):
            out = {v: programs[v].step(inbox[v]) for v in range(self.n)}
            got = self.run_direct_round(out)
            inbox = [got[v] for v in range(self.n)]
        return inbox


class AuxiliaryClique:
    """``c`` logical slots per physical node; slot 0 holds the original nodes.

    Logical id ``slot * n + host``. One logical direct round is replayed as
    ``c * c`` physical rounds, sub-round ``(a, b)`` carrying the messages from
    slot ``a`` to slot ``b``. Batch primitives are charged obliviously at the
    full ``c * c`` factor so that the cost depends only on ``c``.
    """

    def __init__(self, rt: Runtime, c: int, debug: bool = False):
        if c < 1:
            raise ValueError("c must be positive")
        self.rt, self.c, self.debug = rt, c, debug
        self.n = rt.n
        self.size = c * rt.n
        self.capacity = rt.capacity

    def host(self, vid):
        return np.asarray(vid, dtype=np.int64) % self.n

    def slot(self, vid):
        return np.asarray(vid, dtype=np.int64) // self.n

    def check_inputs(self, inputs: Mapping[int, object]) -> None:
        """Auxiliary nodes start without any knowledge of the input graph."""
        if not self.debug:
            return
        for vid, know in inputs.items():
            if vid >= self.n and know:
                raise PreconditionError(f"auxiliary node {vid} seeded with input knowledge")

    def run_round(self, outboxes: Mapping[int, Iterable[Message]]) -> dict[int, list[Message]]:
        """Simulate one logical direct round by the ``(a, b)`` schedule."""
        msgs = [m for v in sorted(outboxes) for m in outboxes[v]]
        seen: set[tuple[int, int]] = set()
        for m in msgs:
            if m.src != m.dst:
                if (m.src, m.dst) in seen:
                    self.rt._fail(PairCapacityError(self.rt.rounds + 1, m.src, m.dst))
                seen.add((m.src, m.dst))
        inbox: dict[int, list[Message]] = {v: [] for v in range(self.size)}
        n = self.n
        for a in range(self.c):
            for b in range(self.c):
                sub = [m for m in msgs if m.src // n == a and m.dst // n == b]
                phys: dict[int, list[Message]] = {}
                for m in sub:
                    # same host: a memory copy, not a message
                    if m.src % n != m.dst % n:
                        phys.setdefault(m.src % n, []).append(Message(m.src % n, m.dst % n, m.body))
                self.rt.run_direct_round(phys)
                for m in sub:
                    inbox[m.dst].append(m)
        for v in inbox:
            inbox[v].sort(key=lambda m: m.src)
        return inbox

    def _check(self, vsent: np.ndarray, vrecv: np.ndarray) -> None:
        self.rt._check_loads(vsent, vrecv, self.capacity)

    def direct(self, src, dst, width: int = 1, payload=None) -> None:
        src = np.asarray(src, dtype=np.int64)
        dst = np.asarray(dst, dtype=np.int64)
        if payload is not None:
            self.rt.check_payload(payload, src, dst)
        keep = src != dst
        s, d = src[keep], dst[keep]
        if len(s):
            uniq, cnt = np.unique(s * self.size + d, return_counts=True)
            if cnt.max() > 1:
                k = int(uniq[np.argmax(cnt)])
                self.rt._fail(PairCapacityError(self.rt.rounds + 1, k // self.size, k % self.size))
        hs, hd = s % self.n, d % self.n
        phys = hs != hd
        self.rt._record("direct", width * self.c * self.c,
                        _counts(hs[phys], None, self.n) * width,
                        _counts(hd[phys], None, self.n) * width, max_pair=1 if len(s) else 0)

    def lenzen_route(self, src, dst, width=1, payload=None) -> None:
        src = np.asarray(src, dtype=np.int64)
        dst = np.asarray(dst, dtype=np.int64)
        if payload is not None:
            self.rt.check_payload(payload, src, dst)
        self.apply_route(self.plan_route(src, dst, width))

    def plan_route(self, src, dst, width=1) -> RoutePlan:
        src = np.asarray(src, dtype=np.int64)
        dst = np.asarray(dst, dtype=np.int64)
        keep = src != dst
        w = width if np.ndim(width) == 0 else np.asarray(width, dtype=np.int64)[keep]
        s, d = src[keep], dst[keep]
        hs, hd = s % self.n, d % self.n
        phys = hs != hd
        wp = w if np.ndim(w) == 0 else w[phys]
        return RoutePlan(_counts(s, w, self.size), _counts(d, w, self.size),
                         _counts(hs[phys], wp, self.n), _counts(hd[phys], wp, self.n))

    def apply_route(self, plan: RoutePlan) -> None:
        self._check(plan.sent, plan.received)
        self.rt._record("route", self.rt.c_route * self.c * self.c, plan.phys_sent, plan.phys_received)

    def route_loads(self, vsent, vrecv) -> None:
        vsent = np.asarray(vsent, dtype=np.int64)
        vrecv = np.asarray(vrecv, dtype=np.int64)
        self._check(vsent, vrecv)
        self.rt._record("route", self.rt.c_route * self.c * self.c,
                        vsent.reshape(self.c, self.n).sum(axis=0),
                        vrecv.reshape(self.c, self.n).sum(axis=0))

    def aggregate(self, vsent, key, owner, result_width: int = 1) -> None:
        vsent = np.asarray(vsent, dtype=np.int64)
        vrecv = _result_loads(key, owner, result_width, self.size)
        self.rt._check_sorted(vsent, vrecv, self.capacity, self.size)
        self.rt._record("aggregate", 2 * self.rt.c_route * self.c * self.c,
                        vsent.reshape(self.c, self.n).sum(axis=0),
                        vrecv.reshape(self.c, self.n).sum(axis=0))

    def broadcast(self, srcs, width: int = 1, payload=None) -> None:
        """Logical broadcast to all ``c * n`` logical nodes."""
        srcs = np.unique(np.asarray(srcs, dtype=np.int64))
        if payload is not None:
            self.rt.check_payload(payload)
        sent = np.zeros(self.n, dtype=np.int64)
        np.add.at(sent, srcs % self.n, (self.n - 1) * self.c * width)
        received = np.full(self.n, len(srcs) * self.c * width, dtype=np.int64)
        np.add.at(received, srcs % self.n, -self.c * width)
        self.rt._record("direct", width * self.c * self.c, sent, received, max_pair=1 if len(srcs) else 0)
