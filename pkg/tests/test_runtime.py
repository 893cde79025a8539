import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ccmst.runtime import (C_ROUTE, AuxiliaryClique, Message, PairCapacityError, PreconditionError,
                           RoutingOverload, Runtime, Word, WordWidthError, field_words, pack_fields,
                           unpack_fields, word_bits)


def msg(a, b, x=1):
    return Message(a, b, Word(x))


def test_word_width_default():
    assert word_bits(1024) == 40
    assert Runtime(1000).W == 40
    assert Runtime(1000, word_factor=2).W == 20


def test_empty_direct_round_charges_one():
    rt = Runtime(4)
    inbox = rt.run_direct_round({})
    assert all(v == [] for v in inbox.values())
    assert rt.metrics().rounds_charged == 1


def test_broadcast_round_delivers_one_each():
    rt = Runtime(6)
    inbox = rt.run_direct_round({0: [msg(0, v, v) for v in range(1, 6)]})
    assert all(len(inbox[v]) == 1 for v in range(1, 6))
    assert rt.metrics().max_pair_words() == 1


def test_pair_capacity_violation():
    rt = Runtime(4)
    with pytest.raises(PairCapacityError) as e:
        rt.run_direct_round({0: [msg(0, 1), msg(0, 1, 2)]})
    assert (e.value.round_no, e.value.src, e.value.dst) == (1, 0, 1)
    assert rt.rounds == 0


def test_oversized_word_rejected():
    rt = Runtime(4)
    with pytest.raises(WordWidthError):
        rt.run_direct_round({0: [msg(0, 1, 1 << rt.W)]})


def test_batch_direct_pair_capacity_and_self_messages():
    rt = Runtime(5)
    rt.direct([0, 0, 1], [0, 0, 2])
    assert rt.words == 1
    with pytest.raises(PairCapacityError):
        rt.direct([1, 1], [3, 3])


def test_lenzen_empty_batch_charges_constant():
    rt = Runtime(8)
    rt.lenzen_route([], [])
    assert rt.rounds == C_ROUTE


def test_lenzen_everyone_to_zero():
    n = 16
    rt = Runtime(n)
    batch = [msg(v, 0, v) for v in range(n)]
    inbox = rt.route_messages(batch)
    assert sorted(m.src for m in inbox[0]) == list(range(n))
    assert rt.metrics().total_words == n - 1


def test_lenzen_source_overload_boundary():
    n = 8
    rt = Runtime(n)
    cap = rt.capacity
    rt.lenzen_route(np.zeros(cap, dtype=int), np.arange(cap) % (n - 1) + 1)
    with pytest.raises(RoutingOverload, match=r"source overload\(0\)") as e:
        rt.lenzen_route(np.zeros(cap + 1, dtype=int), np.arange(cap + 1) % (n - 1) + 1)
    assert e.value.count == cap + 1


def test_lenzen_destination_overload():
    rt = Runtime(4)
    src = np.repeat(np.arange(1, 4), 6)
    with pytest.raises(RoutingOverload, match="destination"):
        rt.lenzen_route(src, np.zeros(len(src), dtype=int))


@settings(max_examples=60, deadline=None)
@given(st.integers(2, 10), st.data())
def test_route_exactly_once_or_not_at_all(n, data):
    k = data.draw(st.integers(0, 6 * n))
    src = data.draw(st.lists(st.integers(0, n - 1), min_size=k, max_size=k))
    dst = data.draw(st.lists(st.integers(0, n - 1), min_size=k, max_size=k))
    batch = [msg(a, b, i) for i, (a, b) in enumerate(zip(src, dst))]
    rt = Runtime(n)
    sent = np.bincount([a for a, b in zip(src, dst) if a != b], minlength=n)
    recv = np.bincount([b for a, b in zip(src, dst) if a != b], minlength=n)
    if sent.max(initial=0) > rt.capacity or recv.max(initial=0) > rt.capacity:
        with pytest.raises(RoutingOverload):
            rt.route_messages(batch)
        assert rt.rounds == 0 and rt.words == 0
    else:
        inbox = rt.route_messages(batch)
        got = sorted(m.body.payload for v in inbox for m in inbox[v])
        assert got == list(range(k))


@settings(max_examples=200, deadline=None)
@given(st.integers(8, 64).flatmap(lambda w: st.tuples(
    st.just(w), st.lists(st.integers(1, 3 * w), min_size=1, max_size=8))), st.data())
def test_pack_round_trip(wb, data):
    width, bits = wb
    values = [data.draw(st.integers(0, (1 << b) - 1)) for b in bits]
    words = pack_fields(values, bits, width)
    assert len(words) == field_words(bits, width)
    assert all(0 <= w < 1 << width for w in words)
    assert unpack_fields(words, bits, width) == values


def test_wide_field_spans_words():
    assert field_words([9], 8) == 2
    assert field_words([3, 17, 3], 8) == 5
    assert pack_fields([0x1ff], [9], 8) == [0xff, 1]
    with pytest.raises(ValueError):
        pack_fields([300], [8], 16)


def test_aux_identity_schedule():
    rt = Runtime(4)
    aux = AuxiliaryClique(rt, 1)
    aux.run_round({0: [msg(0, 1)], 2: [msg(2, 3)]})
    assert rt.rounds == 1


def test_aux_two_slots_replay():
    n = 5
    rt = Runtime(n)
    aux = AuxiliaryClique(rt, 2)
    out = {n + v: [msg(n + v, (v + 1) % n, v)] for v in range(n)}
    inbox = aux.run_round(out)
    assert rt.rounds == 4
    direct = {v: out[n + (v - 1) % n] for v in range(n)}
    for v in range(n):
        assert inbox[v] == direct[v]
        assert inbox[n + v] == []


def test_aux_debug_precondition():
    aux = AuxiliaryClique(Runtime(3), 2, debug=True)
    aux.check_inputs({0: True, 1: True, 4: False})
    with pytest.raises(PreconditionError):
        aux.check_inputs({4: True})
    AuxiliaryClique(Runtime(3), 2).check_inputs({4: True})


def test_aux_pair_capacity_is_logical():
    n = 4
    aux = AuxiliaryClique(Runtime(n), 2)
    aux.direct([0, n], [1, 1])
    with pytest.raises(PairCapacityError):
        aux.direct([0, 0], [n + 1, n + 1])


def test_metrics_examples():
    rt = Runtime(6)
    m = rt.metrics()
    assert (m.rounds_charged, m.total_words, m.total_bits, m.max_node_round_load) == (0, 0, 0, 0)
    for _ in range(3):
        rt.run_direct_round({})
    assert rt.metrics().rounds_charged == 3
    rt2 = Runtime(6)
    rt2.lenzen_route([0, 1, 2, 3, 4], [5, 5, 5, 1, 0])
    assert rt2.metrics().total_words == 5


def test_trace_json_and_phases():
    rt = Runtime(8)
    with rt.phase("alpha"):
        rt.direct([0, 1], [2, 3])
    rt.broadcast([0])
    d = json.loads(rt.metrics().to_json())
    assert set(d) == {"rounds", "total_words", "total_bits", "max_node_round_load", "per_phase"}
    assert d["per_phase"]["alpha"] == {"rounds": 1, "words": 2}
    assert d["total_bits"] == d["total_words"] * rt.W


def test_trace_deterministic():
    def run():
        rt = Runtime(10)
        rng = np.random.default_rng(3)
        for _ in range(5):
            rt.lenzen_route(rng.integers(0, 10, 20), rng.integers(0, 10, 20))
        return rt.metrics().to_json()
    assert run() == run()


def test_counters_monotone():
    rt = Runtime(6)
    prev = rt.metrics()
    rng = np.random.default_rng(0)
    for _ in range(10):
        rt.lenzen_route(rng.integers(0, 6, 10), rng.integers(0, 6, 10))
        cur = rt.metrics()
        assert cur.rounds_charged >= prev.rounds_charged
        assert cur.total_words >= prev.total_words
        prev = cur
