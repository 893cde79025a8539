import numpy as np
import pytest

from ccmst.claims import (SUITES, SketchCase, almost_partition_ok, check_sketch_cases, cc_suite,
                          corollary_suite, fact2_suite, fact3_suite, mst_runs, mst_suites, prop1_suite,
                          prop2_check, prop2_suite, prop3_suite, run_suite, sketch_exhaustive_cases,
                          sketch_suite, triangles)
from ccmst.graph import build_graph
from ccmst.size_reduce import reduce_components_sparse


def test_report_line_format():
    rep = fact2_suite(reps=5, n=128)
    assert rep.line() == "PASS fact2: 5/5 (need 1.00)"
    assert rep.to_dict()["rate"] == 1.0


def test_small_suites_pass():
    reports = (prop1_suite(reps=3, n=512) + prop2_suite(reps=3, n=512) + prop3_suite(reps=3, n=512)
               + [fact3_suite(reps=50), cc_suite(reps=6, n=256), corollary_suite(reps=10)])
    for r in reports:
        assert r.ok, r.line()
        assert r.reps > 0


def test_mst_suites_small():
    exact, band = mst_suites(mst_runs(ns=(64,), reps=3))
    assert exact.ok and band.ok
    assert exact.reps == band.reps == 9


def test_sketch_suite_small():
    rep = sketch_suite(trials=200, exhaustive=False)
    assert rep.ok and rep.reps == 200


def test_exhaustive_family_size():
    cases = sketch_exhaustive_cases(max_n=7)
    assert set(cases) == set(range(1, 8))
    # graphs on 3 nodes up to isomorphism: 4, each with 7 nonempty subsets
    assert len(cases[3]) == 4 * 7


def test_sketch_check_flags_wrong_boundary():
    e = np.array([[0, 1]])
    good, bad = check_sketch_cases([SketchCase(4, e, np.array([0])), SketchCase(4, e, np.array([0, 1]))], 0)
    assert good == 2 and not bad


def test_prop2_check_counts_leaderless_triangles():
    g = triangles(96, 1)
    res = reduce_components_sparse(g, 1, keep_samples=True)
    ok, frac = prop2_check(g, res, 3)
    assert ok and 0 < frac <= 1


def test_almost_partition_ok_rejects_bad_parts():
    path = np.array([(i, i + 1) for i in range(5)])
    assert not almost_partition_ok(6, path, 3, [{0, 1, 2}, {4, 5, 3}, {2, 3}])
    assert not almost_partition_ok(6, path, 3, [{0, 2, 1}, {3, 5, 4, 0}])
    assert almost_partition_ok(6, path, 3, [{0, 1, 2}, {3, 4, 5}])


def test_run_suite_names():
    assert "mst" in SUITES
    with pytest.raises(KeyError):
        run_suite("nope")
    assert run_suite("fact2", reps=2, n=64)[0].reps == 2
