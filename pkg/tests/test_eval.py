import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from eval_oracles import covering_sets, rand_pairs, voi_entropy
from glseg.errors import ContractError
from glseg.evaluation import aggregate, contingency, covering, evaluate, pri, voi


def test_identity():
    a = np.array([[0, 0, 1], [2, 2, 1]])
    assert evaluate(a, [a]) == {"covering": 1.0, "pri": 1.0, "voi": 0.0}


def test_covering_examples():
    gt = np.array([[0, 0, 1, 1]] * 2)
    assert covering(np.zeros_like(gt), gt) == pytest.approx(0.5)
    # one gt segment split 3/1: best IoU is 3/4
    assert covering(np.array([[0, 0, 0, 1]]), np.zeros((1, 4), int)) == pytest.approx(0.75)


def test_pri_examples():
    assert pri(np.array([[0, 1]]), np.array([[0, 0]])) == 0.0
    seg = np.array([[0, 0, 1, 1]])
    gt = np.array([[0, 1, 0, 1]])      # contingency [[1, 1], [1, 1]]
    np.testing.assert_array_equal(contingency(seg, gt), [[1, 1], [1, 1]])
    assert pri(seg, gt) == pytest.approx(2 / 6)
    assert pri(seg, gt) == rand_pairs(seg, gt)


def test_voi_examples():
    checker = np.array([[0, 1], [1, 0]])
    stripes = np.array([[0, 0], [1, 1]])
    assert voi(checker, stripes) == pytest.approx(2 * np.log(2))
    gt = np.array([[0, 0, 1, 1]])
    assert voi(np.array([[0, 1, 2, 3]]), gt) == pytest.approx(np.log(2))


def test_multiple_ground_truths_average():
    seg = np.array([[0, 0, 1, 1]])
    g1, g2 = seg.copy(), np.zeros_like(seg)
    assert covering(seg, [g1, g2]) == pytest.approx((1.0 + 0.5) / 2)


def test_dimension_mismatch():
    with pytest.raises(ContractError):
        pri(np.zeros((2, 2)), np.zeros((2, 3)))


def test_exhaustive_small_images():
    # every pair of labelings of a 2x2 image with up to 3 labels
    labs = [np.array(l).reshape(2, 2) for l in itertools.product(range(3), repeat=4)]
    for a in labs[::3]:
        for b in labs:
            assert pri(a, b) == rand_pairs(a, b)
            assert voi(a, b) == pytest.approx(voi_entropy(a, b), abs=1e-12)
            assert covering(a, b) == pytest.approx(covering_sets(a, b), abs=1e-12)


labelings = st.integers(1, 4).flatmap(
    lambda k: st.lists(st.integers(0, k), min_size=12, max_size=12))


@settings(max_examples=150, deadline=None)
@given(labelings, labelings, st.permutations(range(5)))
def test_properties(a, b, perm):
    a = np.array(a).reshape(3, 4)
    b = np.array(b).reshape(3, 4)
    p = np.array(perm)
    base = evaluate(a, b)
    assert 0 <= base["covering"] <= 1 and 0 <= base["pri"] <= 1 and base["voi"] >= 0
    assert voi(a, b) == pytest.approx(voi(b, a), abs=1e-12)
    assert pri(a, b) == pri(b, a)
    for seg, gt in ((p[a], b), (a, p[b])):
        got = evaluate(seg, gt)
        assert got["pri"] == base["pri"]
        assert got["voi"] == pytest.approx(base["voi"], abs=1e-12)
        assert got["covering"] == pytest.approx(base["covering"], abs=1e-12)
    assert pri(a, b) == rand_pairs(a, b)


def test_aggregate_examples():
    rep = aggregate({"covering": [[0.7]], "pri": [[0.8]], "voi": [[1.5]]})
    assert rep.ods == rep.ois == {"covering": 0.7, "pri": 0.8, "voi": 1.5}
    table = {"covering": np.array([[0.2, 0.6, 0.4], [0.9, 0.3, 0.5]]),
             "pri": np.array([[0.5, 0.5, 0.5], [0.5, 0.6, 0.5]]),
             "voi": np.array([[2.0, 1.0, 3.0], [1.5, 2.5, 1.2]])}
    rep = aggregate(table, [0.1, 0.5, 0.9])
    # exhaustive over the three scales
    for m, higher in (("covering", True), ("pri", True), ("voi", False)):
        means = [table[m][:, s].mean() for s in range(3)]
        pick = max if higher else min
        assert rep.ods[m] == pytest.approx(pick(means))
        assert rep.ois[m] == pytest.approx(np.mean([pick(r) for r in table[m]]))
    assert rep.ods_scale["covering"] == 0.1
    assert rep.ois["covering"] >= rep.ods["covering"]
    assert rep.ois["voi"] <= rep.ods["voi"]
    assert "Covering" in rep.summary()
    assert rep.to_csv().splitlines()[0] == "image,scale,covering,pri,voi"


def test_aggregate_empty():
    with pytest.raises(ContractError):
        aggregate({})
    with pytest.raises(ContractError):
        aggregate({"covering": np.zeros((0, 3))})
