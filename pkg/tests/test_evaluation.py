import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from drsr.data import LabeledQuery
from drsr.errors import DimensionError, DomainError
from drsr.evaluation import (
    average_precision,
    curve_distance,
    evaluate_run,
    label_scorer,
    ndcg_at_k,
    position_curve,
)
from drsr.survival import init_model

# frozen from an independent hand evaluation: (15/log2(3) + 1/2) / (15 + 1/log2(3))
NDCG3_041 = 0.637450648212096


def _brute_ndcg(labels, k):
    def dcg(ys):
        total = 0.0
        for i, y in enumerate(ys[:k]):
            total += (2**y - 1) / math.log(i + 2, 2)
        return total

    ideal = dcg(sorted(labels, reverse=True))
    return 1.0 if ideal == 0 else dcg(labels) / ideal


def _brute_ap(rels):
    hits = [i for i, r in enumerate(rels) if r]
    if not hits:
        return 1.0
    return sum(sum(rels[: i + 1]) / (i + 1) for i in hits) / len(hits)


# ndcg


def test_ndcg_ideal_order():
    assert ndcg_at_k([4, 2, 1, 0], 3) == 1.0


def test_ndcg_hand_fixture():
    assert ndcg_at_k([0, 4, 1], 3) == pytest.approx(NDCG3_041, abs=1e-15)
    assert ndcg_at_k([0, 4, 1], 3) == pytest.approx(0.63746, abs=1e-5)


def test_ndcg_binary_worst_at_one():
    assert ndcg_at_k([0, 1], 1) == 0.0


def test_ndcg_all_zero_and_bad_cutoff():
    assert ndcg_at_k([0, 0, 0], 2) == 1.0
    with pytest.raises(DomainError):
        ndcg_at_k([1], 0)


@given(st.lists(st.integers(0, 4), min_size=1, max_size=10), st.integers(1, 12))
def test_ndcg_bounds_and_oracle(labels, k):
    v = ndcg_at_k(labels, k)
    assert 0.0 <= v <= 1.0
    assert v == pytest.approx(_brute_ndcg(labels, k), abs=1e-12)


@given(st.lists(st.integers(0, 4), min_size=1, max_size=10), st.integers(1, 10), st.randoms())
def test_ndcg_ideal_is_invariant_to_ties(labels, k, rnd):
    shuffled = list(labels)
    rnd.shuffle(shuffled)
    # same multiset of labels, so the same ideal ordering and ideal DCG
    ideal = sorted(labels, reverse=True)
    assert ndcg_at_k(ideal, k) == 1.0
    assert ndcg_at_k(sorted(shuffled, reverse=True), k) == 1.0


# average precision


def test_ap_examples():
    assert average_precision([1, 0, 0]) == 1.0
    assert average_precision([0, 1, 1]) == pytest.approx(7 / 12, abs=1e-15)
    assert average_precision([0, 1, 1]) == pytest.approx(0.58333, abs=1e-5)
    assert average_precision([0, 0, 1]) == pytest.approx(1 / 3, abs=1e-15)
    assert average_precision([0, 0]) == 1.0


@given(st.lists(st.booleans(), min_size=1, max_size=10))
def test_ap_bounds_and_oracle(rels):
    v = average_precision(rels)
    assert 0.0 <= v <= 1.0
    assert v == pytest.approx(_brute_ap(rels), abs=1e-12)


# position curves


def test_curve_identity_and_reversal():
    assert position_curve([([5, 6, 7], [5, 6, 7])]).tolist() == [1.0, 2.0, 3.0]
    assert position_curve([([5, 6, 7], [7, 6, 5])]).tolist() == [3.0, 2.0, 1.0]


def test_curve_averages_sessions():
    curve = position_curve([([0, 1, 2], [0, 1, 2]), ([0, 1, 2], [1, 2, 0])])
    assert curve[0] == 2.0


def test_curve_errors():
    with pytest.raises(DomainError):
        position_curve([([0, 1], [0])])
    with pytest.raises(DomainError):
        position_curve([([0, 1], [0, 2])])
    with pytest.raises(DomainError):
        position_curve([])


def test_curve_distance_is_l1():
    assert curve_distance([1, 2, 3], [3, 2, 1]) == 4.0
    with pytest.raises(DomainError):
        curve_distance([1], [1, 2])


# evaluate_run


def _queries(n, seed, binary=False, docs=(2, 8)):
    rng = np.random.default_rng(seed)
    out = []
    for k in range(n):
        m = int(rng.integers(docs[0], docs[1] + 1))
        y = rng.integers(0, 2 if binary else 5, size=m)
        out.append(LabeledQuery(str(k), rng.normal(size=(m, 3)), y))
    return out


def test_oracle_scorer_is_perfect():
    qs = _queries(10, 0)
    r = evaluate_run(label_scorer, qs, [list(range(q.n_docs)) for q in qs])
    assert all(v == 1.0 for v in r.ndcg_at.values())
    assert r.map == 1.0 and r.n_queries == 10


def test_anti_oracle_on_binary_pairs():
    qs = [LabeledQuery(str(k), np.zeros((2, 1)), np.array([1, 0])) for k in range(4)]
    anti = lambda q, order: -q.labels[order].astype(float)  # noqa: E731
    r = evaluate_run(anti, qs, [[0, 1]] * 4)
    assert r.ndcg_at[1] == 0.0


def test_evaluate_matches_brute_force():
    rng = np.random.default_rng(1)
    qs = _queries(40, 2)
    orders = [list(rng.permutation(q.n_docs)) for q in qs]
    scores = {q.qid: rng.normal(size=q.n_docs) for q in qs}
    scorer = lambda q, order: scores[q.qid][: len(order)]  # noqa: E731
    r = evaluate_run(scorer, qs, orders)
    ndcg = {k: [] for k in (1, 3, 5)}
    aps = []
    for q, order in zip(qs, orders):
        s = scores[q.qid]
        ranked = [order[i] for i in sorted(range(len(order)), key=lambda i: (-s[i], i))]
        labels = [int(q.labels[d]) for d in ranked]
        aps.append(_brute_ap([y >= 1 for y in labels]))
        for k in ndcg:
            ndcg[k].append(_brute_ndcg(labels, k))
    assert r.map == pytest.approx(sum(aps) / len(aps), abs=1e-12)
    for k in ndcg:
        assert r.ndcg_at[k] == pytest.approx(sum(ndcg[k]) / len(qs), abs=1e-12)


def test_evaluate_is_order_independent():
    qs = _queries(30, 3)
    m = init_model(3, 4, seed=0)
    orders = [list(range(q.n_docs)) for q in qs]
    a = evaluate_run(m, qs, orders)
    b = evaluate_run(m, qs[::-1], orders[::-1])
    assert a.map == b.map and a.ndcg_at == b.ndcg_at


def test_evaluate_errors():
    qs = _queries(2, 4)
    with pytest.raises(DimensionError):
        evaluate_run(init_model(5, 2), qs, [list(range(q.n_docs)) for q in qs])
    with pytest.raises(DomainError):
        evaluate_run(label_scorer, [], [])


def test_report_rows():
    qs = _queries(3, 5)
    r = evaluate_run(label_scorer, qs, [list(range(q.n_docs)) for q in qs])
    rows = r.rows("x")
    assert [(m, k) for _, m, k, _ in rows] == [("map", ""), ("ndcg", 1), ("ndcg", 3), ("ndcg", 5)]
