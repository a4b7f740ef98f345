import itertools
import time

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from drsr.errors import DimensionError, DomainError
from drsr.survival import (
    HazardModel,
    forward,
    forward_batch,
    init_model,
    rerank,
    score_relevance,
    survival_curves,
)


def _constant_head(F=2, H=3, logit=0.0):
    p = init_model(F, H, seed=0).params()
    p["w_head"] = np.zeros(H)
    p["b_head"] = np.array([logit])
    return HazardModel.from_params(p)


def _random_model(F, H, seed):
    rng = np.random.default_rng(seed)
    p = {k: rng.normal(0, 0.7, size=v.shape) for k, v in init_model(F, H).params().items()}
    return HazardModel.from_params(p)


# init_model


def test_init_is_deterministic():
    a, b = init_model(2, 3, seed=5), init_model(2, 3, seed=5)
    for k in a.params():
        assert a.params()[k].tobytes() == b.params()[k].tobytes()


def test_init_rejects_empty_hidden_state():
    with pytest.raises(DimensionError):
        init_model(2, 0)


def test_init_biases_and_bounds():
    m = init_model(4, 5, seed=1)
    assert np.all(m.b_f == 1.0)
    assert m.b_head == 0.0
    assert np.all(m.b_i == 0.0)
    bound = 1 / np.sqrt(9)
    for k in ("W_i", "W_f", "W_o", "W_g", "w_head"):
        assert np.abs(m.params()[k]).max() <= bound


# forward


def test_forward_single_position():
    m = init_model(3, 4, seed=2)
    hs = forward(m, np.ones((1, 3)))
    assert hs.S[0] == 1.0
    assert hs.p[0] == hs.h[0]
    assert hs.S[1] == pytest.approx(1 - hs.h[0], abs=1e-15)


def test_forward_half_hazards():
    hs = forward(_constant_head(), np.zeros((3, 2)))
    assert hs.h.tolist() == [0.5, 0.5, 0.5]
    # log-space accumulation: exact up to rounding
    assert np.allclose(hs.S, [1.0, 0.5, 0.25, 0.125], rtol=0, atol=1e-15)
    assert np.allclose(hs.p, [0.5, 0.25, 0.125], rtol=0, atol=1e-15)


def test_forward_certain_top_click():
    hs = forward(_constant_head(logit=1000.0), np.zeros((4, 2)))
    assert hs.p[0] == 1.0
    assert np.all(hs.p[1:] == 0.0)


def test_forward_dimension_mismatch():
    with pytest.raises(DimensionError):
        forward(init_model(3, 2), np.zeros((4, 2)))
    with pytest.raises(DimensionError):
        forward(init_model(3, 2), np.zeros((0, 3)))


def test_forward_is_pure():
    m = init_model(3, 4, seed=3)
    x = np.random.default_rng(0).normal(size=(6, 3))
    a, b = forward(m, x), forward(m, x)
    assert a.h.tobytes() == b.h.tobytes() and a.S.tobytes() == b.S.tobytes()


def test_padding_does_not_change_prefix_hazards():
    m = _random_model(3, 4, seed=7)
    x = np.random.default_rng(1).normal(size=(5, 3))
    X = np.zeros((2, 8, 3))
    X[0, :5] = x
    X[1] = np.random.default_rng(2).normal(size=(8, 3))
    cache = forward_batch(m, X)
    assert np.array_equal(cache.h[0, :5], forward(m, x).h)


@given(st.integers(1, 50), st.integers(0, 10_000))
@settings(max_examples=60, deadline=None)
def test_forward_distribution_identities(n, seed):
    m = _random_model(3, 4, seed)
    x = np.random.default_rng(seed).normal(size=(n, 3)) * 2
    hs = forward(m, x)
    assert hs.S[0] == 1.0
    assert np.all(np.diff(hs.S) <= 0)
    assert np.allclose(hs.W, 1 - hs.S, atol=0, rtol=0)
    assert np.max(np.abs(hs.p - (hs.S[:-1] - hs.S[1:]))) <= 1e-9
    assert abs(hs.p.sum() + hs.S[-1] - 1) <= 1e-9
    assert np.max(np.abs(hs.h * hs.S[:-1] - hs.p)) <= 1e-12


# survival_curves


def test_curves_single_half():
    S, W, p = survival_curves([0.5])
    assert S.tolist() == [1.0, 0.5]
    assert W.tolist() == [0.0, 0.5]
    assert p.tolist() == [0.5]


def test_curves_normalise():
    S, _, p = survival_curves([0.5, 0.5, 0.5])
    assert p.sum() == pytest.approx(0.875, abs=1e-15)
    assert S[-1] == pytest.approx(0.125, abs=1e-15)
    assert p.sum() + S[-1] == pytest.approx(1.0, abs=1e-15)


def test_curves_all_censored():
    S, _, p = survival_curves([0.0, 0.0, 0.0])
    assert p.tolist() == [0.0, 0.0, 0.0]
    assert S[-1] == 1.0


@pytest.mark.parametrize("h", [[-0.1], [1.1], [np.nan], [[0.5]]])
def test_curves_reject_invalid_hazards(h):
    with pytest.raises(DomainError):
        survival_curves(h)


@given(arrays(np.float64, st.integers(1, 50), elements=st.floats(0, 1)))
def test_curves_identities_on_arbitrary_hazards(h):
    S, W, p = survival_curves(h)
    assert np.all(np.diff(S) <= 1e-15)
    assert abs(p.sum() + S[-1] - 1) <= 1e-9
    assert np.all(p >= 0)
    assert np.array_equal(W, 1 - S)


# scoring and reranking


def test_scores_are_hazards():
    m = init_model(3, 4, seed=4)
    x = np.random.default_rng(3).normal(size=(5, 3))
    hs = forward(m, x)
    assert np.array_equal(score_relevance(m, x), hs.h)
    assert np.max(np.abs(hs.p / hs.S[:-1] - hs.h)) <= 1e-12
    one = score_relevance(m, x[:1])[0]
    assert 0 < one < 1


def test_rerank_examples():
    assert (rerank([0.2, 0.9, 0.5]) + 1).tolist() == [2, 3, 1]
    assert rerank([0.3] * 4).tolist() == [0, 1, 2, 3]
    with pytest.raises(DomainError):
        rerank([0.1, np.inf])


def _sort_oracle(scores):
    # selection by (score desc, position asc), written without argsort
    remaining = list(range(len(scores)))
    out = []
    while remaining:
        best = remaining[0]
        for i in remaining[1:]:
            if scores[i] > scores[best]:
                best = i
        out.append(best)
        remaining.remove(best)
    return out


def test_rerank_matches_brute_force():
    rng = np.random.default_rng(0)
    for n in range(1, 9):
        for _ in range(50):
            s = rng.integers(0, 4, size=n).astype(float)
            perm = rerank(s).tolist()
            assert sorted(perm) == list(range(n))
            assert perm == _sort_oracle(s)


def test_rerank_small_lists_exhaustive():
    for n in range(1, 6):
        for scores in itertools.permutations(range(n)):
            assert rerank(scores).tolist() == _sort_oracle(list(scores))


def test_forward_time_is_linear_in_length():
    m = init_model(20, 32, seed=0)
    rng = np.random.default_rng(0)

    def best_time(n):
        x = rng.normal(size=(n, 20))
        times = []
        for _ in range(7):
            t0 = time.perf_counter()
            forward(m, x)
            times.append(time.perf_counter() - t0)
        return min(times)

    best_time(100)
    # linear growth means equal cost per position; allow a factor 3 for noise
    assert best_time(400) / 400 <= 3 * best_time(100) / 100
