import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.special import expit

from igk import autodiff as ad
from igk.autodiff import Tensor, backward
from igk.consistency import (InvalidPair, consistency_loss, cosine_distance_matrix,
                             cosine_distance_tensor, layer_pair_loss, layer_pairs,
                             pair_cross_entropy, predicted_prob, reference_prob, total_loss)

D = np.array([[0.0, 0.0, 1.0],
              [0.0, 0.0, 0.5],
              [1.0, 0.5, 0.0]])


def test_predicted_prob_value():
    # graph 0 is closer to 1 than to 2 by a distance gap of 1
    assert predicted_prob(D, 0, 1, 2) == pytest.approx(0.73106, abs=1e-5)
    assert predicted_prob(D, 0, 2, 1) == pytest.approx(1 - 0.73106, abs=1e-5)


def test_reference_prob_and_tie():
    assert reference_prob(D, 0, 1, 2) == 1.0
    assert reference_prob(D, 0, 2, 1) == 0.0
    tie = np.zeros((3, 3))
    assert reference_prob(tie, 0, 1, 2) == 0.5
    assert pair_cross_entropy(0.5, predicted_prob(tie, 0, 1, 2)) == pytest.approx(math.log(2))


def test_literal_orientation_flips_both():
    for k, n, m in [(0, 1, 2), (1, 0, 2), (2, 1, 0)]:
        p, q = predicted_prob(D, k, n, m), predicted_prob(D, k, n, m, literal=True)
        r, s = reference_prob(D, k, n, m), reference_prob(D, k, n, m, literal=True)
        assert p + q == pytest.approx(1.0, abs=1e-15)
        assert r + s == 1.0
        assert pair_cross_entropy(r, p) == pytest.approx(pair_cross_entropy(s, q), abs=1e-15)


def test_distinct_indices():
    with pytest.raises(InvalidPair):
        predicted_prob(D, 0, 0, 1)
    with pytest.raises(InvalidPair):
        reference_prob(D, 1, 2, 2)


def test_cosine_distance_matrix():
    H = np.array([[1.0, 0.0], [0.0, 2.0], [-3.0, 0.0], [0.0, 0.0]])
    M = cosine_distance_matrix(H)
    assert M[0, 1] == pytest.approx(1.0)
    assert M[0, 2] == pytest.approx(2.0)
    assert np.all(np.diag(M) == 0) and np.array_equal(M, M.T)
    assert np.allclose(cosine_distance_tensor(Tensor(H[:3])).value, M[:3, :3])


def oracle_pair_loss(prev, cur, k):
    """Loop form of the mean pairwise cross-entropy with scipy's sigmoid."""
    Dp, Dc = cosine_distance_matrix(prev), cosine_distance_matrix(cur)
    n = len(cur)
    terms = []
    for a in range(n):
        for b in range(a + 1, n):
            if k in (a, b):
                continue
            ref = 0.5 * (1 + np.sign(Dp[k, b] - Dp[k, a]))
            pred = expit(Dc[k, b] - Dc[k, a])
            terms.append(-(ref * np.log(pred) + (1 - ref) * np.log(1 - pred)))
    return float(np.mean(terms))


def random_layers(rng, n=6, d=4, layers=3):
    return [rng.normal(size=(n, d)) for _ in range(layers)]


@pytest.mark.parametrize("seed", range(5))
def test_pair_loss_matches_oracle(seed):
    rng = np.random.default_rng(seed)
    prev, cur = random_layers(rng, layers=2)
    for k in range(6):
        got = layer_pair_loss(Tensor(prev), Tensor(cur), k).item()
        assert got == pytest.approx(oracle_pair_loss(prev, cur, k), rel=1e-10)
        lit = layer_pair_loss(Tensor(prev), Tensor(cur), k, literal=True).item()
        assert lit == pytest.approx(got, rel=1e-12)


def test_first_last_matches_oracle():
    rng = np.random.default_rng(11)
    layers = random_layers(rng, n=7, layers=4)
    k = int(np.random.default_rng(3).integers(7))
    got = consistency_loss([Tensor(L) for L in layers], "first_last", np.random.default_rng(3)).item()
    assert got == pytest.approx(oracle_pair_loss(layers[0], layers[3], k), rel=1e-10)


def test_all_mode_sums_pairs():
    rng = np.random.default_rng(5)
    layers = random_layers(rng, n=5, layers=3)
    draw = np.random.default_rng(9)
    ks = [int(draw.integers(5)) for _ in range(2)]
    want = sum(oracle_pair_loss(layers[h], layers[h + 1], k) for h, k in zip((0, 1), ks))
    got = consistency_loss([Tensor(L) for L in layers], "all", np.random.default_rng(9)).item()
    assert got == pytest.approx(want, rel=1e-10)


def test_all_references_average():
    rng = np.random.default_rng(6)
    prev, cur = random_layers(rng, n=5, layers=2)
    want = np.mean([oracle_pair_loss(prev, cur, k) for k in range(5)])
    got = consistency_loss([Tensor(prev), Tensor(cur)], all_references=True).item()
    assert got == pytest.approx(want, rel=1e-10)


def test_layer_pairs():
    assert layer_pairs(4, "all") == [(0, 1), (1, 2), (2, 3)]
    assert layer_pairs(4, "first_last") == [(0, 3)]
    with pytest.raises(ValueError):
        layer_pairs(3, "every_other")


def test_small_batch_is_zero():
    layers = [Tensor(np.ones((2, 3)), requires_grad=True) for _ in range(3)]
    assert consistency_loss(layers).item() == 0.0


def test_previous_layer_gets_no_gradient():
    rng = np.random.default_rng(1)
    prev = Tensor(rng.normal(size=(5, 3)), requires_grad=True)
    cur = Tensor(rng.normal(size=(5, 3)), requires_grad=True)
    backward(layer_pair_loss(prev, cur, 2))
    assert np.all(prev.grad == 0)
    assert np.any(cur.grad != 0)


def test_total_loss():
    origin = Tensor([[1.5]])
    cons = Tensor([[2.0]])
    assert total_loss(origin, cons, 0) is origin
    assert total_loss(origin, cons, 0.5).item() == 2.5
    with pytest.raises(ValueError):
        total_loss(origin, cons, -1)


def test_pair_loss_gradient():
    rng = np.random.default_rng(2)
    prev = Tensor(rng.normal(size=(5, 3)))
    cur = Tensor(rng.normal(size=(5, 3)))
    assert ad.grad_check(lambda x: layer_pair_loss(prev, x, 1), cur, eps=1e-6) < 1e-6


batches = st.tuples(st.integers(3, 8), st.integers(1, 5), st.integers(0, 2**32 - 1))


@settings(max_examples=40, deadline=None)
@given(batches)
def test_scale_invariance(params):
    n, d, seed = params
    rng = np.random.default_rng(seed)
    layers = random_layers(rng, n=n, d=d)
    scales = [rng.uniform(0.01, 100, size=(n, 1)) for _ in layers]
    a = consistency_loss([Tensor(L) for L in layers], rng=np.random.default_rng(0)).item()
    b = consistency_loss([Tensor(L * s) for L, s in zip(layers, scales)],
                         rng=np.random.default_rng(0)).item()
    assert abs(a - b) < 1e-10


@settings(max_examples=40, deadline=None)
@given(batches)
def test_complementarity(params):
    n, d, seed = params
    rng = np.random.default_rng(seed)
    Dm = cosine_distance_matrix(rng.normal(size=(n, d)))
    for k in range(n):
        for a in range(n):
            for b in range(n):
                if len({k, a, b}) == 3:
                    assert abs(predicted_prob(Dm, k, a, b) + predicted_prob(Dm, k, b, a) - 1) < 1e-12
