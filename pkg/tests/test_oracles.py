import itertools

import numpy as np
import pytest

from matchcut.datasets import gen_pair, scenario_11
from matchcut.graphs import build_affinity_K
from matchcut.metrics import lawler_objective, m_acc, maxcut_objective, pairwise_f_score
from matchcut.model import MatchingStream, assemble_joint
from matchcut.oracles import (
    baseline_pipeline,
    brute_force_joint,
    brute_force_joint_model,
    brute_force_maxcut,
    kmeans2_baseline,
    spectral_matching_baseline,
)


def _sym(rng, n):
    A = rng.standard_normal((n, n))
    return np.abs(0.5 * (A + A.T))


def _subset_cut(W, y):
    # independent arithmetic path: the cut convention counts ordered
    # pairs and scores 1 - y_i y_j = 2 per crossing, so 4x over i < j
    n = len(y)
    return 4.0 * sum(
        W[i, j] for i, j in itertools.combinations(range(n), 2) if y[i] != y[j]
    )


def test_maxcut_k2_pinned():
    W = np.array([[0.0, 2.0], [2.0, 0.0]])
    y, val = brute_force_maxcut(W)
    assert val == pytest.approx(8.0)
    assert y[0] == 1 and y[1] == -1


def test_maxcut_unit_triangle():
    W = np.ones((3, 3)) - np.eye(3)
    y, val = brute_force_maxcut(W)
    assert val == pytest.approx(8.0)
    # one node against the other two
    assert abs(int(np.sum(y))) == 1


def test_maxcut_matches_subset_enumeration():
    rng = np.random.default_rng(3)
    for n in (2, 4, 6, 7):
        W = _sym(rng, n)
        np.fill_diagonal(W, 0.0)
        y, val = brute_force_maxcut(W)
        assert val == pytest.approx(maxcut_objective(W, y))
        best = max(
            _subset_cut(W, np.array(s))
            for s in itertools.product((1, -1), repeat=n)
        )
        assert val == pytest.approx(best)


def test_maxcut_validates():
    with pytest.raises(ValueError):
        brute_force_maxcut(np.zeros((2, 3)))
    with pytest.raises(ValueError):
        brute_force_maxcut(np.zeros((17, 17)))
    y, val = brute_force_maxcut(np.zeros((1, 1)))
    assert val == 0.0 and y[0] == 1


def test_brute_force_joint_is_self_consistent_and_dominant():
    rng = np.random.default_rng(7)
    n = 4
    K = _sym(rng, n * n)
    W1, W2 = _sym(rng, n), _sym(rng, n)
    X, (y1, y2), val = brute_force_joint(K, W1, W2, lam1=0.4, lam2=1.1)
    # matched nodes share a label: y2 is y1 pushed through X
    assert np.array_equal(y2, (X @ y1).astype(int))
    recomputed = 0.4 * lawler_objective(K, X) + 1.1 * (
        maxcut_objective(W1, y1.astype(float)) + maxcut_objective(W2, y2.astype(float))
    )
    assert val == pytest.approx(recomputed)
    # dominates random feasible draws
    for _ in range(200):
        p = rng.permutation(n)
        Xr = np.zeros((n, n))
        Xr[p, np.arange(n)] = 1.0
        y1r = rng.choice([1.0, -1.0], size=n)
        y2r = Xr @ y1r
        v = 0.4 * lawler_objective(K, Xr) + 1.1 * (
            maxcut_objective(W1, y1r) + maxcut_objective(W2, y2r)
        )
        assert v <= val + 1e-9


def test_brute_force_joint_cap():
    n = 8
    with pytest.raises(ValueError):
        brute_force_joint(np.zeros((n * n, n * n)), np.zeros((n, n)), np.zeros((n, n)))


def test_brute_force_joint_model_minimizes():
    rng = np.random.default_rng(11)
    d, n = 2, 4
    streams = (
        MatchingStream(P=rng.standard_normal((d, n)), Q=rng.standard_normal((d, n))),
    )
    W1, W2 = _sym(rng, n), _sym(rng, n)
    model = assemble_joint(streams, W1, W2, lam_m=0.8, lam_c=0.5, coupling="moment")
    X, (y1, y2), val = brute_force_joint_model(model)
    assert val == pytest.approx(
        model.joint_value(X, y1.astype(float), y2.astype(float))
    )
    assert np.array_equal(y2, (X @ y1).astype(int))
    for _ in range(120):
        p = rng.permutation(n)
        Xr = np.zeros((n, n))
        Xr[p, np.arange(n)] = 1.0
        y1r = rng.choice([1.0, -1.0], size=n)
        v = model.joint_value(Xr, y1r, Xr @ y1r)
        assert val <= v + 1e-9


def test_brute_force_joint_model_uncoupled_splits():
    # without a coupling the best labels are the per-graph max cuts,
    # whatever the matching does
    rng = np.random.default_rng(13)
    d, n = 2, 3
    streams = (
        MatchingStream(P=rng.standard_normal((d, n)), Q=rng.standard_normal((d, n))),
    )
    W1, W2 = _sym(rng, n), _sym(rng, n)
    model = assemble_joint(streams, W1, W2, lam_m=1.0, lam_c=1.0, coupling=None)
    _, (y1, y2), _ = brute_force_joint_model(model)
    b1, _ = brute_force_maxcut(W1)
    b2, _ = brute_force_maxcut(W2)
    assert np.array_equal(y1, b1)
    assert np.array_equal(y2, b2)


def test_spectral_matching_recovers_noiseless_pair():
    g1, g2 = gen_pair(scenario_11(noise_sigma=0.0, seed=1))
    K = build_affinity_K(g1, g2)
    X = spectral_matching_baseline(K)
    assert np.array_equal(np.sort(np.argmax(X, axis=0)), np.arange(g1.n))
    assert m_acc(X, np.eye(g1.n)) == pytest.approx(1.0)


def test_spectral_matching_validates():
    with pytest.raises(ValueError):
        spectral_matching_baseline(np.zeros((6, 5)))
    with pytest.raises(ValueError):
        spectral_matching_baseline(np.zeros((5, 5)))  # 5 is not a square


def test_kmeans2_separated_blobs():
    rng = np.random.default_rng(5)
    a = rng.normal(0.0, 0.5, size=(6, 2))
    b = rng.normal(0.0, 0.5, size=(7, 2)) + np.array([40.0, 0.0])
    pts = np.vstack([a, b])
    labels = kmeans2_baseline(pts)
    assert labels[0] == 1
    gt = np.array([1] * 6 + [-1] * 7)
    assert pairwise_f_score(labels, gt) == pytest.approx(1.0)


def test_kmeans2_deterministic():
    rng = np.random.default_rng(9)
    pts = rng.standard_normal((12, 3))
    l1 = kmeans2_baseline(pts, seed=4)
    l2 = kmeans2_baseline(pts, seed=4)
    assert np.array_equal(l1, l2)


def test_kmeans2_needs_two_points():
    with pytest.raises(ValueError):
        kmeans2_baseline(np.zeros((1, 2)))


def test_baseline_pipeline_easy_scene():
    g1, g2 = gen_pair(scenario_11(noise_sigma=0.0, seed=0))
    X, y1, y2 = baseline_pipeline(g1, g2)
    assert m_acc(X, np.eye(g1.n)) == pytest.approx(1.0)
    assert pairwise_f_score(y1, g1.gt_cluster) == pytest.approx(1.0)
    assert pairwise_f_score(y2, g2.gt_cluster) == pytest.approx(1.0)
