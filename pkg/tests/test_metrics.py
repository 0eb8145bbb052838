import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from matchcut.metrics import (
    c_acc,
    lawler_objective,
    m_acc,
    maxcut_objective,
    mc_acc,
    pairwise_f_score,
)


def _perm_matrix(p, n):
    X = np.zeros((n, n))
    X[list(p), np.arange(n)] = 1.0
    return X


def test_m_acc_hand_values():
    I3 = np.eye(3)
    assert m_acc(I3, I3) == 1.0
    cycle = _perm_matrix((1, 2, 0), 3)
    assert m_acc(cycle, I3) == 0.0
    # n = 4 with exactly two agreeing columns
    X = _perm_matrix((0, 1, 3, 2), 4)
    assert m_acc(X, np.eye(4)) == 0.5


def test_m_acc_partial_ground_truth():
    X_gt = np.zeros((4, 4))
    X_gt[0, 0] = X_gt[2, 2] = 1.0  # only two nodes annotated
    X = _perm_matrix((0, 3, 2, 1), 4)
    assert m_acc(X, X_gt) == 1.0
    X = _perm_matrix((1, 0, 2, 3), 4)
    assert m_acc(X, X_gt) == 0.5


def test_m_acc_errors():
    with pytest.raises(ValueError):
        m_acc(np.eye(3), np.eye(4))
    with pytest.raises(ValueError):
        m_acc(np.eye(3), np.zeros((3, 3)))


def test_f_score_worked_example():
    # one node of the second cluster defects: TP=2, FP=2, FN=0 -> 2/3
    gt = [1, 1, -1, -1]
    pred = [1, 1, 1, -1]
    assert pairwise_f_score(pred, gt) == pytest.approx(2.0 / 3.0)


def test_f_score_perfect_and_flip():
    gt = [1, -1, 1, -1, 1]
    assert pairwise_f_score(gt, gt) == 1.0
    assert pairwise_f_score([-g for g in gt], gt) == 1.0


def test_f_score_single_cluster_prediction():
    gt = [1, 1, -1, -1]
    pred = [1, 1, 1, 1]
    # either flip leaves exactly one gt cluster correct: TP = that pair,
    # FN = the all-wrong pair, FP = the four cross pairs predicted
    # together -> 1 / (1 + 2.5) = 2/7
    assert pairwise_f_score(pred, gt) == pytest.approx(2.0 / 7.0)


def test_f_score_errors():
    with pytest.raises(ValueError):
        pairwise_f_score([1], [1])
    with pytest.raises(ValueError):
        pairwise_f_score([1, 1], [1, 1, -1])


def test_c_acc_values():
    assert c_acc(1.0, 1.0) == 1.0
    assert c_acc(0.0, 1.0) == 0.0
    assert c_acc(0.64, 0.25) == pytest.approx(0.4)


def test_mc_acc_values():
    assert mc_acc(1.0, 1.0, 1.0) == 1.0
    assert mc_acc(0.0, 0.7, 0.9) == 0.0
    assert mc_acc(0.5, 0.5, 0.5) == pytest.approx(0.5)


@settings(max_examples=50, deadline=None)
@given(
    st.floats(0, 1, allow_nan=False),
    st.floats(0, 1, allow_nan=False),
    st.floats(0, 1, allow_nan=False),
)
def test_mc_acc_between_min_and_max(m, f1, f2):
    v = mc_acc(m, f1, f2)
    assert min(m, f1, f2) - 1e-12 <= v <= max(m, f1, f2) + 1e-12


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000), st.integers(2, 9))
def test_f_score_flip_invariant_property(seed, n):
    rng = np.random.default_rng(seed)
    gt = rng.choice([-1, 1], size=n)
    pred = rng.choice([-1, 1], size=n)
    a = pairwise_f_score(pred, gt)
    assert 0.0 <= a <= 1.0
    assert pairwise_f_score(-pred, gt) == pytest.approx(a)


def test_lawler_objective_trace_identity():
    rng = np.random.default_rng(0)
    A = rng.standard_normal((3, 3))
    B = rng.standard_normal((3, 3))
    K = np.kron(A, B)
    assert lawler_objective(K, np.eye(3)) == pytest.approx(np.trace(B @ A.T))
    for p in itertools.permutations(range(3)):
        X = _perm_matrix(p, 3)
        want = np.trace(X.T @ B @ X @ A.T)
        assert lawler_objective(K, X) == pytest.approx(want)


def test_lawler_objective_errors():
    with pytest.raises(ValueError):
        lawler_objective(np.eye(4), np.eye(3))


def test_maxcut_objective_hand_values():
    W = np.ones((3, 3)) - np.eye(3)
    assert maxcut_objective(W, np.ones(3)) == 0.0
    assert maxcut_objective(W, np.array([1.0, -1.0, -1.0])) == 8.0
    with pytest.raises(ValueError):
        maxcut_objective(W, np.ones(4))


def test_maxcut_objective_weighted():
    W = np.array([[0.0, 2.0], [2.0, 0.0]])
    assert maxcut_objective(W, np.array([1.0, -1.0])) == 8.0
    assert maxcut_objective(W, np.array([1.0, 1.0])) == 0.0
