"""Evaluation measures: matching accuracy, pairwise clustering F-score,
and the combined scores."""

from __future__ import annotations

import numpy as np

Array = np.ndarray


def m_acc(X: Array, X_gt: Array) -> float:
    """Fraction of ground-truth assignments recovered:
    tr(X^T X_gt) / tr(1 X_gt).

    X_gt may be a partial assignment (all-zero rows/columns are simply
    not counted).
    """
    X = np.asarray(X, dtype=float)
    X_gt = np.asarray(X_gt, dtype=float)
    if X.shape != X_gt.shape or X.ndim != 2 or X.shape[0] != X.shape[1]:
        raise ValueError("matching matrices must share square shape")
    denom = float(np.sum(X_gt))
    if denom <= 0:
        raise ValueError("ground-truth matching is empty")
    return float(np.sum(X * X_gt)) / denom


def pairwise_f_score(labels, labels_gt) -> float:
    """Pair-counting F-score of a two-way clustering against ground truth.

    With the prediction aligned to the ground truth by a global label
    flip, every unordered node pair contributes: TP if the pair shares a
    ground-truth cluster and at least one of its nodes is assigned to
    the right cluster; FN if it shares a ground-truth cluster and both
    nodes are misassigned; FP if the pair is predicted together but
    belongs to different ground-truth clusters.  F = TP/(TP + (FP+FN)/2),
    taken over the better of the two flips, so the score is invariant
    under global flips of the prediction by construction.
    """
    y = np.asarray(labels, dtype=int)
    g = np.asarray(labels_gt, dtype=int)
    if y.shape != g.shape or y.ndim != 1:
        raise ValueError("label vectors must share 1-D shape")
    n = y.size
    if n < 2:
        raise ValueError("need at least 2 nodes")
    iu, ju = np.triu_indices(n, k=1)
    gt_same = g[iu] == g[ju]

    def aligned_score(ya: Array) -> float:
        correct = ya == g
        pred_same = ya[iu] == ya[ju]
        either_ok = correct[iu] | correct[ju]
        tp = int(np.sum(gt_same & either_ok))
        fn = int(np.sum(gt_same & ~either_ok))
        fp = int(np.sum(~gt_same & pred_same))
        denom = tp + 0.5 * (fp + fn)
        return 1.0 if denom == 0 else float(tp / denom)

    return max(aligned_score(y), aligned_score(-y))


def c_acc(f1: float, f2: float) -> float:
    """Pure clustering score sqrt(f1 * f2)."""
    return float(np.sqrt(f1 * f2))


def mc_acc(m: float, f1: float, f2: float) -> float:
    """Joint matching-and-clustering score (m * f1 * f2)^(1/3)."""
    return float(np.cbrt(m * f1 * f2))


def lawler_objective(K: Array, X: Array) -> float:
    """Quadratic assignment value vec(X)^T K vec(X) (column-major vec)."""
    K = np.asarray(K, dtype=float)
    X = np.asarray(X, dtype=float)
    n = X.shape[0]
    if X.shape != (n, n) or K.shape != (n * n, n * n):
        raise ValueError("K must be (n^2, n^2) for n x n X")
    x = X.flatten(order="F")
    return float(x @ K @ x)


def maxcut_objective(W: Array, y: Array) -> float:
    """Two-way cut weight sum_ij W_ij (1 - y_i y_j) over ordered pairs."""
    W = np.asarray(W, dtype=float)
    y = np.asarray(y, dtype=float)
    if W.shape != (y.size, y.size):
        raise ValueError("weight matrix and labels disagree in size")
    return float(np.sum(W) - y @ W @ y)
