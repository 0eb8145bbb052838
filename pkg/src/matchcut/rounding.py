"""Binarization of relaxed solutions: assignment projection, label
thresholding, sign alignment, and match/cluster consistency repair."""

from __future__ import annotations

import numpy as np
from scipy.optimize import linear_sum_assignment

Array = np.ndarray


def project_permutation(X_relaxed: Array) -> Array:
    """Nearest permutation in overlap: maximize <X_relaxed, X> over
    permutation matrices (linear assignment)."""
    X = np.asarray(X_relaxed, dtype=float)
    n = X.shape[0]
    if X.shape != (n, n):
        raise ValueError("square matrix required")
    rows, cols = linear_sum_assignment(-X)
    P = np.zeros((n, n))
    P[rows, cols] = 1.0
    return P


def greedy_rounding(X_relaxed: Array) -> Array:
    """Greedy max-entry assignment (kept as a baseline to compare the
    LAP projection against)."""
    X = np.asarray(X_relaxed, dtype=float).copy()
    n = X.shape[0]
    P = np.zeros((n, n))
    for _ in range(n):
        l, j = np.unravel_index(np.argmax(X), X.shape)
        P[l, j] = 1.0
        X[l, :] = -np.inf
        X[:, j] = -np.inf
    return P


def threshold_clusters(y_relaxed: Array, tol: float = 1e-9) -> Array:
    """Sign threshold at zero; entries within tol of zero go to +1."""
    y = np.asarray(y_relaxed, dtype=float)
    out = np.where(y < -tol, -1, 1)
    return out.astype(int)


def align_cluster_signs(y1: Array, y2: Array, X: Array) -> tuple[Array, Array]:
    """Flip y2 globally if that makes more matched pairs share a label.

    X is the binary assignment with X[l, j] = 1 for graph-1 node j
    matched to graph-2 node l.  Ties keep the original sign.
    """
    y1 = np.asarray(y1, dtype=int)
    y2 = np.asarray(y2, dtype=int)
    ls, js = np.nonzero(np.asarray(X) > 0.5)
    agree = int(np.sum(y1[js] == y2[ls]))
    if len(js) - agree > agree:
        y2 = -y2
    return y1, y2


def extract_cluster_labels(Mc: Array, W1: Array | None, W2: Array | None) -> Array:
    """Continuous label vector from the clustering moment matrix.

    The first moment y is gauge-degenerate when nothing pins its sign
    pattern (y and -y solve the cut identically, and without coupling the
    two graphs' gauges are independent), so several deterministic
    candidates are scored by the thresholded cut value and the best one
    is kept per graph: the first moments, the top eigenvector of the
    full moment matrix, top eigenvectors of the per-graph diagonal
    blocks of L, and the columns of L.
    """
    Mc = np.asarray(Mc, dtype=float)
    nn = Mc.shape[0] - 1
    n1 = 0 if W1 is None else W1.shape[0]
    L = Mc[1:, 1:]
    cands = [Mc[1:, 0]]
    w, V = np.linalg.eigh(0.5 * (Mc + Mc.T))
    cands.append(V[1:, -1])
    full = np.zeros(nn)
    for lo, hi in ((0, n1), (n1, nn)):
        if hi > lo:
            blk = L[lo:hi, lo:hi]
            wb, Vb = np.linalg.eigh(0.5 * (blk + blk.T))
            full = full.copy()
            full[lo:hi] = Vb[:, -1]
            cands.append(full)
    for j in range(nn):
        cands.append(L[:, j])

    def cut(yc: Array, W: Array | None, lo: int, hi: int) -> float:
        if W is None:
            return 0.0
        yb = threshold_clusters(yc[lo:hi]).astype(float)
        return float(np.sum(W) - yb @ W @ yb)

    best1 = max(cands, key=lambda c: cut(c, W1, 0, n1)) if n1 else None
    best2 = max(cands, key=lambda c: cut(c, W2, n1, nn)) if nn > n1 else None
    out = np.zeros(nn)
    if best1 is not None:
        out[:n1] = best1[:n1]
    if best2 is not None:
        out[n1:] = best2[n1:]
    return out


def consistency_report(X: Array, y1: Array, y2: Array) -> dict:
    """Count matched pairs whose endpoints carry different cluster labels."""
    X = np.asarray(X)
    y1 = np.asarray(y1, dtype=int)
    y2 = np.asarray(y2, dtype=int)
    ls, js = np.nonzero(X > 0.5)
    bad = [(int(j), int(l)) for l, j in zip(ls, js) if y1[j] != y2[l]]
    return {
        "n_matched": int(len(js)),
        "n_inconsistent": len(bad),
        "inconsistent_pairs": bad,
        "consistent": len(bad) == 0,
    }


def repair_matching(X_relaxed: Array, y1: Array, y2: Array) -> Array:
    """Re-run the assignment with cross-cluster matches penalized enough
    that same-cluster matches are always preferred when feasible."""
    X = np.asarray(X_relaxed, dtype=float)
    y1 = np.asarray(y1, dtype=int)
    y2 = np.asarray(y2, dtype=int)
    cross = (y2[:, None] != y1[None, :]).astype(float)
    penalty = 2.0 * float(np.abs(X).max()) + 1.0
    return project_permutation(X - penalty * cross)


def fit_rotation(P: Array, Q: Array, X: Array) -> Array:
    """Orthogonal R minimizing ||R P - Q X||_F (Procrustes)."""
    M = (Q @ X) @ P.T
    U, _, Vt = np.linalg.svd(M)
    return U @ Vt


def registration_cost(streams, rotations) -> Array:
    """C[l, j] = sum_t w_t ||R_t p_j - q_l||^2 for the given rotations."""
    C = None
    for strm, R in zip(streams, rotations):
        RP = R @ strm.P  # (d, n)
        d2 = (
            np.sum(RP**2, axis=0)[None, :]
            + np.sum(strm.Q**2, axis=0)[:, None]
            - 2.0 * strm.Q.T @ RP
        )
        C = strm.weight * d2 if C is None else C + strm.weight * d2
    return C


def icp_polish(
    streams,
    X0: Array,
    y1: Array | None = None,
    y2: Array | None = None,
    rounds: int = 20,
) -> Array:
    """Alternate closed-form rotation fits with linear assignments.

    Starting from a binary assignment X0, each round refits the per-
    stream rotations and re-solves the assignment under the summed
    registration cost; with labels given, cross-cluster matches carry a
    penalty large enough to be chosen only when unavoidable.  The
    (penalized) objective is non-increasing, so the loop stops at the
    first repeated assignment.
    """
    X = np.asarray(X0, dtype=float)
    if not streams:
        return X
    seen = set()
    for _ in range(rounds):
        key = tuple(np.argmax(X, axis=0))
        if key in seen:
            break
        seen.add(key)
        rots = [fit_rotation(s.P, s.Q, X) for s in streams]
        C = registration_cost(streams, rots)
        if y1 is not None and y2 is not None:
            cross = (np.asarray(y2)[:, None] != np.asarray(y1)[None, :]).astype(float)
            C = C + (2.0 * float(np.abs(C).max()) + 1.0) * cross
        rows, cols = linear_sum_assignment(C)
        Xn = np.zeros_like(X)
        Xn[rows, cols] = 1.0
        X = Xn
    return X
