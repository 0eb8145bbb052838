"""Exhaustive oracles and simple baselines used to verify the pipeline."""

from __future__ import annotations

import itertools

import numpy as np

from .graphs import Graph, build_affinity_K, distance_matrix
from .metrics import lawler_objective, maxcut_objective
from .model import JointModel

Array = np.ndarray

JOINT_CAP = 7
CUT_CAP = 16


def _sign_patterns(n: int, fix_first: bool = True) -> Array:
    """All +-1 vectors (first entry pinned to +1 when fix_first), ordered
    by the binary counter so ties resolve lexicographically."""
    m = n - 1 if fix_first else n
    codes = np.arange(2**m, dtype=np.int64)
    bits = (codes[:, None] >> np.arange(m)[None, :]) & 1
    Y = 1 - 2 * bits
    if fix_first:
        Y = np.hstack([np.ones((Y.shape[0], 1), dtype=np.int64), Y])
    return Y


def brute_force_maxcut(W: Array, cap: int = CUT_CAP) -> tuple[Array, float]:
    """Exact max cut by enumeration (first optimum in counter order)."""
    W = np.asarray(W, dtype=float)
    n = W.shape[0]
    if W.shape != (n, n):
        raise ValueError("W must be square")
    if n > cap:
        raise ValueError(f"n={n} exceeds brute-force cap {cap}")
    if n == 1:
        return np.array([1]), 0.0
    Y = _sign_patterns(n)
    vals = np.sum(W) - np.einsum("bi,ij,bj->b", Y, W, Y)
    best = int(np.argmax(vals))
    return Y[best].copy(), float(vals[best])


def _perm_matrix(perm, n: int) -> Array:
    X = np.zeros((n, n))
    for j, l in enumerate(perm):
        X[l, j] = 1.0
    return X


def brute_force_joint(
    K: Array,
    W1: Array,
    W2: Array,
    lam1: float = 1.0,
    lam2: float = 1.0,
    cap: int = JOINT_CAP,
) -> tuple[Array, tuple[Array, Array], float]:
    """Exact maximizer of the coupled objective
    lam1 * vec(X)'K vec(X) + lam2 * (cut(W1, y1) + cut(W2, y2))
    over permutations and label pairs obeying the same-cluster coupling
    (a match forces equal labels, so y2 is y1 carried through X)."""
    W1 = np.asarray(W1, dtype=float)
    W2 = np.asarray(W2, dtype=float)
    n = W1.shape[0]
    if n > cap:
        raise ValueError(f"n={n} exceeds brute-force cap {cap}")
    if W2.shape != (n, n):
        raise ValueError("W1 and W2 must share order")
    Y = _sign_patterns(n).astype(float)
    sum1, sum2 = float(np.sum(W1)), float(np.sum(W2))
    best = None
    for perm in itertools.permutations(range(n)):
        X = _perm_matrix(perm, n)
        qap = lawler_objective(K, X)
        # y2[perm[j]] = y1[j]
        Y2 = np.empty_like(Y)
        Y2[:, list(perm)] = Y
        cuts = (sum1 - np.einsum("bi,ij,bj->b", Y, W1, Y)) + (
            sum2 - np.einsum("bi,ij,bj->b", Y2, W2, Y2)
        )
        vals = lam1 * qap + lam2 * cuts
        i = int(np.argmax(vals))
        if best is None or vals[i] > best[0]:
            best = (float(vals[i]), X, Y[i].astype(int), Y2[i].astype(int))
    val, X, y1, y2 = best
    return X, (y1, y2), val


def brute_force_joint_model(
    model: JointModel, cap: int = JOINT_CAP
) -> tuple[Array, tuple[Array | None, Array | None], float]:
    """Exact minimizer of the model objective (registration + cluster
    terms, rotations eliminated by orthogonal Procrustes) over integral
    points feasible for the model's coupling."""
    n = model.n
    if n is None:
        # clustering only
        n1, n2 = model.cluster_sizes()
        y1 = y2 = None
        val = 0.0
        if n1:
            if n1 > CUT_CAP:
                raise ValueError("cluster size exceeds cap")
            y1, c1 = brute_force_maxcut(model.W1)
            val += model.lam_c * (np.sum(model.W1) - c1)
        if n2:
            y2, c2 = brute_force_maxcut(model.W2)
            val += model.lam_c * (np.sum(model.W2) - c2)
        return None, (y1, y2), float(val)
    if n > cap:
        raise ValueError(f"n={n} exceeds brute-force cap {cap}")
    coupled = model.coupling is not None
    has_cluster = model.cluster_block is not None
    Y = _sign_patterns(n).astype(float) if has_cluster else None
    best = None
    for perm in itertools.permutations(range(n)):
        X = _perm_matrix(perm, n)
        mv = model.matching_value(X)
        if not has_cluster:
            tot, y1b, y2b = mv, None, None
        elif coupled:
            Y2 = np.empty_like(Y)
            Y2[:, list(perm)] = Y
            cv = model.lam_c * (
                np.einsum("bi,ij,bj->b", Y, model.W1, Y)
                + np.einsum("bi,ij,bj->b", Y2, model.W2, Y2)
            )
            i = int(np.argmin(cv))
            tot, y1b, y2b = mv + float(cv[i]), Y[i].astype(int), Y2[i].astype(int)
        else:
            y1b, c1 = brute_force_maxcut(model.W1)
            y2b, c2 = brute_force_maxcut(model.W2)
            tot = mv + model.lam_c * float(
                np.sum(model.W1) - c1 + np.sum(model.W2) - c2
            )
        if best is None or tot < best[0]:
            best = (tot, X, y1b, y2b)
    val, X, y1, y2 = best
    return X, (y1, y2), float(val)


def spectral_matching_baseline(K: Array, iters: int = 1000, tol: float = 1e-12) -> Array:
    """Leading-eigenvector matching: power iteration on K followed by
    greedy conflict-free discretization (lexicographic tie-break).
    Returns the binary assignment (graph2 x graph1)."""
    K = np.asarray(K, dtype=float)
    n2 = K.shape[0]
    n = int(round(np.sqrt(n2)))
    if n * n != n2 or K.shape != (n2, n2):
        raise ValueError("K must be (n^2, n^2)")
    v = np.ones(n2) / np.sqrt(n2)
    for _ in range(iters):
        w = K @ v
        nw = np.linalg.norm(w)
        if nw <= tol:
            break  # K annihilates v; fall back to the uniform vector
        w /= nw
        if np.linalg.norm(w - v) < tol:
            v = w
            break
        v = w
    M = np.abs(v).reshape(n, n, order="F")  # M[l, j]: affinity of match (j, l)
    X = np.zeros((n, n))
    M = M.copy()
    for _ in range(n):
        l, j = np.unravel_index(np.argmax(M), M.shape)
        X[l, j] = 1.0
        M[l, :] = -np.inf
        M[:, j] = -np.inf
    return X


def kmeans2_baseline(coords: Array, seed: int = 0, restarts: int = 50) -> Array:
    """Plain 2-means on node coordinates; labels +-1 with node 0's
    cluster labeled +1.  Restart 0 uses farthest-point seeding, the rest
    are random (seeded); best inertia wins, first winner on ties."""
    pts = np.asarray(coords, dtype=float)
    n = pts.shape[0]
    if n < 2:
        raise ValueError("need at least 2 points")
    rng = np.random.default_rng(seed)
    best = None
    for r in range(max(1, restarts)):
        if r == 0:
            centroid = pts.mean(axis=0)
            c1 = int(np.argmax(np.sum((pts - centroid) ** 2, axis=1)))
            c2 = int(np.argmax(np.sum((pts - pts[c1]) ** 2, axis=1)))
            if c1 == c2:
                c2 = (c1 + 1) % n
        else:
            c1, c2 = map(int, rng.choice(n, size=2, replace=False))
        centers = pts[[c1, c2]].copy()
        assign = np.zeros(n, dtype=int)
        for it in range(100):
            d = ((pts[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
            new_assign = np.argmin(d, axis=1)
            if it > 0 and np.array_equal(new_assign, assign):
                break
            assign = new_assign
            for c in range(2):
                sel = pts[assign == c]
                if len(sel):
                    centers[c] = sel.mean(axis=0)
        inertia = float(np.sum((pts - centers[assign]) ** 2))
        if best is None or inertia < best[0] - 1e-12:
            best = (inertia, assign.copy())
    assign = best[1]
    labels = np.where(assign == assign[0], 1, -1)
    return labels.astype(int)


def baseline_pipeline(g1: Graph, g2: Graph) -> tuple[Array, Array, Array]:
    """Decoupled baseline: spectral matching on the affinities plus
    independent 2-means labels per graph."""
    K = build_affinity_K(g1, g2)
    X = spectral_matching_baseline(K)
    y1 = kmeans2_baseline(g1.coords)
    y2 = kmeans2_baseline(g2.coords)
    return X, y1, y2
