"""Nearest-Kronecker-product factorization of pairwise affinity matrices.

Splits an (n^2, n^2) affinity matrix K into a short sum of Kronecker
products sum_t A_t (x) B_t by SVD of a block rearrangement of K, turning
one large quadratic form into a few adjacency-like n x n factors.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse.linalg

Array = np.ndarray

# singular values below RANK_RTOL * sigma_1 are treated as numerically zero
RANK_RTOL = 1e-12

# below this matrix order a dense SVD beats iterative methods
_DENSE_CUTOFF = 400


@dataclass(frozen=True)
class KronTerm:
    """One summand sigma-weighted into its factors: contributes A (x) B."""

    A: Array
    B: Array
    sigma: float


@dataclass(frozen=True)
class KPSVD:
    """Truncated Kronecker factorization of an (n^2, n^2) matrix."""

    terms: tuple[KronTerm, ...]
    n: int
    frob2: float  # ||K||_F^2 of the input

    @property
    def k(self) -> int:
        return len(self.terms)

    def energy(self, k: int | None = None) -> float:
        """Fraction of squared Frobenius norm captured by the first k terms."""
        if self.frob2 == 0.0:
            return 1.0
        k = self.k if k is None else min(k, self.k)
        return float(sum(t.sigma**2 for t in self.terms[:k]) / self.frob2)

    def tail_error2(self, k: int | None = None) -> float:
        """Squared Frobenius error of the rank-k reconstruction."""
        k = self.k if k is None else min(k, self.k)
        return float(max(self.frob2 - sum(t.sigma**2 for t in self.terms[:k]), 0.0))

    def reconstruct(self, k: int | None = None) -> Array:
        k = self.k if k is None else min(k, self.k)
        K = np.zeros((self.n**2, self.n**2))
        for t in self.terms[:k]:
            K += np.kron(t.A, t.B)
        return K


def rearrange(K: Array, n: int) -> Array:
    """Block rearrangement R with R[vec(A) index, vec(B) index] layout.

    Satisfies rearrange(kron(A, B)) = vec(A) vec(B)^T for n x n factors
    (column-major vec), so Kronecker structure in K becomes rank-1
    structure in R.
    """
    if K.shape != (n * n, n * n):
        raise ValueError("K must be (n^2, n^2)")
    return K.reshape(n, n, n, n).transpose(2, 0, 3, 1).reshape(n * n, n * n)


def inverse_rearrange(R: Array, n: int) -> Array:
    if R.shape != (n * n, n * n):
        raise ValueError("R must be (n^2, n^2)")
    return R.reshape(n, n, n, n).transpose(1, 3, 0, 2).reshape(n * n, n * n)


def _unvec(v: Array, n: int) -> Array:
    return v.reshape(n, n, order="F")


def kpsvd(K: Array, k: int, symmetrize: bool = True) -> KPSVD:
    """Top-k Kronecker factorization of K.

    Fixes signs so each left factor's largest-magnitude entry is positive,
    and (by default) symmetrizes the factors — exact when K stems from
    undirected graphs, where the rearrangement has symmetric singular
    vectors.  Terms with sigma below RANK_RTOL * sigma_1 are dropped.
    """
    K = np.asarray(K, dtype=float)
    n2 = K.shape[0]
    n = int(round(np.sqrt(n2)))
    if n * n != n2 or K.shape != (n2, n2):
        raise ValueError("K must be square with perfect-square order")
    if k < 1:
        raise ValueError("k must be >= 1")
    k = min(k, n2)
    R = rearrange(K, n)
    if n2 <= _DENSE_CUTOFF or k >= n2 - 1:
        U, s, Vt = np.linalg.svd(R)
        U, s, Vt = U[:, :k], s[:k], Vt[:k]
    else:
        # deterministic start vector; svds returns ascending order
        v0 = np.ones(n2) / np.sqrt(n2)
        U, s, Vt = scipy.sparse.linalg.svds(R, k=k, v0=v0)
        order = np.argsort(s)[::-1]
        U, s, Vt = U[:, order], s[order], Vt[order]
    terms = []
    cutoff = RANK_RTOL * s[0] if len(s) else 0.0
    for t in range(len(s)):
        if s[t] <= cutoff:
            break
        u, v = U[:, t], Vt[t]
        j = int(np.argmax(np.abs(u)))
        if u[j] < 0:
            u, v = -u, -v
        r = np.sqrt(s[t])
        A, B = r * _unvec(u, n), r * _unvec(v, n)
        if symmetrize:
            A = 0.5 * (A + A.T)
            B = 0.5 * (B + B.T)
        terms.append(KronTerm(A=A, B=B, sigma=float(s[t])))
    return KPSVD(terms=tuple(terms), n=n, frob2=float(np.sum(K * K)))
