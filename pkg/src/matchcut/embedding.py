"""Spectral source/target node embeddings of Kronecker factor matrices.

Each n x n factor M is embedded through its common-neighbour similarity
S = M @ M: a truncated SVD S ~ P^T Q yields d-dimensional source (P) and
target (Q) node vectors, stored column-per-node.  Registration of these
point sets is what the matching relaxation optimizes.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .kpsvd import KPSVD

Array = np.ndarray


@dataclass(frozen=True)
class Embedding:
    """d x n source/target embeddings and the similarity spectrum."""

    P: Array
    Q: Array
    sigmas: Array  # singular values of S = M @ M, descending

    @property
    def dim(self) -> int:
        return self.P.shape[0]


@dataclass(frozen=True)
class PairEmbeddings:
    """Embeddings of one Kronecker term's two factors (graph 1, graph 2)."""

    g1: Embedding
    g2: Embedding

    def stream(self, s: int) -> tuple[Array, Array]:
        """Registration stream s in {0, 1}: (P-side, Q-side) point sets."""
        if s == 0:
            return self.g1.P, self.g2.P
        if s == 1:
            return self.g1.Q, self.g2.Q
        raise ValueError("stream index must be 0 or 1")


def common_neighbour_similarity(M: Array) -> Array:
    """Second-order similarity M @ M (common-neighbour counts for 0/1 M)."""
    M = np.asarray(M, dtype=float)
    return M @ M


def hope(M: Array, d: int) -> Embedding:
    """Rank-d source/target embedding of the similarity S = M @ M.

    For symmetric M (our factors), S is PSD and P == Q.  Signs are fixed
    so the largest-magnitude entry of each left vector is positive.
    """
    M = np.asarray(M, dtype=float)
    n = M.shape[0]
    if M.shape != (n, n):
        raise ValueError("factor must be square")
    if not (1 <= d <= n):
        raise ValueError("embedding dimension must be in [1, n]")
    S = common_neighbour_similarity(M)
    if np.allclose(S, S.T, atol=1e-12 * max(1.0, float(np.abs(S).max()))):
        w, U = np.linalg.eigh(0.5 * (S + S.T))
        order = np.argsort(np.abs(w))[::-1]
        w, U = w[order], U[:, order]
        sig = np.abs(w)
        V = U * np.sign(w)[None, :]  # S = U diag(sig) V^T with V col signs
    else:
        U, sig, Vt = np.linalg.svd(S)
        V = Vt.T
    for t in range(n):
        j = int(np.argmax(np.abs(U[:, t])))
        if U[j, t] < 0:
            U[:, t] = -U[:, t]
            V[:, t] = -V[:, t]
    r = np.sqrt(sig[:d])
    P = (U[:, :d] * r[None, :]).T
    Q = (V[:, :d] * r[None, :]).T
    return Embedding(P=P, Q=Q, sigmas=sig)


def hope_loss(M: Array, emb: Embedding) -> float:
    """Frobenius reconstruction error ||M@M - P^T Q||_F."""
    S = common_neighbour_similarity(M)
    return float(np.linalg.norm(S - emb.P.T @ emb.Q))


def choose_dim(
    sigmas: Array,
    energy: float = 0.9,
    d_min: int = 1,
    d_max: int | None = None,
) -> int:
    """Smallest d capturing the given squared-spectrum energy fraction,
    clamped to [d_min, d_max]."""
    s2 = np.asarray(sigmas, dtype=float) ** 2
    total = float(s2.sum())
    n = len(s2)
    if total <= 0.0:
        d = d_min
    else:
        frac = np.cumsum(s2) / total
        d = int(np.searchsorted(frac, energy - 1e-12) + 1)
    hi = n if d_max is None else min(d_max, n)
    return int(min(max(d, d_min), hi))


def embed_terms(
    fact: KPSVD,
    dim: int | None = None,
    energy: float = 0.9,
    d_min: int = 1,
    d_max: int | None = None,
) -> tuple[tuple[PairEmbeddings, ...], int]:
    """Embed every factor of a Kronecker decomposition at one shared
    dimension.

    With dim=None the dimension is chosen per factor by the energy rule
    and the maximum over all 2k factors is used, so all registration
    streams share a common rotation size.
    """
    mats = [m for t in fact.terms for m in (t.A, t.B)]
    if dim is None:
        spectra = [np.abs(np.linalg.eigvalsh(0.5 * (m + m.T))) ** 2 for m in mats]
        dim = max(choose_dim(np.sort(s)[::-1], energy, d_min, d_max) for s in spectra)
    dim = int(dim)
    if not (1 <= dim <= fact.n):
        raise ValueError("embedding dimension must be in [1, n]")
    pairs = tuple(
        PairEmbeddings(g1=hope(t.A, dim), g2=hope(t.B, dim)) for t in fact.terms
    )
    return pairs, dim
