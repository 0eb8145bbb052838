"""Symmetric-matrix vectorization (svec) and PSD projection utilities.

svec scans the lower triangle in column-major order and scales
off-diagonal entries by sqrt(2), so <svec(A), svec(B)> = <A, B> and
svec(I_2) = (1, 0, 1).
"""

from __future__ import annotations

import numpy as np

Array = np.ndarray

_SQRT2 = np.sqrt(2.0)


def svec_len(m: int) -> int:
    return m * (m + 1) // 2


def svec_index(m: int, r: int, c: int) -> int:
    """Position of symmetric entry (r, c) in the svec of an order-m matrix."""
    if not (0 <= r < m and 0 <= c < m):
        raise IndexError("entry out of range")
    r, c = max(r, c), min(r, c)
    return c * m - c * (c - 1) // 2 + (r - c)


class _OrderCache:
    """Per-order index arrays used by vectorized svec/smat."""

    def __init__(self, m: int):
        cols = np.repeat(np.arange(m), np.arange(m, 0, -1))
        rows = np.concatenate([np.arange(c, m) for c in range(m)]) if m else np.zeros(0, int)
        self.m = m
        self.rows = rows
        self.cols = cols
        self.scale = np.where(rows == cols, 1.0, _SQRT2)


_CACHE: dict[int, _OrderCache] = {}


def _cache(m: int) -> _OrderCache:
    oc = _CACHE.get(m)
    if oc is None:
        oc = _OrderCache(m)
        _CACHE[m] = oc
    return oc


def svec(M: Array) -> Array:
    """Vectorize one symmetric matrix (or a batch with shape (..., m, m))."""
    M = np.asarray(M, dtype=float)
    m = M.shape[-1]
    oc = _cache(m)
    return M[..., oc.rows, oc.cols] * oc.scale


def smat(v: Array) -> Array:
    """Inverse of svec for one vector or a batch (..., m(m+1)/2)."""
    v = np.asarray(v, dtype=float)
    L = v.shape[-1]
    m = int((np.sqrt(8 * L + 1) - 1) / 2 + 0.5)
    if svec_len(m) != L:
        raise ValueError(f"length {L} is not a triangular number")
    oc = _cache(m)
    vals = v / oc.scale
    M = np.zeros(v.shape[:-1] + (m, m))
    M[..., oc.rows, oc.cols] = vals
    M[..., oc.cols, oc.rows] = vals
    return M


def project_psd(M: Array) -> Array:
    """Nearest (Frobenius) positive semidefinite matrix; batched over
    leading dimensions."""
    M = np.asarray(M, dtype=float)
    M = 0.5 * (M + np.swapaxes(M, -1, -2))
    w, V = np.linalg.eigh(M)
    w = np.maximum(w, 0.0)
    return (V * w[..., None, :]) @ np.swapaxes(V, -1, -2)


def psd_dist(M: Array) -> float:
    """Frobenius distance of a symmetric matrix to the PSD cone."""
    w = np.linalg.eigvalsh(0.5 * (M + M.T))
    neg = np.minimum(w, 0.0)
    return float(np.sqrt(np.sum(neg * neg)))
