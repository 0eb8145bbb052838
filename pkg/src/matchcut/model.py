"""Assembly of the joint matching + clustering semidefinite relaxation.

Matching: for every registration stream (one per factor embedding and
HOPE side) and every graph-1 node j, a PSD moment block

    M_{s,j} = [[1,    r^T,   x_j^T ],
               [r,    RR,    C     ],
               [x_j,  C^T,   Xi_j  ]]  of order 1 + d^2 + n

lifts the products of the stream's rotation vec r = vec(R) and the
assignment column x_j (graph-2 indicator of j's match).  Rotation
moments are shared across j within a stream; assignment moments are
shared across streams.  Orthogonality of R and double stochasticity of
X are imposed on the moments; x >= 0 comes free from diag(Xi) = x.

Clustering: one PSD block [[1, y^T], [y, L]] over the stacked +-1 labels
y = (y1; y2) of both graphs, with unit diagonal — a two-graph max-cut
relaxation over node-distance weights.

Coupling: per candidate match (j, l), X[l, j] <= (1 + L[j, n+l]) / 2
ties matches to same-cluster placements.  Variants: the first-moment
form with the y terms ("zform") and a separate lifted block over
z = (1 + y)/2 ("lbar").
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .conic import SEG_NONNEG, SEG_PSD0, ConicProgram, ProgramBuilder
from .embedding import PairEmbeddings
from .sym import smat, svec_index

Array = np.ndarray

_SQRT2 = np.sqrt(2.0)

COUPLING_FORMS = ("moment", "zform", "lbar")


@dataclass(frozen=True)
class MatchingStream:
    """One registration stream: align R @ P (graph 1) with Q @ X (graph 2)."""

    P: Array
    Q: Array
    weight: float = 1.0
    label: str = "s"


def build_streams(pairs, merge: bool = True) -> tuple[MatchingStream, ...]:
    """Registration streams from per-term factor embeddings.

    Each Kronecker term yields two streams (source and target HOPE
    sides).  For symmetric factors the two sides coincide; with
    ``merge`` they collapse into one stream of weight 2, an exact
    size reduction of the SDP.
    """
    out: list[MatchingStream] = []
    for t, pe in enumerate(pairs):
        src = (pe.g1.P, pe.g2.P)
        tgt = (pe.g1.Q, pe.g2.Q)
        if merge and np.array_equal(src[0], tgt[0]) and np.array_equal(src[1], tgt[1]):
            out.append(MatchingStream(P=src[0], Q=src[1], weight=2.0, label=f"t{t}.both"))
        else:
            out.append(MatchingStream(P=src[0], Q=src[1], weight=1.0, label=f"t{t}.src"))
            out.append(MatchingStream(P=tgt[0], Q=tgt[1], weight=1.0, label=f"t{t}.tgt"))
    return tuple(out)


def _region_locs(m: int, idx: Array) -> Array:
    """svec positions of all unordered entry pairs within index set idx."""
    I, J = np.meshgrid(idx, idx, indexing="ij")
    mask = I >= J
    r, c = I[mask], J[mask]
    return c * m - c * (c - 1) // 2 + (r - c)


def _col_locs(m: int, idx: Array, col: int = 0) -> Array:
    """svec positions of entries (idx, col) with idx > col."""
    r, c = np.asarray(idx), col
    return c * m - c * (c - 1) // 2 + (r - c)


@dataclass
class JointModel:
    """Finalized conic program plus the layout needed to read it back."""

    prog: ConicProgram
    streams: tuple[MatchingStream, ...]
    n: int | None
    d: int | None
    lam_m: float
    lam_c: float
    coupling: str | None
    W1: Array | None
    W2: Array | None
    match_blocks: dict  # (stream_idx, j) -> psd block
    master_blocks: list  # per-j blocks of stream 0
    cluster_block: int | None
    lbar_block: int | None

    # -- extraction ----------------------------------------------------

    def extract_matching(self, x: Array) -> Array:
        """Relaxed assignment matrix X (graph2 x graph1), averaged over
        the stream copies of the shared first moments."""
        if self.n is None:
            raise ValueError("model has no matching part")
        n, d = self.n, self.d
        m = 1 + d * d + n
        locs = _col_locs(m, 1 + d * d + np.arange(n))
        X = np.zeros((n, n))
        for s in range(len(self.streams)):
            for j in range(n):
                sl = self.prog.psd_slice(self.match_blocks[(s, j)])
                X[:, j] += x[sl.start + locs] / _SQRT2
        return X / len(self.streams)

    def extract_rotation_moments(self, x: Array, stream: int) -> Array:
        if self.n is None:
            raise ValueError("model has no matching part")
        d = self.d
        sl = self.prog.psd_slice(self.match_blocks[(stream, 0)])
        M = smat(x[sl])
        return M[1 : 1 + d * d, 1 : 1 + d * d]

    def extract_cluster(self, x: Array) -> Array:
        """Full clustering moment matrix [[1, y^T], [y, L]]."""
        if self.cluster_block is None:
            raise ValueError("model has no clustering part")
        return smat(x[self.prog.psd_slice(self.cluster_block)])

    def cluster_sizes(self) -> tuple[int, int]:
        n1 = 0 if self.W1 is None else self.W1.shape[0]
        n2 = 0 if self.W2 is None else self.W2.shape[0]
        return n1, n2

    # -- values of discrete points (min form, matching the objective) --

    def matching_value(self, X: Array) -> float:
        """Registration objective at an integral X with rotations
        eliminated in closed form (orthogonal Procrustes)."""
        total = 0.0
        for strm in self.streams:
            QX = strm.Q @ X
            cross = QX @ strm.P.T
            nuc = float(np.linalg.svd(cross, compute_uv=False).sum())
            total += strm.weight * (
                float(np.sum(strm.P**2)) + float(np.sum(QX**2)) - 2.0 * nuc
            )
        return self.lam_m * total

    def cluster_value(self, y1: Array | None, y2: Array | None) -> float:
        total = 0.0
        if self.W1 is not None and y1 is not None:
            total += float(y1 @ self.W1 @ y1)
        if self.W2 is not None and y2 is not None:
            total += float(y2 @ self.W2 @ y2)
        return self.lam_c * total

    def joint_value(self, X: Array | None, y1: Array | None, y2: Array | None) -> float:
        v = 0.0
        if X is not None and self.streams:
            v += self.matching_value(X)
        v += self.cluster_value(y1, y2)
        return v

    def cut_values(self, y1: Array | None, y2: Array | None) -> tuple[float, float]:
        """Unweighted max-cut values sum(W) - y'Wy per graph."""
        c1 = c2 = 0.0
        if self.W1 is not None and y1 is not None:
            c1 = float(np.sum(self.W1) - y1 @ self.W1 @ y1)
        if self.W2 is not None and y2 is not None:
            c2 = float(np.sum(self.W2) - y2 @ self.W2 @ y2)
        return c1, c2


def _add_matching(b: ProgramBuilder, streams, n: int, d: int, lam_m: float):
    m = 1 + d * d + n
    dd = d * d
    match_blocks: dict = {}
    for s, strm in enumerate(streams):
        for j in range(n):
            match_blocks[(s, j)] = b.add_psd_block(m)
    master = [match_blocks[(0, j)] for j in range(n)]

    xi_idx = 1 + dd + np.arange(n)
    locs_R = np.concatenate([_col_locs(m, 1 + np.arange(dd)), _region_locs(m, 1 + np.arange(dd))])
    locs_X = np.concatenate([_col_locs(m, xi_idx), _region_locs(m, xi_idx)])
    loc_x0 = _col_locs(m, xi_idx)

    for s, strm in enumerate(streams):
        blocks = [match_blocks[(s, j)] for j in range(n)]
        # unit top-left entry of every block
        rows = b.new_rows(np.ones(n))
        b.put(rows + np.arange(n), SEG_PSD0 + np.array(blocks), 0, 1.0)
        # orthogonality moments, both RR^T and R^T R, on the j=0 block
        b0 = blocks[0]
        for a in range(d):
            for bb in range(a, d):
                b.add_row(
                    [("psd", b0, 1 + c * d + a, 1 + c * d + bb, 1.0) for c in range(d)],
                    1.0 if a == bb else 0.0,
                )
                b.add_row(
                    [("psd", b0, 1 + a * d + c, 1 + bb * d + c, 1.0) for c in range(d)],
                    1.0 if a == bb else 0.0,
                )
        # rotation moments shared across j
        for j in range(1, n):
            rows = b.new_rows(np.zeros(len(locs_R)))
            rr = rows + np.arange(len(locs_R))
            b.put(rr, SEG_PSD0 + blocks[j], locs_R, 1.0)
            b.put(rr, SEG_PSD0 + b0, locs_R, -1.0)
        if s == 0:
            for j in range(n):
                blk = blocks[j]
                # diag(Xi_j) = x_j
                rows = b.new_rows(np.zeros(n))
                b.put_psd_entries(rows + np.arange(n), blk, xi_idx, xi_idx, 1.0)
                b.put_psd_entries(rows + np.arange(n), blk, xi_idx, 0, -1.0)
                # Xi_j 1 = x_j
                rows = b.new_rows(np.zeros(n))
                rr = np.repeat(rows + np.arange(n), n)
                b.put_psd_entries(rr, blk, np.repeat(xi_idx, n), np.tile(xi_idx, n), 1.0)
                b.put_psd_entries(rows + np.arange(n), blk, xi_idx, 0, -1.0)
                # column sum of X
                row = b.new_rows([1.0])
                b.put_psd_entries(row, blk, xi_idx, 0, 1.0)
            # row sums of X across the j blocks
            rows = b.new_rows(np.ones(n))
            for j in range(n):
                b.put_psd_entries(rows + np.arange(n), master[j], xi_idx, 0, 1.0)
        else:
            # assignment moments shared with stream 0
            for j in range(n):
                rows = b.new_rows(np.zeros(len(locs_X)))
                rr = rows + np.arange(len(locs_X))
                b.put(rr, SEG_PSD0 + blocks[j], locs_X, 1.0)
                b.put(rr, SEG_PSD0 + master[j], locs_X, -1.0)
        # objective: ||R P - Q X||^2 summed over j, constants in offset
        w = lam_m * strm.weight
        QtQ = strm.Q.T @ strm.Q
        for j in range(n):
            Theta = np.zeros((m, m))
            Theta[1 + dd :, 1 + dd :] = QtQ
            G = -np.kron(strm.P[:, j : j + 1], strm.Q)  # d^2 x n
            Theta[1 : 1 + dd, 1 + dd :] = G
            Theta[1 + dd :, 1 : 1 + dd] = G.T
            b.add_psd_objective(blocks[j], w * Theta)
        b.offset += w * float(np.sum(strm.P**2))
        b.ledger[f"var/R[{strm.label}]"] = {"block": b0, "rows": [1, 1 + dd], "col": 0}
        b.ledger[f"var/Rmom[{strm.label}]"] = {"block": b0, "range": [1, 1 + dd]}
        b.ledger[f"var/C[{strm.label}]"] = {"blocks": blocks, "rows": [1, 1 + dd], "cols": [1 + dd, m]}
        b.ledger[f"data/P[{strm.label}]"] = {"shape": list(strm.P.shape), "weight": strm.weight}
        b.ledger[f"data/Q[{strm.label}]"] = {"shape": list(strm.Q.shape), "weight": strm.weight}
    b.ledger["var/X"] = {"blocks": master, "rows": [1 + dd, m], "col": 0}
    b.ledger["var/Xi"] = {"blocks": master, "range": [1 + dd, m]}
    return match_blocks, master, loc_x0


def _add_clustering(b: ProgramBuilder, W1, W2, lam_c: float) -> int:
    n1 = 0 if W1 is None else W1.shape[0]
    n2 = 0 if W2 is None else W2.shape[0]
    nn = n1 + n2
    if nn == 0:
        raise ValueError("clustering part needs at least one weight matrix")
    cb = b.add_psd_block(1 + nn)
    b.add_row([("psd", cb, 0, 0, 1.0)], 1.0)
    idx = 1 + np.arange(nn)
    rows = b.new_rows(np.ones(nn))
    b.put_psd_entries(rows + np.arange(nn), cb, idx, idx, 1.0)
    # |y_t| <= 1 via slacks (also implied by the unit diagonal, kept explicit)
    for sign in (1.0, -1.0):
        sl = b.add_nonneg(nn)
        rows = b.new_rows(np.ones(nn))
        b.put_psd_entries(rows + np.arange(nn), cb, idx, 0, sign)
        b.put(rows + np.arange(nn), SEG_NONNEG, sl + np.arange(nn), 1.0)
    Theta = np.zeros((1 + nn, 1 + nn))
    if W1 is not None:
        Theta[1 : 1 + n1, 1 : 1 + n1] = 0.5 * (W1 + W1.T)
    if W2 is not None:
        Theta[1 + n1 :, 1 + n1 :] = 0.5 * (W2 + W2.T)
    b.add_psd_objective(cb, lam_c * Theta)
    b.ledger["var/y"] = {"block": cb, "rows": [1, 1 + nn], "col": 0}
    b.ledger["var/L"] = {"block": cb, "range": [1, 1 + nn]}
    b.ledger["data/W1"] = {"shape": [n1, n1]}
    b.ledger["data/W2"] = {"shape": [n2, n2]}
    return cb


def _add_coupling(b: ProgramBuilder, master, loc_x0, n: int, cb: int, form: str):
    nn = 2 * n
    lbar = None
    if form == "lbar":
        lbar = b.add_psd_block(1 + nn)
        b.add_row([("psd", lbar, 0, 0, 1.0)], 1.0)
        idx = 1 + np.arange(nn)
        # diag(Lbar) = z
        rows = b.new_rows(np.zeros(nn))
        b.put_psd_entries(rows + np.arange(nn), lbar, idx, idx, 1.0)
        b.put_psd_entries(rows + np.arange(nn), lbar, idx, 0, -1.0)
        # z = (1 + y) / 2
        rows = b.new_rows(np.full(nn, 0.5))
        b.put_psd_entries(rows + np.arange(nn), lbar, idx, 0, 1.0)
        b.put_psd_entries(rows + np.arange(nn), cb, idx, 0, -0.5)
        b.ledger["var/z"] = {"block": lbar, "rows": [1, 1 + nn], "col": 0}
        b.ledger["var/Lbar"] = {"block": lbar, "range": [1, 1 + nn]}
    slack0 = None
    for j in range(n):
        sl = b.add_nonneg(n)
        if slack0 is None:
            slack0 = sl
        if form == "moment":
            rows = b.new_rows(np.full(n, 0.5))
        elif form == "zform":
            rows = b.new_rows(np.full(n, 0.25))
        else:
            rows = b.new_rows(np.zeros(n))
        rr = rows + np.arange(n)
        # X[l, j] read off the master matching blocks
        b.put(rr, SEG_PSD0 + master[j], loc_x0, 1.0 / _SQRT2)
        b.put(rr, SEG_NONNEG, sl + np.arange(n), 1.0)
        cross_r = np.full(n, 1 + j)
        cross_c = 1 + n + np.arange(n)
        if form == "moment":
            b.put_psd_entries(rr, cb, cross_r, cross_c, -0.5)
        elif form == "zform":
            b.put_psd_entries(rr, cb, cross_r, cross_c, -0.25)
            b.put_psd_entries(rr, cb, cross_r, 0, -0.25)
            b.put_psd_entries(rr, cb, cross_c, 0, -0.25)
        else:
            b.put_psd_entries(rr, lbar, cross_r, cross_c, -1.0)
    b.ledger["coupling/form"] = form
    b.ledger["coupling/slacks"] = {"nonneg_offset": slack0, "count": n * n}
    return lbar


def _auto_lambdas(streams, W1, W2, lam_m, lam_c):
    if lam_m == "auto":
        den = sum(s.weight * (np.sum(s.P**2) + np.sum(s.Q**2)) for s in streams)
        lam_m = 1.0 / den if den > 1e-12 else 1.0
    if lam_c == "auto":
        den = 0.0
        if W1 is not None:
            den += float(np.abs(W1).sum())
        if W2 is not None:
            den += float(np.abs(W2).sum())
        lam_c = 1.0 / den if den > 1e-12 else 1.0
    return float(lam_m), float(lam_c)


def assemble_joint(
    streams,
    W1: Array | None,
    W2: Array | None,
    lam_m="auto",
    lam_c="auto",
    coupling: str | None = "moment",
) -> JointModel:
    """Build the full joint relaxation.

    streams: MatchingStream sequence (empty for clustering-only).
    W1, W2: per-graph clustering weights (None, None for matching-only).
    coupling: "moment" (default), "zform", "lbar", or None.
    """
    streams = tuple(streams)
    has_match = len(streams) > 0
    has_cluster = W1 is not None or W2 is not None
    if coupling is not None and not (has_match and has_cluster):
        raise ValueError("coupling requires both matching and clustering parts")
    if coupling is not None and coupling not in COUPLING_FORMS:
        raise ValueError(f"unknown coupling form {coupling!r}")
    if not has_match and not has_cluster:
        raise ValueError("empty model")
    n = d = None
    if has_match:
        d, n = streams[0].P.shape
        for s in streams:
            if s.P.shape != (d, n) or s.Q.shape != (d, n):
                raise ValueError("all streams must share (d, n)")
    if coupling is not None:
        if W1 is None or W2 is None or W1.shape != (n, n) or W2.shape != (n, n):
            raise ValueError("coupling needs both W matrices of order n")
    lam_m, lam_c = _auto_lambdas(streams, W1, W2, lam_m, lam_c)

    b = ProgramBuilder()
    b.ledger["lambda/matching"] = lam_m
    b.ledger["lambda/clustering"] = lam_c
    match_blocks: dict = {}
    master: list = []
    loc_x0 = None
    cb = lbar = None
    if has_match:
        match_blocks, master, loc_x0 = _add_matching(b, streams, n, d, lam_m)
    if has_cluster:
        cb = _add_clustering(b, W1, W2, lam_c)
    if coupling is not None:
        lbar = _add_coupling(b, master, loc_x0, n, cb, coupling)
    prog = b.finalize()
    return JointModel(
        prog=prog,
        streams=streams,
        n=n,
        d=d,
        lam_m=lam_m,
        lam_c=lam_c,
        coupling=coupling,
        W1=None if W1 is None else np.asarray(W1, dtype=float),
        W2=None if W2 is None else np.asarray(W2, dtype=float),
        match_blocks=match_blocks,
        master_blocks=master,
        cluster_block=cb,
        lbar_block=lbar,
    )


def assemble_matching(streams, lam_m=1.0) -> JointModel:
    """Registration-only relaxation (no clustering block, no coupling)."""
    return assemble_joint(streams, None, None, lam_m=lam_m, lam_c=0.0, coupling=None)


def assemble_clustering(W1: Array | None, W2: Array | None = None, lam_c=1.0) -> JointModel:
    """Max-cut style clustering-only relaxation (one or two graphs)."""
    return assemble_joint((), W1, W2, lam_m=0.0, lam_c=lam_c, coupling=None)
