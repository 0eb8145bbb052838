"""Standard-form conic program container and an incremental builder.

The canonical problem is

    minimize    c^T x + offset
    subject to  A x = b,   x in K = R^f x R^p_+ x S^{m_1}_+ x ... x S^{m_B}_+

with PSD blocks stored in svec coordinates.  The builder hands out
segment-relative variable handles, so constraints can be added in any
order before the global column layout is fixed by ``finalize``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
import scipy.sparse as sp

from .sym import svec, svec_index, svec_len

Array = np.ndarray

SEG_FREE = 0
SEG_NONNEG = 1
SEG_PSD0 = 2  # PSD block b lives in segment SEG_PSD0 + b

_SQRT2 = np.sqrt(2.0)


@dataclass(frozen=True)
class ConicProgram:
    c: Array
    A: sp.csr_matrix
    b: Array
    n_free: int
    n_nonneg: int
    psd_dims: tuple[int, ...]
    offset: float = 0.0
    ledger: dict = field(default_factory=dict)

    @property
    def n_vars(self) -> int:
        return self.n_free + self.n_nonneg + sum(svec_len(m) for m in self.psd_dims)

    @property
    def n_rows(self) -> int:
        return self.b.shape[0]

    def validate(self) -> None:
        if self.A.shape != (self.n_rows, self.n_vars):
            raise ValueError("constraint matrix shape mismatch")
        if self.c.shape != (self.n_vars,):
            raise ValueError("objective length mismatch")
        if not (np.all(np.isfinite(self.c)) and np.all(np.isfinite(self.b))):
            raise ValueError("non-finite program data")
        if not np.all(np.isfinite(self.A.data)):
            raise ValueError("non-finite constraint coefficients")

    def segment_offset(self, seg: int) -> int:
        if seg == SEG_FREE:
            return 0
        if seg == SEG_NONNEG:
            return self.n_free
        b = seg - SEG_PSD0
        if not (0 <= b < len(self.psd_dims)):
            raise ValueError(f"unknown segment {seg}")
        return self.n_free + self.n_nonneg + sum(svec_len(m) for m in self.psd_dims[:b])

    def psd_slice(self, block: int) -> slice:
        start = self.segment_offset(SEG_PSD0 + block)
        return slice(start, start + svec_len(self.psd_dims[block]))

    def cones(self):
        """Yield (kind, slice, order) over the variable segments."""
        if self.n_free:
            yield ("free", slice(0, self.n_free), self.n_free)
        if self.n_nonneg:
            yield ("nonneg", slice(self.n_free, self.n_free + self.n_nonneg), self.n_nonneg)
        for bidx, m in enumerate(self.psd_dims):
            yield ("psd", self.psd_slice(bidx), m)

    def to_json_dict(self) -> dict:
        coo = self.A.tocoo()
        return {
            "n_free": self.n_free,
            "n_nonneg": self.n_nonneg,
            "psd_dims": list(self.psd_dims),
            "offset": self.offset,
            "c": self.c.tolist(),
            "b": self.b.tolist(),
            "A_triplets": [
                [int(i), int(j), float(v)]
                for i, j, v in zip(coo.row, coo.col, coo.data)
            ],
            "ledger": {k: v for k, v in sorted(self.ledger.items())},
        }


class ProgramBuilder:
    """Accumulates variables, equality rows, and objective terms.

    Variable handles are (segment, local_offset) pairs; PSD entries are
    addressed by (block, row, col).  Coefficients passed to the entry
    APIs multiply the *matrix entry* M[r, c] (counted once per unordered
    pair); the sqrt(2) svec scaling is applied internally.
    """

    def __init__(self):
        self.n_free = 0
        self.n_nonneg = 0
        self.psd_dims: list[int] = []
        self._rows = 0
        self._b: list[Array] = []
        self._tr: list[Array] = []  # row ids
        self._ts: list[Array] = []  # segment codes
        self._tl: list[Array] = []  # local indices
        self._tv: list[Array] = []  # values
        self._or: list[Array] = []  # objective seg codes
        self._ol: list[Array] = []
        self._ov: list[Array] = []
        self.offset = 0.0
        self.ledger: dict = {}

    # -- variables ----------------------------------------------------

    def add_free(self, count: int = 1) -> int:
        off = self.n_free
        self.n_free += count
        return off

    def add_nonneg(self, count: int = 1) -> int:
        off = self.n_nonneg
        self.n_nonneg += count
        return off

    def add_psd_block(self, order: int) -> int:
        self.psd_dims.append(order)
        return len(self.psd_dims) - 1

    # -- rows ---------------------------------------------------------

    def new_rows(self, b_values) -> int:
        """Reserve rows with the given right-hand sides; returns first id."""
        b = np.atleast_1d(np.asarray(b_values, dtype=float))
        start = self._rows
        self._rows += len(b)
        self._b.append(b)
        return start

    def put(self, rows, segs, locs, vals) -> None:
        """Bulk-append coefficient triplets (arrays broadcast together)."""
        rows, segs, locs, vals = np.broadcast_arrays(
            np.asarray(rows), np.asarray(segs), np.asarray(locs), np.asarray(vals)
        )
        self._tr.append(rows.ravel().astype(np.int64))
        self._ts.append(segs.ravel().astype(np.int64))
        self._tl.append(locs.ravel().astype(np.int64))
        self._tv.append(vals.ravel().astype(float))

    def put_psd_entries(self, rows, block: int, r, c, coeffs) -> None:
        """Coefficients on PSD entries M[r, c] of one block (vectorized)."""
        m = self.psd_dims[block]
        r = np.asarray(r, dtype=np.int64)
        c = np.asarray(c, dtype=np.int64)
        hi, lo = np.maximum(r, c), np.minimum(r, c)
        loc = lo * m - lo * (lo - 1) // 2 + (hi - lo)
        scale = np.where(hi == lo, 1.0, 1.0 / _SQRT2)
        self.put(rows, SEG_PSD0 + block, loc, np.asarray(coeffs, dtype=float) * scale)

    def add_row(self, entries: Iterable[tuple], rhs: float) -> int:
        """One row from (kind, ...) entries.

        Entry forms: ("free"|"nonneg", local, coeff) or
        ("psd", block, r, c, coeff_on_matrix_entry).
        """
        row = self.new_rows([rhs])
        for e in entries:
            if e[0] == "psd":
                _, blk, r, c, v = e
                self.put_psd_entries(row, blk, r, c, v)
            else:
                seg = SEG_FREE if e[0] == "free" else SEG_NONNEG
                self.put(row, seg, e[1], e[2])
        return row

    def add_leq(self, entries: Iterable[tuple], rhs: float) -> tuple[int, int]:
        """sum(entries) <= rhs via a nonnegative slack; returns (row, slack)."""
        slack = self.add_nonneg(1)
        row = self.add_row(list(entries) + [("nonneg", slack, 1.0)], rhs)
        return row, slack

    # -- objective ----------------------------------------------------

    def add_obj(self, seg: int, locs, vals) -> None:
        locs, vals = np.broadcast_arrays(np.asarray(locs), np.asarray(vals))
        self._or.append(np.full(locs.size, seg, dtype=np.int64))
        self._ol.append(locs.ravel().astype(np.int64))
        self._ov.append(vals.ravel().astype(float))

    def add_psd_objective(self, block: int, C: Array) -> None:
        """Add <C, M_block> to the objective (C symmetric)."""
        m = self.psd_dims[block]
        C = np.asarray(C, dtype=float)
        if C.shape != (m, m):
            raise ValueError("objective matrix shape mismatch")
        if not np.allclose(C, C.T, atol=1e-12 * max(1.0, float(np.abs(C).max()))):
            raise ValueError("objective matrix must be symmetric")
        v = svec(0.5 * (C + C.T))
        self.add_obj(SEG_PSD0 + block, np.arange(len(v)), v)

    # -- assembly -----------------------------------------------------

    def _seg_offsets(self) -> Array:
        offs = np.zeros(2 + len(self.psd_dims), dtype=np.int64)
        offs[SEG_NONNEG] = self.n_free
        base = self.n_free + self.n_nonneg
        for b, m in enumerate(self.psd_dims):
            offs[SEG_PSD0 + b] = base
            base += svec_len(m)
        return offs

    @property
    def n_vars(self) -> int:
        return self.n_free + self.n_nonneg + sum(svec_len(m) for m in self.psd_dims)

    def finalize(self) -> ConicProgram:
        offs = self._seg_offsets()
        n = self.n_vars
        if self._tr:
            rows = np.concatenate(self._tr)
            cols = offs[np.concatenate(self._ts)] + np.concatenate(self._tl)
            vals = np.concatenate(self._tv)
        else:
            rows = cols = np.zeros(0, dtype=np.int64)
            vals = np.zeros(0)
        b = np.concatenate(self._b) if self._b else np.zeros(0)
        A = sp.coo_matrix((vals, (rows, cols)), shape=(self._rows, n)).tocsr()
        A.sum_duplicates()
        c = np.zeros(n)
        if self._or:
            oc = offs[np.concatenate(self._or)] + np.concatenate(self._ol)
            np.add.at(c, oc, np.concatenate(self._ov))
        prog = ConicProgram(
            c=c,
            A=A,
            b=b,
            n_free=self.n_free,
            n_nonneg=self.n_nonneg,
            psd_dims=tuple(self.psd_dims),
            offset=float(self.offset),
            ledger=dict(self.ledger),
        )
        prog.validate()
        return prog
