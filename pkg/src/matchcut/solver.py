"""First-order operator-splitting solver for the standard conic form.

Alternates a projection onto the affine set {Ax = b} (through one cached
factorization of the regularized KKT system) with a projection onto the
cone product, Douglas-Rachford/ADMM style with over-relaxation.  Scaling
uses Ruiz equilibration with one scalar per PSD block so cone membership
is preserved.  Residuals reported to the caller are always recomputed on
the unscaled problem.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .conic import ConicProgram
from .sym import smat, svec, project_psd, psd_dist, svec_len  # noqa: F401  (re-exported)

Array = np.ndarray


@dataclass
class SolverSettings:
    rho: float = 1.0
    alpha: float = 1.5  # over-relaxation
    max_iters: int = 20000
    tol: float = 1e-6
    check_every: int = 25
    refine_steps: int = 1
    reg: float = 1e-7  # static KKT regularization
    ruiz_iters: int = 10
    adapt_rho: bool = True
    rho_min: float = 1e-3
    rho_max: float = 1e3
    max_rho_updates: int = 20
    time_limit: float | None = None
    eps_infeas: float = 1e-9
    dense_cutoff: int = 1200
    log_csv: str | None = None


@dataclass
class KKTResiduals:
    primal: float
    dual: float
    gap: float
    eq_res: float
    x_cone_dist: float
    stat_res: float
    s_cone_dist: float
    obj_primal: float
    obj_dual: float

    @property
    def max_residual(self) -> float:
        return max(self.primal, self.dual, self.gap)


@dataclass
class SolveReport:
    status: str
    iterations: int
    primal_res: float
    dual_res: float
    gap: float
    obj: float
    obj_dual: float
    setup_time: float
    solve_time: float
    rho: float
    x: Array
    nu: Array
    s: Array
    log: list = field(default_factory=list)

    def stats_dict(self) -> dict:
        return {
            "status": self.status,
            "iterations": self.iterations,
            "primal_res": self.primal_res,
            "dual_res": self.dual_res,
            "gap": self.gap,
            "obj": self.obj,
            "obj_dual": self.obj_dual,
            "setup_time": self.setup_time,
            "solve_time": self.solve_time,
            "rho": self.rho,
        }


def _cone_dist(prog: ConicProgram, v: Array, dual: bool) -> float:
    total = 0.0
    for kind, sl, order in prog.cones():
        seg = v[sl]
        if kind == "free":
            d = float(np.linalg.norm(seg)) if dual else 0.0
        elif kind == "nonneg":
            d = float(np.linalg.norm(np.minimum(seg, 0.0)))
        else:
            d = psd_dist(smat(seg))
        total += d * d
    return float(np.sqrt(total))


def verify_kkt(prog: ConicProgram, x: Array, nu: Array, s: Array) -> KKTResiduals:
    """Recompute KKT residuals of a candidate primal/dual triple from the
    raw program data (no solver state involved).

    All residuals are relative: equality and statonarity use
    ||.||/(1+||b||), ||.||/(1+||c||); cone distances are relative to the
    candidate's own norm; the gap is |c'x - b'nu| / (1 + |c'x| + |b'nu|).
    """
    eq = float(np.linalg.norm(prog.A @ x - prog.b)) / (1.0 + float(np.linalg.norm(prog.b)))
    stat_vec = prog.c - prog.A.T @ nu - s
    stat = float(np.linalg.norm(stat_vec)) / (1.0 + float(np.linalg.norm(prog.c)))
    dx = _cone_dist(prog, x, dual=False) / (1.0 + float(np.linalg.norm(x)))
    ds = _cone_dist(prog, s, dual=True) / (1.0 + float(np.linalg.norm(s)))
    pobj = float(prog.c @ x)
    dobj = float(prog.b @ nu)
    gap = abs(pobj - dobj) / (1.0 + abs(pobj) + abs(dobj))
    return KKTResiduals(
        primal=max(eq, dx),
        dual=max(stat, ds),
        gap=gap,
        eq_res=eq,
        x_cone_dist=dx,
        stat_res=stat,
        s_cone_dist=ds,
        obj_primal=pobj + prog.offset,
        obj_dual=dobj + prog.offset,
    )


class _Projector:
    """Cached cone projection; PSD blocks batched by order."""

    def __init__(self, prog: ConicProgram):
        self.free_end = prog.n_free
        self.nonneg_end = prog.n_free + prog.n_nonneg
        groups: dict[int, list[int]] = {}
        for bidx, m in enumerate(prog.psd_dims):
            groups.setdefault(m, []).append(bidx)
        self.groups = []
        for m, idxs in sorted(groups.items()):
            L = svec_len(m)
            gix = np.empty((len(idxs), L), dtype=np.int64)
            for r, bidx in enumerate(idxs):
                sl = prog.psd_slice(bidx)
                gix[r] = np.arange(sl.start, sl.stop)
            self.groups.append((m, gix))

    def __call__(self, v: Array) -> Array:
        out = v.copy()
        if self.nonneg_end > self.free_end:
            seg = out[self.free_end : self.nonneg_end]
            np.maximum(seg, 0.0, out=seg)
        for m, gix in self.groups:
            V = smat(v[gix])
            w, Vec = np.linalg.eigh(V)
            np.maximum(w, 0.0, out=w)
            out[gix] = svec((Vec * w[:, None, :]) @ np.swapaxes(Vec, 1, 2))
        return out


def _equilibrate(prog: ConicProgram, iters: int):
    """Ruiz equilibration of A; returns (A_scaled csr, D, E) with E equal
    within each PSD block."""
    A = prog.A.tocoo()
    M, N = A.shape
    D = np.ones(M)
    E = np.ones(N)
    if A.nnz == 0 or iters == 0:
        return prog.A.tocsr(), D, E
    row, col, dat0 = A.row, A.col, A.data
    psd_slices = [sl for kind, sl, _ in prog.cones() if kind == "psd"]
    for _ in range(iters):
        dat = np.abs(dat0 * D[row] * E[col])
        rmax = np.zeros(M)
        np.maximum.at(rmax, row, dat)
        cmax = np.zeros(N)
        np.maximum.at(cmax, col, dat)
        rs = 1.0 / np.sqrt(np.clip(rmax, 1e-12, 1e12))
        cs = 1.0 / np.sqrt(np.clip(cmax, 1e-12, 1e12))
        rs[rmax == 0] = 1.0
        cs[cmax == 0] = 1.0
        # one scalar per PSD block (geometric mean) keeps the cone invariant
        for sl in psd_slices:
            seg = cs[sl]
            cs[sl] = np.exp(np.mean(np.log(seg)))
        D *= rs
        E *= cs
    As = sp.coo_matrix((dat0 * D[row] * E[col], (row, col)), shape=(M, N)).tocsr()
    return As, D, E


class _KKT:
    """Factorization of the regularized KKT [[rho I, A^T], [A, -reg I]].

    Refinement steps use the exact (unregularized) KKT residual with the
    regularized factors as preconditioner, so the solved system is the
    true one and the static regularization introduces no bias.
    """

    def __init__(self, A: sp.csr_matrix, rho: float, reg: float, dense_cutoff: int):
        M, N = A.shape
        self.N, self.M = N, M
        K0 = sp.bmat(
            [[rho * sp.eye(N, format="csc"), A.T], [A, None]], format="csc"
        )
        Kreg = (K0 + sp.diags(np.concatenate([np.zeros(N), -reg * np.ones(M)]))).tocsc()
        self.dense = (N + M) <= dense_cutoff
        if self.dense:
            self.K0 = K0.toarray()
            self.lu = scipy.linalg.lu_factor(Kreg.toarray())
        else:
            self.K0 = K0
            self.lu = spla.splu(Kreg)

    def _presolve(self, r: Array) -> Array:
        if self.dense:
            return scipy.linalg.lu_solve(self.lu, r)
        return self.lu.solve(r)

    def solve(self, rhs: Array, refine_steps: int) -> Array:
        sol = self._presolve(rhs)
        for _ in range(refine_steps):
            sol += self._presolve(rhs - self.K0 @ sol)
        return sol


def _certificates(prog, x, nu, eps) -> str | None:
    # Farkas-style checks; a certificate is only reported once it passes
    # a strict validation, so feasible problems cannot be misflagged.
    # Callers pass both raw iterates and iterate differences: a diverging
    # run walks along its recession ray, so the difference reveals the
    # certificate long before the iterate itself is large enough.
    bnu = float(prog.b @ nu)
    if bnu > eps:
        q = -(prog.A.T @ (nu / bnu))
        if _cone_dist(prog, q, dual=True) <= eps * (1.0 + float(np.linalg.norm(q))):
            return "primal_infeasible"
    cx = float(prog.c @ x)
    if cx < -eps:
        xc = x / (-cx)
        ax = float(np.linalg.norm(prog.A @ xc))
        if ax <= eps * (1.0 + float(np.linalg.norm(xc))) and _cone_dist(
            prog, xc, dual=False
        ) <= eps * (1.0 + float(np.linalg.norm(xc))):
            return "dual_infeasible"
    return None


def solve(prog: ConicProgram, settings: SolverSettings | None = None) -> SolveReport:
    """Solve the conic program; deterministic for fixed inputs/settings."""
    st = settings or SolverSettings()
    if st.max_iters < 1 or st.check_every < 1:
        raise ValueError("max_iters and check_every must be >= 1")
    t0 = time.perf_counter()
    prog.validate()
    As, D, E = _equilibrate(prog, st.ruiz_iters)
    bbar = D * prog.b
    cbar = E * prog.c
    # normalize the scaled cost and rhs so neither side dwarfs rho;
    # undone below when iterates are mapped back
    c_scale = max(1.0, float(np.linalg.norm(cbar)))
    b_scale = max(1.0, float(np.linalg.norm(bbar)))
    cbar = cbar / c_scale
    bbar = bbar / b_scale
    N, M = prog.n_vars, prog.n_rows
    rho = st.rho
    kkt = _KKT(As, rho, st.reg, st.dense_cutoff)
    proj = _Projector(prog)
    z = np.zeros(N)
    u = np.zeros(N)
    rhs = np.empty(N + M)
    rhs[N:] = bbar
    setup_time = time.perf_counter() - t0

    status = "max_iters"
    res = None
    log: list[tuple] = []
    rho_updates = 0
    x_prev = nu_prev = None
    diff_cert_pending = None
    t1 = time.perf_counter()
    it = 0
    for it in range(1, st.max_iters + 1):
        rhs[:N] = rho * (z - u) - cbar
        sol = kkt.solve(rhs, st.refine_steps)
        xt = sol[:N]
        lam = sol[N:]
        xh = st.alpha * xt + (1.0 - st.alpha) * z
        z = proj(xh + u)
        u = u + xh - z
        if it % st.check_every == 0 or it == st.max_iters:
            x_un = b_scale * (E * z)
            nu_un = -c_scale * (D * lam)
            s_un = c_scale * ((-rho * u) / E)
            res = verify_kkt(prog, x_un, nu_un, s_un)
            elapsed = time.perf_counter() - t1
            log.append((it, res.primal, res.dual, res.gap, res.obj_primal, elapsed))
            if res.max_residual <= st.tol:
                status = "optimal"
                break
            cert = _certificates(prog, x_un, nu_un, st.eps_infeas)
            if cert is not None:
                status = cert
                break
            if x_prev is not None:
                cert = _certificates(prog, x_un - x_prev, nu_un - nu_prev, st.eps_infeas)
                # difference-based detection must confirm on two
                # consecutive checks before it is trusted
                if cert is not None and cert == diff_cert_pending:
                    status = cert
                    break
                diff_cert_pending = cert
            x_prev, nu_prev = x_un, nu_un
            if st.time_limit is not None and elapsed > st.time_limit:
                status = "time_limit"
                break
            if (
                st.adapt_rho
                and rho_updates < st.max_rho_updates
                and it % (st.check_every * 4) == 0
            ):
                rp, rd = max(res.primal, 1e-16), max(res.dual, 1e-16)
                if rp > 10.0 * rd or rd > 10.0 * rp:
                    fac = float(np.clip(np.sqrt(rp / rd), 0.5, 2.0))
                    new_rho = float(np.clip(rho * fac, st.rho_min, st.rho_max))
                    if new_rho != rho:
                        u *= rho / new_rho
                        rho = new_rho
                        kkt = _KKT(As, rho, st.reg, st.dense_cutoff)
                        rho_updates += 1

    x_un = b_scale * (E * z)
    nu_un = -c_scale * (D * lam)
    s_un = c_scale * ((-rho * u) / E)
    if res is None:
        res = verify_kkt(prog, x_un, nu_un, s_un)
    solve_time = time.perf_counter() - t1
    report = SolveReport(
        status=status,
        iterations=it,
        primal_res=res.primal,
        dual_res=res.dual,
        gap=res.gap,
        obj=res.obj_primal,
        obj_dual=res.obj_dual,
        setup_time=setup_time,
        solve_time=solve_time,
        rho=rho,
        x=x_un,
        nu=nu_un,
        s=s_un,
        log=log,
    )
    if st.log_csv:
        with open(st.log_csv, "w") as fh:
            fh.write("iter,primal_res,dual_res,gap,obj,secs\n")
            for row in log:
                fh.write(",".join(f"{v:.9g}" for v in row) + "\n")
    return report
