"""End-to-end joint matching + clustering driver.

One call takes a graph pair from affinity matrix to rounded permutation
and cluster labels, timing each stage.  Coupled / uncoupled / matching-
or clustering-only variants are all reached through PipelineConfig.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field, asdict

import numpy as np

from .graphs import Graph, build_affinity_K, intra_affinity, pad_graphs
from .kpsvd import kpsvd
from .embedding import embed_terms
from .metrics import lawler_objective, maxcut_objective
from .model import JointModel, assemble_joint, build_streams
from .rounding import (
    align_cluster_signs,
    consistency_report,
    extract_cluster_labels,
    icp_polish,
    project_permutation,
    repair_matching,
    threshold_clusters,
)
from .solver import SolverSettings, solve

Array = np.ndarray

COUPLINGS = ("moment", "zform", "lbar", "none")


@dataclass
class PipelineConfig:
    k: int = 6                       # KPSVD terms
    dim: int | None = None           # embedding dim, None = energy rule
    energy: float = 0.9
    d_min: int = 1
    d_max: int | None = None
    lambda_m: float | str = "auto"
    lambda_c: float | str = "auto"
    coupling: str = "moment"         # one of COUPLINGS
    pad: bool = False                # pad unequal pairs with zero-affinity dummies
    repair: bool = False             # post-hoc cluster-restricted re-assignment
    tol: float = 1e-5
    max_iters: int = 50000
    time_limit: float | None = None
    seed: int = 0                    # recorded only; the pipeline is deterministic

    def validate(self) -> None:
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if self.coupling not in COUPLINGS:
            raise ValueError(f"coupling must be one of {COUPLINGS}")
        if self.dim is not None and self.dim < 1:
            raise ValueError("dim must be >= 1 or None")
        for name in ("lambda_m", "lambda_c"):
            v = getattr(self, name)
            if isinstance(v, str) and v != "auto":
                raise ValueError(f"{name} must be a number or 'auto'")
        for name in ("pad", "repair"):
            if not isinstance(getattr(self, name), bool):
                raise ValueError(f"{name} must be a boolean")

    def to_json_dict(self) -> dict:
        return asdict(self)


@dataclass
class JointResult:
    perm: Array                      # perm[j] = graph-2 node for graph-1 node j, -1 = unmatched
    X: Array                         # binary assignment (keeps the padded shape under pad)
    y1: Array | None
    y2: Array | None
    relaxed_obj: float
    rounded_obj: float
    solver_status: str
    solver_stats: dict
    timings: dict
    dim: int
    k_used: int
    n: int
    config: PipelineConfig
    consistency: dict | None = None
    X_relaxed: Array | None = None

    @property
    def converged(self) -> bool:
        return self.solver_status == "optimal"

    def to_json_dict(self) -> dict:
        return {
            "n": self.n,
            "perm": [int(v) for v in self.perm],
            "y1": None if self.y1 is None else [int(v) for v in self.y1],
            "y2": None if self.y2 is None else [int(v) for v in self.y2],
            "relaxed_obj": float(self.relaxed_obj),
            "rounded_obj": float(self.rounded_obj),
            "solver": self.solver_stats,
            "status": self.solver_status,
            "timings": self.timings,
            "dim": self.dim,
            "k_used": self.k_used,
            "consistency": self.consistency,
            "config": self.config.to_json_dict(),
        }


def _resolve_modes(cfg: PipelineConfig) -> tuple[bool, bool]:
    """(matching on, clustering on) from explicit zero lambdas."""
    match_on = cfg.lambda_m != 0
    cluster_on = cfg.lambda_c != 0
    if not match_on and not cluster_on:
        raise ValueError("lambda_m and lambda_c cannot both be zero")
    return match_on, cluster_on


def build_model(g1: Graph, g2: Graph, cfg: PipelineConfig) -> tuple[JointModel, dict]:
    """Assemble the conic program for a pair; returns (model, timings)."""
    cfg.validate()
    n1_real, n2_real = g1.n, g2.n
    if cfg.pad and g1.n != g2.n:
        g1, g2 = pad_graphs(g1, g2)
    if g1.n != g2.n:
        raise ValueError("graphs must have equal node counts (set pad=True to add dummies)")
    match_on, cluster_on = _resolve_modes(cfg)
    timings: dict[str, float] = {}

    streams = ()
    dim = 0
    if match_on:
        t0 = time.perf_counter()
        K = build_affinity_K(g1, g2)
        timings["affinity"] = time.perf_counter() - t0

        t0 = time.perf_counter()
        fact = kpsvd(K, cfg.k)
        timings["kpsvd"] = time.perf_counter() - t0

        t0 = time.perf_counter()
        pairs, dim = embed_terms(
            fact, dim=cfg.dim, energy=cfg.energy, d_min=cfg.d_min, d_max=cfg.d_max
        )
        streams = build_streams(pairs)
        timings["embed"] = time.perf_counter() - t0

    W1 = W2 = None
    if cluster_on:
        W1 = intra_affinity(g1)
        W2 = intra_affinity(g2)
        # dummy rows carry no cut weight, keeping padded nodes neutral
        if g1.n > n1_real:
            W1[n1_real:, :] = 0.0
            W1[:, n1_real:] = 0.0
        if g2.n > n2_real:
            W2[n2_real:, :] = 0.0
            W2[:, n2_real:] = 0.0

    t0 = time.perf_counter()
    coupling = cfg.coupling if (match_on and cluster_on) else "none"
    model = assemble_joint(
        streams,
        W1,
        W2,
        lam_m=cfg.lambda_m if match_on else 0.0,
        lam_c=cfg.lambda_c if cluster_on else 0.0,
        coupling=None if coupling == "none" else coupling,
    )
    timings["assemble"] = time.perf_counter() - t0
    return model, timings


def solve_joint(
    g1: Graph,
    g2: Graph,
    cfg: PipelineConfig | None = None,
    settings: SolverSettings | None = None,
) -> JointResult:
    """Full pipeline: affinity -> KPSVD -> embeddings -> SDP -> rounding."""
    cfg = cfg or PipelineConfig()
    n1_real, n2_real = g1.n, g2.n
    model, timings = build_model(g1, g2, cfg)
    match_on, cluster_on = _resolve_modes(cfg)
    if cfg.repair and not (match_on and cluster_on):
        raise ValueError("repair needs both matching and clustering terms active")
    if cfg.pad and g1.n != g2.n:
        g1, g2 = pad_graphs(g1, g2)
    n = g1.n

    if settings is None:
        settings = SolverSettings(
            tol=cfg.tol, max_iters=cfg.max_iters, time_limit=cfg.time_limit
        )
    t0 = time.perf_counter()
    rep = solve(model.prog, settings)
    timings["solve"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    Xm = None
    y1 = y2 = None
    coupled = match_on and cluster_on and cfg.coupling != "none"

    if cluster_on:
        Mc = model.extract_cluster(rep.x)
        yc = extract_cluster_labels(Mc, model.W1, model.W2)
        y1 = threshold_clusters(yc[:n])
        y2 = threshold_clusters(yc[n:])

    if match_on:
        Xm = model.extract_matching(rep.x)
        lap = project_permutation(Xm)
        # candidate matchings are scored under the untruncated affinity:
        # the truncated streams steer the relaxation (and the ICP basin),
        # but near-ties they cannot resolve are broken by the original
        # objective
        K = build_affinity_K(g1, g2)
        cands = [lap, icp_polish(model.streams, lap)]
        if coupled:
            # Near-congruent clusters leave two polish basins: matchings
            # that keep the extracted cluster orientation and matchings
            # that swap the clusters wholesale.  Polish both orientations
            # and let the joint objective choose.  A bijective matching
            # under the coupling then forces the graph-2 labels to
            # follow the matched graph-1 labels.
            y1, y2 = align_cluster_signs(y1, y2, lap)
            for y2o in (y2, -y2):
                X0 = repair_matching(Xm, y1, y2o)
                cands.append(icp_polish(model.streams, X0, y1, y2o))

            def score(Xc: Array) -> float:
                yc = (Xc @ y1).astype(float)
                return model.lam_m * lawler_objective(K, Xc) + model.lam_c * maxcut_objective(model.W2, yc)

            X = max(cands, key=score)
            y2 = (X @ y1).astype(int)
        else:
            # without a coupling the cluster labels never influence the
            # matching: candidates stay cluster-blind and the labels only
            # get their reporting gauge aligned afterwards
            X = max(cands, key=lambda Xc: lawler_objective(K, Xc))
            if cluster_on:
                y1, y2 = align_cluster_signs(y1, y2, X)
        if cfg.repair:
            # ablation switch: keep the rounded labels fixed and redo the
            # assignment with cross-cluster matches penalized
            X = repair_matching(Xm, y1, y2)
        perm = np.argmax(X, axis=0)
    else:
        X = np.zeros((n, n))
        perm = np.full(n, -1, dtype=int)
    timings["round"] = time.perf_counter() - t0

    rounded = model.joint_value(
        X if match_on else None,
        None if y1 is None else y1.astype(float),
        None if y2 is None else y2.astype(float),
    )
    cons = None
    if match_on and cluster_on:
        cons = consistency_report(X[:n2_real, :n1_real], y1[:n1_real], y2[:n2_real])
    if n1_real < n or n2_real < n:
        # drop dummy nodes from the reported outputs; a real node assigned
        # to a dummy partner is unmatched (-1)
        perm = perm[:n1_real].copy()
        perm[perm >= n2_real] = -1
        if y1 is not None:
            y1 = y1[:n1_real]
        if y2 is not None:
            y2 = y2[:n2_real]

    return JointResult(
        perm=perm,
        X=X,
        y1=y1,
        y2=y2,
        relaxed_obj=float(rep.obj),
        rounded_obj=float(rounded),
        solver_status=rep.status,
        solver_stats=rep.stats_dict(),
        timings={k: round(v, 6) for k, v in timings.items()},
        dim=model.d if match_on else 0,
        k_used=len(model.streams),
        n=n,
        config=cfg,
        consistency=cons,
        X_relaxed=Xm,
    )
