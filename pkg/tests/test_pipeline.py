import json

import numpy as np
import pytest

from matchcut.datasets import SyntheticScenario, gen_pair
from matchcut.graphs import Graph, delaunay_2d, pad_graphs
from matchcut.metrics import m_acc
from matchcut.oracles import brute_force_joint_model
from matchcut.pipeline import COUPLINGS, JointResult, PipelineConfig, build_model, solve_joint


def _small_pair(seed=0, noise=0.0):
    # 6 nodes, two 2D triangles of different size
    spec = SyntheticScenario(
        primitives=("triangle", "triangle"),
        scales=(1.0, 1.6),
        noise_sigma=noise,
        seed=seed,
    )
    return gen_pair(spec)


def test_relaxation_sandwiches_brute_force():
    g1, g2 = _small_pair(seed=2, noise=0.8)
    cfg = PipelineConfig(k=2, dim=2, tol=1e-5, coupling="moment")
    res = solve_joint(g1, g2, cfg)
    assert res.converged
    model, _ = build_model(g1, g2, cfg)
    _, _, brute = brute_force_joint_model(model)
    scale = max(1.0, abs(brute))
    assert res.relaxed_obj <= brute + 1e-3 * scale
    assert brute <= res.rounded_obj + 1e-9 * scale


def test_matching_only_mode():
    g1, g2 = _small_pair(seed=1)
    cfg = PipelineConfig(k=2, dim=2, tol=1e-5, lambda_c=0)
    res = solve_joint(g1, g2, cfg)
    assert res.y1 is None and res.y2 is None
    assert res.consistency is None
    assert np.array_equal(np.sort(res.perm), np.arange(6))
    assert m_acc(res.X, np.eye(6)) == pytest.approx(1.0)


def test_clustering_only_mode():
    g1, g2 = _small_pair(seed=1)
    cfg = PipelineConfig(tol=1e-5, lambda_m=0)
    res = solve_joint(g1, g2, cfg)
    assert np.all(res.perm == -1)
    assert np.all(res.X == 0)
    assert res.dim == 0 and res.k_used == 0
    assert set(np.unique(res.y1)) <= {-1, 1}
    assert set(np.unique(res.y2)) <= {-1, 1}


def test_both_lambdas_zero_rejected():
    g1, g2 = _small_pair()
    with pytest.raises(ValueError):
        solve_joint(g1, g2, PipelineConfig(lambda_m=0, lambda_c=0))


def test_coupling_variants_all_converge():
    g1, g2 = _small_pair(seed=3, noise=0.5)
    objs = {}
    for coupling in COUPLINGS:
        cfg = PipelineConfig(k=2, dim=2, tol=1e-5, coupling=coupling)
        res = solve_joint(g1, g2, cfg)
        assert res.converged, coupling
        objs[coupling] = res.relaxed_obj
        assert res.consistency is not None
        if coupling != "none":
            # coupled rounding re-derives graph-2 labels through the matching
            assert res.consistency["consistent"]
            assert np.array_equal(res.y2, (res.X @ res.y1).astype(int))
    # every coupling adds constraints on top of the uncoupled relaxation
    for coupling in ("moment", "zform", "lbar"):
        assert objs[coupling] >= objs["none"] - 1e-6


def test_noiseless_coupled_recovers_identity():
    g1, g2 = _small_pair(seed=5)
    res = solve_joint(g1, g2, PipelineConfig(k=2, dim=2, tol=1e-5))
    assert np.array_equal(res.perm, np.arange(6))
    # labels are defined up to a global flip
    gt = g1.gt_cluster
    assert np.array_equal(res.y1, gt) or np.array_equal(res.y1, -gt)


def test_pipeline_deterministic():
    g1, g2 = _small_pair(seed=4, noise=1.0)
    cfg = PipelineConfig(k=2, dim=2, tol=1e-5)
    a = solve_joint(g1, g2, cfg)
    b = solve_joint(g1, g2, cfg)
    assert np.array_equal(a.perm, b.perm)
    assert np.array_equal(a.y1, b.y1)
    assert np.array_equal(a.y2, b.y2)
    assert a.relaxed_obj == b.relaxed_obj


def test_result_json_schema():
    g1, g2 = _small_pair(seed=6)
    res = solve_joint(g1, g2, PipelineConfig(k=2, dim=2, tol=1e-4))
    doc = res.to_json_dict()
    text = json.dumps(doc)  # must be JSON-clean
    back = json.loads(text)
    assert back["n"] == 6
    assert back["perm"] == [int(v) for v in res.perm]
    assert back["status"] == "optimal"
    assert back["config"]["k"] == 2
    assert set(back["timings"]) >= {"affinity", "kpsvd", "embed", "assemble", "solve", "round"}
    assert isinstance(back["consistency"]["n_matched"], int)


def test_unequal_sizes_rejected():
    g1, _ = _small_pair()
    spec = SyntheticScenario(primitives=("triangle", "square"), seed=0)
    h1, _ = gen_pair(spec)
    with pytest.raises(ValueError):
        build_model(g1, h1, PipelineConfig())


def test_config_validation():
    with pytest.raises(ValueError):
        PipelineConfig(k=0).validate()
    with pytest.raises(ValueError):
        PipelineConfig(coupling="tight").validate()
    with pytest.raises(ValueError):
        PipelineConfig(dim=0).validate()
    with pytest.raises(ValueError):
        PipelineConfig(lambda_m="half").validate()
    with pytest.raises(ValueError):
        PipelineConfig(pad="yes").validate()
    with pytest.raises(ValueError):
        PipelineConfig(repair=1).validate()
    PipelineConfig().validate()


def _unequal_pair():
    # two well-separated blobs of different shape; graph 2 carries one
    # extra far-away node with no graph-1 counterpart
    rng = np.random.default_rng(3)
    c1 = np.array(
        [[0.0, 0.0], [4.0, 0.0], [2.0, 3.0], [20.0, 20.0], [26.4, 20.0], [23.2, 24.8]]
    )
    c2 = np.vstack([c1 + 0.05 * rng.standard_normal(c1.shape), [[45.0, -10.0]]])
    g1 = Graph(n=6, edges=delaunay_2d(c1), coords=c1,
               gt_cluster=np.array([1, 1, 1, -1, -1, -1]))
    g2 = Graph(n=7, edges=delaunay_2d(c2), coords=c2,
               gt_cluster=np.array([1, 1, 1, -1, -1, -1, -1]))
    return g1, g2


def test_pad_solves_unequal_pair():
    g1, g2 = _unequal_pair()
    cfg = PipelineConfig(k=2, dim=2, tol=1e-3, max_iters=20000, pad=True)
    res = solve_joint(g1, g2, cfg)
    assert res.converged
    # outputs come back at the real sizes; the padded assignment stays on X
    assert res.perm.shape == (6,)
    assert res.X.shape == (7, 7)
    assert res.y1.shape == (6,) and res.y2.shape == (7,)
    assert np.array_equal(res.perm, np.arange(6))
    assert res.consistency["consistent"]


def test_pad_noop_when_sizes_match():
    g1, g2 = _small_pair(seed=4)
    cfg = dict(k=2, dim=2, tol=1e-4)
    r_plain = solve_joint(g1, g2, PipelineConfig(**cfg))
    r_pad = solve_joint(g1, g2, PipelineConfig(pad=True, **cfg))
    assert np.array_equal(r_plain.perm, r_pad.perm)
    assert np.array_equal(r_plain.y1, r_pad.y1)


def test_pad_graphs_helper():
    g1, g2 = _unequal_pair()
    p1, p2 = pad_graphs(g1, g2)
    assert p1.n == p2.n == 7
    assert p2 is g2  # larger graph untouched
    assert p1.num_edges == g1.num_edges
    assert np.allclose(p1.coords[6], g1.coords.mean(axis=0))
    assert p1.gt_cluster[6] == 1


def test_repair_needs_both_terms():
    g1, g2 = _small_pair(seed=1)
    with pytest.raises(ValueError, match="repair"):
        solve_joint(g1, g2, PipelineConfig(k=2, dim=2, lambda_c=0, repair=True))
    with pytest.raises(ValueError, match="repair"):
        solve_joint(g1, g2, PipelineConfig(lambda_m=0, repair=True))


def test_repair_restores_consistency_without_coupling():
    g1, g2 = _unequal_pair()
    cfg = PipelineConfig(
        k=2, dim=2, tol=1e-3, max_iters=20000, coupling="none", pad=True, repair=True
    )
    res = solve_joint(g1, g2, cfg)
    assert res.converged
    assert res.consistency["consistent"]
    assert np.array_equal(res.perm, np.arange(6))


def test_build_model_reports_stage_timings():
    g1, g2 = _small_pair(seed=7)
    model, timings = build_model(g1, g2, PipelineConfig(k=2, dim=2))
    assert set(timings) == {"affinity", "kpsvd", "embed", "assemble"}
    assert all(t >= 0 for t in timings.values())
    assert model.n == 6
    assert model.d == 2
    assert len(model.streams) == 2


def test_explicit_lambda_values_respected():
    g1, g2 = _small_pair(seed=8)
    cfg = PipelineConfig(k=2, dim=2, lambda_m=0.25, lambda_c=2.0, tol=1e-4)
    model, _ = build_model(g1, g2, cfg)
    assert model.lam_m == pytest.approx(0.25)
    assert model.lam_c == pytest.approx(2.0)
