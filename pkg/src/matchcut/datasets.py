"""Synthetic two-cluster scenes and landmark-track ingestion.

Scenes are compositions of geometric primitives (scaled, jittered corner
sets) laid out along the x axis with a generous separation, so the
two-way ground-truth clustering is the primitive membership.  The second
graph of a pair gets i.i.d. Gaussian coordinate noise; topology is
rebuilt per graph (Delaunay in 2D, k-nearest-neighbour in 3D).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .graphs import Graph, delaunay_2d, knn_edges

Array = np.ndarray

# corner sets with unit circumradius; scaled by SIZE_BASE * scale at build
SIZE_BASE = 60.0


def _polygon(k: int) -> Array:
    ang = 2 * np.pi * np.arange(k) / k
    return np.stack([np.cos(ang), np.sin(ang)], axis=1)


def _prism() -> Array:
    tri = _polygon(3)
    top = np.hstack([tri, np.full((3, 1), 0.6)])
    bot = np.hstack([tri, np.full((3, 1), -0.6)])
    return np.vstack([top, bot])


def _box() -> Array:
    g = np.array(np.meshgrid([-0.7, 0.7], [-0.7, 0.7], [-0.7, 0.7])).T.reshape(-1, 3)
    return g


def _tetra() -> Array:
    return np.array(
        [[1, 1, 1], [1, -1, -1], [-1, 1, -1], [-1, -1, 1]], dtype=float
    ) / np.sqrt(3.0)


def _pyramid5() -> Array:
    base = np.hstack([_polygon(4), np.full((4, 1), -0.4)])
    return np.vstack([base, [[0.0, 0.0, 1.0]]])


PRIMITIVES = {
    "prism": _prism(),       # triangular prism, 6 corners (3D)
    "box": _box(),           # 8 corners (3D)
    "pyramid4": _tetra(),    # triangular pyramid, 4 corners (3D)
    "tetra": _tetra(),
    "pyramid5": _pyramid5(), # square pyramid, 5 corners (3D)
    "triangle": _polygon(3),
    "square": _polygon(4),
    "pentagon": _polygon(5),
    "hexagon": _polygon(6),
}


@dataclass(frozen=True)
class OutlierSpec:
    count: int
    spread: float
    label: int | None = None  # None: nearest primitive's label


@dataclass(frozen=True)
class SyntheticScenario:
    """Recipe for one seeded scene pair.

    labels default to +1 for the first half of the primitives and -1 for
    the rest; scales default to a distinct size per primitive so no two
    primitives are congruent; offsets default to an x-axis layout with
    centroid spacing separation_factor * max primitive diameter.
    """

    primitives: tuple[str, ...]
    labels: tuple[int, ...] | None = None
    scales: tuple[float, ...] | None = None
    offsets: tuple | None = None
    separation_factor: float = 6.0
    noise_sigma: float = 0.0
    outliers: OutlierSpec | None = None
    jitter: float = 0.1
    knn_k: int = 4
    seed: int = 0

    def resolved_labels(self) -> tuple[int, ...]:
        if self.labels is not None:
            if len(self.labels) != len(self.primitives) or any(
                abs(v) != 1 for v in self.labels
            ):
                raise ValueError("labels must be +-1, one per primitive")
            return tuple(int(v) for v in self.labels)
        h = (len(self.primitives) + 1) // 2
        return tuple(1 if i < h else -1 for i in range(len(self.primitives)))

    def resolved_scales(self) -> tuple[float, ...]:
        if self.scales is not None:
            if len(self.scales) != len(self.primitives):
                raise ValueError("scales must match primitives")
            return tuple(float(s) for s in self.scales)
        return tuple(1.0 + 0.18 * i for i in range(len(self.primitives)))

    def dim(self) -> int:
        dims = {PRIMITIVES[p].shape[1] for p in self.primitives}
        if len(dims) != 1:
            raise ValueError("cannot mix 2D and 3D primitives in one scene")
        return dims.pop()


def _validate(spec: SyntheticScenario) -> None:
    if not spec.primitives:
        raise ValueError("scenario needs at least one primitive")
    for p in spec.primitives:
        if p not in PRIMITIVES:
            raise ValueError(f"unknown primitive {p!r}")
    labels = spec.resolved_labels()
    if len(set(labels)) == 2 and len(spec.primitives) < 2:
        raise ValueError("two clusters require at least two primitives")
    if spec.noise_sigma < 0:
        raise ValueError("noise_sigma must be >= 0")


def _base_points(spec: SyntheticScenario, rng) -> tuple[Array, Array]:
    """Jittered, scaled, laid-out corner coordinates plus gt labels."""
    dim = spec.dim()
    scales = spec.resolved_scales()
    labels = spec.resolved_labels()
    clouds = []
    for name, sc in zip(spec.primitives, scales):
        pts = PRIMITIVES[name] * SIZE_BASE * sc
        pts = pts + spec.jitter * SIZE_BASE * sc * rng.standard_normal(pts.shape)
        clouds.append(pts)
    diam = max(2.0 * SIZE_BASE * sc for sc in scales)
    if spec.offsets is not None:
        if len(spec.offsets) != len(clouds):
            raise ValueError("offsets must match primitives")
        offs = [np.asarray(o, dtype=float) for o in spec.offsets]
    else:
        offs = [
            np.array([i * spec.separation_factor * diam] + [0.0] * (dim - 1))
            for i in range(len(clouds))
        ]
    coords = np.vstack([pts + off for pts, off in zip(clouds, offs)])
    lab = np.concatenate(
        [np.full(len(pts), l, dtype=int) for pts, l in zip(clouds, labels)]
    )
    return coords, lab


def _sample_outliers(coords: Array, lab: Array, out: OutlierSpec, rng):
    lo, hi = coords.min(axis=0), coords.max(axis=0)
    extent = np.maximum(hi - lo, 1e-9)
    center = lo + rng.uniform(-0.25, 1.25, size=coords.shape[1]) * extent
    pts = center + out.spread * rng.standard_normal((out.count, coords.shape[1]))
    if out.label is not None:
        l = int(out.label)
    else:
        near = int(np.argmin(np.sum((coords - center) ** 2, axis=1)))
        l = int(lab[near])
    return pts, np.full(out.count, l, dtype=int)


def _build_edges(coords: Array, knn_k: int):
    if coords.shape[1] == 2:
        return delaunay_2d(coords)
    return knn_edges(coords, min(knn_k, coords.shape[0] - 1))


def gen_pair(spec: SyntheticScenario) -> tuple[Graph, Graph]:
    """Seeded scene pair: identical layout, Gaussian noise on graph 2
    only, per-graph topology, identity ground-truth matching."""
    _validate(spec)
    rng = np.random.default_rng(spec.seed)
    coords, lab = _base_points(spec, rng)
    if spec.outliers is not None and spec.outliers.count > 0:
        opts, olab = _sample_outliers(coords, lab, spec.outliers, rng)
        coords = np.vstack([coords, opts])
        lab = np.concatenate([lab, olab])
    noise = rng.standard_normal(coords.shape) * spec.noise_sigma
    c1 = coords
    c2 = coords + noise
    g1 = Graph(n=len(c1), edges=_build_edges(c1, spec.knn_k), coords=c1, gt_cluster=lab)
    g2 = Graph(n=len(c2), edges=_build_edges(c2, spec.knn_k), coords=c2, gt_cluster=lab)
    return g1, g2


def add_clustered_outliers(
    g: Graph, count: int, spread: float, seed: int, label: int | None = None, knn_k: int = 4
) -> Graph:
    """Append `count` nodes around one random center (std `spread`) and
    rebuild the topology; the new nodes share a single gt label."""
    if count == 0:
        return g
    if count < 0:
        raise ValueError("count must be >= 0")
    if g.coords is None or g.gt_cluster is None:
        raise ValueError("outlier injection needs coords and gt labels")
    rng = np.random.default_rng(seed)
    pts, olab = _sample_outliers(
        g.coords, g.gt_cluster, OutlierSpec(count=count, spread=spread, label=label), rng
    )
    coords = np.vstack([g.coords, pts])
    lab = np.concatenate([g.gt_cluster, olab])
    return Graph(
        n=len(coords),
        edges=_build_edges(coords, knn_k),
        coords=coords,
        gt_cluster=lab,
    )


# -- bundled scenario recipes ----------------------------------------------

def scenario_11(noise_sigma: float = 0.0, seed: int = 0) -> SyntheticScenario:
    """Prism + square pyramid: the 11-node two-cluster scene."""
    return SyntheticScenario(
        primitives=("prism", "pyramid5"), noise_sigma=noise_sigma, seed=seed
    )


def scenario_28(noise_sigma: float = 0.0, seed: int = 0) -> SyntheticScenario:
    """28 nodes in two clusters, each holding a near-congruent twin of a
    primitive in the other cluster.

    Twins make the matching ambiguous for methods that ignore the
    cluster structure, while the within-cluster pairs stay easy; the
    placement keeps the two clusters far apart as usual.
    """
    return SyntheticScenario(
        primitives=("box", "prism", "box", "prism"),
        labels=(1, 1, -1, -1),
        scales=(1.0, 1.3, 1.04, 1.35),
        noise_sigma=noise_sigma,
        seed=seed,
    )


def scenario_33(noise_sigma: float = 0.0, seed: int = 0) -> SyntheticScenario:
    """28-node twin scene plus 5 clustered outliers.

    The outlier spread is close to the primitive size, so outlier edges
    fall in the same length range as primitive edges instead of forming
    an obviously separate blob.
    """
    base = scenario_28(noise_sigma=noise_sigma, seed=seed)
    return SyntheticScenario(
        primitives=base.primitives,
        labels=base.labels,
        scales=base.scales,
        noise_sigma=noise_sigma,
        outliers=OutlierSpec(count=5, spread=45.0),
        seed=seed,
    )


# -- landmark tracks --------------------------------------------------------

CMU_LANDMARKS = 30


def load_cmu_house(path, frame_a: int, frame_b: int, m: int = CMU_LANDMARKS):
    """Two frames of a 30-landmark 2D track file as Delaunay graphs.

    The file holds one whitespace-separated 30x2 coordinate block per
    frame.  Landmarks keep their indices across frames, so the
    ground-truth matching is the identity; `m` keeps the first m <= 30
    landmarks.
    """
    vals = np.loadtxt(path).ravel()
    per_frame = CMU_LANDMARKS * 2
    if vals.size == 0 or vals.size % per_frame:
        raise ValueError("malformed landmark file (not 30x2 blocks)")
    frames = vals.reshape(-1, CMU_LANDMARKS, 2)
    nf = frames.shape[0]
    if not (0 <= frame_a < nf and 0 <= frame_b < nf):
        raise ValueError(f"frame out of range (file has {nf})")
    if not (3 <= m <= CMU_LANDMARKS):
        raise ValueError("m must be in [3, 30]")
    out = []
    for f in (frame_a, frame_b):
        pts = frames[f, :m]
        out.append(Graph(n=m, edges=delaunay_2d(pts), coords=pts))
    return out[0], out[1]


# -- scenario JSON ----------------------------------------------------------

def scenario_from_json(d: dict) -> SyntheticScenario:
    out = d.get("outliers")
    return SyntheticScenario(
        primitives=tuple(d["primitives"]),
        labels=None if d.get("labels") is None else tuple(d["labels"]),
        scales=None if d.get("scales") is None else tuple(d["scales"]),
        offsets=None if d.get("offsets") is None else tuple(tuple(o) for o in d["offsets"]),
        separation_factor=float(d.get("separation_factor", 6.0)),
        noise_sigma=float(d.get("noise_sigma", 0.0)),
        outliers=None
        if out is None
        else OutlierSpec(int(out["count"]), float(out["spread"]), out.get("label")),
        jitter=float(d.get("jitter", 0.1)),
        knn_k=int(d.get("knn_k", 4)),
        seed=int(d.get("seed", 0)),
    )


def scenario_to_json(spec: SyntheticScenario) -> dict:
    return {
        "primitives": list(spec.primitives),
        "labels": None if spec.labels is None else list(spec.labels),
        "scales": None if spec.scales is None else list(spec.scales),
        "offsets": None if spec.offsets is None else [list(o) for o in spec.offsets],
        "separation_factor": spec.separation_factor,
        "noise_sigma": spec.noise_sigma,
        "outliers": None
        if spec.outliers is None
        else {
            "count": spec.outliers.count,
            "spread": spec.outliers.spread,
            "label": spec.outliers.label,
        },
        "jitter": spec.jitter,
        "knn_k": spec.knn_k,
        "seed": spec.seed,
    }
