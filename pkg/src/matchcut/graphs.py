"""Weighted graphs, geometric edge construction, and inter-graph affinities."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.spatial import Delaunay

Array = np.ndarray

Edge = tuple[int, int, float]


@dataclass(frozen=True, eq=False)
class Graph:
    """Undirected weighted graph, optionally with node coordinates and
    ground-truth cluster labels (+1/-1).

    Nodes are 0..n-1.  Edges are stored once per unordered pair.
    """

    n: int
    edges: tuple[Edge, ...]
    coords: Array | None = None
    gt_cluster: Array | None = None
    directed: bool = False

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("graph needs at least one node")
        seen = set()
        for (i, j, w) in self.edges:
            if not (0 <= i < self.n and 0 <= j < self.n):
                raise ValueError(f"edge ({i},{j}) out of range for n={self.n}")
            if i == j:
                raise ValueError(f"self-loop at node {i}")
            if not np.isfinite(w):
                raise ValueError(f"non-finite edge weight on ({i},{j})")
            key = (i, j) if self.directed else (min(i, j), max(i, j))
            if key in seen:
                raise ValueError(f"duplicate edge ({i},{j})")
            seen.add(key)
        if self.coords is not None:
            c = np.asarray(self.coords, dtype=float)
            if c.shape[0] != self.n or c.ndim != 2 or c.shape[1] not in (2, 3):
                raise ValueError("coords must be (n, 2) or (n, 3)")
            c = c.copy()
            c.setflags(write=False)
            object.__setattr__(self, "coords", c)
        if self.gt_cluster is not None:
            y = np.asarray(self.gt_cluster, dtype=int)
            if y.shape != (self.n,) or not np.all(np.abs(y) == 1):
                raise ValueError("gt_cluster must be length-n with entries +1/-1")
            y = y.copy()
            y.setflags(write=False)
            object.__setattr__(self, "gt_cluster", y)

    @property
    def num_edges(self) -> int:
        return len(self.edges)


def adjacency(g: Graph, weighted: bool = False) -> Array:
    """Dense symmetric adjacency; binary unless ``weighted``."""
    A = np.zeros((g.n, g.n))
    for (i, j, w) in g.edges:
        v = w if weighted else 1.0
        A[i, j] = v
        if not g.directed:
            A[j, i] = v
    return A


def distance_matrix(g: Graph) -> Array:
    """Pairwise Euclidean node distances; requires coordinates.

    Used as the cluster-separation weight matrix: distant nodes are the
    ones a two-way cut should separate.
    """
    if g.coords is None:
        raise ValueError("distance_matrix needs node coordinates")
    d = g.coords[:, None, :] - g.coords[None, :, :]
    return np.sqrt((d * d).sum(axis=2))


def intra_affinity(g: Graph) -> Array:
    """Per-graph node affinity W with W_ij = Euclidean node distance.

    The score penalises placing distant nodes in one cluster, which is
    what makes it the natural two-way cut weight.
    """
    return distance_matrix(g)


def cmu_edge_affinity(e1, e2):
    """Gaussian kernel on edge-length differences, bandwidth^2 = 2500."""
    d = np.asarray(e1, dtype=float) - np.asarray(e2, dtype=float)
    return np.exp(-(d * d) / 2500.0)


def pair_index(i1: int, i2: int, n: int) -> int:
    """Flat index of the candidate match (node i1 in graph 1, i2 in graph 2).

    Matches column-major vec of X where X[i2, i1] = 1 iff i1 is matched
    to i2, so vec(X)[pair_index(i1, i2, n)] = X[i2, i1].
    """
    return i1 * n + i2


def _directed_edge_arrays(g: Graph):
    # both orientations of every undirected edge
    if g.num_edges == 0:
        z = np.zeros(0, dtype=int)
        return z, z, np.zeros(0)
    e = np.array([(i, j, w) for (i, j, w) in g.edges], dtype=float)
    s = e[:, 0].astype(int)
    t = e[:, 1].astype(int)
    w = e[:, 2]
    if g.directed:
        return s, t, w
    return np.concatenate([s, t]), np.concatenate([t, s]), np.concatenate([w, w])


def build_affinity_K(
    g1: Graph,
    g2: Graph,
    edge_aff: Callable = cmu_edge_affinity,
    node_aff: Callable | None = None,
) -> Array:
    """Dense pairwise affinity matrix K of shape (n^2, n^2).

    Entry at (pair_index(i1,i2), pair_index(j1,j2)) holds
    edge_aff(w1(i1,j1), w2(i2,j2)) when edge (i1,j1) exists in graph 1
    and (i2,j2) in graph 2, and zero otherwise.  With ``node_aff`` given,
    the diagonal holds node_aff(i1, i2).  Both graphs must have the same
    node count.
    """
    if g1.n != g2.n:
        raise ValueError("affinity construction expects equal node counts")
    n = g1.n
    K = np.zeros((n * n, n * n))
    s1, t1, w1 = _directed_edge_arrays(g1)
    s2, t2, w2 = _directed_edge_arrays(g2)
    if len(s1) and len(s2):
        rows = (s1[:, None] * n + s2[None, :]).ravel()
        cols = (t1[:, None] * n + t2[None, :]).ravel()
        vals = edge_aff(w1[:, None], w2[None, :]).ravel()
        K[rows, cols] = vals
    if node_aff is not None:
        i1 = np.repeat(np.arange(n), n)
        i2 = np.tile(np.arange(n), n)
        K[np.arange(n * n), np.arange(n * n)] = node_aff(i1, i2)
    return K


def pad_graphs(g1: Graph, g2: Graph) -> tuple[Graph, Graph]:
    """Pad the smaller graph with edge-free dummy nodes so sizes match.

    Dummies sit at the coordinate centroid and carry label +1.  Having no
    incident edges, every matching affinity involving a dummy is zero, so
    a real node assigned to one is simply unmatched.  Cluster weights for
    dummy rows are masked out by the model builder, keeping dummies
    neutral for the cut as well.
    """

    def pad_one(g: Graph, target: int) -> Graph:
        if g.n == target:
            return g
        extra = target - g.n
        coords = None
        if g.coords is not None:
            centroid = g.coords.mean(axis=0)
            coords = np.vstack([g.coords, np.tile(centroid, (extra, 1))])
        gt = None
        if g.gt_cluster is not None:
            gt = np.concatenate([g.gt_cluster, np.ones(extra, dtype=int)])
        return Graph(n=target, edges=g.edges, coords=coords, gt_cluster=gt, directed=g.directed)

    target = max(g1.n, g2.n)
    return pad_one(g1, target), pad_one(g2, target)


def delaunay_2d(coords: Array) -> tuple[Edge, ...]:
    """Delaunay triangulation edges of 2D points, weighted by length."""
    pts = np.asarray(coords, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise ValueError("delaunay_2d expects (n, 2) points")
    if pts.shape[0] < 3:
        raise ValueError("need at least 3 points to triangulate")
    tri = Delaunay(pts)
    pairs = set()
    for simplex in tri.simplices:
        for a in range(3):
            for b in range(a + 1, 3):
                i, j = int(simplex[a]), int(simplex[b])
                pairs.add((min(i, j), max(i, j)))
    out = []
    for (i, j) in sorted(pairs):
        out.append((i, j, float(np.linalg.norm(pts[i] - pts[j]))))
    return tuple(out)


def knn_edges(coords: Array, k: int) -> tuple[Edge, ...]:
    """Symmetrized k-nearest-neighbour edges, weighted by distance."""
    pts = np.asarray(coords, dtype=float)
    n = pts.shape[0]
    if k < 1 or k >= n:
        raise ValueError("k must be in [1, n-1]")
    d = pts[:, None, :] - pts[None, :, :]
    D = np.sqrt((d * d).sum(axis=2))
    np.fill_diagonal(D, np.inf)
    pairs = set()
    # argsort (not argpartition): deterministic under ties
    order = np.argsort(D, axis=1, kind="stable")
    for i in range(n):
        for j in order[i, :k]:
            pairs.add((min(i, int(j)), max(i, int(j))))
    return tuple((i, j, float(D[i, j])) for (i, j) in sorted(pairs))


def graph_to_json(g: Graph) -> dict:
    """Plain-dict form: n, directed, coords, edges, gt_cluster."""
    return {
        "n": g.n,
        "directed": g.directed,
        "coords": None if g.coords is None else [[float(v) for v in row] for row in g.coords],
        "edges": [[int(i), int(j), float(w)] for (i, j, w) in g.edges],
        "gt_cluster": None if g.gt_cluster is None else [int(v) for v in g.gt_cluster],
    }


def graph_from_json(d: dict) -> Graph:
    for key in ("n", "directed", "edges"):
        if key not in d:
            raise ValueError(f"graph JSON missing key {key!r}")
    return Graph(
        n=int(d["n"]),
        directed=bool(d["directed"]),
        edges=tuple((int(e[0]), int(e[1]), float(e[2])) for e in d["edges"]),
        coords=None if d.get("coords") is None else np.asarray(d["coords"], dtype=float),
        gt_cluster=None if d.get("gt_cluster") is None else np.asarray(d["gt_cluster"], dtype=int),
    )


def save_graph(g: Graph, path) -> None:
    with open(path, "w") as fh:
        json.dump(graph_to_json(g), fh, indent=1, sort_keys=True)
        fh.write("\n")


def load_graph(path) -> Graph:
    with open(path) as fh:
        return graph_from_json(json.load(fh))
