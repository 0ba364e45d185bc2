"""Per-scene cluster profiles and intra-/inter-scene diversity measures.

Each scene's view features are summarized by k-means cluster centers. A
scene's internal diversity is the average pairwise cosine dissimilarity of
its centers; two scenes' mutual diversity is the average dissimilarity
across their center sets. The complete weighted graph over scenes carries
``e_ij = d_ij * d_i * d_j`` so an edge is heavy only when both endpoints
are internally diverse *and* mutually diverse.
"""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ValidationError
from .packs import FeaturePack


@dataclass(frozen=True)
class KMeansConfig:
    k: int
    max_iterations: int = 100
    rng_seed: int = 0
    convergence_tol: float = 1e-8

    def __post_init__(self):
        if self.k < 1:
            raise ValidationError("k must be >= 1")
        if self.max_iterations < 1:
            raise ValidationError("max_iterations must be >= 1")
        if self.convergence_tol < 0:
            raise ValidationError("convergence_tol must be >= 0")


@dataclass
class ClusterProfile:
    """A scene's k-means center representatives and internal diversity."""

    scene_id: str
    centers: np.ndarray | None  # (K_eff, D) float64; None when loaded from a dump
    intra: float  # in [0, 2]; 0 when fewer than 2 centers
    cost: int
    k_eff: int


@dataclass
class DiversityGraph:
    """Complete weighted graph over scenes.

    ``inter[i, j]`` holds the inter-scene diversity d_ij and
    ``weight[i, j]`` the combined edge weight e_ij, symmetric with zero
    diagonals, indexed by node position.
    """

    nodes: list[ClusterProfile]
    inter: np.ndarray  # (M, M) float64
    weight: np.ndarray  # (M, M) float64

    def __post_init__(self):
        self._index = {p.scene_id: i for i, p in enumerate(self.nodes)}

    def __len__(self) -> int:
        return len(self.nodes)

    def index_of(self, scene_id: str) -> int:
        return self._index[scene_id]

    def scene_ids(self) -> list[str]:
        return [p.scene_id for p in self.nodes]

    def edge_items(self):
        """Yield ((i, j), e_ij) for every pair i < j, in index order."""
        m = len(self.nodes)
        for i in range(m):
            for j in range(i + 1, m):
                yield (i, j), float(self.weight[i, j])

    def edge_count(self) -> int:
        m = len(self.nodes)
        return m * (m - 1) // 2


def _squared_distances(points: np.ndarray, centers: np.ndarray) -> np.ndarray:
    # ||p - c||^2 via the expansion; clip the tiny negatives it can produce.
    d2 = (
        (points * points).sum(axis=1)[:, None]
        - 2.0 * points @ centers.T
        + (centers * centers).sum(axis=1)[None, :]
    )
    return np.maximum(d2, 0.0)


def _plus_plus_init(points: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = points.shape[0]
    chosen = [int(rng.integers(n))]
    d2 = ((points - points[chosen[0]]) ** 2).sum(axis=1)
    for _ in range(1, k):
        total = float(d2.sum())
        if total <= 0.0:
            idx = int(np.argmax(d2))
        else:
            draw = rng.random() * total
            idx = int(np.searchsorted(np.cumsum(d2), draw, side="right"))
            idx = min(idx, n - 1)
        chosen.append(idx)
        d2 = np.minimum(d2, ((points - points[idx]) ** 2).sum(axis=1))
    return points[chosen].copy()


def kmeans(points: np.ndarray, cfg: KMeansConfig) -> np.ndarray:
    """Cluster rows of *points* into ``min(cfg.k, #distinct rows)`` centers.

    k-means++ seeding with an explicit RNG seed, Lloyd iterations with
    squared-Euclidean assignment, centers as arithmetic means. Clusters
    that lose all points are re-seeded to the point farthest from its
    nearest center. Bit-deterministic for fixed seed and input order.
    """
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[0] < 1:
        raise ValidationError("kmeans needs a non-empty 2-D point matrix")
    n = pts.shape[0]
    k = min(cfg.k, int(np.unique(pts, axis=0).shape[0]))
    if k == 1:
        return pts.mean(axis=0, keepdims=True)
    rng = np.random.default_rng(cfg.rng_seed)
    centers = _plus_plus_init(pts, k, rng)
    for _ in range(cfg.max_iterations):
        labels = np.argmin(_squared_distances(pts, centers), axis=1)
        new_centers = np.empty_like(centers)
        empties = []
        for j in range(k):
            members = pts[labels == j]
            if members.shape[0] == 0:
                empties.append(j)
            else:
                new_centers[j] = members.mean(axis=0)
        # Re-seed each emptied cluster to the point farthest from its nearest
        # center; earlier reseeds count so two empties never pick the same point.
        active = [new_centers[j] for j in range(k) if j not in empties]
        for j in empties:
            far = np.argmax(_squared_distances(pts, np.vstack(active)).min(axis=1))
            new_centers[j] = pts[far]
            active.append(new_centers[j])
        movement = np.linalg.norm(new_centers - centers, axis=1).max()
        centers = new_centers
        if movement < cfg.convergence_tol:
            break
    return centers


def assign(points: np.ndarray, centers: np.ndarray) -> np.ndarray:
    """Index of the nearest center for each point (ties to the lowest index)."""
    pts = np.asarray(points, dtype=np.float64)
    return np.argmin(_squared_distances(pts, np.asarray(centers, dtype=np.float64)), axis=1)


def _clamp_unit_interval(value: float, hi: float = 2.0) -> float:
    # Guards the [0, 2] range against float rounding at the boundaries.
    return min(max(value, 0.0), hi)


def intra_diversity(centers: np.ndarray) -> float:
    """Average pairwise cosine dissimilarity over unordered center pairs.

    Returns 0.0 for fewer than two centers; result lies in [0, 2].
    """
    mat = np.asarray(centers, dtype=np.float64)
    k = mat.shape[0]
    if k < 2:
        return 0.0
    gram = mat @ mat.T
    pair_dot_sum = (gram.sum() - np.trace(gram)) / 2.0
    pairs = k * (k - 1) / 2.0
    return _clamp_unit_interval(1.0 - pair_dot_sum / pairs)


def inter_diversity(a: ClusterProfile, b: ClusterProfile) -> float:
    """Average cosine dissimilarity across two scenes' center sets (in [0, 2]).

    The double sum of center dot products collapses to a dot product of the
    per-scene center means, which also makes the result bitwise symmetric.
    """
    if a.centers is None or b.centers is None:
        raise ValidationError("profiles loaded without centers cannot be compared")
    ca = np.asarray(a.centers, dtype=np.float64)
    cb = np.asarray(b.centers, dtype=np.float64)
    if ca.shape[1] != cb.shape[1]:
        raise ValidationError(
            f"dimension mismatch: {ca.shape[1]} vs {cb.shape[1]}"
        )
    return _clamp_unit_interval(1.0 - float(ca.mean(axis=0) @ cb.mean(axis=0)))


def profile_scene(
    scene_id: str,
    views: np.ndarray,
    cost: int,
    cfg: KMeansConfig,
) -> ClusterProfile:
    """Cluster one scene's views and measure its internal diversity."""
    centers = kmeans(views, cfg)
    return ClusterProfile(
        scene_id=scene_id,
        centers=centers,
        intra=intra_diversity(centers),
        cost=cost,
        k_eff=centers.shape[0],
    )


def build_graph(pack: FeaturePack, cfg: KMeansConfig, threads: int = 0) -> DiversityGraph:
    """Profile every scene and populate all M(M-1)/2 edge weights.

    Per-scene work runs in parallel when ``threads != 1``; results are
    assembled by scene index so the output is independent of parallelism.
    """
    scenes = pack.scenes
    costs = [1 if pack.cost_free else s.cost for s in scenes]

    def one(idx: int) -> ClusterProfile:
        s = scenes[idx]
        return profile_scene(s.scene_id, s.views, costs[idx], cfg)

    if threads == 1 or len(scenes) <= 1:
        profiles = [one(i) for i in range(len(scenes))]
    else:
        workers = threads if threads > 0 else min(32, (len(scenes) or 1))
        with ThreadPoolExecutor(max_workers=workers) as pool:
            profiles = list(pool.map(one, range(len(scenes))))

    m = len(profiles)
    if m == 0:
        empty = np.zeros((0, 0))
        return DiversityGraph(nodes=[], inter=empty, weight=empty.copy())
    center_means = np.vstack([p.centers.mean(axis=0) for p in profiles])
    # Sum over center pairs of dot products collapses to a dot of the
    # per-scene center means, so one Gram matrix covers every pair.
    inter = np.clip(1.0 - center_means @ center_means.T, 0.0, 2.0)
    np.fill_diagonal(inter, 0.0)
    intr = np.array([p.intra for p in profiles])
    weight = inter * np.outer(intr, intr)
    np.fill_diagonal(weight, 0.0)
    return DiversityGraph(nodes=profiles, inter=inter, weight=weight)


def graph_to_json(graph: DiversityGraph) -> dict:
    """Plain-dict form of the graph for dumping and offline solving."""
    nodes = [
        {"id": p.scene_id, "d": p.intra, "cost": p.cost, "k_eff": p.k_eff}
        for p in graph.nodes
    ]
    edges = []
    for (i, j), e in graph.edge_items():
        edges.append(
            {
                "i": graph.nodes[i].scene_id,
                "j": graph.nodes[j].scene_id,
                "d_ij": float(graph.inter[i, j]),
                "e_ij": e,
            }
        )
    return {"nodes": nodes, "edges": edges}


def graph_from_json(payload: dict) -> DiversityGraph:
    """Rebuild a graph from :func:`graph_to_json` output (centers are lost)."""
    profiles = [
        ClusterProfile(
            scene_id=n["id"],
            centers=None,
            intra=float(n["d"]),
            cost=int(n["cost"]),
            k_eff=int(n["k_eff"]),
        )
        for n in payload["nodes"]
    ]
    index = {p.scene_id: i for i, p in enumerate(profiles)}
    m = len(profiles)
    inter = np.zeros((m, m))
    weight = np.zeros((m, m))
    for e in payload["edges"]:
        i, j = index[e["i"]], index[e["j"]]
        inter[i, j] = inter[j, i] = float(e["d_ij"])
        weight[i, j] = weight[j, i] = float(e["e_ij"])
    return DiversityGraph(nodes=profiles, inter=inter, weight=weight)


def dump_graph(graph: DiversityGraph, path: str | Path) -> None:
    Path(path).write_text(json.dumps(graph_to_json(graph), indent=2, sort_keys=True) + "\n")


def load_graph(path: str | Path) -> DiversityGraph:
    return graph_from_json(json.loads(Path(path).read_text()))
