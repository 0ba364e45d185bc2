"""Candidate-set reduction before optimization.

Two independent shrinking steps: greedy near-duplicate removal inside
ordered frame sequences (cosine-similarity threshold against a moving
reference frame), and restriction of the diversity graph to the scenes
incident to its L heaviest edges.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .diversity import DiversityGraph
from .errors import ValidationError
from .packs import FeaturePack, scene_means

DEFAULT_SIMILARITY_THRESHOLD = 0.75


@dataclass(frozen=True)
class SparsifyConfig:
    similarity_threshold: float = DEFAULT_SIMILARITY_THRESHOLD

    def __post_init__(self):
        if not -1.0 <= self.similarity_threshold <= 1.0:
            raise ValidationError("similarity threshold must lie in [-1, 1]")


@dataclass
class FramePool:
    """Ordered frames grouped by sequence; input to sparsification.

    ``groups`` holds ``(sequence_id, [(frame_id, mean_feature), ...])`` in
    first-appearance order. Frames without a sequence id form singleton
    groups with ``sequence_id=None`` and are never dropped.
    """

    groups: list[tuple[str | None, list[tuple[str, np.ndarray]]]]

    @classmethod
    def from_pack(cls, pack: FeaturePack) -> "FramePool":
        means = {m.scene_id: m.mean for m in scene_means(pack)}
        groups: list[tuple[str | None, list[tuple[str, np.ndarray]]]] = []
        by_seq: dict[str, int] = {}
        for scene in pack.scenes:
            frame = (scene.scene_id, means[scene.scene_id])
            if scene.sequence_id is None:
                groups.append((None, [frame]))
            elif scene.sequence_id in by_seq:
                groups[by_seq[scene.sequence_id]][1].append(frame)
            else:
                by_seq[scene.sequence_id] = len(groups)
                groups.append((scene.sequence_id, [frame]))
        return cls(groups=groups)

    def frame_count(self) -> int:
        return sum(len(frames) for _, frames in self.groups)


def cosine_similarity(a: np.ndarray, b: np.ndarray) -> float:
    """Cosine of the angle between two vectors; 0.0 if either has zero norm."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    na = np.linalg.norm(a)
    nb = np.linalg.norm(b)
    if na < 1e-12 or nb < 1e-12:
        return 0.0
    return float(a @ b) / (na * nb)


def sparsify_sequences(pool: FramePool, cfg: SparsifyConfig) -> list[str]:
    """Greedy per-sequence near-duplicate removal; returns retained frame ids.

    The first frame of a sequence is the reference. Later frames whose
    cosine similarity with the reference is strictly above the threshold
    are dropped; the first frame at or below it is retained and becomes
    the new reference. Relative order is preserved.
    """
    retained: list[str] = []
    for _, frames in pool.groups:
        if not frames:
            continue
        ref_id, ref_vec = frames[0]
        retained.append(ref_id)
        for frame_id, vec in frames[1:]:
            if cosine_similarity(ref_vec, vec) > cfg.similarity_threshold:
                continue
            retained.append(frame_id)
            ref_vec = vec
    return retained


def sparsify_report(pool: FramePool, cfg: SparsifyConfig) -> dict:
    """JSON-ready report: retained, dropped, and per-sequence retention ratio."""
    retained = sparsify_sequences(pool, cfg)
    kept = set(retained)
    dropped = [
        fid for _, frames in pool.groups for fid, _ in frames if fid not in kept
    ]
    ratios = {}
    for seq_id, frames in pool.groups:
        label = seq_id if seq_id is not None else frames[0][0]
        n_kept = sum(1 for fid, _ in frames if fid in kept)
        ratios[label] = n_kept / len(frames)
    return {
        "threshold": cfg.similarity_threshold,
        "retained": retained,
        "dropped": dropped,
        "per_sequence_ratio": ratios,
    }


def restrict_pack(pack: FeaturePack, keep_ids: list[str]) -> FeaturePack:
    """Pack with only the named scenes, in original order."""
    keep = set(keep_ids)
    return FeaturePack(
        dimension=pack.dimension,
        scenes=[s for s in pack.scenes if s.scene_id in keep],
        cost_free=pack.cost_free,
    )


def ranked_edges(graph: DiversityGraph) -> list[tuple[int, int]]:
    """All edges (i, j), i < j, heaviest first; weight ties broken by the
    lexicographic order of the scene-id pair."""
    m = len(graph)
    iu, ju = np.triu_indices(m, k=1)
    if iu.size == 0:
        return []
    weights = graph.weight[iu, ju]
    ids = graph.scene_ids()
    id_rank = {sid: r for r, sid in enumerate(sorted(ids))}
    lo = np.array([min(id_rank[ids[i]], id_rank[ids[j]]) for i, j in zip(iu, ju)])
    hi = np.array([max(id_rank[ids[i]], id_rank[ids[j]]) for i, j in zip(iu, ju)])
    order = np.lexsort((hi, lo, -weights))
    return [(int(iu[t]), int(ju[t])) for t in order]


def top_l_pool(graph: DiversityGraph, l_edges: int) -> DiversityGraph:
    """Complete subgraph induced by the endpoints of the L heaviest edges.

    All induced edges keep their original weights, not only the top L.
    """
    if l_edges <= 0:
        raise ValidationError("L must be a positive integer")
    if len(graph) < 2:
        raise ValidationError("graph has no edges to rank")
    top = ranked_edges(graph)[:l_edges]
    keep = sorted({i for pair in top for i in pair})
    idx = np.array(keep, dtype=np.intp)
    return DiversityGraph(
        nodes=[graph.nodes[i] for i in keep],
        inter=graph.inter[np.ix_(idx, idx)].copy(),
        weight=graph.weight[np.ix_(idx, idx)].copy(),
    )
