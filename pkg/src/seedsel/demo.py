"""Deterministic synthetic packs for demos, docs, and tests."""

from __future__ import annotations

import numpy as np

from .packs import FeaturePack, ViewFeatureSet, make_pack


def _unit(rows: np.ndarray) -> np.ndarray:
    return rows / np.linalg.norm(rows, axis=1, keepdims=True)


def _concept_views(
    rng: np.random.Generator, dim: int, n_concepts: int, n_views: int, spread: float
) -> np.ndarray:
    """Views scattered around a few concept directions on the unit sphere."""
    concepts = _unit(rng.standard_normal((n_concepts, dim)))
    picks = rng.integers(n_concepts, size=n_views)
    views = concepts[picks] + spread * rng.standard_normal((n_views, dim))
    return _unit(views)


def build_demo_pack(seed: int = 2024) -> FeaturePack:
    """Eight synthetic scenes with mixed internal diversity and costs.

    Scenes span highly diverse (many spread concepts), redundant
    (near-duplicate views), and degenerate single-view cases.
    """
    rng = np.random.default_rng(seed)
    dim = 16
    recipes = [
        ("lobby", 6, 24, 0.25, 120),
        ("atrium", 5, 20, 0.25, 140),
        ("office", 4, 18, 0.20, 90),
        ("corridor", 2, 16, 0.05, 60),
        ("stairwell", 2, 12, 0.05, 50),
        ("closet", 1, 10, 0.02, 30),
        ("snapshot-a", 1, 1, 0.0, 40),
        ("snapshot-b", 1, 1, 0.0, 45),
    ]
    scenes = []
    for name, n_concepts, n_views, spread, cost in recipes:
        views = _concept_views(rng, dim, n_concepts, n_views, spread)
        scenes.append(ViewFeatureSet(scene_id=name, cost=cost, views=views))
    return make_pack(scenes, dimension=dim)


def build_demo_sequence_pack(
    seed: int = 99,
    n_sequences: int = 3,
    novel_per_sequence: int = 4,
    dupes_per_novel: int = 5,
) -> FeaturePack:
    """Sequence-structured pack with runs of near-duplicate frames.

    Each sequence alternates a genuinely new frame with ``dupes_per_novel``
    slightly perturbed copies of it, mimicking consecutive captures.
    """
    rng = np.random.default_rng(seed)
    dim = 12
    scenes = []
    for s in range(n_sequences):
        seq_id = f"seq{s:02d}"
        frame = 0
        for n in range(novel_per_sequence):
            anchor = _unit(rng.standard_normal((1, dim)))[0]
            for d in range(dupes_per_novel + 1):
                jitter = 0.0 if d == 0 else 0.01
                vec = _unit((anchor + jitter * rng.standard_normal(dim))[None, :])
                scenes.append(
                    ViewFeatureSet(
                        scene_id=f"{seq_id}-f{frame:03d}",
                        cost=10,
                        views=vec,
                        sequence_id=seq_id,
                    )
                )
                frame += 1
    return make_pack(scenes, dimension=dim)
