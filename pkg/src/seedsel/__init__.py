"""Diversity-driven selection of an initial annotation set under a budget.

Pipeline: load per-scene view features, summarize each scene by k-means
cluster centers, score scene pairs by combined intra-/inter-scene
diversity, optionally sparsify frame sequences and restrict to the
heaviest edges, then pick the budget-feasible subset maximizing total
in-selection edge weight.
"""

__version__ = "0.1.0"

from .diversity import (
    ClusterProfile,
    DiversityGraph,
    KMeansConfig,
    build_graph,
    dump_graph,
    graph_from_json,
    graph_to_json,
    inter_diversity,
    intra_diversity,
    kmeans,
    load_graph,
)
from .errors import PackCorruptionError, PackFormatError, SeedselError, ValidationError
from .packs import (
    FeaturePack,
    SceneMeanFeature,
    ViewFeatureSet,
    load_manifest,
    load_pack,
    make_pack,
    normalize_views,
    read_features,
    scene_means,
    write_pack,
)
from .reduce import (
    FramePool,
    SparsifyConfig,
    cosine_similarity,
    restrict_pack,
    sparsify_report,
    sparsify_sequences,
    top_l_pool,
)
from .select import (
    SelectionProblem,
    SelectionResult,
    SolverStats,
    brute_force_select,
    objective_of,
    select_greedy_top_pairs,
    select_kmcentroid,
    select_kmfurthest,
    select_random,
    solve,
    total_cost_of,
    verify_linearization,
)

__all__ = [
    "ClusterProfile",
    "DiversityGraph",
    "FeaturePack",
    "FramePool",
    "KMeansConfig",
    "PackCorruptionError",
    "PackFormatError",
    "SceneMeanFeature",
    "SeedselError",
    "SelectionProblem",
    "SelectionResult",
    "SolverStats",
    "SparsifyConfig",
    "ValidationError",
    "ViewFeatureSet",
    "brute_force_select",
    "build_graph",
    "cosine_similarity",
    "dump_graph",
    "graph_from_json",
    "graph_to_json",
    "inter_diversity",
    "intra_diversity",
    "kmeans",
    "load_graph",
    "load_manifest",
    "load_pack",
    "make_pack",
    "normalize_views",
    "objective_of",
    "read_features",
    "restrict_pack",
    "scene_means",
    "select_greedy_top_pairs",
    "select_kmcentroid",
    "select_kmfurthest",
    "select_random",
    "solve",
    "sparsify_report",
    "sparsify_sequences",
    "top_l_pool",
    "total_cost_of",
    "verify_linearization",
    "write_pack",
]
