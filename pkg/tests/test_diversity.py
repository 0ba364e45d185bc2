import itertools

import numpy as np
import pytest

from seedsel.diversity import (
    ClusterProfile,
    KMeansConfig,
    assign,
    build_graph,
    graph_from_json,
    graph_to_json,
    inter_diversity,
    intra_diversity,
    kmeans,
)
from seedsel.errors import ValidationError
from seedsel.packs import ViewFeatureSet, make_pack

from conftest import unit_rows


# -- independent double-loop references -------------------------------------


def intra_reference(centers):
    k = len(centers)
    if k < 2:
        return 0.0
    total = 0.0
    for a in range(k):
        for b in range(a + 1, k):
            total += 1.0 - float(np.dot(centers[a], centers[b]))
    return total * 2.0 / (k * (k - 1))


def inter_reference(ca, cb):
    total = 0.0
    for a in range(len(ca)):
        for b in range(len(cb)):
            total += 1.0 - float(np.dot(ca[a], cb[b]))
    return total / (len(ca) * len(cb))


def profile(centers, scene_id="p", cost=1):
    c = np.asarray(centers, dtype=np.float64)
    return ClusterProfile(scene_id, c, intra_diversity(c), cost, c.shape[0])


# -- kmeans ------------------------------------------------------------------


def _cap_points(rng, center, n, spread=0.05):
    pts = np.asarray(center, dtype=float) + spread * rng.standard_normal((n, 3))
    return pts / np.linalg.norm(pts, axis=1, keepdims=True)


def test_kmeans_n_equals_k_returns_the_points(rng):
    pts = unit_rows(rng, 5, 4)
    centers = kmeans(pts, KMeansConfig(k=5, rng_seed=3))
    assert centers.shape == (5, 4)
    got = {tuple(np.round(c, 9)) for c in centers}
    want = {tuple(np.round(p, 9)) for p in pts}
    assert got == want


def test_kmeans_identical_rows_collapse_to_one_center():
    # float32-representable row, as loaded from a pack
    row = np.array([0.6, 0.0, 0.8], dtype=np.float32).astype(np.float64)
    pts = np.tile(row, (7, 1))
    centers = kmeans(pts, KMeansConfig(k=3, rng_seed=0))
    assert centers.shape == (1, 3)
    assert np.array_equal(centers[0], row)


def test_kmeans_recovers_separated_caps(rng):
    pts = np.vstack(
        [
            _cap_points(rng, [1, 0, 0], 14),
            _cap_points(rng, [0, 1, 0], 13),
            _cap_points(rng, [0, 0, 1], 13),
        ]
    )
    truth = np.array([0] * 14 + [1] * 13 + [2] * 13)
    centers = kmeans(pts, KMeansConfig(k=3, rng_seed=11))
    labels = assign(pts, centers)
    for cap in range(3):
        members = labels[truth == cap]
        assert len(set(members.tolist())) == 1
    assert len(set(labels.tolist())) == 3


def test_kmeans_objective_matches_exhaustive_optimum():
    # 8 points in 3 tight caps: enumerate all 3^8 assignments for the true
    # optimum of the k-means objective and compare.
    rng = np.random.default_rng(7)
    pts = np.vstack(
        [
            _cap_points(rng, [1, 0, 0], 3),
            _cap_points(rng, [0, 1, 0], 3),
            _cap_points(rng, [0, 0, 1], 2),
        ]
    )
    best = np.inf
    for assignment in itertools.product(range(3), repeat=8):
        obj = 0.0
        for k in set(assignment):
            members = pts[[i for i, a in enumerate(assignment) if a == k]]
            obj += float(((members - members.mean(axis=0)) ** 2).sum())
        best = min(best, obj)
    centers = kmeans(pts, KMeansConfig(k=3, rng_seed=5))
    d2 = ((pts[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2).min(axis=1)
    assert float(d2.sum()) == pytest.approx(best, rel=1e-9)
    assert best == pytest.approx(0.012360150872987533, rel=1e-9)


def test_kmeans_bit_deterministic(rng):
    pts = unit_rows(rng, 40, 6)
    cfg = KMeansConfig(k=5, rng_seed=42)
    a = kmeans(pts, cfg)
    b = kmeans(pts, cfg)
    assert a.tobytes() == b.tobytes()


def test_kmeans_seed_changes_init(rng):
    pts = unit_rows(rng, 30, 5)
    a = kmeans(pts, KMeansConfig(k=4, rng_seed=0, max_iterations=1))
    b = kmeans(pts, KMeansConfig(k=4, rng_seed=1, max_iterations=1))
    assert a.tobytes() != b.tobytes()


# -- intra diversity ---------------------------------------------------------


def test_intra_identical_centers_is_zero():
    assert intra_diversity(np.array([[1.0, 0.0], [1.0, 0.0]])) == 0.0


def test_intra_orthogonal_pair_is_one():
    assert intra_diversity(np.array([[1.0, 0.0], [0.0, 1.0]])) == 1.0


def test_intra_three_planar_centers_exact():
    centers = np.array([[1.0, 0.0], [0.0, 1.0], [-1.0, 0.0]])
    assert intra_diversity(centers) == 4.0 / 3.0
    assert intra_reference(centers) == pytest.approx(4.0 / 3.0, rel=1e-12)


def test_intra_single_center_is_zero(rng):
    assert intra_diversity(unit_rows(rng, 1, 4)) == 0.0


def test_intra_matches_reference_on_random_profiles(rng):
    for _ in range(200):
        centers = unit_rows(rng, int(rng.integers(2, 8)), int(rng.integers(2, 10)))
        fast = intra_diversity(centers)
        ref = intra_reference(centers)
        assert fast == pytest.approx(ref, rel=1e-9, abs=1e-12)
        assert 0.0 <= fast <= 2.0


def test_intra_invariant_to_row_order_when_centers_are_points(rng):
    # K_eff = N makes centers the points themselves, so any view permutation
    # must leave the measure unchanged.
    pts = unit_rows(rng, 6, 5)
    cfg = KMeansConfig(k=6, rng_seed=0)
    base = intra_diversity(kmeans(pts, cfg))
    for seed in range(5):
        perm = np.random.default_rng(seed).permutation(6)
        shuffled = intra_diversity(kmeans(pts[perm], cfg))
        assert shuffled == pytest.approx(base, rel=1e-9)


# -- inter diversity ---------------------------------------------------------


def test_inter_identical_single_centers_is_zero():
    a = profile([[1.0, 0.0]])
    assert inter_diversity(a, a) == 0.0


def test_inter_orthogonal_single_centers_is_one():
    assert inter_diversity(profile([[1.0, 0.0]]), profile([[0.0, 1.0]])) == 1.0


def test_inter_mixed_profile_exact():
    a = profile([[1.0, 0.0], [0.0, 1.0]])
    b = profile([[-1.0, 0.0]])
    assert inter_diversity(a, b) == 1.5
    assert inter_diversity(b, a) == 1.5


def test_inter_dimension_mismatch(rng):
    a = profile(unit_rows(rng, 2, 3))
    b = profile(unit_rows(rng, 2, 4))
    with pytest.raises(ValidationError, match="dimension"):
        inter_diversity(a, b)


def test_inter_matches_reference_on_random_profiles(rng):
    for _ in range(200):
        dim = int(rng.integers(2, 10))
        a = profile(unit_rows(rng, int(rng.integers(1, 7)), dim))
        b = profile(unit_rows(rng, int(rng.integers(1, 7)), dim))
        fast = inter_diversity(a, b)
        ref = inter_reference(a.centers, b.centers)
        assert fast == pytest.approx(ref, rel=1e-9, abs=1e-12)
        assert fast == inter_diversity(b, a)
        assert 0.0 <= fast <= 2.0


# -- graph building ----------------------------------------------------------


def test_two_single_view_scenes_have_zero_edge(rng):
    scenes = [
        ViewFeatureSet("a", 3, unit_rows(rng, 1, 4)),
        ViewFeatureSet("b", 4, unit_rows(rng, 1, 4)),
    ]
    graph = build_graph(make_pack(scenes, dimension=4), KMeansConfig(k=3))
    assert graph.nodes[0].intra == 0.0
    assert graph.nodes[1].intra == 0.0
    assert graph.weight[0, 1] == 0.0


def test_graph_weights_match_hand_formula(rng):
    # Few distinct views with k >= N make the centers exactly the views, so
    # d_i and d_ij can be recomputed by direct loops.
    scenes = []
    for sid, n in (("a", 3), ("b", 2), ("c", 4)):
        scenes.append(ViewFeatureSet(sid, 10, unit_rows(rng, n, 5)))
    pack = make_pack(scenes, dimension=5)
    # the pack stores float32 views; the reference must see the same data
    views = {s.scene_id: s.views.astype(np.float64) for s in pack.scenes}
    graph = build_graph(pack, KMeansConfig(k=8, rng_seed=1))
    d = {}
    for sid in views:
        d[sid] = intra_reference(views[sid].astype(np.float64))
    for (i, j), e in graph.edge_items():
        a = graph.nodes[i].scene_id
        b = graph.nodes[j].scene_id
        d_ij = inter_reference(views[a].astype(np.float64), views[b].astype(np.float64))
        assert e == pytest.approx(d_ij * d[a] * d[b], rel=1e-9, abs=1e-12)
        assert graph.inter[i, j] == pytest.approx(d_ij, rel=1e-9, abs=1e-12)


def test_graph_edge_count_and_ranges(rng):
    from conftest import random_pack

    pack = random_pack(rng, n_scenes=7, dim=6)
    graph = build_graph(pack, KMeansConfig(k=3, rng_seed=0))
    assert graph.edge_count() == 7 * 6 // 2
    assert len(list(graph.edge_items())) == 21
    for node in graph.nodes:
        assert 0.0 <= node.intra <= 2.0
        assert node.k_eff >= 1
    assert np.all(graph.inter >= 0.0) and np.all(graph.inter <= 2.0)
    assert np.all(graph.weight >= 0.0) and np.all(graph.weight <= 8.0)
    assert np.array_equal(graph.weight, graph.weight.T)


def test_graph_edge_identity(rng):
    from conftest import random_pack

    pack = random_pack(rng, n_scenes=6, dim=5)
    graph = build_graph(pack, KMeansConfig(k=4, rng_seed=2))
    for (i, j), e in graph.edge_items():
        want = graph.inter[i, j] * graph.nodes[i].intra * graph.nodes[j].intra
        assert e == pytest.approx(want, rel=1e-9, abs=1e-15)


def test_graph_independent_of_parallelism(rng):
    from conftest import random_pack

    pack = random_pack(rng, n_scenes=12, dim=6)
    cfg = KMeansConfig(k=4, rng_seed=7)
    serial = build_graph(pack, cfg, threads=1)
    parallel = build_graph(pack, cfg, threads=4)
    assert serial.weight.tobytes() == parallel.weight.tobytes()
    assert serial.inter.tobytes() == parallel.inter.tobytes()


def test_graph_json_round_trip(rng):
    from conftest import random_pack

    pack = random_pack(rng, n_scenes=5, dim=4)
    graph = build_graph(pack, KMeansConfig(k=3, rng_seed=0))
    clone = graph_from_json(graph_to_json(graph))
    assert clone.scene_ids() == graph.scene_ids()
    assert np.array_equal(clone.weight, graph.weight)
    assert np.array_equal(clone.inter, graph.inter)
    assert [p.cost for p in clone.nodes] == [p.cost for p in graph.nodes]


def test_kmeans_config_validation():
    with pytest.raises(ValidationError):
        KMeansConfig(k=0)
    with pytest.raises(ValidationError):
        KMeansConfig(k=2, max_iterations=0)
