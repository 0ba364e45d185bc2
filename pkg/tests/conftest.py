import numpy as np
import pytest

from seedsel.diversity import ClusterProfile, DiversityGraph
from seedsel.packs import ViewFeatureSet, make_pack


def unit_rows(rng, n, d):
    rows = rng.standard_normal((n, d))
    return rows / np.linalg.norm(rows, axis=1, keepdims=True)


def random_pack(rng, n_scenes=10, dim=8, max_views=6, with_sequences=False):
    scenes = []
    for i in range(n_scenes):
        n_views = int(rng.integers(1, max_views + 1))
        seq = f"s{i % 3}" if with_sequences else None
        scenes.append(
            ViewFeatureSet(
                scene_id=f"scene-{i:03d}",
                cost=int(rng.integers(1, 100)),
                views=unit_rows(rng, n_views, dim),
                sequence_id=seq,
            )
        )
    return make_pack(scenes, dimension=dim)


def random_graph(rng, m, max_cost=100):
    """Random diversity graph with product-structured weights e_ij = d_ij * d_i * d_j."""
    d = rng.uniform(0.0, 2.0, size=m)
    inter = np.zeros((m, m))
    iu, ju = np.triu_indices(m, k=1)
    vals = rng.uniform(0.0, 2.0, size=iu.size)
    inter[iu, ju] = vals
    inter[ju, iu] = vals
    weight = inter * np.outer(d, d)
    np.fill_diagonal(weight, 0.0)
    nodes = [
        ClusterProfile(
            scene_id=f"n{i:02d}",
            centers=None,
            intra=float(d[i]),
            cost=int(rng.integers(1, max_cost + 1)),
            k_eff=2,
        )
        for i in range(m)
    ]
    return DiversityGraph(nodes=nodes, inter=inter, weight=weight)


def graph_from_weights(ids, costs, weights):
    """Graph from an explicit {(i, j): w} map on scene ids."""
    index = {sid: k for k, sid in enumerate(ids)}
    m = len(ids)
    weight = np.zeros((m, m))
    for (a, b), w in weights.items():
        weight[index[a], index[b]] = w
        weight[index[b], index[a]] = w
    nodes = [
        ClusterProfile(scene_id=sid, centers=None, intra=1.0, cost=costs[sid], k_eff=2)
        for sid in ids
    ]
    return DiversityGraph(nodes=nodes, inter=weight.copy(), weight=weight)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
