"""Budgeted maximum-diversity subset selection over a diversity graph.

The objective is the sum of edge weights inside the chosen subset subject
to a total-cost budget. ``solve`` runs a depth-first branch-and-bound that
is exact on small instances and anytime (node-budget limited, with a
certified upper bound and gap) on large ones. ``brute_force_select`` is
the independent enumeration oracle. The clustering-based and greedy
seeding baselines live here too.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .diversity import DiversityGraph, KMeansConfig, _squared_distances, assign, kmeans
from .errors import ValidationError
from .packs import SceneMeanFeature
from .reduce import ranked_edges

GAP_EPSILON = 1e-12

# Fixed translation from wall-clock limits to node-expansion budgets so a
# given time limit maps to the same search on every machine.
NODES_PER_SECOND = 2000

_BRUTE_FORCE_MAX = 25


@dataclass(frozen=True)
class SelectionProblem:
    graph: DiversityGraph
    budget: int
    mode: str = "exact"  # "exact" | "anytime"
    time_limit_s: float | None = None
    node_budget: int | None = None
    gap_tolerance: float = 0.0

    def __post_init__(self):
        if self.budget < 0:
            raise ValidationError("budget must be >= 0")
        if self.mode not in ("exact", "anytime"):
            raise ValidationError(f"unknown mode {self.mode!r}")


@dataclass(frozen=True)
class SolverStats:
    nodes: int
    prunes: int
    time_ms: float


@dataclass(frozen=True)
class SelectionResult:
    selected: tuple[str, ...]  # scene ids, sorted
    objective: float
    total_cost: int
    upper_bound: float
    gap: float
    proof_status: str  # "optimal" | "feasible"
    stats: SolverStats

    def to_json(self) -> dict:
        return {
            "selected": list(self.selected),
            "objective": self.objective,
            "total_cost": self.total_cost,
            "upper_bound": self.upper_bound,
            "gap": self.gap,
            "proof_status": self.proof_status,
            "solver_stats": {
                "nodes": self.stats.nodes,
                "prunes": self.stats.prunes,
                "time_ms": self.stats.time_ms,
            },
        }


def objective_of(graph: DiversityGraph, selected_ids) -> float:
    """Sum of edge weights inside the selection, accumulated in a fixed
    (ascending index-pair) order so independent solvers agree bitwise."""
    idx = sorted(graph.index_of(s) for s in selected_ids)
    total = 0.0
    for a in range(len(idx)):
        row = graph.weight[idx[a]]
        for b in range(a + 1, len(idx)):
            total += float(row[idx[b]])
    return total


def total_cost_of(graph: DiversityGraph, selected_ids) -> int:
    return sum(graph.nodes[graph.index_of(s)].cost for s in selected_ids)


def verify_linearization(graph: DiversityGraph, result: SelectionResult) -> None:
    """Check the pair-variable identity on a solver output.

    Reconstructs y from the selection (y_ij = 1 iff both endpoints chosen),
    verifies y_ij = min(x_i, x_j) for every pair, and that the objective
    implied by y matches the stored objective within 1e-9 relative.
    """
    x = np.zeros(len(graph), dtype=np.int8)
    for sid in result.selected:
        x[graph.index_of(sid)] = 1
    y = np.outer(x, x)
    expected = np.minimum(x[:, None], x[None, :])
    if not np.array_equal(y, expected):
        raise ValidationError("pair variables violate y_ij = min(x_i, x_j)")
    iu, ju = np.triu_indices(len(graph), k=1)
    implied = float((graph.weight[iu, ju] * y[iu, ju]).sum())
    tol = 1e-9 * max(1.0, abs(result.objective))
    if abs(implied - result.objective) > tol:
        raise ValidationError(
            f"objective {result.objective} disagrees with pair variables ({implied})"
        )


def _finish(
    graph: DiversityGraph,
    chosen_ids,
    upper_bound: float,
    proof_status: str,
    nodes: int,
    prunes: int,
    t0: float,
) -> SelectionResult:
    obj = objective_of(graph, chosen_ids)
    if proof_status == "optimal":
        upper_bound = obj
    upper_bound = max(upper_bound, obj)
    gap = (upper_bound - obj) / max(obj, GAP_EPSILON)
    result = SelectionResult(
        selected=tuple(sorted(chosen_ids)),
        objective=obj,
        total_cost=total_cost_of(graph, chosen_ids),
        upper_bound=upper_bound,
        gap=gap,
        proof_status=proof_status,
        stats=SolverStats(
            nodes=nodes, prunes=prunes, time_ms=(time.perf_counter() - t0) * 1000.0
        ),
    )
    verify_linearization(graph, result)
    return result


# --------------------------------------------------------------------------
# Brute-force oracle


def brute_force_select(problem: SelectionProblem) -> SelectionResult:
    """Enumerate all 2^M subsets; provably optimal for M <= 25.

    Ties break toward smaller total cost, then the lexicographically
    smallest sorted id tuple.
    """
    t0 = time.perf_counter()
    graph = problem.graph
    m = len(graph)
    if m > _BRUTE_FORCE_MAX:
        raise ValidationError(
            f"brute force refuses {m} scenes (limit {_BRUTE_FORCE_MAX}: 2^M blowup)"
        )
    ids = graph.scene_ids()
    if m == 0:
        return _finish(graph, (), 0.0, "optimal", 0, 0, t0)
    costs = np.array([p.cost for p in graph.nodes], dtype=np.int64)
    w = graph.weight
    budget = problem.budget
    total = 1 << m
    chunk = 1 << 20
    bit_shifts = np.arange(m, dtype=np.uint64)

    def block(start: int, stop: int):
        masks = np.arange(start, stop, dtype=np.uint64)
        memb = ((masks[:, None] >> bit_shifts) & 1).astype(np.float64)
        cost = memb @ costs.astype(np.float64)
        obj = ((memb @ w) * memb).sum(axis=1) / 2.0
        obj[cost > budget] = -np.inf
        return masks, obj

    best_obj = -np.inf
    for start in range(0, total, chunk):
        _, obj = block(start, min(start + chunk, total))
        best_obj = max(best_obj, float(obj.max()))

    if best_obj <= 0.0:
        # Weights are nonnegative, so the empty set ties at 0 and wins every
        # tie-break (cost 0, lexicographically smallest).
        return _finish(graph, (), 0.0, "optimal", total, 0, t0)

    cushion = 1e-9 * max(1.0, best_obj)
    best_key = None
    best_ids: tuple[str, ...] = ()
    for start in range(0, total, chunk):
        masks, obj = block(start, min(start + chunk, total))
        for mask in masks[obj >= best_obj - cushion]:
            mask = int(mask)
            sel = tuple(sorted(ids[i] for i in range(m) if mask >> i & 1))
            key = (-objective_of(graph, sel), total_cost_of(graph, sel), sel)
            if best_key is None or key < best_key:
                best_key = key
                best_ids = sel
    return _finish(graph, best_ids, -best_key[0], "optimal", total, 0, t0)


# --------------------------------------------------------------------------
# Branch-and-bound solver


def _fractional_knapsack(values: np.ndarray, costs: np.ndarray, capacity: int) -> float:
    """Max value of a fractional fill; zero-cost items are taken outright."""
    free = costs == 0
    gain = float(values[free].sum())
    v = values[~free]
    c = costs[~free]
    if capacity <= 0 or v.size == 0:
        return gain
    order = np.argsort(-(v / c), kind="stable")
    v = v[order]
    c = c[order]
    cum = np.cumsum(c)
    nfull = int(np.searchsorted(cum, capacity, side="right"))
    gain += float(v[:nfull].sum())
    if nfull < v.size:
        spent = int(cum[nfull - 1]) if nfull else 0
        gain += float(v[nfull]) * (capacity - spent) / float(c[nfull])
    return gain


def _pair_count_bound(w: np.ndarray, costs: np.ndarray, budget: int) -> float:
    """Upper bound from counting: at most q scenes fit the budget, so at
    most q(q-1)/2 pairs can score; sum that many heaviest edge weights."""
    m = len(costs)
    if m < 2:
        return 0.0
    weights = np.sort(w[np.triu_indices(m, k=1)])[::-1]
    q = float((costs == 0).sum())
    pay = np.sort(costs[costs > 0])
    cum = np.cumsum(pay)
    nfull = int(np.searchsorted(cum, budget, side="right"))
    q += nfull
    if nfull < pay.size:
        spent = int(cum[nfull - 1]) if nfull else 0
        q += (budget - spent) / float(pay[nfull])
    cap = q * (q - 1) / 2.0
    if cap <= 0.0:
        return 0.0
    whole = min(int(cap), weights.size)
    bound = float(weights[:whole].sum())
    if whole < weights.size:
        bound += (cap - whole) * float(weights[whole])
    return bound


def solve(problem: SelectionProblem) -> SelectionResult:
    """Maximize in-selection edge weight under the budget.

    Exact mode runs the branch-and-bound to completion (proof of
    optimality). Anytime mode stops at a node-expansion budget (a wall
    clock limit is first translated with :data:`NODES_PER_SECOND`) or when
    the certified gap reaches ``gap_tolerance``, returning the incumbent
    with a valid upper bound. Deterministic for fixed inputs and mode.
    """
    t0 = time.perf_counter()
    graph = problem.graph
    m = len(graph)
    node_budget = None
    if problem.mode == "anytime":
        if problem.node_budget is not None:
            node_budget = problem.node_budget
        elif problem.time_limit_s is not None:
            if problem.time_limit_s <= 0:
                raise ValidationError("anytime mode needs a positive time limit")
            node_budget = max(1, int(problem.time_limit_s * NODES_PER_SECOND))
        else:
            raise ValidationError("anytime mode needs a time limit or node budget")
        if node_budget <= 0:
            raise ValidationError("node budget must be positive")
    if m == 0:
        return _finish(graph, (), 0.0, "optimal", 0, 0, t0)

    budget = problem.budget
    ids = graph.scene_ids()
    costs = np.array([p.cost for p in graph.nodes], dtype=np.int64)
    w = graph.weight.astype(np.float64, copy=True)

    # Branch order: descending selection "density", ties by node index.
    intra = np.array([p.intra for p in graph.nodes])
    density = intra * w.sum(axis=1) / np.where(costs > 0, costs, 1)
    density[costs == 0] = np.inf
    order = np.lexsort((np.arange(m), -density))
    wp = np.ascontiguousarray(w[np.ix_(order, order)])
    cp = costs[order]
    idp = [ids[i] for i in order]
    # suffix[i, t] = sum of wp[i, s] over s >= t (undecided mass at depth t)
    suffix = np.zeros((m, m + 1))
    suffix[:, :m] = np.cumsum(wp[:, ::-1], axis=1)[:, ::-1]

    inc_ids = select_greedy_top_pairs(graph, budget)
    inc_obj = objective_of(graph, inc_ids)

    root_pair_bound = (
        _pair_count_bound(w, costs, budget) if problem.mode == "anytime" else np.inf
    )

    def knap_gain(depth: int, row_sel: np.ndarray, remaining: int) -> float:
        # Admissible: each undecided scene carries its edges into the chosen
        # set plus half of every still-open pair it could join.
        u = row_sel[depth:] + 0.5 * suffix[depth:, depth]
        return _fractional_knapsack(u, cp[depth:], remaining)

    # Stack entries: (depth, cost, incremental objective, row_sel, chosen, parent bound)
    stack = [(0, 0, 0.0, np.zeros(m), (), np.inf)]
    nodes = 0
    prunes = 0
    stopped = False

    def current_upper() -> float:
        open_bounds = max((entry[5] for entry in stack), default=inc_obj)
        return max(inc_obj, min(root_pair_bound, open_bounds))

    while stack:
        if node_budget is not None and nodes >= node_budget:
            stopped = True
            break
        if (
            problem.mode == "anytime"
            and problem.gap_tolerance > 0
            and nodes % 512 == 0
        ):
            ub_now = current_upper()
            if (ub_now - inc_obj) / max(inc_obj, GAP_EPSILON) <= problem.gap_tolerance:
                stopped = True
                break
        depth, cost, obj, row_sel, chosen, _parent = stack.pop()
        nodes += 1
        if obj > inc_obj - 1e-9 * (1.0 + abs(inc_obj)):
            cand_ids = tuple(idp[t] for t in chosen)
            cand_obj = objective_of(graph, cand_ids)
            if cand_obj > inc_obj:
                inc_obj = cand_obj
                inc_ids = cand_ids
        gain = knap_gain(depth, row_sel, budget - cost)
        if gain <= 0.0:
            prunes += 1
            continue
        bound = obj + gain
        if bound + 1e-12 * (1.0 + abs(bound)) <= inc_obj:
            prunes += 1
            continue
        if depth == m:
            continue
        # Exclude child first so the include branch is explored first.
        stack.append((depth + 1, cost, obj, row_sel, chosen, bound))
        step_cost = int(cp[depth])
        if cost + step_cost <= budget:
            stack.append(
                (
                    depth + 1,
                    cost + step_cost,
                    obj + float(row_sel[depth]),
                    row_sel + wp[:, depth],
                    chosen + (depth,),
                    bound,
                )
            )

    if stopped:
        ub = current_upper()
        status = "feasible"
    else:
        ub = inc_obj
        status = "optimal"
    inc_ids = _complete_to_budget(graph, inc_ids, budget)
    return _finish(graph, inc_ids, ub, status, nodes, prunes, t0)


def _complete_to_budget(graph: DiversityGraph, chosen_ids, budget: int) -> tuple[str, ...]:
    """Fill spare budget with affordable scenes (lexicographic order).

    Weights are nonnegative, so at proven optimality every addition is
    exactly objective-neutral; the returned selection is maximal under the
    budget. In anytime mode an addition can only improve the incumbent.
    """
    chosen = set(chosen_ids)
    spent = total_cost_of(graph, chosen_ids)
    for node in sorted(graph.nodes, key=lambda p: p.scene_id):
        if node.scene_id not in chosen and spent + node.cost <= budget:
            chosen.add(node.scene_id)
            spent += node.cost
    return tuple(sorted(chosen))


# --------------------------------------------------------------------------
# Seeding baselines


def select_random(scenes, budget: int, rng_seed: int) -> tuple[str, ...]:
    """Shuffle scenes with the seed, add in order while the budget allows.

    ``scenes`` is a list of ``(scene_id, cost)`` pairs.
    """
    if budget < 0:
        raise ValidationError("budget must be >= 0")
    rng = np.random.default_rng(rng_seed)
    total = 0
    chosen = []
    for idx in rng.permutation(len(scenes)):
        sid, cost = scenes[int(idx)]
        if total + cost <= budget:
            chosen.append(sid)
            total += cost
    return tuple(sorted(chosen))


def _cluster_rankings(
    feats: np.ndarray, ids: list[str], k: int, rng_seed: int
) -> tuple[np.ndarray, list[list[int]]]:
    """k-means on scene means; per cluster, member indices sorted by
    distance to the centroid (ties by scene id)."""
    centers = kmeans(feats, KMeansConfig(k=k, rng_seed=rng_seed))
    labels = assign(feats, centers)
    d2 = _squared_distances(feats, centers)[np.arange(len(ids)), labels]
    rankings: list[list[int]] = []
    for j in range(centers.shape[0]):
        members = [int(i) for i in np.flatnonzero(labels == j)]
        members.sort(key=lambda i: (d2[i], ids[i]))
        rankings.append(members)
    return centers, rankings


def _trim_to_budget(chosen: set[int], costs, ids, budget: int) -> tuple[str, ...]:
    total = sum(costs[i] for i in chosen)
    while total > budget:
        victim = max(chosen, key=lambda i: (costs[i], ids[i]))
        chosen.remove(victim)
        total -= costs[victim]
    return tuple(sorted(ids[i] for i in chosen))


def select_kmcentroid(
    means: list[SceneMeanFeature], costs, budget: int, k: int, rng_seed: int
) -> tuple[str, ...]:
    """Cluster scene means; per round add each cluster's next-nearest scene
    until the budget is reached, then drop the costliest until feasible."""
    ids = [mn.scene_id for mn in means]
    if not ids:
        return ()
    feats = np.vstack([mn.mean for mn in means])
    _, rankings = _cluster_rankings(feats, ids, k, rng_seed)
    chosen: set[int] = set()
    total = 0
    rank = 0
    while total < budget:
        added = False
        for members in rankings:
            if rank < len(members):
                i = members[rank]
                chosen.add(i)
                total += costs[i]
                added = True
        if not added:
            break
        rank += 1
    return _trim_to_budget(chosen, costs, ids, budget)


def select_kmfurthest(
    means: list[SceneMeanFeature], costs, budget: int, k: int, rng_seed: int
) -> tuple[str, ...]:
    """Start from each cluster's nearest scene, then keep adding the scene
    farthest (max-min distance) from all centroids; trim as kmcentroid."""
    ids = [mn.scene_id for mn in means]
    if not ids:
        return ()
    feats = np.vstack([mn.mean for mn in means])
    centers, rankings = _cluster_rankings(feats, ids, k, rng_seed)
    chosen: set[int] = set()
    total = 0
    if budget > 0:
        for members in rankings:
            if members:
                i = members[0]
                chosen.add(i)
                total += costs[i]
    min_d2 = _squared_distances(feats, centers).min(axis=1)
    while total < budget:
        rest = [i for i in range(len(ids)) if i not in chosen]
        if not rest:
            break
        far = max(rest, key=lambda i: (min_d2[i], ids[i]))
        chosen.add(far)
        total += costs[far]
    return _trim_to_budget(chosen, costs, ids, budget)


def select_greedy_top_pairs(graph: DiversityGraph, budget: int) -> tuple[str, ...]:
    """Walk edges by descending weight, taking affordable unseen endpoints.

    Zero-weight edges never add scenes. Endpoints of one edge are tried in
    lexicographic scene-id order.
    """
    if budget < 0:
        raise ValidationError("budget must be >= 0")
    ids = graph.scene_ids()
    chosen: set[int] = set()
    total = 0
    for i, j in ranked_edges(graph):
        if graph.weight[i, j] <= 0.0:
            break
        for t in sorted((i, j), key=lambda n: ids[n]):
            if t not in chosen and total + graph.nodes[t].cost <= budget:
                chosen.add(t)
                total += graph.nodes[t].cost
    return tuple(sorted(ids[t] for t in chosen))
